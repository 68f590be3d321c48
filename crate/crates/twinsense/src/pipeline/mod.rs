//! Operator-facing pipeline: config loading, run manifests, and one
//! library function per command-line stage.

use std::path::Path;

use crate::sim::SimConfig;
use crate::{Error, Result};

mod inspect;
mod manifest;
mod runs;

pub use inspect::run_inspect;
pub use manifest::{
    file_sha256, manifest_path_for, FileRef, RunManifest, RUN_MANIFEST_FORMAT,
};
pub use runs::{
    load_models, run_allan, run_calibrate, run_score, run_sensitivity, run_simulate, run_train,
    AllanArgs, CalibrateArgs, ScoreArgs, SensitivityArgs, SensitivityReport, SignalKind,
    SimulateArgs, TrainArgs, ENCODER_FILE, SENSITIVITY_REPORT_FORMAT, TRAIN_MANIFEST_FILE,
};

/// Reads a simulation config from TOML; missing keys fall back to the
/// full-scale defaults, so a config file only needs the knobs it changes.
pub fn load_sim_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: SimConfig = toml::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    config
        .validate()
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(config)
}

/// Writes a config as TOML with every field spelled out.
pub fn save_sim_config(path: &Path, config: &SimConfig) -> Result<()> {
    config.validate()?;
    let text = toml::to_string_pretty(config)
        .map_err(|e| Error::Config(format!("config not representable as TOML: {e}")))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Applies the `TWINSENSE_THREADS` cap to the global worker pool. Call
/// once at process start, before any parallel work.
pub fn init_thread_cap() -> Result<()> {
    let Ok(raw) = std::env::var("TWINSENSE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        Error::Config(format!(
            "TWINSENSE_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    if n == 0 {
        return Err(Error::Config(
            "TWINSENSE_THREADS must be a positive integer, got 0".into(),
        ));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("could not configure the thread pool: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_fills_defaults_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.toml");
        std::fs::write(&path, "width = 16\nheight = 16\nseed = 9\n").unwrap();
        let config = load_sim_config(&path).unwrap();
        assert_eq!(config.width, 16);
        assert_eq!(config.seed, 9);
        // Everything else mirrors the defaults.
        assert_eq!(config.cycle_time, SimConfig::default().cycle_time);

        std::fs::write(&path, "width = 0\n").unwrap();
        assert!(matches!(load_sim_config(&path), Err(Error::Config(_))));

        std::fs::write(&path, "width = \"wide\"\n").unwrap();
        assert!(matches!(load_sim_config(&path), Err(Error::Config(_))));
    }

    #[test]
    fn config_round_trips_through_toml() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.toml");
        let config = SimConfig::desk_regime();
        save_sim_config(&path, &config).unwrap();
        let back = load_sim_config(&path).unwrap();
        assert_eq!(back, config);
    }
}

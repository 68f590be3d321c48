//! The pipeline commands as library functions.
//!
//! Each `run_*` wraps one stage — simulate, train, score, calibrate,
//! sensitivity, allan — loading its input artifacts, delegating to the
//! domain modules, writing outputs, and recording a [`RunManifest`]
//! alongside them. The command-line binary is a thin argument parser over
//! these functions, so everything here is drivable from tests and examples
//! too.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anomaly::{
    calibrate_lambda, default_lambda_grid, load_encoder, save_encoder, score_dataset,
    train_encoder, Encoder, EncoderHyper, LambdaCalibration, ScoreSeries,
};
use crate::gan::{
    load_bundle, save_bundle, train_gan, GanBundle, GanHyper, DISCRIMINATOR_FILE, GENERATOR_FILE,
    MANIFEST_FILE,
};
use crate::io::{csv, svg};
use crate::metrology::{
    allan_deviation, com_momentum, default_cluster_sizes, sensitivity, AllanSeries,
    SensitivityEstimate,
};
use crate::sim::{
    generate_dataset, load_dataset, save_dataset, Dataset, ImpulseSchedule, SimConfig,
};
use crate::{Error, Result};

use super::manifest::{manifest_path_for, RunManifest};

/// Encoder checkpoint name inside a models directory.
pub const ENCODER_FILE: &str = "encoder.twck";
/// Manifest name written by `train` into the models directory.
pub const TRAIN_MANIFEST_FILE: &str = "run.manifest.json";
pub const SENSITIVITY_REPORT_FORMAT: &str = "twinsense-sensitivity";

fn file_name_string(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// Loads the bundle plus encoder laid out by [`run_train`].
pub fn load_models(dir: &Path) -> Result<(GanBundle, Encoder)> {
    let bundle = load_bundle(dir)?;
    let encoder = load_encoder(&dir.join(ENCODER_FILE))?;
    Ok((bundle, encoder))
}

fn record_model_inputs(m: &mut RunManifest, dir: &Path) -> Result<()> {
    m.record_input("generator", &dir.join(GENERATOR_FILE))?;
    m.record_input("discriminator", &dir.join(DISCRIMINATOR_FILE))?;
    m.record_input("bundle_manifest", &dir.join(MANIFEST_FILE))?;
    m.record_input("encoder", &dir.join(ENCODER_FILE))?;
    Ok(())
}

fn ensure_matching_clocks(a: &SimConfig, b: &SimConfig) -> Result<()> {
    if a.cycle_time != b.cycle_time || a.delta_t != b.delta_t {
        return Err(Error::Invalid(
            "datasets disagree on cycle_time/delta_t; their sensitivities would not be comparable"
                .into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------- simulate

pub struct SimulateArgs {
    pub config: PathBuf,
    pub out: PathBuf,
    pub shots: usize,
    pub schedule: ImpulseSchedule,
    /// Overrides the config file's seed when set.
    pub seed: Option<u64>,
}

/// Renders a synthetic dataset and writes it with a sidecar manifest.
pub fn run_simulate(args: &SimulateArgs) -> Result<RunManifest> {
    let mut config = super::load_sim_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let dataset = generate_dataset(&config, args.shots, &args.schedule)?;
    save_dataset(&args.out, &dataset)?;

    let mut m = RunManifest::new("simulate");
    m.seed("simulation", config.seed);
    m.parameter("shots", args.shots);
    m.parameter("impulse_schedule", &args.schedule);
    m.record_input("config", &args.config)?;
    m.record_output("dataset", &args.out)?;
    m.save(&manifest_path_for(&args.out))?;
    Ok(m)
}

// ------------------------------------------------------------------- train

pub struct TrainArgs {
    pub dataset: PathBuf,
    /// Models directory to create: bundle files, encoder checkpoint, and
    /// the run manifest all land here.
    pub out_dir: PathBuf,
    /// Hyperparameter profile: `desk`, `full`, or `micro`.
    pub profile: String,
    pub gan_seed: Option<u64>,
    pub encoder_seed: Option<u64>,
}

/// Trains the digital twin (generator + discriminator) and then the
/// encoder against it, both on the same force-free dataset.
pub fn run_train(args: &TrainArgs) -> Result<RunManifest> {
    let dataset = load_dataset(&args.dataset)?;
    let mut gan_hyper = GanHyper::named(&args.profile)?;
    if let Some(s) = args.gan_seed {
        gan_hyper.seed = s;
    }
    let mut enc_hyper = EncoderHyper::named(&args.profile)?;
    if let Some(s) = args.encoder_seed {
        enc_hyper.seed = s;
    }

    let bundle = train_gan(&dataset, &gan_hyper)?;
    let encoder = train_encoder(&bundle, &dataset, &enc_hyper)?;

    std::fs::create_dir_all(&args.out_dir)?;
    save_bundle(&args.out_dir, &bundle)?;
    save_encoder(&args.out_dir.join(ENCODER_FILE), &encoder)?;

    let mut m = RunManifest::new("train");
    m.seed("gan", gan_hyper.seed);
    m.seed("encoder", enc_hyper.seed);
    m.parameter("profile", &args.profile);
    m.parameter("gan_epochs", gan_hyper.epochs);
    m.parameter("encoder_epochs", enc_hyper.epochs);
    m.parameter("train_shots", bundle.manifest().train_indices.len());
    m.parameter("test_shots", bundle.manifest().test_indices.len());
    if let Some(rms) = encoder.manifest().held_out_rms_residual {
        m.parameter("encoder_held_out_rms", rms);
    }
    let warnings = &bundle.training_log().warnings;
    if !warnings.is_empty() {
        m.parameter("training_warnings", warnings.join(" | "));
    }
    m.record_input("dataset", &args.dataset)?;
    m.record_output("generator", &args.out_dir.join(GENERATOR_FILE))?;
    m.record_output("discriminator", &args.out_dir.join(DISCRIMINATOR_FILE))?;
    m.record_output("bundle_manifest", &args.out_dir.join(MANIFEST_FILE))?;
    m.record_output("encoder", &args.out_dir.join(ENCODER_FILE))?;
    m.save(&args.out_dir.join(TRAIN_MANIFEST_FILE))?;
    Ok(m)
}

// ------------------------------------------------------------------- score

pub struct ScoreArgs {
    pub dataset: PathBuf,
    pub models: PathBuf,
    pub lambda: f64,
    /// Score table destination (CSV).
    pub out: PathBuf,
    /// Optional histogram of the score distribution.
    pub svg: Option<PathBuf>,
}

/// Scores every shot of a dataset and writes the score table.
pub fn run_score(args: &ScoreArgs) -> Result<(ScoreSeries, RunManifest)> {
    let dataset = load_dataset(&args.dataset)?;
    let (bundle, encoder) = load_models(&args.models)?;
    let series = score_dataset(&dataset, &bundle, &encoder, args.lambda)?;

    let manifest_path = manifest_path_for(&args.out);
    let mut comments = BTreeMap::new();
    comments.insert("manifest".to_string(), file_name_string(&manifest_path));
    csv::write_score_csv(&args.out, &series, &comments)?;
    if let Some(svg_path) = &args.svg {
        svg::histogram(
            svg_path,
            "anomaly-score distribution",
            "A",
            &series.scores(),
            32,
        )?;
    }

    let mut m = RunManifest::new("score");
    m.parameter("lambda", args.lambda);
    m.parameter("mean", series.mean);
    m.parameter("std", series.std);
    m.parameter("skewness", series.skewness);
    m.record_input("dataset", &args.dataset)?;
    record_model_inputs(&mut m, &args.models)?;
    m.record_output("scores", &args.out)?;
    if let Some(svg_path) = &args.svg {
        m.record_output("plot", svg_path)?;
    }
    m.save(&manifest_path)?;
    Ok((series, m))
}

// --------------------------------------------------------------- calibrate

pub struct CalibrateArgs {
    /// Force-free dataset fixing `σ0(λ)`.
    pub force_free: PathBuf,
    /// Multi-level forced dataset fixing the response slope.
    pub forced: PathBuf,
    pub models: PathBuf,
    /// Curve table destination (CSV).
    pub out: PathBuf,
    pub svg: Option<PathBuf>,
    /// Grid override; defaults to the 101-point grid.
    pub grid: Option<Vec<f64>>,
}

/// Scores both calibration datasets once, sweeps λ over the grid, and
/// writes the sensitivity curve.
pub fn run_calibrate(args: &CalibrateArgs) -> Result<(LambdaCalibration, RunManifest)> {
    let free = load_dataset(&args.force_free)?;
    let forced = load_dataset(&args.forced)?;
    ensure_matching_clocks(&free.config, &forced.config)?;
    let (bundle, encoder) = load_models(&args.models)?;

    // One model pass per dataset; the λ sweep recombines stored terms.
    let free_scores = score_dataset(&free, &bundle, &encoder, 0.0)?;
    let forced_scores = score_dataset(&forced, &bundle, &encoder, 0.0)?;
    let grid = args.grid.clone().unwrap_or_else(default_lambda_grid);
    let cal = calibrate_lambda(
        &free_scores,
        &forced_scores,
        free.config.cycle_time,
        free.config.delta_t,
        &grid,
    )?;

    let manifest_path = manifest_path_for(&args.out);
    let mut comments = BTreeMap::new();
    comments.insert("manifest".into(), file_name_string(&manifest_path));
    comments.insert("lambda_op".into(), format!("{}", cal.lambda_op));
    comments.insert("sensitivity_at_op".into(), format!("{}", cal.estimate.s));
    csv::write_lambda_curve_csv(&args.out, &cal.curve, &comments)?;
    if let Some(svg_path) = &args.svg {
        let pts: Vec<(f64, f64)> = cal
            .curve
            .iter()
            .filter_map(|(l, s)| s.map(|s| (*l, s)))
            .collect();
        svg::line_plot(
            svg_path,
            "sensitivity vs lambda",
            "lambda",
            "S [N/sqrt(Hz)]",
            &[("S(lambda)", pts)],
            false,
        )?;
    }

    let mut m = RunManifest::new("calibrate");
    m.parameter("lambda_op", cal.lambda_op);
    m.parameter("sensitivity_at_op", cal.estimate.s);
    m.parameter("fit_r2_at_op", cal.estimate.fit_r2);
    m.parameter("grid_points", grid.len());
    m.record_input("force_free_dataset", &args.force_free)?;
    m.record_input("forced_dataset", &args.forced)?;
    record_model_inputs(&mut m, &args.models)?;
    m.record_output("curve", &args.out)?;
    if let Some(svg_path) = &args.svg {
        m.record_output("plot", svg_path)?;
    }
    m.save(&manifest_path)?;
    Ok((cal, m))
}

// ------------------------------------------------------------- sensitivity

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Center-of-mass momentum along x — the conventional baseline.
    Com,
    /// Anomaly score from the trained models.
    Anomaly,
}

impl SignalKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Com => "com",
            Self::Anomaly => "anomaly",
        }
    }
}

impl std::str::FromStr for SignalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "com" => Ok(Self::Com),
            "anomaly" => Ok(Self::Anomaly),
            other => Err(Error::Config(format!(
                "unknown signal {other:?} (expected com or anomaly)"
            ))),
        }
    }
}

pub struct SensitivityArgs {
    pub signal: SignalKind,
    pub force_free: PathBuf,
    pub forced: PathBuf,
    /// Required for the anomaly signal; ignored for com.
    pub models: Option<PathBuf>,
    /// Mixing weight for the anomaly signal; ignored for com.
    pub lambda: f64,
    /// Report destination (JSON).
    pub out: PathBuf,
}

/// JSON report: the full sensitivity estimate plus the provenance needed
/// to compare reports — dataset hashes, model checksums, and λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub format: String,
    pub manifest: String,
    pub signal: String,
    pub lambda: Option<f64>,
    pub force_free_dataset: String,
    pub forced_dataset: String,
    pub model_checksums: BTreeMap<String, String>,
    pub estimate: SensitivityEstimate,
}

fn com_series(dataset: &Dataset) -> Result<Vec<(f64, f64)>> {
    dataset
        .images
        .iter()
        .map(|img| Ok((img.impulse, com_momentum(img)?.0)))
        .collect()
}

fn group_by_impulse(pairs: &[(f64, f64)]) -> Vec<(f64, Vec<f64>)> {
    let mut levels: Vec<f64> = pairs.iter().map(|(i, _)| *i).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
        .into_iter()
        .map(|level| {
            let values = pairs
                .iter()
                .filter(|(i, _)| *i == level)
                .map(|(_, v)| *v)
                .collect();
            (level, values)
        })
        .collect()
}

/// One-sigma sensitivity of the chosen signal: σ0 from the force-free
/// dataset, response slope from the forced one.
pub fn run_sensitivity(args: &SensitivityArgs) -> Result<(SensitivityReport, RunManifest)> {
    let free = load_dataset(&args.force_free)?;
    let forced = load_dataset(&args.forced)?;
    ensure_matching_clocks(&free.config, &forced.config)?;
    if !free.is_force_free() {
        return Err(Error::Invalid(
            "the sigma0 dataset must be force-free".into(),
        ));
    }
    let t0 = free.config.cycle_time;
    let delta_t = free.config.delta_t;

    let mut model_checksums = BTreeMap::new();
    let (sigma0_series, groups, lambda) = match args.signal {
        SignalKind::Com => {
            let ff = com_series(&free)?;
            let fz = com_series(&forced)?;
            let sigma0: Vec<f64> = ff.into_iter().map(|(_, v)| v).collect();
            (sigma0, group_by_impulse(&fz), None)
        }
        SignalKind::Anomaly => {
            let dir = args.models.as_ref().ok_or_else(|| {
                Error::Config("the anomaly signal requires a models directory".into())
            })?;
            let (bundle, encoder) = load_models(dir)?;
            let ff = score_dataset(&free, &bundle, &encoder, args.lambda)?;
            let fz = score_dataset(&forced, &bundle, &encoder, args.lambda)?;
            model_checksums.insert(
                "generator".into(),
                bundle.manifest().generator_checksum.clone(),
            );
            model_checksums.insert(
                "discriminator".into(),
                bundle.manifest().discriminator_checksum.clone(),
            );
            model_checksums.insert(
                "encoder".into(),
                encoder.manifest().encoder_checksum.clone(),
            );
            (ff.scores(), fz.impulse_groups(), Some(args.lambda))
        }
    };
    let estimate = sensitivity(&sigma0_series, &groups, t0, delta_t)?;

    let manifest_path = manifest_path_for(&args.out);
    let mut m = RunManifest::new("sensitivity");
    m.parameter("signal", args.signal.name());
    if let Some(l) = lambda {
        m.parameter("lambda", l);
    }
    m.parameter("sensitivity", estimate.s);
    m.parameter("fit_r2", estimate.fit_r2);
    m.record_input("force_free_dataset", &args.force_free)?;
    m.record_input("forced_dataset", &args.forced)?;
    if args.signal == SignalKind::Anomaly {
        record_model_inputs(&mut m, args.models.as_ref().expect("checked above"))?;
    }

    let report = SensitivityReport {
        format: SENSITIVITY_REPORT_FORMAT.into(),
        manifest: file_name_string(&manifest_path),
        signal: args.signal.name().into(),
        lambda,
        force_free_dataset: m.inputs["force_free_dataset"].sha256.clone(),
        forced_dataset: m.inputs["forced_dataset"].sha256.clone(),
        model_checksums,
        estimate,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&args.out, text)?;
    m.record_output("report", &args.out)?;
    m.save(&manifest_path)?;
    Ok((report, m))
}

// ------------------------------------------------------------------- allan

pub struct AllanArgs {
    /// Score-table mode: stability of the `A` column of a score CSV.
    pub scores: Option<PathBuf>,
    /// Dataset mode: stability of the per-shot COM momentum along x.
    pub dataset: Option<PathBuf>,
    /// Sample spacing override, seconds; defaults to the cycle time.
    pub t0: Option<f64>,
    pub out: PathBuf,
    pub svg: Option<PathBuf>,
}

/// Overlapping Allan deviation of a per-shot signal over power-of-two
/// cluster sizes.
pub fn run_allan(args: &AllanArgs) -> Result<(AllanSeries, RunManifest)> {
    let mut m = RunManifest::new("allan");
    let (signal, t0) = match (&args.scores, &args.dataset) {
        (Some(path), None) => {
            let (series, _) = csv::read_score_csv(path)?;
            m.record_input("scores", path)?;
            m.parameter("signal", "anomaly-score");
            (series.scores(), args.t0.unwrap_or(crate::sim::CYCLE_TIME_S))
        }
        (None, Some(path)) => {
            let ds = load_dataset(path)?;
            let xs: Result<Vec<f64>> =
                ds.images.iter().map(|img| Ok(com_momentum(img)?.0)).collect();
            m.record_input("dataset", path)?;
            m.parameter("signal", "com");
            (xs?, args.t0.unwrap_or(ds.config.cycle_time))
        }
        _ => {
            return Err(Error::Config(
                "provide exactly one input: a score table or a dataset".into(),
            ))
        }
    };
    let sizes = default_cluster_sizes(signal.len());
    let series = allan_deviation(&signal, t0, &sizes)?;

    let manifest_path = manifest_path_for(&args.out);
    let mut comments = BTreeMap::new();
    comments.insert("manifest".into(), file_name_string(&manifest_path));
    csv::write_allan_csv(&args.out, &series, &comments)?;
    if let Some(svg_path) = &args.svg {
        let pts: Vec<(f64, f64)> = series
            .taus
            .iter()
            .zip(&series.deviations)
            .map(|(&t, &d)| (t, d))
            .collect();
        // Log-log wants strictly positive deviations; fall back to linear
        // axes when a cluster size averaged to exactly zero.
        let log_log = pts.iter().all(|&(_, d)| d > 0.0);
        svg::line_plot(
            svg_path,
            "overlapping Allan deviation",
            "tau [s]",
            "sigma(tau)",
            &[("allan", pts)],
            log_log,
        )?;
        m.record_output("plot", svg_path)?;
    }
    if let Some(slope) = series.loglog_slope {
        m.parameter("loglog_slope", slope);
    }
    m.parameter("t0_seconds", t0);
    m.record_output("table", &args.out)?;
    m.save(&manifest_path)?;
    Ok((series, m))
}

//! Run manifests: the provenance record every pipeline command writes next
//! to its outputs.
//!
//! A manifest names the command, its seeds and parameters, and the SHA-256
//! of every file consumed and produced, so any artifact can be traced back
//! to exactly the inputs that made it and re-verified later. Outputs embed
//! the manifest's file name (CSV comment, JSON field, or sidecar naming
//! convention for binary formats).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::io::sha256_hex;
use crate::{Error, Result};

pub const RUN_MANIFEST_FORMAT: &str = "twinsense-run";

/// A referenced file: the path as given to the command plus its digest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

/// Provenance record for one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub version: String,
    pub command: String,
    /// Unix seconds; honors `SOURCE_DATE_EPOCH` so reruns with pinned
    /// seeds can produce byte-identical manifests.
    pub created_unix: u64,
    pub seeds: BTreeMap<String, u64>,
    pub parameters: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, FileRef>,
    pub outputs: BTreeMap<String, FileRef>,
}

/// SHA-256 hex digest of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

/// The sidecar manifest path for an output file: `<name>.manifest.json`
/// appended to the full file name.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn created_now() -> u64 {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(secs) = v.trim().parse() {
            return secs;
        }
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            format: RUN_MANIFEST_FORMAT.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            created_unix: created_now(),
            seeds: BTreeMap::new(),
            parameters: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn seed(&mut self, label: &str, value: u64) -> &mut Self {
        self.seeds.insert(label.into(), value);
        self
    }

    pub fn parameter(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.into(), value.to_string());
        self
    }

    pub fn record_input(&mut self, label: &str, path: &Path) -> Result<&mut Self> {
        self.inputs.insert(
            label.into(),
            FileRef {
                path: path.display().to_string(),
                sha256: file_sha256(path)?,
            },
        );
        Ok(self)
    }

    pub fn record_output(&mut self, label: &str, path: &Path) -> Result<&mut Self> {
        self.outputs.insert(
            label.into(),
            FileRef {
                path: path.display().to_string(),
                sha256: file_sha256(path)?,
            },
        );
        Ok(self)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let manifest: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: not a run manifest: {e}", path.display())))?;
        if manifest.format != RUN_MANIFEST_FORMAT {
            return Err(Error::Format(format!(
                "{}: format {:?} is not {RUN_MANIFEST_FORMAT:?}",
                path.display(),
                manifest.format
            )));
        }
        Ok(manifest)
    }

    /// Re-hashes every referenced file; relative paths resolve against
    /// `base` (typically the manifest's own directory).
    pub fn verify(&self, base: &Path) -> Result<()> {
        for (label, fr) in self.inputs.iter().chain(self.outputs.iter()) {
            let p = PathBuf::from(&fr.path);
            let p = if p.is_relative() { base.join(p) } else { p };
            let actual = file_sha256(&p)?;
            if actual != fr.sha256 {
                return Err(Error::Format(format!(
                    "{label} ({}) does not match its recorded digest",
                    fr.path
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_and_verifies() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data.bin");
        std::fs::write(&data, b"payload").unwrap();

        let mut m = RunManifest::new("simulate");
        m.seed("sim", 7);
        m.parameter("shots", 16);
        m.record_output("dataset", &data).unwrap();
        let mpath = manifest_path_for(&data);
        assert!(mpath.to_string_lossy().ends_with("data.bin.manifest.json"));
        m.save(&mpath).unwrap();

        let back = RunManifest::load(&mpath).unwrap();
        assert_eq!(back, m);
        back.verify(dir.path()).unwrap();

        // Tampering with the referenced file must be caught.
        std::fs::write(&data, b"payload!").unwrap();
        assert!(matches!(back.verify(dir.path()), Err(Error::Format(_))));
    }

    #[test]
    fn foreign_json_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.json");
        std::fs::write(&path, "{\"format\": \"something-else\"}").unwrap();
        assert!(matches!(RunManifest::load(&path), Err(Error::Format(_))));
        std::fs::write(&path, "not json").unwrap();
        assert!(matches!(RunManifest::load(&path), Err(Error::Format(_))));
    }

    #[test]
    fn source_date_epoch_pins_the_timestamp() {
        // Other tests never assert on wall-clock values, so briefly
        // pinning the process environment here is safe.
        std::env::set_var("SOURCE_DATE_EPOCH", "1700000000");
        let m = RunManifest::new("train");
        std::env::remove_var("SOURCE_DATE_EPOCH");
        assert_eq!(m.created_unix, 1700000000);
    }
}

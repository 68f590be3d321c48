//! Shot sequences: generation, impulse schedules, and the dataset container.

use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::io::{container_bytes, f32_from_le_bytes, f32_to_le_bytes, read_container, sha256_hex};
use crate::sim::{render_with_drift, SimConfig, TofImage};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"TWDS";
const VERSION: u32 = 1;
const FORMAT_NAME: &str = "twinsense-dataset";

/// Impulse assignment across a run of shots.
#[derive(Debug, Clone, PartialEq)]
pub enum ImpulseSchedule {
    /// Every shot force-free.
    Zero,
    /// The same impulse on every shot.
    Uniform(f64),
    /// The listed impulses repeated cyclically (shot k gets `list[k % len]`);
    /// the natural shape for interleaved level sweeps.
    Cycle(Vec<f64>),
    /// One impulse per shot; length must equal the shot count.
    PerShot(Vec<f64>),
}

impl ImpulseSchedule {
    pub fn impulse_for(&self, shot: usize) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Uniform(i) => *i,
            Self::Cycle(list) => list[shot % list.len()],
            Self::PerShot(list) => list[shot],
        }
    }

    pub fn validate(&self, n_shots: usize) -> Result<()> {
        let list = match self {
            Self::Zero => return Ok(()),
            Self::Uniform(i) => std::slice::from_ref(i),
            Self::Cycle(list) | Self::PerShot(list) => {
                if list.is_empty() {
                    return Err(Error::Invalid("empty impulse list".into()));
                }
                list.as_slice()
            }
        };
        if let Self::PerShot(list) = self {
            if list.len() != n_shots {
                return Err(Error::Invalid(format!(
                    "per-shot schedule has {} entries for {n_shots} shots",
                    list.len()
                )));
            }
        }
        if let Some(bad) = list.iter().find(|i| !i.is_finite()) {
            return Err(Error::Invalid(format!("non-finite impulse {bad}")));
        }
        Ok(())
    }
}

/// Inverse of the `FromStr` forms; `PerShot` lists every value.
impl std::fmt::Display for ImpulseSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |list: &[f64]| {
            list.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            Self::Zero => write!(f, "zero"),
            Self::Uniform(i) => write!(f, "const:{i}"),
            Self::Cycle(list) => write!(f, "cycle:{}", join(list)),
            Self::PerShot(list) => write!(f, "per-shot:{}", join(list)),
        }
    }
}

/// Text forms: `zero`, `const:<N*s>`, `cycle:<a,b,c,...>`.
impl FromStr for ImpulseSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parse_list = |body: &str| -> Result<Vec<f64>> {
            body.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Invalid(format!("bad impulse value {t:?}")))
                })
                .collect()
        };
        if s == "zero" {
            Ok(Self::Zero)
        } else if let Some(body) = s.strip_prefix("const:") {
            Ok(Self::Uniform(body.trim().parse().map_err(|_| {
                Error::Invalid(format!("bad impulse value {body:?}"))
            })?))
        } else if let Some(body) = s.strip_prefix("cycle:") {
            Ok(Self::Cycle(parse_list(body)?))
        } else {
            Err(Error::Invalid(format!(
                "unknown impulse schedule {s:?}; expected zero, const:<N*s>, or cycle:<a,b,...>"
            )))
        }
    }
}

/// In-memory shot sequence with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub config: SimConfig,
    pub images: Vec<TofImage>,
}

impl Dataset {
    pub fn n_shots(&self) -> usize {
        self.images.len()
    }

    pub fn impulses(&self) -> Vec<f64> {
        self.images.iter().map(|img| img.impulse).collect()
    }

    pub fn is_force_free(&self) -> bool {
        self.images.iter().all(|img| img.is_force_free())
    }

    /// SHA-256 of the bytes [`save_dataset`] would write, so in-memory
    /// provenance matches [`dataset_checksum`] of the saved file.
    pub fn content_checksum(&self) -> Result<String> {
        Ok(sha256_hex(&file_bytes(self)?))
    }
}

/// Renders `n_shots` images in sequence.
///
/// Per-shot randomness comes from independent RNG streams of the configured
/// seed (stream k+1 for shot k); the slow drift path is drawn up front on
/// stream 0 as a 2D random walk plus a sinusoid along x. Fixed seeds give
/// bit-identical datasets.
pub fn generate_dataset(
    config: &SimConfig,
    n_shots: usize,
    schedule: &ImpulseSchedule,
) -> Result<Dataset> {
    config.validate()?;
    if n_shots == 0 {
        return Err(Error::Invalid("n_shots must be at least 1".into()));
    }
    schedule.validate(n_shots)?;

    let mut drift_rng = ChaCha8Rng::seed_from_u64(config.seed);
    drift_rng.set_stream(0);
    let mut drift = Vec::with_capacity(n_shots);
    let (mut wx, mut wy) = (0.0f64, 0.0f64);
    for k in 0..n_shots {
        if config.drift_rate > 0.0 {
            let (dx, dy): (f64, f64) = (
                StandardNormal.sample(&mut drift_rng),
                StandardNormal.sample(&mut drift_rng),
            );
            wx += config.drift_rate * dx;
            wy += config.drift_rate * dy;
        }
        let sin = if config.drift_sin_amplitude > 0.0 {
            let phase = 2.0 * std::f64::consts::PI * k as f64 / config.drift_sin_period;
            config.drift_sin_amplitude * phase.sin()
        } else {
            0.0
        };
        drift.push((wx + sin, wy));
    }

    let mut images = Vec::with_capacity(n_shots);
    for (k, &offset) in drift.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(k as u64 + 1);
        let impulse = schedule.impulse_for(k);
        let mut img = render_with_drift(config, &mut rng, impulse, offset)?;
        img.shot_index = k;
        img.impulse = impulse;
        images.push(img);
    }
    Ok(Dataset {
        config: config.clone(),
        images,
    })
}

/// JSON header of a dataset file. The payload is every image's pixels as
/// `f32` little-endian, row-major, in shot order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub config: SimConfig,
    pub n_shots: usize,
    pub impulses: Vec<f64>,
    pub seed: u64,
}

fn file_bytes(dataset: &Dataset) -> Result<Vec<u8>> {
    let header = DatasetHeader {
        format: FORMAT_NAME.into(),
        config: dataset.config.clone(),
        n_shots: dataset.n_shots(),
        impulses: dataset.impulses(),
        seed: dataset.config.seed,
    };
    let mut values = Vec::with_capacity(dataset.n_shots() * dataset.config.n_pixels());
    for img in &dataset.images {
        values.extend(img.pixels.iter().map(|v| *v as f32));
    }
    container_bytes(MAGIC, VERSION, &header, &f32_to_le_bytes(&values))
}

pub fn save_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    std::fs::write(path, file_bytes(dataset)?)?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let (_, header, payload): (u32, DatasetHeader, Vec<u8>) =
        read_container(path, MAGIC, VERSION)?;
    if header.format != FORMAT_NAME {
        return Err(Error::Format(format!(
            "{}: header format {:?} is not a dataset",
            path.display(),
            header.format
        )));
    }
    let n_pix = header.config.n_pixels();
    let values = f32_from_le_bytes(&payload)?;
    if values.len() != header.n_shots * n_pix || header.impulses.len() != header.n_shots {
        return Err(Error::Format(format!(
            "{}: payload holds {} values, header declares {} shots of {} pixels",
            path.display(),
            values.len(),
            header.n_shots,
            n_pix
        )));
    }
    let images = values
        .chunks_exact(n_pix)
        .enumerate()
        .map(|(k, chunk)| {
            let mut img = TofImage::new(
                header.config.width,
                header.config.height,
                chunk.iter().map(|v| *v as f64).collect(),
            );
            img.shot_index = k;
            img.impulse = header.impulses[k];
            img
        })
        .collect();
    Ok(Dataset {
        config: header.config,
        images,
    })
}

/// SHA-256 of the dataset file bytes, for manifest provenance.
pub fn dataset_checksum(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config() -> SimConfig {
        let mut c = SimConfig::desk_regime();
        c.seed = 17;
        c
    }

    #[test]
    fn force_free_shots_are_labeled_and_distinct() {
        let ds = generate_dataset(&quick_config(), 12, &ImpulseSchedule::Zero).unwrap();
        assert_eq!(ds.n_shots(), 12);
        assert!(ds.is_force_free());
        for pair in ds.images.windows(2) {
            assert_ne!(pair[0].pixels, pair[1].pixels, "noise should decorrelate shots");
        }
    }

    #[test]
    fn fixed_seed_gives_bit_identical_files() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.twds"), dir.path().join("b.twds"));
        let c = quick_config();
        save_dataset(&p1, &generate_dataset(&c, 8, &ImpulseSchedule::Zero).unwrap()).unwrap();
        save_dataset(&p2, &generate_dataset(&c, 8, &ImpulseSchedule::Zero).unwrap()).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(
            dataset_checksum(&p1).unwrap(),
            dataset_checksum(&p2).unwrap()
        );
    }

    #[test]
    fn in_memory_checksum_matches_the_saved_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.twds");
        let ds = generate_dataset(&quick_config(), 4, &ImpulseSchedule::Zero).unwrap();
        save_dataset(&path, &ds).unwrap();
        assert_eq!(
            ds.content_checksum().unwrap(),
            dataset_checksum(&path).unwrap()
        );
    }

    #[test]
    fn file_round_trip_preserves_pixels_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.twds");
        let c = quick_config();
        let sched = ImpulseSchedule::Cycle(vec![0.0, c.impulse_fraction(0.5)]);
        let ds = generate_dataset(&c, 6, &sched).unwrap();
        save_dataset(&path, &ds).unwrap();
        let back = load_dataset(&path).unwrap();
        assert_eq!(back.config, ds.config);
        assert_eq!(back.impulses(), ds.impulses());
        // Storage is f32; loaded pixels must equal the f32 cast exactly.
        for (a, b) in back.images.iter().zip(&ds.images) {
            for (x, y) in a.pixels.iter().zip(&b.pixels) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
        // A second save of the loaded dataset is byte-identical.
        let path2 = dir.path().join("again.twds");
        save_dataset(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn cycle_schedule_interleaves_levels() {
        let c = quick_config();
        let levels = vec![0.0, 1e-26, 2e-26];
        let ds = generate_dataset(&c, 9, &ImpulseSchedule::Cycle(levels.clone())).unwrap();
        for (k, img) in ds.images.iter().enumerate() {
            assert_eq!(img.impulse, levels[k % 3]);
        }
    }

    #[test]
    fn schedule_parsing_accepts_the_documented_forms() {
        assert_eq!("zero".parse::<ImpulseSchedule>().unwrap(), ImpulseSchedule::Zero);
        assert_eq!(
            "const:7.81e-26".parse::<ImpulseSchedule>().unwrap(),
            ImpulseSchedule::Uniform(7.81e-26)
        );
        assert_eq!(
            "cycle:0, 1e-26,2e-26".parse::<ImpulseSchedule>().unwrap(),
            ImpulseSchedule::Cycle(vec![0.0, 1e-26, 2e-26])
        );
        assert!("ramp:1".parse::<ImpulseSchedule>().is_err());
        assert!("const:abc".parse::<ImpulseSchedule>().is_err());
    }

    #[test]
    fn per_shot_schedule_must_match_length() {
        let c = quick_config();
        let err = generate_dataset(&c, 3, &ImpulseSchedule::PerShot(vec![0.0; 2]));
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn zero_shots_is_rejected() {
        assert!(generate_dataset(&quick_config(), 0, &ImpulseSchedule::Zero).is_err());
    }

    #[test]
    fn drift_moves_the_pattern_over_time() {
        let mut c = quick_config();
        c.drift_rate = 0.0;
        c.drift_sin_amplitude = 2.0;
        c.drift_sin_period = 4.0;
        c.shot_noise_scale = 0.0;
        c.atom_number_jitter = 0.0;
        for p in &mut c.peaks {
            p.position_jitter = 0.0;
        }
        let ds = generate_dataset(&c, 4, &ImpulseSchedule::Zero).unwrap();
        // Shot 1 sits at the sinusoid crest (sin(pi/2)), shot 0 at zero.
        assert_ne!(ds.images[0].pixels, ds.images[1].pixels);
        assert_eq!(ds.images[0].pixels, ds.images[2].pixels);
    }

    #[test]
    fn truncated_dataset_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.twds");
        let ds = generate_dataset(&quick_config(), 2, &ImpulseSchedule::Zero).unwrap();
        save_dataset(&path, &ds).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Format(_))));
    }
}

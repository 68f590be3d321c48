//! The trained digital twin: frozen generator/discriminator pair with its
//! provenance manifest.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gan::train::TrainingLog;
use crate::nn::{load_model, model_checksum, save_model, Matrix, MlpModel, Mode, Scalar};
use crate::sim::TofImage;
use crate::{Error, Result};

const MANIFEST_FORMAT: &str = "twinsense-gan-bundle";
const MANIFEST_VERSION: u32 = 1;
/// File names inside a bundle directory.
pub const GENERATOR_FILE: &str = "generator.twck";
pub const DISCRIMINATOR_FILE: &str = "discriminator.twck";
pub const MANIFEST_FILE: &str = "bundle.json";

/// Input noise vector of the generator, i.i.d. standard normal.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    pub values: Vec<f32>,
}

impl LatentVector {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Self {
        Self {
            values: (0..dim).map(|_| f32::standard_normal(rng)).collect(),
        }
    }
}

/// Provenance record stored next to the two model checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: String,
    pub version: u32,
    pub image_width: usize,
    pub image_height: usize,
    pub latent_dim: usize,
    pub generator_widths: Vec<usize>,
    pub discriminator_widths: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub seed: u64,
    /// SHA-256 of the training dataset file.
    pub dataset_checksum: String,
    /// Shot indices of the 90% training split.
    pub train_indices: Vec<usize>,
    /// Held-out shot indices (the 10% test split).
    pub test_indices: Vec<usize>,
    /// SHA-256 of the generator parameter payload, fixed at freeze time.
    pub generator_checksum: String,
    /// SHA-256 of the discriminator parameter payload, fixed at freeze time.
    pub discriminator_checksum: String,
}

/// Generator/discriminator pair plus training provenance.
///
/// A bundle starts unfrozen (no scoring allowed) and is sealed with
/// [`GanBundle::freeze`], which switches both models to evaluation mode and
/// records their parameter checksums. There is no mutable access to the
/// models afterwards, so a frozen bundle cannot drift; sampling and feature
/// extraction refuse to run on an unfrozen one.
#[derive(Debug, Clone)]
pub struct GanBundle {
    generator: MlpModel<f32>,
    discriminator: MlpModel<f32>,
    manifest: BundleManifest,
    training_log: TrainingLog,
    frozen: bool,
}

impl GanBundle {
    /// Assembles an unfrozen bundle from freshly built models. The manifest
    /// is filled from the model shapes; training provenance fields stay
    /// empty until a trainer populates them.
    pub fn from_models(
        generator: MlpModel<f32>,
        discriminator: MlpModel<f32>,
        image_width: usize,
        image_height: usize,
    ) -> Result<Self> {
        let n_pixels = image_width * image_height;
        if generator.output_dim() != n_pixels {
            return Err(Error::Contract(format!(
                "generator emits {} values but the image has {n_pixels} pixels",
                generator.output_dim()
            )));
        }
        if discriminator.input_dim() != n_pixels {
            return Err(Error::Contract(format!(
                "discriminator reads {} values but the image has {n_pixels} pixels",
                discriminator.input_dim()
            )));
        }
        if discriminator.output_dim() != 1 {
            return Err(Error::Contract(
                "discriminator must end in a single verdict unit".into(),
            ));
        }
        if discriminator.layers().len() < 2 {
            return Err(Error::Contract(
                "discriminator needs a hidden layer to expose a feature vector".into(),
            ));
        }
        let g_spec = generator.spec();
        let d_spec = discriminator.spec();
        let manifest = BundleManifest {
            format: MANIFEST_FORMAT.into(),
            version: MANIFEST_VERSION,
            image_width,
            image_height,
            latent_dim: generator.input_dim(),
            generator_widths: g_spec.layers[..g_spec.layers.len() - 1]
                .iter()
                .map(|l| l.out_dim)
                .collect(),
            discriminator_widths: d_spec.layers[..d_spec.layers.len() - 1]
                .iter()
                .map(|l| l.out_dim)
                .collect(),
            epochs: 0,
            batch_size: 0,
            learning_rate: 0.0,
            adam_beta1: 0.0,
            seed: 0,
            dataset_checksum: String::new(),
            train_indices: Vec::new(),
            test_indices: Vec::new(),
            generator_checksum: String::new(),
            discriminator_checksum: String::new(),
        };
        Ok(Self {
            generator,
            discriminator,
            manifest,
            training_log: TrainingLog::default(),
            frozen: false,
        })
    }

    pub(crate) fn set_provenance(&mut self, fill: impl FnOnce(&mut BundleManifest)) {
        fill(&mut self.manifest);
    }

    pub(crate) fn set_training_log(&mut self, log: TrainingLog) {
        self.training_log = log;
    }

    /// Seals the bundle: evaluation mode everywhere, parameter checksums
    /// recorded, further updates structurally impossible.
    pub fn freeze(&mut self) {
        self.generator.set_mode(Mode::Eval);
        self.discriminator.set_mode(Mode::Eval);
        self.manifest.generator_checksum = model_checksum(&self.generator);
        self.manifest.discriminator_checksum = model_checksum(&self.discriminator);
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    fn ensure_frozen(&self) -> Result<()> {
        if self.frozen {
            Ok(())
        } else {
            Err(Error::Contract(
                "bundle must be frozen before use; call freeze() after training".into(),
            ))
        }
    }

    pub fn generator(&self) -> &MlpModel<f32> {
        &self.generator
    }

    pub fn discriminator(&self) -> &MlpModel<f32> {
        &self.discriminator
    }

    pub fn manifest(&self) -> &BundleManifest {
        &self.manifest
    }

    pub fn training_log(&self) -> &TrainingLog {
        &self.training_log
    }

    pub fn latent_dim(&self) -> usize {
        self.manifest.latent_dim
    }

    pub fn image_width(&self) -> usize {
        self.manifest.image_width
    }

    pub fn image_height(&self) -> usize {
        self.manifest.image_height
    }

    pub fn n_pixels(&self) -> usize {
        self.manifest.image_width * self.manifest.image_height
    }

    /// Recomputes both parameter checksums against the manifest.
    pub fn verify_checksums(&self) -> Result<()> {
        self.ensure_frozen()?;
        if model_checksum(&self.generator) != self.manifest.generator_checksum {
            return Err(Error::Format(
                "generator parameters do not match the manifest checksum".into(),
            ));
        }
        if model_checksum(&self.discriminator) != self.manifest.discriminator_checksum {
            return Err(Error::Format(
                "discriminator parameters do not match the manifest checksum".into(),
            ));
        }
        Ok(())
    }

    /// Draws `n` latent vectors and runs the frozen generator, yielding
    /// digital replicas in normalized `(-1, 1)` pixel units.
    pub fn sample_replicas<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<TofImage>> {
        self.ensure_frozen()?;
        if n == 0 {
            return Ok(Vec::new());
        }
        let dim = self.latent_dim();
        let mut z = Matrix::zeros(n, dim);
        for r in 0..n {
            z.row_mut(r)
                .copy_from_slice(&LatentVector::sample(rng, dim).values);
        }
        let out = self.generator.infer(&z)?;
        Ok((0..n)
            .map(|r| {
                let mut img = TofImage::new(
                    self.image_width(),
                    self.image_height(),
                    out.row(r).iter().map(|v| *v as f64).collect(),
                );
                img.shot_index = r;
                img
            })
            .collect())
    }

    /// Replica for one specific latent vector (deterministic in Eval mode).
    pub fn replica_for(&self, latent: &LatentVector) -> Result<Vec<f32>> {
        self.ensure_frozen()?;
        if latent.values.len() != self.latent_dim() {
            return Err(Error::Invalid(format!(
                "latent vector has {} entries, generator expects {}",
                latent.values.len(),
                self.latent_dim()
            )));
        }
        self.generator.infer_single(&latent.values)
    }

    /// Activation vector of the discriminator's designated feature layer
    /// (the penultimate layer, feeding the scalar verdict unit).
    pub fn discriminator_features(&self, pixels: &[f32]) -> Result<Vec<f32>> {
        self.ensure_frozen()?;
        if pixels.len() != self.n_pixels() {
            return Err(Error::Invalid(format!(
                "image has {} pixels, discriminator expects {}",
                pixels.len(),
                self.n_pixels()
            )));
        }
        let (_, cache) = self.discriminator.infer_cached(&Matrix::from_row(pixels))?;
        let feature_layer = self.discriminator.layers().len() - 2;
        Ok(cache.layer_output(feature_layer).row(0).to_vec())
    }
}

/// Container for the manifest JSON file (manifest plus the training log).
#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    manifest: BundleManifest,
    training_log: TrainingLog,
}

/// Writes a frozen bundle as a directory: two model checkpoints plus
/// `bundle.json`.
pub fn save_bundle(dir: &Path, bundle: &GanBundle) -> Result<()> {
    if !bundle.is_frozen() {
        return Err(Error::Contract("refusing to persist an unfrozen bundle".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut g_meta = BTreeMap::new();
    g_meta.insert("role".to_string(), "generator".to_string());
    save_model(&dir.join(GENERATOR_FILE), bundle.generator(), g_meta)?;
    let mut d_meta = BTreeMap::new();
    d_meta.insert("role".to_string(), "discriminator".to_string());
    save_model(&dir.join(DISCRIMINATOR_FILE), bundle.discriminator(), d_meta)?;
    let file = ManifestFile {
        manifest: bundle.manifest().clone(),
        training_log: bundle.training_log().clone(),
    };
    std::fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&file)?,
    )?;
    Ok(())
}

/// Loads a bundle directory and verifies the checkpoint checksums against
/// the manifest before returning the (frozen) bundle.
pub fn load_bundle(dir: &Path) -> Result<GanBundle> {
    let raw = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let file: ManifestFile = serde_json::from_str(&raw)
        .map_err(|e| Error::Format(format!("{}: malformed bundle manifest: {e}", dir.display())))?;
    if file.manifest.format != MANIFEST_FORMAT {
        return Err(Error::Format(format!(
            "{}: manifest format {:?} is not a GAN bundle",
            dir.display(),
            file.manifest.format
        )));
    }
    if file.manifest.version == 0 || file.manifest.version > MANIFEST_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported bundle version {}",
            dir.display(),
            file.manifest.version
        )));
    }
    let (generator, _) = load_model(&dir.join(GENERATOR_FILE))?;
    let (discriminator, _) = load_model(&dir.join(DISCRIMINATOR_FILE))?;
    let mut bundle = GanBundle::from_models(
        generator,
        discriminator,
        file.manifest.image_width,
        file.manifest.image_height,
    )?;
    bundle.manifest = file.manifest;
    bundle.training_log = file.training_log;
    bundle.frozen = true;
    bundle.verify_checksums()?;
    Ok(bundle)
}

//! Latent inversion: the encoder maps images back to latent vectors so the
//! frozen generator can reconstruct them.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gan::{ensure_force_free, normalized_rows, GanBundle};
use crate::nn::{
    load_model, model_checksum, save_model, Activation, Matrix, MlpModel, Mode, ModelSpec,
    OptimizerState,
};
use crate::sim::Dataset;
use crate::{Error, Result};

const MANIFEST_FORMAT: &str = "twinsense-encoder";
const MANIFEST_KEY: &str = "manifest";

/// Optimization settings for encoder training. The architecture itself is
/// not configurable: it is always the mirror inverse of the bundled
/// generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderHyper {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub seed: u64,
}

impl EncoderHyper {
    pub fn full() -> Self {
        Self {
            epochs: 100,
            batch_size: 64,
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            seed: 13,
        }
    }

    pub fn desk() -> Self {
        Self {
            epochs: 140,
            batch_size: 32,
            ..Self::full()
        }
    }

    pub fn micro() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            ..Self::full()
        }
    }

    pub fn named(profile: &str) -> Result<Self> {
        match profile {
            "full" => Ok(Self::full()),
            "desk" => Ok(Self::desk()),
            "micro" => Ok(Self::micro()),
            other => Err(Error::Config(format!(
                "unknown training profile {other:?} (expected desk, full, or micro)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return Err(Error::Config(format!(
                "adam beta1 must lie in [0, 1), got {}",
                self.adam_beta1
            )));
        }
        Ok(())
    }
}

/// Provenance record embedded in the encoder checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderManifest {
    pub format: String,
    pub latent_dim: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub seed: u64,
    /// SHA-256 of the training dataset file.
    pub dataset_checksum: String,
    /// Checksum of the generator this encoder inverts.
    pub generator_checksum: String,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Mean per-pixel (RMS) reconstruction error on the held-out split,
    /// normalized units; `None` when the test split is empty.
    pub held_out_rms_residual: Option<f64>,
    /// Parameter checksum fixed at freeze time.
    pub encoder_checksum: String,
    /// Mean residual norm per training epoch.
    pub epoch_losses: Vec<f64>,
}

/// Frozen image-to-latent model, the inverse of the generator.
#[derive(Debug, Clone)]
pub struct Encoder {
    model: MlpModel<f32>,
    manifest: EncoderManifest,
    frozen: bool,
}

impl Encoder {
    /// Wraps a hand-built inverter model as a frozen encoder for the given
    /// bundle. The manifest carries only the structural facts; the training
    /// provenance fields stay empty since no training happened here.
    pub fn from_model(model: MlpModel<f32>, bundle: &GanBundle) -> Result<Self> {
        if model.input_dim() != bundle.n_pixels() {
            return Err(Error::Invalid(format!(
                "encoder takes {} inputs, bundle images have {} pixels",
                model.input_dim(),
                bundle.n_pixels()
            )));
        }
        if model.output_dim() != bundle.latent_dim() {
            return Err(Error::Invalid(format!(
                "encoder emits {} values, generator latent space is {}-d",
                model.output_dim(),
                bundle.latent_dim()
            )));
        }
        let mut model = model;
        model.set_mode(Mode::Eval);
        let encoder_checksum = model_checksum(&model);
        Ok(Self {
            model,
            manifest: EncoderManifest {
                format: MANIFEST_FORMAT.into(),
                latent_dim: bundle.latent_dim(),
                image_width: bundle.image_width(),
                image_height: bundle.image_height(),
                epochs: 0,
                batch_size: 0,
                learning_rate: 0.0,
                adam_beta1: 0.0,
                seed: 0,
                dataset_checksum: String::new(),
                generator_checksum: bundle.manifest().generator_checksum.clone(),
                train_indices: Vec::new(),
                test_indices: Vec::new(),
                held_out_rms_residual: None,
                encoder_checksum,
                epoch_losses: Vec::new(),
            },
            frozen: true,
        })
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn model(&self) -> &MlpModel<f32> {
        &self.model
    }

    pub fn manifest(&self) -> &EncoderManifest {
        &self.manifest
    }

    pub fn latent_dim(&self) -> usize {
        self.manifest.latent_dim
    }

    fn ensure_frozen(&self) -> Result<()> {
        if self.frozen {
            Ok(())
        } else {
            Err(Error::Contract("encoder must be frozen before use".into()))
        }
    }

    /// Latent vector of one normalized image row.
    pub fn encode(&self, pixels: &[f32]) -> Result<Vec<f32>> {
        self.ensure_frozen()?;
        if pixels.len() != self.model.input_dim() {
            return Err(Error::Invalid(format!(
                "image has {} pixels, encoder expects {}",
                pixels.len(),
                self.model.input_dim()
            )));
        }
        self.model.infer_single(pixels)
    }

    /// Recomputes the parameter checksum against the manifest.
    pub fn verify_checksum(&self) -> Result<()> {
        self.ensure_frozen()?;
        if model_checksum(&self.model) != self.manifest.encoder_checksum {
            return Err(Error::Format(
                "encoder parameters do not match the manifest checksum".into(),
            ));
        }
        Ok(())
    }
}

/// Mirror-inverse of the generator: the widths reversed, batchnorm + ReLU
/// hidden layers, and a linear output since latent vectors are unbounded.
pub(crate) fn encoder_spec(bundle: &GanBundle) -> Result<ModelSpec> {
    let m = bundle.manifest();
    let mut dims = vec![bundle.n_pixels()];
    dims.extend(m.generator_widths.iter().rev());
    dims.push(m.latent_dim);
    ModelSpec::chain(&dims, Activation::Relu, Activation::Identity, true)
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mean residual norm of a batch plus its gradient with respect to the
/// reconstruction: for L = mean_s ||r_s||, dL/dr = r / (B ||r||).
fn residual_loss_and_grad(x: &Matrix<f32>, x_hat: &Matrix<f32>) -> (f64, Matrix<f32>) {
    let b = x.rows();
    let mut grad = Matrix::zeros(b, x.cols());
    let mut total = 0.0f64;
    for s in 0..b {
        let xr = x.row(s);
        let hr = x_hat.row(s);
        let mut norm2 = 0.0f64;
        for i in 0..xr.len() {
            let r = hr[i] as f64 - xr[i] as f64;
            norm2 += r * r;
        }
        let norm = norm2.sqrt();
        total += norm;
        // Guard the gradient at an exact fixed point, where it vanishes.
        let scale = if norm > 0.0 {
            1.0 / (norm * b as f64)
        } else {
            0.0
        };
        let gr = grad.row_mut(s);
        for i in 0..xr.len() {
            gr[i] = ((x_hat.row(s)[i] as f64 - xr[i] as f64) * scale) as f32;
        }
    }
    (total / b as f64, grad)
}

/// Trains the encoder to invert the frozen generator on force-free data:
/// it minimizes the mean residual norm `||x - G*(E(x))||` with gradients
/// flowing through the generator's input while its parameters stay fixed.
///
/// When the dataset is the very one the bundle was trained on (checksum
/// match), the bundle's 90/10 split is reused so the held-out shots stay
/// unseen by both models; otherwise a fresh seeded split is drawn.
pub fn train_encoder(
    bundle: &GanBundle,
    dataset: &Dataset,
    hyper: &EncoderHyper,
) -> Result<Encoder> {
    hyper.validate()?;
    if !bundle.is_frozen() {
        return Err(Error::Contract(
            "encoder training requires a frozen bundle".into(),
        ));
    }
    ensure_force_free(dataset)?;
    if dataset.n_shots() == 0 {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    if dataset.config.n_pixels() != bundle.n_pixels() {
        return Err(Error::Invalid(format!(
            "dataset images have {} pixels, bundle expects {}",
            dataset.config.n_pixels(),
            bundle.n_pixels()
        )));
    }
    let generator_checksum_before = model_checksum(bundle.generator());

    let rows = normalized_rows(dataset)?;
    let dataset_checksum = dataset.content_checksum()?;
    let (train_idx, test_idx) = if dataset_checksum == bundle.manifest().dataset_checksum {
        (
            bundle.manifest().train_indices.clone(),
            bundle.manifest().test_indices.clone(),
        )
    } else {
        crate::gan::split_indices(dataset.n_shots(), &mut rng_stream(hyper.seed, 2))
    };

    let mut encoder = MlpModel::<f32>::init(&encoder_spec(bundle)?, &mut rng_stream(hyper.seed, 0))?;
    encoder.set_mode(Mode::Train);
    let mut opt =
        OptimizerState::with_hyper(&encoder, hyper.learning_rate, hyper.adam_beta1, 0.999, 1e-8)?;

    let generator = bundle.generator();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    let steps_per_epoch = train_idx.len().div_ceil(hyper.batch_size);
    let mut order = train_idx.clone();
    let mut loop_rng = rng_stream(hyper.seed, 3);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut loop_rng);
        let mut sum = 0.0;
        for step in 0..steps_per_epoch {
            let batch_idx: Vec<usize> = (0..hyper.batch_size)
                .map(|i| order[(step * hyper.batch_size + i) % order.len()])
                .collect();
            let mut x = Matrix::zeros(batch_idx.len(), rows.cols());
            for (r, &i) in batch_idx.iter().enumerate() {
                x.row_mut(r).copy_from_slice(rows.row(i));
            }

            let step_result = (|| -> Result<f64> {
                let (z, cache_e) = encoder.forward(&x)?;
                let (x_hat, cache_g) = generator.infer_cached(&z)?;
                let (loss, d_xhat) = residual_loss_and_grad(&x, &x_hat);
                let d_z = generator.backward_input(&cache_g, &d_xhat)?;
                let grads = encoder.backward(&cache_e, &d_z)?;
                opt.step(&mut encoder, &grads)?;
                Ok(loss)
            })();
            sum += step_result.map_err(|e| match e {
                Error::Numeric(msg) => Error::Numeric(format!("{msg} (epoch {epoch})")),
                other => other,
            })?;
        }
        let mean = sum / steps_per_epoch as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric(format!(
                "encoder training diverged: non-finite loss at epoch {epoch}"
            )));
        }
        epoch_losses.push(mean);
    }

    debug_assert_eq!(model_checksum(bundle.generator()), generator_checksum_before);

    encoder.set_mode(Mode::Eval);
    let held_out_rms_residual = if test_idx.is_empty() {
        None
    } else {
        let mut x = Matrix::zeros(test_idx.len(), rows.cols());
        for (r, &i) in test_idx.iter().enumerate() {
            x.row_mut(r).copy_from_slice(rows.row(i));
        }
        let z = encoder.infer(&x)?;
        let x_hat = generator.infer(&z)?;
        let (mean_norm, _) = residual_loss_and_grad(&x, &x_hat);
        Some(mean_norm / (bundle.n_pixels() as f64).sqrt())
    };

    let encoder_checksum = model_checksum(&encoder);
    Ok(Encoder {
        model: encoder,
        manifest: EncoderManifest {
            format: MANIFEST_FORMAT.into(),
            latent_dim: bundle.latent_dim(),
            image_width: bundle.image_width(),
            image_height: bundle.image_height(),
            epochs: hyper.epochs,
            batch_size: hyper.batch_size,
            learning_rate: hyper.learning_rate,
            adam_beta1: hyper.adam_beta1,
            seed: hyper.seed,
            dataset_checksum,
            generator_checksum: generator_checksum_before,
            train_indices: train_idx,
            test_indices: test_idx,
            held_out_rms_residual,
            encoder_checksum,
            epoch_losses,
        },
        frozen: true,
    })
}

/// Writes the encoder as a model checkpoint with the manifest embedded in
/// the header metadata.
pub fn save_encoder(path: &Path, encoder: &Encoder) -> Result<()> {
    if !encoder.is_frozen() {
        return Err(Error::Contract(
            "refusing to persist an unfrozen encoder".into(),
        ));
    }
    let mut meta = BTreeMap::new();
    meta.insert("role".to_string(), "encoder".to_string());
    meta.insert(
        MANIFEST_KEY.to_string(),
        serde_json::to_string(&encoder.manifest)?,
    );
    save_model(path, &encoder.model, meta)
}

/// Loads an encoder checkpoint and verifies its parameter checksum.
pub fn load_encoder(path: &Path) -> Result<Encoder> {
    let (model, header) = load_model(path)?;
    let raw = header.metadata.get(MANIFEST_KEY).ok_or_else(|| {
        Error::Format(format!(
            "{}: checkpoint carries no encoder manifest",
            path.display()
        ))
    })?;
    let manifest: EncoderManifest = serde_json::from_str(raw)
        .map_err(|e| Error::Format(format!("{}: malformed encoder manifest: {e}", path.display())))?;
    if manifest.format != MANIFEST_FORMAT {
        return Err(Error::Format(format!(
            "{}: manifest format {:?} is not an encoder",
            path.display(),
            manifest.format
        )));
    }
    let encoder = Encoder {
        model,
        manifest,
        frozen: true,
    };
    encoder.verify_checksum()?;
    Ok(encoder)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gan::{train_gan, GanHyper};
    use crate::nn::Scalar;
    use crate::sim::{SimConfig, TofImage};

    fn toy_dataset(n: usize, side: usize, seed: u64) -> Dataset {
        let config = SimConfig {
            width: side,
            height: side,
            seed,
            ..SimConfig::default()
        };
        let mut rng = rng_stream(seed, 40);
        let images = (0..n)
            .map(|k| {
                let cx = side as f64 / 2.0 + f32::standard_normal(&mut rng) as f64 * 0.8;
                let mut img = TofImage::new(
                    side,
                    side,
                    (0..side * side)
                        .map(|p| {
                            let (x, y) = ((p % side) as f64, (p / side) as f64);
                            let r2 = (x - cx).powi(2) + (y - side as f64 / 2.0).powi(2);
                            (-r2 / 4.0).exp() + 0.01
                        })
                        .collect(),
                );
                img.shot_index = k;
                img
            })
            .collect();
        Dataset { config, images }
    }

    fn tiny_bundle(ds: &Dataset) -> GanBundle {
        let hyper = GanHyper {
            latent_dim: 4,
            generator_widths: vec![8, 12],
            discriminator_widths: vec![12, 8],
            epochs: 2,
            batch_size: 4,
            learning_rate: 2e-4,
            discriminator_lr_scale: 1.0,
            adam_beta1: 0.5,
            seed: 11,
        };
        train_gan(ds, &hyper).unwrap()
    }

    fn tiny_hyper() -> EncoderHyper {
        EncoderHyper {
            epochs: 25,
            batch_size: 4,
            learning_rate: 1e-3,
            adam_beta1: 0.5,
            seed: 19,
        }
    }

    #[test]
    fn architecture_mirrors_the_generator() {
        let ds = toy_dataset(8, 6, 1);
        let bundle = tiny_bundle(&ds);
        let spec = encoder_spec(&bundle).unwrap();
        let dims: Vec<usize> = std::iter::once(spec.input_dim())
            .chain(spec.layers.iter().map(|l| l.out_dim))
            .collect();
        assert_eq!(dims, vec![36, 12, 8, 4]);
        let last = spec.layers.last().unwrap();
        assert_eq!(last.activation, Activation::Identity);
        assert!(!last.batchnorm);
        assert!(spec.layers[..2].iter().all(|l| l.batchnorm));
    }

    #[test]
    fn training_reduces_the_residual_and_freezes() {
        let ds = toy_dataset(16, 6, 2);
        let bundle = tiny_bundle(&ds);
        let enc = train_encoder(&bundle, &ds, &tiny_hyper()).unwrap();
        assert!(enc.is_frozen());
        let losses = &enc.manifest().epoch_losses;
        assert_eq!(losses.len(), 25);
        assert!(
            losses.last().unwrap() < losses.first().unwrap(),
            "residual should drop: first {} last {}",
            losses.first().unwrap(),
            losses.last().unwrap()
        );
        assert!(enc.manifest().held_out_rms_residual.is_some());
        // Same split as the bundle (same dataset checksum).
        assert_eq!(enc.manifest().train_indices, bundle.manifest().train_indices);
    }

    #[test]
    fn generator_is_untouched_by_encoder_training() {
        let ds = toy_dataset(12, 6, 3);
        let bundle = tiny_bundle(&ds);
        let before = model_checksum(bundle.generator());
        let _ = train_encoder(&bundle, &ds, &tiny_hyper()).unwrap();
        assert_eq!(model_checksum(bundle.generator()), before);
        bundle.verify_checksums().unwrap();
    }

    #[test]
    fn fixed_seed_reproduces_the_encoder() {
        let ds = toy_dataset(10, 6, 4);
        let bundle = tiny_bundle(&ds);
        let hyper = tiny_hyper();
        let e1 = train_encoder(&bundle, &ds, &hyper).unwrap();
        let e2 = train_encoder(&bundle, &ds, &hyper).unwrap();
        assert_eq!(model_checksum(e1.model()), model_checksum(e2.model()));
        assert_eq!(e1.manifest(), e2.manifest());
    }

    #[test]
    fn hygiene_and_contract_violations_are_refused() {
        let ds = toy_dataset(8, 6, 5);
        let bundle = tiny_bundle(&ds);
        let mut forced = ds.clone();
        forced.images[0].impulse = 1e-26;
        assert!(matches!(
            train_encoder(&bundle, &forced, &tiny_hyper()),
            Err(Error::Invalid(_))
        ));

        // An unfrozen bundle is rejected outright.
        let g = bundle.generator().clone();
        let d = bundle.discriminator().clone();
        let unfrozen = GanBundle::from_models(g, d, 6, 6).unwrap();
        assert!(matches!(
            train_encoder(&unfrozen, &ds, &tiny_hyper()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn checkpoint_round_trips_and_detects_tampering() {
        let ds = toy_dataset(8, 6, 6);
        let bundle = tiny_bundle(&ds);
        let enc = train_encoder(&bundle, &ds, &tiny_hyper()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("encoder.twck");
        save_encoder(&path, &enc).unwrap();
        let back = load_encoder(&path).unwrap();
        assert_eq!(back.manifest(), enc.manifest());
        assert_eq!(model_checksum(back.model()), model_checksum(enc.model()));

        let x = vec![0.1f32; 36];
        assert_eq!(back.encode(&x).unwrap(), enc.encode(&x).unwrap());

        let mut raw = std::fs::read(&path).unwrap();
        let n = raw.len();
        raw[n - 2] ^= 0x01;
        std::fs::write(&path, raw).unwrap();
        assert!(matches!(load_encoder(&path), Err(Error::Format(_))));
    }
}

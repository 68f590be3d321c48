//! The adversarial training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::gan::{GanBundle, GanHyper};
use crate::nn::{bce_loss_batch, Matrix, MlpModel, Mode, OptimizerState, Scalar};
use crate::sim::{normalize, Dataset, TofImage};
use crate::{Error, Result};

/// Epoch-mean discriminator loss below this is treated as a collapse
/// symptom: the discriminator has stopped being fooled at all.
const MODE_COLLAPSE_FLOOR: f64 = 1e-3;

/// Mean adversarial losses of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean of BCE(D(x), 1) + BCE(D(G(z)), 0) over the epoch's steps.
    pub discriminator_loss: f64,
    /// Mean of BCE(D(G(z)), 1) over the epoch's steps.
    pub generator_loss: f64,
}

/// Per-epoch loss record plus any diagnostics raised during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    pub warnings: Vec<String>,
}

/// Label hygiene: the digital twin is trained on force-free data only, so
/// any nonzero impulse label disqualifies the dataset.
pub fn ensure_force_free(dataset: &Dataset) -> Result<()> {
    for img in &dataset.images {
        if img.impulse != 0.0 {
            return Err(Error::Invalid(format!(
                "training data must be force-free, but shot {} carries impulse {:.3e} N*s",
                img.shot_index, img.impulse
            )));
        }
    }
    Ok(())
}

/// One image in model space: per-shot `[-1, 1]` normalization, `f32`.
pub fn normalized_row(image: &TofImage) -> Result<Vec<f32>> {
    let (norm, _) = normalize(image)?;
    Ok(norm.pixels.iter().map(|v| *v as f32).collect())
}

/// Whole dataset in model space, one shot per row in shot order.
pub fn normalized_rows(dataset: &Dataset) -> Result<Matrix<f32>> {
    let mut rows = Matrix::zeros(dataset.n_shots(), dataset.config.n_pixels());
    for (r, img) in dataset.images.iter().enumerate() {
        rows.row_mut(r).copy_from_slice(&normalized_row(img)?);
    }
    Ok(rows)
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Shuffled 90/10 train/test split over shot indices.
pub(crate) fn split_indices(n: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let n_train = (n * 9 / 10).max(1);
    (idx[..n_train].to_vec(), idx[n_train..].to_vec())
}

fn latent_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Matrix<f32> {
    let mut z = Matrix::zeros(n, dim);
    for r in 0..n {
        for v in z.row_mut(r) {
            *v = f32::standard_normal(rng);
        }
    }
    z
}

fn gather(rows: &Matrix<f32>, indices: &[usize]) -> Matrix<f32> {
    let mut out = Matrix::zeros(indices.len(), rows.cols());
    for (r, &i) in indices.iter().enumerate() {
        out.row_mut(r).copy_from_slice(rows.row(i));
    }
    out
}

/// One discriminator step on a real and a fake batch with the given
/// `(real, fake)` targets; returns the summed batch-mean loss.
///
/// The targets are parameters so the label-swap property below can probe
/// the wiring; real training always passes `(1.0, 0.0)`.
fn discriminator_update(
    d: &mut MlpModel<f32>,
    opt: &mut OptimizerState<f32>,
    real: &Matrix<f32>,
    fake: &Matrix<f32>,
    labels: (f32, f32),
) -> Result<f64> {
    let (p_real, cache_real) = d.forward(real)?;
    let (loss_real, grad_real) = bce_loss_batch(&p_real, &vec![labels.0; real.rows()])?;
    let mut grads = d.backward(&cache_real, &grad_real)?;

    let (p_fake, cache_fake) = d.forward(fake)?;
    let (loss_fake, grad_fake) = bce_loss_batch(&p_fake, &vec![labels.1; fake.rows()])?;
    grads.add_assign(&d.backward(&cache_fake, &grad_fake)?);

    opt.step(d, &grads)?;
    Ok(loss_real as f64 + loss_fake as f64)
}

/// One generator step: non-saturating objective (push fakes toward the
/// "real" label), gradients flowing through the discriminator's input.
fn generator_update(
    g: &mut MlpModel<f32>,
    d: &mut MlpModel<f32>,
    opt: &mut OptimizerState<f32>,
    z: &Matrix<f32>,
) -> Result<f64> {
    let (fake, cache_g) = g.forward(z)?;
    let (p, cache_d) = d.forward(&fake)?;
    let (loss, grad) = bce_loss_batch(&p, &vec![1.0f32; z.rows()])?;
    let d_input = d.backward_input(&cache_d, &grad)?;
    let g_grads = g.backward(&cache_g, &d_input)?;
    opt.step(g, &g_grads)?;
    Ok(loss as f64)
}

fn at_epoch(e: Error, epoch: usize) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("{msg} (epoch {epoch})")),
        other => other,
    }
}

/// Trains the digital twin on a force-free dataset.
///
/// The dataset is normalized per shot, split 90/10 into train/test, and
/// the two networks are updated alternately (one discriminator step, one
/// generator step) with Adam. Mini-batches always hold `batch_size` rows;
/// when the shuffled epoch order runs short the batch wraps around, so
/// batchnorm statistics stay well defined even for tiny datasets.
///
/// Everything is driven by `hyper.seed` through fixed RNG streams, so a
/// fixed seed reproduces the training log and the final parameters bit for
/// bit. Returns the frozen bundle with provenance (dataset checksum,
/// split indices) recorded in its manifest.
pub fn train_gan(dataset: &Dataset, hyper: &GanHyper) -> Result<GanBundle> {
    hyper.validate()?;
    ensure_force_free(dataset)?;
    if dataset.n_shots() == 0 {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    let n_pixels = dataset.config.n_pixels();
    let rows = normalized_rows(dataset)?;

    let mut g = MlpModel::<f32>::init(
        &hyper.generator_spec(n_pixels)?,
        &mut rng_stream(hyper.seed, 0),
    )?;
    let mut d = MlpModel::<f32>::init(
        &hyper.discriminator_spec(n_pixels)?,
        &mut rng_stream(hyper.seed, 1),
    )?;
    g.set_mode(Mode::Train);
    d.set_mode(Mode::Train);
    let (train_idx, test_idx) = split_indices(dataset.n_shots(), &mut rng_stream(hyper.seed, 2));
    let mut loop_rng = rng_stream(hyper.seed, 3);

    let mut opt_g =
        OptimizerState::with_hyper(&g, hyper.learning_rate, hyper.adam_beta1, 0.999, 1e-8)?;
    let mut opt_d = OptimizerState::with_hyper(
        &d,
        hyper.discriminator_lr_scale * hyper.learning_rate,
        hyper.adam_beta1,
        0.999,
        1e-8,
    )?;

    let mut log = TrainingLog::default();
    let steps_per_epoch = train_idx.len().div_ceil(hyper.batch_size);
    let mut order = train_idx.clone();
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut loop_rng);
        let mut d_sum = 0.0;
        let mut g_sum = 0.0;
        for step in 0..steps_per_epoch {
            let batch_idx: Vec<usize> = (0..hyper.batch_size)
                .map(|i| order[(step * hyper.batch_size + i) % order.len()])
                .collect();
            let real = gather(&rows, &batch_idx);

            let z_d = latent_batch(&mut loop_rng, hyper.batch_size, hyper.latent_dim);
            let (fake, _) = g.forward(&z_d).map_err(|e| at_epoch(e, epoch))?;
            d_sum += discriminator_update(&mut d, &mut opt_d, &real, &fake, (1.0, 0.0))
                .map_err(|e| at_epoch(e, epoch))?;

            let z_g = latent_batch(&mut loop_rng, hyper.batch_size, hyper.latent_dim);
            g_sum += generator_update(&mut g, &mut d, &mut opt_g, &z_g)
                .map_err(|e| at_epoch(e, epoch))?;
        }
        let d_mean = d_sum / steps_per_epoch as f64;
        let g_mean = g_sum / steps_per_epoch as f64;
        if !(d_mean.is_finite() && g_mean.is_finite()) {
            return Err(Error::Numeric(format!("non-finite loss at epoch {epoch}")));
        }
        if d_mean < MODE_COLLAPSE_FLOOR {
            log.warnings.push(format!(
                "epoch {epoch}: discriminator loss {d_mean:.3e} collapsed toward 0 \
                 (mode-collapse symptom); training continued"
            ));
        }
        log.epochs.push(EpochLog {
            epoch,
            discriminator_loss: d_mean,
            generator_loss: g_mean,
        });
    }

    let mut bundle = GanBundle::from_models(g, d, dataset.config.width, dataset.config.height)?;
    bundle.set_training_log(log);
    let dataset_checksum = dataset.content_checksum()?;
    bundle.set_provenance(move |m| {
        m.epochs = hyper.epochs;
        m.batch_size = hyper.batch_size;
        m.learning_rate = hyper.learning_rate;
        m.adam_beta1 = hyper.adam_beta1;
        m.seed = hyper.seed;
        m.dataset_checksum = dataset_checksum;
        m.train_indices = train_idx;
        m.test_indices = test_idx;
    });
    bundle.freeze();
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::model_checksum;
    use crate::sim::SimConfig;

    /// Small synthetic dataset: a bright blob whose position wiggles shot
    /// to shot, enough structure for the networks to latch onto.
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
                let cy = side as f64 / 2.0;
                let mut img = TofImage::new(
                    side,
                    side,
                    (0..side * side)
                        .map(|p| {
                            let (x, y) = ((p % side) as f64, (p / side) as f64);
                            let r2 = (x - cx).powi(2) + (y - cy).powi(2);
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

    fn tiny_hyper() -> GanHyper {
        GanHyper {
            latent_dim: 4,
            generator_widths: vec![8, 12],
            discriminator_widths: vec![12, 8],
            epochs: 2,
            batch_size: 4,
            learning_rate: 2e-4,
            discriminator_lr_scale: 1.0,
            adam_beta1: 0.5,
            seed: 11,
        }
    }

    #[test]
    fn untrained_discriminator_scores_at_chance_level() {
        let ds = toy_dataset(8, 6, 5);
        let hyper = tiny_hyper();
        let rows = normalized_rows(&ds).unwrap();
        let mut g = MlpModel::<f32>::init(
            &hyper.generator_spec(36).unwrap(),
            &mut rng_stream(1, 0),
        )
        .unwrap();
        let mut d = MlpModel::<f32>::init(
            &hyper.discriminator_spec(36).unwrap(),
            &mut rng_stream(1, 1),
        )
        .unwrap();
        g.set_mode(Mode::Train);

        let z = latent_batch(&mut rng_stream(1, 3), 8, 4);
        let (fake, _) = g.forward(&z).unwrap();
        let (p_real, _) = d.forward(&rows).unwrap();
        let (p_fake, _) = d.forward(&fake).unwrap();
        let (loss_real, _) = bce_loss_batch(&p_real, &[1.0f32; 8]).unwrap();
        let (loss_fake, _) = bce_loss_batch(&p_fake, &[0.0f32; 8]).unwrap();
        let mean_bce = (loss_real + loss_fake) as f64 / 2.0;
        let ln2 = std::f64::consts::LN_2;
        assert!(
            (mean_bce - ln2).abs() < 0.2 * ln2,
            "chance-level BCE {mean_bce} vs ln 2 {ln2}"
        );
    }

    #[test]
    fn label_swap_inverts_the_discriminator_loss_trend() {
        // Fixed, separable batches: "real" sits at +0.5, "fake" at -0.5.
        let mut rng = rng_stream(2, 0);
        let mut real = Matrix::zeros(8, 36);
        let mut fake = Matrix::zeros(8, 36);
        for r in 0..8 {
            for v in real.row_mut(r) {
                *v = 0.5 + 0.05 * f32::standard_normal(&mut rng);
            }
            for v in fake.row_mut(r) {
                *v = -0.5 + 0.05 * f32::standard_normal(&mut rng);
            }
        }
        let spec = tiny_hyper().discriminator_spec(36).unwrap();
        let correct_loss = |d: &mut MlpModel<f32>| -> f64 {
            let (p_real, _) = d.forward(&real).unwrap();
            let (p_fake, _) = d.forward(&fake).unwrap();
            let (a, _) = bce_loss_batch(&p_real, &[1.0f32; 8]).unwrap();
            let (b, _) = bce_loss_batch(&p_fake, &[0.0f32; 8]).unwrap();
            a as f64 + b as f64
        };

        let mut d = MlpModel::<f32>::init(&spec, &mut rng_stream(3, 1)).unwrap();
        d.set_mode(Mode::Train);
        let mut opt = OptimizerState::with_hyper(&d, 1e-3, 0.5, 0.999, 1e-8).unwrap();
        let before = correct_loss(&mut d);
        for _ in 0..40 {
            discriminator_update(&mut d, &mut opt, &real, &fake, (1.0, 0.0)).unwrap();
        }
        assert!(correct_loss(&mut d) < before, "correct labels must improve");

        let mut d_swapped = MlpModel::<f32>::init(&spec, &mut rng_stream(3, 1)).unwrap();
        d_swapped.set_mode(Mode::Train);
        let mut opt = OptimizerState::with_hyper(&d_swapped, 1e-3, 0.5, 0.999, 1e-8).unwrap();
        let before = correct_loss(&mut d_swapped);
        for _ in 0..40 {
            discriminator_update(&mut d_swapped, &mut opt, &real, &fake, (0.0, 1.0)).unwrap();
        }
        assert!(
            correct_loss(&mut d_swapped) > before,
            "swapped labels must drive the correctly-labeled loss up"
        );
    }

    #[test]
    fn fixed_seed_reproduces_log_and_parameters() {
        let ds = toy_dataset(12, 6, 6);
        let hyper = tiny_hyper();
        let b1 = train_gan(&ds, &hyper).unwrap();
        let b2 = train_gan(&ds, &hyper).unwrap();
        assert_eq!(b1.training_log(), b2.training_log());
        assert_eq!(
            model_checksum(b1.generator()),
            model_checksum(b2.generator())
        );
        assert_eq!(
            model_checksum(b1.discriminator()),
            model_checksum(b2.discriminator())
        );
        assert_eq!(b1.manifest(), b2.manifest());
        assert!(b1.is_frozen());
        assert_eq!(b1.training_log().epochs.len(), hyper.epochs);
    }

    #[test]
    fn impulse_labels_are_refused() {
        let mut ds = toy_dataset(6, 6, 7);
        ds.images[3].impulse = 2.5e-26;
        let err = train_gan(&ds, &tiny_hyper()).unwrap_err();
        assert!(matches!(err, Error::Invalid(_)));
        assert!(err.to_string().contains("force-free"));
    }

    #[test]
    fn split_is_ninety_ten_and_disjoint() {
        let (train, test) = split_indices(100, &mut rng_stream(0, 2));
        assert_eq!(train.len(), 90);
        assert_eq!(test.len(), 10);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        // Single-image corner: everything lands in train, test is empty.
        let (train, test) = split_indices(1, &mut rng_stream(0, 2));
        assert_eq!(train, vec![0]);
        assert!(test.is_empty());
    }

    #[test]
    fn provenance_lands_in_the_manifest() {
        let ds = toy_dataset(10, 6, 8);
        let hyper = tiny_hyper();
        let bundle = train_gan(&ds, &hyper).unwrap();
        let m = bundle.manifest();
        assert_eq!(m.seed, hyper.seed);
        assert_eq!(m.epochs, hyper.epochs);
        assert_eq!(m.dataset_checksum, ds.content_checksum().unwrap());
        assert_eq!(m.train_indices.len(), 9);
        assert_eq!(m.test_indices.len(), 1);
        assert_eq!(m.generator_widths, hyper.generator_widths);
        assert_eq!(m.discriminator_widths, hyper.discriminator_widths);
    }
}

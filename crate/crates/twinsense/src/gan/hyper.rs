//! Training hyperparameters and the named width profiles.

use serde::{Deserialize, Serialize};

use crate::nn::{Activation, ModelSpec};
use crate::{Error, Result};

/// Everything the adversarial training loop needs besides the dataset.
///
/// The generator maps `latent_dim → generator_widths… → n_pixels` with
/// batchnorm + ReLU on every hidden layer and a Tanh output (the data are
/// normalized to `[-1, 1]`). The discriminator maps `n_pixels →
/// discriminator_widths… → 1` with Leaky ReLU hidden layers and a Sigmoid
/// output. The pixel count comes from the dataset at training time, so one
/// profile serves any image size with the same interior widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanHyper {
    /// Dimension of the latent vector z.
    pub latent_dim: usize,
    /// Hidden widths between latent and image layer.
    pub generator_widths: Vec<usize>,
    /// Hidden widths between image layer and the scalar verdict.
    pub discriminator_widths: Vec<usize>,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Two-timescale update rule: the discriminator optimizer runs at
    /// `discriminator_lr_scale * learning_rate`. A faster discriminator keeps
    /// its verdicts near the decision boundary, which both sharpens the twin
    /// and keeps the feature-space score component informative; 1.0 recovers
    /// the symmetric schedule.
    #[serde(default = "default_discriminator_lr_scale")]
    pub discriminator_lr_scale: f64,
    pub adam_beta1: f64,
    pub seed: u64,
}

fn default_discriminator_lr_scale() -> f64 {
    1.0
}

impl GanHyper {
    /// Full-scale profile for 64x64 images: latent 100, five generator
    /// layers 100-256-512-1024-2048-4096, six discriminator layers
    /// 4096-1024-512-256-128-64-1.
    pub fn full() -> Self {
        Self {
            latent_dim: 100,
            generator_widths: vec![256, 512, 1024, 2048],
            discriminator_widths: vec![1024, 512, 256, 128, 64],
            epochs: 200,
            batch_size: 64,
            learning_rate: 2e-4,
            discriminator_lr_scale: 4.0,
            adam_beta1: 0.5,
            seed: 7,
        }
    }

    /// Desk-scale profile for 32x32 images, sized so that training on
    /// roughly a thousand shots stays in the minutes range on one core.
    pub fn desk() -> Self {
        Self {
            latent_dim: 64,
            generator_widths: vec![96, 160, 288, 512],
            discriminator_widths: vec![256, 128, 64, 48, 32],
            epochs: 130,
            batch_size: 32,
            learning_rate: 2e-4,
            discriminator_lr_scale: 4.0,
            adam_beta1: 0.5,
            seed: 7,
        }
    }

    /// Smoke-test profile for 16x16 images; small enough that a couple of
    /// thousand steps run in seconds.
    pub fn micro() -> Self {
        Self {
            latent_dim: 16,
            generator_widths: vec![32, 48, 64],
            discriminator_widths: vec![64, 32, 16],
            epochs: 20,
            batch_size: 16,
            learning_rate: 2e-4,
            discriminator_lr_scale: 1.0,
            adam_beta1: 0.5,
            seed: 7,
        }
    }

    /// Profile by CLI name.
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
        if self.latent_dim == 0 {
            return Err(Error::Config("latent dimension must be positive".into()));
        }
        if self.generator_widths.is_empty() || self.discriminator_widths.is_empty() {
            return Err(Error::Config(
                "generator and discriminator need at least one hidden layer".into(),
            ));
        }
        if self.generator_widths.contains(&0) || self.discriminator_widths.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        // Batchnorm statistics need a real mini-batch.
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.discriminator_lr_scale.is_finite() && self.discriminator_lr_scale > 0.0) {
            return Err(Error::Config(format!(
                "discriminator learning-rate scale must be positive, got {}",
                self.discriminator_lr_scale
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

    /// Generator architecture for a given image pixel count.
    pub fn generator_spec(&self, n_pixels: usize) -> Result<ModelSpec> {
        let mut dims = vec![self.latent_dim];
        dims.extend_from_slice(&self.generator_widths);
        dims.push(n_pixels);
        ModelSpec::chain(&dims, Activation::Relu, Activation::Tanh, true)
    }

    /// Discriminator architecture for a given image pixel count.
    pub fn discriminator_spec(&self, n_pixels: usize) -> Result<ModelSpec> {
        let mut dims = vec![n_pixels];
        dims.extend_from_slice(&self.discriminator_widths);
        dims.push(1);
        ModelSpec::chain(
            &dims,
            Activation::LeakyRelu { slope: 0.2 },
            Activation::Sigmoid,
            false,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_profile_matches_the_published_architecture() {
        let h = GanHyper::full();
        let g = h.generator_spec(4096).unwrap();
        let d = h.discriminator_spec(4096).unwrap();
        assert_eq!(g.layers.len(), 5);
        assert_eq!(d.layers.len(), 6);
        assert_eq!(g.input_dim(), 100);
        assert_eq!(g.output_dim(), 4096);
        assert_eq!(d.input_dim(), 4096);
        assert_eq!(d.output_dim(), 1);
        // Hidden generator layers carry batchnorm; the Tanh output does not.
        assert!(g.layers[..4].iter().all(|l| l.batchnorm));
        assert!(!g.layers[4].batchnorm);
        assert_eq!(g.layers[4].activation, Activation::Tanh);
        assert!(d.layers.iter().all(|l| !l.batchnorm));
        assert_eq!(d.layers[5].activation, Activation::Sigmoid);
    }

    #[test]
    fn named_lookup_covers_profiles_and_rejects_typos() {
        assert_eq!(GanHyper::named("desk").unwrap(), GanHyper::desk());
        assert_eq!(GanHyper::named("full").unwrap(), GanHyper::full());
        assert_eq!(GanHyper::named("micro").unwrap(), GanHyper::micro());
        assert!(matches!(GanHyper::named("big"), Err(Error::Config(_))));
    }

    #[test]
    fn validation_rejects_degenerate_settings() {
        for tweak in [
            |h: &mut GanHyper| h.latent_dim = 0,
            |h: &mut GanHyper| h.generator_widths.clear(),
            |h: &mut GanHyper| h.epochs = 0,
            |h: &mut GanHyper| h.batch_size = 1,
            |h: &mut GanHyper| h.learning_rate = 0.0,
            |h: &mut GanHyper| h.discriminator_lr_scale = f64::NAN,
            |h: &mut GanHyper| h.adam_beta1 = 1.0,
        ] {
            let mut h = GanHyper::micro();
            tweak(&mut h);
            assert!(h.validate().is_err());
        }
        assert!(GanHyper::desk().validate().is_ok());
    }
}

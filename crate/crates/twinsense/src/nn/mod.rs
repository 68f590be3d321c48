//! Minimal dense-network engine: forward evaluation, exact backpropagation,
//! and adaptive-moment optimization for small fully-connected models.
//!
//! Everything is generic over [`Scalar`] so the same code path runs in `f32`
//! for training and in `f64` for finite-difference verification.

mod activation;
mod checkpoint;
mod layer;
mod loss;
mod matrix;
mod model;
mod optimizer;

pub use activation::Activation;
pub use checkpoint::{load_model, model_checksum, save_model, CheckpointHeader};
pub use layer::{BatchNorm, DenseLayer};
pub use loss::{bce_loss, bce_loss_batch};
pub use matrix::Matrix;
pub use model::{ForwardCache, Gradients, LayerSpec, MlpModel, Mode, ModelSpec, ParamBlock};
pub use optimizer::OptimizerState;

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar used by the network engine.
///
/// `f32` is the training precision; `f64` instantiations back the
/// finite-difference gradient oracles.
pub trait Scalar:
    Float + num_traits::NumAssign + Copy + Send + Sync + std::fmt::Debug + std::fmt::Display + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// One standard-normal draw, taken from the `f64` stream so that a model
    /// built at either precision consumes the RNG identically.
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let v: f64 = StandardNormal.sample(rng);
        Self::from_f64(v)
    }
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

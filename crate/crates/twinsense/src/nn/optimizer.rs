//! Adaptive-moment (Adam) parameter updates with bias correction.

use crate::nn::model::{Gradients, MlpModel, ParamBlock};
use crate::nn::Scalar;
use crate::{Error, Result};

/// First/second-moment accumulators plus hyperparameters for one model.
///
/// The state is congruent with the model it was built from; feeding it a
/// different model or mismatched gradients is a contract error.
#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    lr: T,
    beta1: T,
    beta2: T,
    epsilon: T,
    t: u64,
    m: Vec<ParamBlock<T>>,
    v: Vec<ParamBlock<T>>,
}

impl<T: Scalar> OptimizerState<T> {
    pub const DEFAULT_LR: f64 = 2e-4;
    pub const DEFAULT_BETA1: f64 = 0.5;
    pub const DEFAULT_BETA2: f64 = 0.999;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    /// Zeroed moments with the default hyperparameters.
    pub fn new(model: &MlpModel<T>) -> Self {
        Self::with_hyper(
            model,
            Self::DEFAULT_LR,
            Self::DEFAULT_BETA1,
            Self::DEFAULT_BETA2,
            Self::DEFAULT_EPSILON,
        )
        .expect("default hyperparameters are valid")
    }

    pub fn with_hyper(
        model: &MlpModel<T>,
        lr: f64,
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Config("moment decays must lie in [0, 1)".into()));
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        let zeros: Vec<ParamBlock<T>> = model
            .layers()
            .iter()
            .map(ParamBlock::zeros_like)
            .collect();
        Ok(Self {
            lr: T::from_f64(lr),
            beta1: T::from_f64(beta1),
            beta2: T::from_f64(beta2),
            epsilon: T::from_f64(epsilon),
            t: 0,
            m: zeros.clone(),
            v: zeros,
        })
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update in place. Gradients must be finite and
    /// congruent with the model.
    pub fn step(&mut self, model: &mut MlpModel<T>, grads: &Gradients<T>) -> Result<()> {
        if grads.blocks.len() != model.layers().len() || self.m.len() != model.layers().len() {
            return Err(Error::Contract(
                "optimizer state, model, and gradients do not describe the same stack".into(),
            ));
        }
        for (i, (g, layer)) in grads.blocks.iter().zip(model.layers()).enumerate() {
            let bn_dim = layer.batchnorm().map(|bn| bn.gamma.len()).unwrap_or(0);
            if g.weights.len() != layer.in_dim() * layer.out_dim()
                || g.bias.len() != layer.out_dim()
                || g.gamma.len() != bn_dim
                || g.beta.len() != bn_dim
            {
                return Err(Error::Contract(format!(
                    "gradient shapes do not match layer {i}"
                )));
            }
            if !g.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite gradient in layer {i}"
                )));
            }
        }

        self.t += 1;
        // Bias corrections are scalars; compute once in f64.
        let bc1 = T::from_f64(1.0 - self.beta1.to_f64().powi(self.t as i32));
        let bc2 = T::from_f64(1.0 - self.beta2.to_f64().powi(self.t as i32));
        let (lr, b1, b2, eps) = (self.lr, self.beta1, self.beta2, self.epsilon);
        let one = T::one();

        let update = |p: &mut [T], g: &[T], m: &mut [T], v: &mut [T]| {
            for k in 0..p.len() {
                m[k] = b1 * m[k] + (one - b1) * g[k];
                v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
                let mhat = m[k] / bc1;
                let vhat = v[k] / bc2;
                p[k] -= lr * mhat / (vhat.sqrt() + eps);
            }
        };

        for (i, layer) in model.layers_mut().iter_mut().enumerate() {
            let g = &grads.blocks[i];
            update(&mut layer.weights, &g.weights, &mut self.m[i].weights, &mut self.v[i].weights);
            update(&mut layer.bias, &g.bias, &mut self.m[i].bias, &mut self.v[i].bias);
            if let Some(bn) = &mut layer.batchnorm {
                update(&mut bn.gamma, &g.gamma, &mut self.m[i].gamma, &mut self.v[i].gamma);
                update(&mut bn.beta, &g.beta, &mut self.m[i].beta, &mut self.v[i].beta);
            }
        }
        model.bump_revision();
        Ok(())
    }
}

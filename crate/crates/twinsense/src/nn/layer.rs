//! Dense layer: affine transform, optional batch normalization, activation.

use rand::Rng;

use crate::nn::{Activation, Scalar};
use crate::{Error, Result};

/// Per-feature batch normalization state.
///
/// Train-mode forwards normalize with mini-batch statistics and fold the
/// batch mean/variance into the running estimates; Eval-mode forwards use the
/// running estimates only, which makes them deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    /// Variance floor added before the square root.
    pub epsilon: f64,
    /// Retention factor for the running statistics:
    /// `running = momentum * running + (1 - momentum) * batch`.
    pub momentum: f64,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![T::one(); dim],
            beta: vec![T::zero(); dim],
            running_mean: vec![T::zero(); dim],
            running_var: vec![T::one(); dim],
            epsilon: 1e-5,
            momentum: 0.9,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.gamma.len() != dim
            || self.beta.len() != dim
            || self.running_mean.len() != dim
            || self.running_var.len() != dim
        {
            return Err(Error::Config(format!(
                "batchnorm parameter length does not match feature dim {dim}"
            )));
        }
        // Negated comparisons so that NaN also fails the check.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.epsilon > 0.0) {
            return Err(Error::Config("batchnorm epsilon must be positive".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if self.running_var.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::Config(
                "batchnorm running variance must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// `y = activation(batchnorm(W x + b))`, batchnorm optional.
///
/// Weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T> {
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
    pub(crate) weights: Vec<T>,
    pub(crate) bias: Vec<T>,
    pub(crate) activation: Activation,
    pub(crate) batchnorm: Option<BatchNorm<T>>,
}

impl<T: Scalar> DenseLayer<T> {
    /// Seeded initialization: weights ~ Normal(0, 0.02), biases zero.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        batchnorm: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::Config("layer dims must be positive".into()));
        }
        activation.validate()?;
        let std = T::from_f64(0.02);
        let weights = (0..in_dim * out_dim)
            .map(|_| T::standard_normal(rng) * std)
            .collect();
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias: vec![T::zero(); out_dim],
            activation,
            batchnorm: batchnorm.then(|| BatchNorm::new(out_dim)),
        })
    }

    /// Layer with explicit parameters (no batchnorm).
    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<T>,
        bias: Vec<T>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::Invalid(format!(
                "weight/bias buffers do not match a ({out_dim} x {in_dim}) layer"
            )));
        }
        activation.validate()?;
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
            batchnorm: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.in_dim * self.out_dim {
            return Err(Error::Config(format!(
                "weight matrix is not ({} x {})",
                self.out_dim, self.in_dim
            )));
        }
        if self.bias.len() != self.out_dim {
            return Err(Error::Config("bias length does not match out_dim".into()));
        }
        self.activation.validate()?;
        if let Some(bn) = &self.batchnorm {
            bn.validate(self.out_dim)?;
        }
        Ok(())
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn batchnorm(&self) -> Option<&BatchNorm<T>> {
        self.batchnorm.as_ref()
    }

    pub fn parameter_count(&self) -> usize {
        let bn = if self.batchnorm.is_some() {
            2 * self.out_dim
        } else {
            0
        };
        self.weights.len() + self.bias.len() + bn
    }
}

//! Element-wise activations with derivatives recoverable from the output.

use serde::{Deserialize, Serialize};

use crate::nn::Scalar;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        if let Activation::LeakyRelu { slope } = self {
            if !(*slope > 0.0 && *slope < 1.0) {
                return Err(Error::Config(format!(
                    "leaky relu slope must lie in (0,1), got {slope}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn forward<T: Scalar>(&self, z: T) -> T {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > T::zero() {
                    z
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > T::zero() {
                    z
                } else {
                    z * T::from_f64(*slope)
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
        }
    }

    /// Derivative dy/dz expressed through the post-activation value `y`.
    ///
    /// Valid for every member of this enum: all are monotone maps whose
    /// derivative is recoverable from the output alone.
    #[inline]
    pub fn grad_from_output<T: Scalar>(&self, y: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu { slope } => {
                if y > T::zero() {
                    T::one()
                } else {
                    T::from_f64(*slope)
                }
            }
            Activation::Tanh => T::one() - y * y,
            Activation::Sigmoid => y * (T::one() - y),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_stays_strictly_inside_unit_interval() {
        // Past |z| ~ 37 the open interval closes in f64 (1 + e^-z rounds to
        // 1), which is why downstream losses clamp; strictness is only
        // checkable below saturation.
        for z in [-30.0f64, -5.0, 0.0, 5.0, 30.0] {
            let y = Activation::Sigmoid.forward(z);
            assert!(y > 0.0 && y < 1.0, "sigmoid({z}) = {y}");
        }
        for z in [-500.0f64, 500.0] {
            let y = Activation::Sigmoid.forward(z);
            assert!((0.0..=1.0).contains(&y), "sigmoid({z}) = {y}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let acts = [
            Activation::Identity,
            Activation::Relu,
            Activation::LeakyRelu { slope: 0.2 },
            Activation::Tanh,
            Activation::Sigmoid,
        ];
        let h = 1e-6f64;
        for act in acts {
            for z in [-1.3f64, -0.4, 0.7, 2.1] {
                let y = act.forward(z);
                let numeric = (act.forward(z + h) - act.forward(z - h)) / (2.0 * h);
                let analytic = act.grad_from_output(y);
                assert!(
                    (numeric - analytic).abs() < 1e-6,
                    "{act:?} at {z}: {analytic} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn slope_domain_is_enforced() {
        assert!(Activation::LeakyRelu { slope: 1.2 }.validate().is_err());
        assert!(Activation::LeakyRelu { slope: 0.0 }.validate().is_err());
        assert!(Activation::LeakyRelu { slope: 0.2 }.validate().is_ok());
    }
}

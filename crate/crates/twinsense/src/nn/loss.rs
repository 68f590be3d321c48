//! Binary cross-entropy with probability clamping.

use crate::nn::{Matrix, Scalar};
use crate::{Error, Result};

/// Probabilities are clamped to `[CLAMP, 1 - CLAMP]` before taking logs so a
/// saturated discriminator output cannot produce an infinite loss.
pub const CLAMP: f64 = 1e-7;

fn check_pair<T: Scalar>(prediction: T, target: T) -> Result<()> {
    if !prediction.is_finite() || prediction < T::zero() || prediction > T::one() {
        return Err(Error::Invalid(format!(
            "prediction {prediction} is not a probability"
        )));
    }
    if !(target == T::zero() || target == T::one()) {
        return Err(Error::Invalid(format!(
            "binary target must be exactly 0 or 1, got {target}"
        )));
    }
    Ok(())
}

fn clamped<T: Scalar>(p: T) -> T {
    let lo = T::from_f64(CLAMP);
    let hi = T::one() - lo;
    if p < lo {
        lo
    } else if p > hi {
        hi
    } else {
        p
    }
}

/// `-(t ln p + (1-t) ln(1-p))` for a single prediction.
pub fn bce_loss<T: Scalar>(prediction: T, target: T) -> Result<T> {
    check_pair(prediction, target)?;
    let p = clamped(prediction);
    Ok(-(target * p.ln() + (T::one() - target) * (T::one() - p).ln()))
}

/// Mean loss over a column of predictions plus `dL/dp` per sample.
///
/// The gradient is of the mean, i.e. already divided by the batch size, and
/// uses the clamped probability so it stays finite at saturation.
pub fn bce_loss_batch<T: Scalar>(
    predictions: &Matrix<T>,
    targets: &[T],
) -> Result<(T, Matrix<T>)> {
    if predictions.cols() != 1 {
        return Err(Error::Invalid(
            "bce expects a single prediction column".into(),
        ));
    }
    if predictions.rows() != targets.len() || targets.is_empty() {
        return Err(Error::Invalid(format!(
            "{} predictions vs {} targets",
            predictions.rows(),
            targets.len()
        )));
    }
    let n = T::from_f64(targets.len() as f64);
    let mut grad = Matrix::zeros(predictions.rows(), 1);
    let mut total = T::zero();
    for (s, &t) in targets.iter().enumerate() {
        check_pair(predictions.row(s)[0], t)?;
        let p = clamped(predictions.row(s)[0]);
        total += -(t * p.ln() + (T::one() - t) * (T::one() - p).ln());
        // d/dp [-(t ln p + (1-t) ln(1-p))] = (p - t) / (p (1 - p))
        grad.row_mut(s)[0] = (p - t) / (p * (T::one() - p) * n);
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_prediction_costs_ln_two() {
        let l = bce_loss(0.5f64, 1.0).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let l0 = bce_loss(0.5f64, 0.0).unwrap();
        assert_eq!(l, l0);
    }

    #[test]
    fn loss_is_nonnegative_and_finite_at_saturation() {
        for (p, t) in [(0.0f64, 1.0), (1.0, 0.0), (0.0, 0.0), (1.0, 1.0)] {
            let l = bce_loss(p, t).unwrap();
            assert!(l.is_finite() && l >= 0.0, "bce({p}, {t}) = {l}");
        }
        // Fully wrong saturated prediction hits the clamp ceiling.
        let worst = bce_loss(0.0f64, 1.0).unwrap();
        assert!((worst + CLAMP.ln()).abs() < 1e-9);
    }

    #[test]
    fn symmetric_under_label_flip() {
        for p in [0.1f64, 0.3, 0.7, 0.95] {
            let a = bce_loss(p, 1.0).unwrap();
            let b = bce_loss(1.0 - p, 0.0).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_non_binary_targets_and_bad_probabilities() {
        assert!(bce_loss(0.5f64, 0.5).is_err());
        assert!(bce_loss(1.5f64, 1.0).is_err());
        assert!(bce_loss(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let preds = Matrix::from_vec(3, 1, vec![0.2f64, 0.6, 0.9]);
        let targets = [1.0, 0.0, 1.0];
        let (_, grad) = bce_loss_batch(&preds, &targets).unwrap();
        let h = 1e-7;
        for s in 0..3 {
            let mut up = preds.clone();
            up.row_mut(s)[0] += h;
            let mut dn = preds.clone();
            dn.row_mut(s)[0] -= h;
            let (lp, _) = bce_loss_batch(&up, &targets).unwrap();
            let (lm, _) = bce_loss_batch(&dn, &targets).unwrap();
            let numeric = (lp - lm) / (2.0 * h);
            assert!(
                (grad.row(s)[0] - numeric).abs() < 1e-5,
                "sample {s}: {} vs {numeric}",
                grad.row(s)[0]
            );
        }
    }

    #[test]
    fn batch_mean_matches_scalar_losses() {
        let preds = Matrix::from_vec(2, 1, vec![0.3f64, 0.8]);
        let targets = [0.0, 1.0];
        let (mean, _) = bce_loss_batch(&preds, &targets).unwrap();
        let expect = (bce_loss(0.3, 0.0).unwrap() + bce_loss(0.8, 1.0).unwrap()) / 2.0;
        assert!((mean - expect).abs() < 1e-15);
    }
}

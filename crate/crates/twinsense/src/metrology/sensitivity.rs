//! One-sigma force sensitivity and signal-to-noise ratio.

use serde::{Deserialize, Serialize};

use crate::metrology::{linear_response_fit, GroupStat};
use crate::{Error, Result};

/// Minimum coefficient of determination for a response fit to count as a
/// usable calibration.
pub const DEFAULT_R2_FLOOR: f64 = 0.8;

/// Everything needed to quote a sensitivity: `s = sqrt(t0) * sigma0 / slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityEstimate {
    /// Sample standard deviation of the force-free signal, signal units.
    pub sigma0: f64,
    /// Response magnitude |dq/dF|, signal units per newton.
    pub slope: f64,
    /// Cycle time, seconds per shot.
    pub t0: f64,
    /// One-sigma sensitivity, N/sqrt(Hz).
    pub s: f64,
    /// Determination coefficient of the underlying response fit (1.0 when
    /// constructed directly from parts).
    pub fit_r2: f64,
    pub groups: Vec<GroupStat>,
}

impl SensitivityEstimate {
    /// Direct construction from known parts; `slope` is taken as a
    /// magnitude and must be nonzero.
    pub fn from_parts(sigma0: f64, slope_per_newton: f64, t0: f64) -> Result<Self> {
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(Error::Invalid(format!(
                "sigma0 must be positive, got {sigma0}"
            )));
        }
        if !slope_per_newton.is_finite() || slope_per_newton == 0.0 {
            return Err(Error::NoSignal(format!(
                "response slope must be nonzero, got {slope_per_newton}"
            )));
        }
        if !(t0.is_finite() && t0 > 0.0) {
            return Err(Error::Invalid(format!("t0 must be positive, got {t0}")));
        }
        let slope = slope_per_newton.abs();
        Ok(Self {
            sigma0,
            slope,
            t0,
            s: t0.sqrt() * sigma0 / slope,
            fit_r2: 1.0,
            groups: Vec::new(),
        })
    }
}

/// Sensitivity from raw series: force-free samples set `sigma0`, and a
/// linear response fit of group means vs impulse sets the slope.
///
/// `delta_t_max` is the acting-time convention converting the fitted
/// per-newton-second slope to per-newton units (`dq/dF = dq/dI * delta_t`).
pub fn sensitivity(
    force_free: &[f64],
    groups: &[(f64, Vec<f64>)],
    t0: f64,
    delta_t_max: f64,
) -> Result<SensitivityEstimate> {
    sensitivity_with_floor(force_free, groups, t0, delta_t_max, DEFAULT_R2_FLOOR)
}

pub fn sensitivity_with_floor(
    force_free: &[f64],
    groups: &[(f64, Vec<f64>)],
    t0: f64,
    delta_t_max: f64,
    r2_floor: f64,
) -> Result<SensitivityEstimate> {
    if force_free.len() < 30 {
        return Err(Error::Invalid(format!(
            "need at least 30 force-free samples for sigma0, got {}",
            force_free.len()
        )));
    }
    if force_free.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite force-free sample".into()));
    }
    if !(delta_t_max.is_finite() && delta_t_max > 0.0) {
        return Err(Error::Invalid(format!(
            "delta_t_max must be positive, got {delta_t_max}"
        )));
    }
    let n = force_free.len() as f64;
    let mean = force_free.iter().sum::<f64>() / n;
    let sigma0 =
        (force_free.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sigma0 == 0.0 {
        return Err(Error::Degenerate(
            "force-free signal has zero variance; sensitivity is ill-defined".into(),
        ));
    }

    let fit = linear_response_fit(groups)?;
    if fit.r2 < r2_floor {
        return Err(Error::NoSignal(format!(
            "response fit r2 {:.3} is below the floor {r2_floor}; slope unreliable",
            fit.r2
        )));
    }
    let slope_per_newton = fit.slope * delta_t_max;
    if slope_per_newton == 0.0 {
        return Err(Error::NoSignal("response slope is exactly zero".into()));
    }

    let mut est = SensitivityEstimate::from_parts(sigma0, slope_per_newton, t0)?;
    est.fit_r2 = fit.r2;
    est.groups = fit.groups;
    Ok(est)
}

/// Shot-averaged signal-to-noise ratio `sqrt(N) * slope * F / sigma0`.
pub fn snr(estimate: &SensitivityEstimate, force: f64, n_shots: usize) -> Result<f64> {
    if n_shots == 0 {
        return Err(Error::Invalid("SNR needs at least one shot".into()));
    }
    if !force.is_finite() {
        return Err(Error::Invalid(format!("force must be finite, got {force}")));
    }
    Ok((n_shots as f64).sqrt() * estimate.slope * force.abs() / estimate.sigma0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn unit_oracle_is_exact() {
        let est = SensitivityEstimate::from_parts(2.0, 4.0, 9.0).unwrap();
        assert_eq!(est.s, 1.5);
    }

    #[test]
    fn negative_slope_contributes_its_magnitude() {
        let est = SensitivityEstimate::from_parts(2.0, -4.0, 9.0).unwrap();
        assert_eq!(est.slope, 4.0);
        assert_eq!(est.s, 1.5);
    }

    #[test]
    fn affine_signal_transform_leaves_s_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let force_free: Vec<f64> = (0..200)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                5.0 + 0.3 * e
            })
            .collect();
        let groups: Vec<(f64, Vec<f64>)> = [0.0, 1e-26, 2e-26, 3e-26]
            .iter()
            .map(|i| {
                let samples: Vec<f64> = (0..50)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        5.0 + 2e26 * i + 0.3 * e
                    })
                    .collect();
                (*i, samples)
            })
            .collect();
        let base = sensitivity(&force_free, &groups, 38.0, 1.0).unwrap();

        for (a, b) in [(3.0, -7.0), (-2.0, 11.0), (0.5, 0.0)] {
            let ff: Vec<f64> = force_free.iter().map(|q| a * q + b).collect();
            let gs: Vec<(f64, Vec<f64>)> = groups
                .iter()
                .map(|(i, s)| (*i, s.iter().map(|q| a * q + b).collect()))
                .collect();
            let scaled = sensitivity(&ff, &gs, 38.0, 1.0).unwrap();
            let rel = (scaled.s - base.s).abs() / base.s;
            assert!(rel < 1e-12, "a={a}, b={b}: relative change {rel}");
        }
    }

    #[test]
    fn snr_scales_as_sqrt_shots_and_vanishes_at_zero_force() {
        let est = SensitivityEstimate::from_parts(1.0, 1.0, 38.0).unwrap();
        // slope * F == sigma0 at one shot.
        assert_eq!(snr(&est, 1.0, 1).unwrap(), 1.0);
        let one = snr(&est, 2.0, 1).unwrap();
        assert_eq!(snr(&est, 2.0, 4).unwrap(), 2.0 * one);
        assert_eq!(snr(&est, 0.0, 100).unwrap(), 0.0);
        assert!(snr(&est, 1.0, 0).is_err());
    }

    #[test]
    fn too_few_force_free_samples_are_rejected() {
        let groups = vec![(0.0, vec![0.0, 0.1]), (1.0, vec![1.0, 1.1])];
        let err = sensitivity(&[1.0; 29], &groups, 38.0, 1.0);
        assert!(matches!(err, Err(Error::Invalid(_))));
    }

    #[test]
    fn zero_variance_and_flat_response_are_errors() {
        let groups = vec![(0.0, vec![0.0, 0.1]), (1.0, vec![1.0, 1.1])];
        assert!(matches!(
            sensitivity(&[2.0; 40], &groups, 38.0, 1.0),
            Err(Error::Degenerate(_))
        ));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ff: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
        let flat = vec![(0.0, vec![1.0, 1.0, 1.0]), (1.0, vec![1.0, 1.0, 1.0])];
        assert!(matches!(
            sensitivity(&ff, &flat, 38.0, 1.0),
            Err(Error::NoSignal(_))
        ));
    }

    #[test]
    fn poor_fit_quality_is_refused() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ff: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
        // Means wildly nonlinear in impulse: r2 far below the floor.
        let groups = vec![
            (0.0, vec![0.0, 0.0]),
            (1.0, vec![5.0, 5.0]),
            (2.0, vec![-5.0, -5.0]),
            (3.0, vec![5.0, 5.0]),
        ];
        assert!(matches!(
            sensitivity(&ff, &groups, 38.0, 1.0),
            Err(Error::NoSignal(_))
        ));
    }

    #[test]
    fn delta_t_convention_converts_slope_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ff: Vec<f64> = (0..100)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                0.1 * e
            })
            .collect();
        let groups: Vec<(f64, Vec<f64>)> = [0.0, 1.0, 2.0]
            .iter()
            .map(|i| (*i, vec![3.0 * i; 5]))
            .collect();
        let a = sensitivity(&ff, &groups, 9.0, 1.0).unwrap();
        let b = sensitivity(&ff, &groups, 9.0, 2.0).unwrap();
        // Doubling the acting time doubles dq/dF, halving S.
        assert!((a.s / b.s - 2.0).abs() < 1e-12);
    }
}

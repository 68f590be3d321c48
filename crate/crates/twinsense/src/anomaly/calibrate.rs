//! λ calibration: sweep the mixing weight over a grid and keep the value
//! that minimizes the one-sigma sensitivity.
//!
//! The search needs force-on data — a sensitivity requires a response
//! slope, and a slope requires scored shots at two or more impulse levels.
//! The models themselves stay strictly force-free-trained; only this final
//! weighting step consumes labeled calibration shots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrology::{sensitivity, SensitivityEstimate};
use crate::{Error, Result};

use super::score::{validate_lambda, ScoreSeries};

/// 101 uniform grid points spanning [-1, 1] in steps of 0.02, built as
/// `(i - 50) / 50` so both endpoints are exactly representable.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=100).map(|i| (i as f64 - 50.0) / 50.0).collect()
}

/// Outcome of the grid search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaCalibration {
    pub lambda_op: f64,
    /// Full sensitivity estimate at the optimum.
    pub estimate: SensitivityEstimate,
    /// One `(λ, S)` point per grid entry, in grid order; `None` where the
    /// response was too degenerate to quote a sensitivity at that λ.
    pub curve: Vec<(f64, Option<f64>)>,
}

/// Finds `λ_op = argmin S(λ)` over the grid.
///
/// Both series must carry the per-shot loss terms from the same frozen
/// models: `force_free` (impulse 0 throughout) sets `σ0(λ)` while `forced`
/// (≥2 impulse levels) sets the response slope. Grid points where the
/// sensitivity is undefined — flat response or zero variance — become
/// `None` curve points; if that happens everywhere the search fails with a
/// no-signal error. Ties prefer the smallest `|λ|`, i.e. the simplest
/// score.
pub fn calibrate_lambda(
    force_free: &ScoreSeries,
    forced: &ScoreSeries,
    t0: f64,
    delta_t_max: f64,
    grid: &[f64],
) -> Result<LambdaCalibration> {
    if grid.is_empty() {
        return Err(Error::Invalid("lambda grid cannot be empty".into()));
    }
    for &l in grid {
        validate_lambda(l)?;
    }
    if force_free.rows.iter().any(|r| r.impulse != 0.0) {
        return Err(Error::Invalid(
            "sigma0 series must be force-free, but it carries nonzero impulses".into(),
        ));
    }

    let evaluated: Vec<Result<Option<SensitivityEstimate>>> = grid
        .par_iter()
        .map(|&l| {
            let ff = force_free.rescore(l)?;
            let fz = forced.rescore(l)?;
            match sensitivity(&ff.scores(), &fz.impulse_groups(), t0, delta_t_max) {
                Ok(est) => Ok(Some(est)),
                // A single λ may wash out the response or the variance;
                // that is a data point of the sweep, not a failure.
                Err(Error::NoSignal(_)) | Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut curve = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, SensitivityEstimate)> = None;
    for (&l, point) in grid.iter().zip(evaluated) {
        let point = point?;
        curve.push((l, point.as_ref().map(|est| est.s)));
        if let Some(est) = point {
            let replace = match &best {
                None => true,
                Some((bl, best_est)) => est
                    .s
                    .total_cmp(&best_est.s)
                    .then(l.abs().total_cmp(&bl.abs()))
                    .then(l.total_cmp(bl))
                    .is_lt(),
            };
            if replace {
                best = Some((l, est));
            }
        }
    }

    match best {
        Some((lambda_op, estimate)) => Ok(LambdaCalibration {
            lambda_op,
            estimate,
            curve,
        }),
        None => Err(Error::NoSignal(
            "response is degenerate at every grid point; nothing to calibrate".into(),
        )),
    }
}

//! Linear response fit of a signal against applied impulse.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-impulse-level summary of the signal samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStat {
    /// Impulse of this group, newton-seconds.
    pub impulse: f64,
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator); 0 for n == 1.
    pub std: f64,
    pub n: usize,
}

/// Least-squares line through the group means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseFit {
    /// Signal units per newton-second of impulse.
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination over the group means.
    pub r2: f64,
    /// True when only two levels were fitted (r2 = 1 by construction).
    pub underdetermined: bool,
    pub groups: Vec<GroupStat>,
}

fn summarize(impulse: f64, samples: &[f64]) -> GroupStat {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    GroupStat {
        impulse,
        mean,
        std,
        n,
    }
}

/// Fits group-mean signal vs impulse.
///
/// Needs at least two distinct impulse levels with at least two samples
/// each; the fit is unweighted over the level means.
pub fn linear_response_fit(groups: &[(f64, Vec<f64>)]) -> Result<ResponseFit> {
    if groups.len() < 2 {
        return Err(Error::Invalid(
            "need at least two impulse levels to fit a response".into(),
        ));
    }
    for (impulse, samples) in groups {
        if !impulse.is_finite() {
            return Err(Error::Invalid(format!("non-finite impulse {impulse}")));
        }
        if samples.len() < 2 {
            return Err(Error::Invalid(format!(
                "impulse level {impulse:.3e} has {} sample(s); need at least 2",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite signal sample at impulse {impulse:.3e}"
            )));
        }
    }
    let stats: Vec<GroupStat> = groups
        .iter()
        .map(|(i, s)| summarize(*i, s))
        .collect();

    let n = stats.len() as f64;
    let mx = stats.iter().map(|g| g.impulse).sum::<f64>() / n;
    let my = stats.iter().map(|g| g.mean).sum::<f64>() / n;
    let sxx: f64 = stats.iter().map(|g| (g.impulse - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate(
            "all impulse levels identical: response slope is undefined".into(),
        ));
    }
    let sxy: f64 = stats
        .iter()
        .map(|g| (g.impulse - mx) * (g.mean - my))
        .sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;

    let ss_tot: f64 = stats.iter().map(|g| (g.mean - my).powi(2)).sum();
    let ss_res: f64 = stats
        .iter()
        .map(|g| (g.mean - (slope * g.impulse + intercept)).powi(2))
        .sum();
    let r2 = if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };

    Ok(ResponseFit {
        slope,
        intercept,
        r2,
        underdetermined: stats.len() == 2,
        groups: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn exact_line_is_recovered_exactly() {
        // y = 3 I + 1, three levels, noiseless.
        let groups: Vec<(f64, Vec<f64>)> = [0.0, 1.0, 2.0]
            .iter()
            .map(|i| (*i, vec![3.0 * i + 1.0; 4]))
            .collect();
        let fit = linear_response_fit(&groups).unwrap();
        assert!((fit.slope - 3.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(!fit.underdetermined);
    }

    #[test]
    fn noisy_line_slope_lands_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (true_slope, sigma, n_per) = (2.0, 0.5, 200usize);
        let levels = [0.0, 0.5, 1.0, 1.5, 2.0];
        let groups: Vec<(f64, Vec<f64>)> = levels
            .iter()
            .map(|i| {
                let samples = (0..n_per)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        true_slope * i + sigma * e
                    })
                    .collect();
                (*i, samples)
            })
            .collect();
        let fit = linear_response_fit(&groups).unwrap();
        // Group means have std sigma/sqrt(n_per); slope std follows from sxx.
        let mx = levels.iter().sum::<f64>() / 5.0;
        let sxx: f64 = levels.iter().map(|i| (i - mx).powi(2)).sum();
        let slope_sigma = sigma / (n_per as f64).sqrt() / sxx.sqrt();
        assert!(
            (fit.slope - true_slope).abs() < 3.0 * slope_sigma,
            "slope {} vs {true_slope} +/- {slope_sigma}",
            fit.slope
        );
    }

    #[test]
    fn two_levels_fit_perfectly_but_are_flagged() {
        let groups = vec![(0.0, vec![1.0, 1.2]), (1.0, vec![2.9, 3.1])];
        let fit = linear_response_fit(&groups).unwrap();
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert!(fit.underdetermined);
    }

    #[test]
    fn identical_levels_are_rank_deficient() {
        let groups = vec![(1.0, vec![1.0, 2.0]), (1.0, vec![1.5, 2.5])];
        assert!(matches!(
            linear_response_fit(&groups),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn undersized_groups_are_rejected() {
        let groups = vec![(0.0, vec![1.0]), (1.0, vec![2.0, 3.0])];
        assert!(matches!(
            linear_response_fit(&groups),
            Err(Error::Invalid(_))
        ));
        assert!(linear_response_fit(&groups[..1]).is_err());
    }

    #[test]
    fn group_summaries_carry_sample_statistics() {
        let groups = vec![(0.0, vec![1.0, 3.0]), (1.0, vec![4.0, 6.0])];
        let fit = linear_response_fit(&groups).unwrap();
        assert_eq!(fit.groups[0].mean, 2.0);
        assert!((fit.groups[0].std - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(fit.groups[0].n, 2);
    }
}

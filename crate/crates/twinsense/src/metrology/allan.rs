//! Overlapping Allan deviation for shot-sequence stability analysis.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Allan deviation per integration time, with the log-log slope attached.
///
/// For a white-noise signal the deviation falls as `1/sqrt(tau)` (slope
/// -0.5); slow drift turns the slope positive at long tau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllanSeries {
    /// Integration times, seconds; strictly increasing.
    pub taus: Vec<f64>,
    /// Overlapping Allan deviation at each tau, signal units.
    pub deviations: Vec<f64>,
    /// Number of overlapping cluster pairs entering each estimate.
    pub n_clusters: Vec<usize>,
    /// Requested taus that exceeded the series span and were omitted.
    pub omitted_taus: Vec<f64>,
    /// Least-squares slope of ln(deviation) vs ln(tau); `None` when fewer
    /// than two positive deviations are available.
    pub loglog_slope: Option<f64>,
}

/// Octave-spaced cluster sizes `1, 2, 4, ...` that keep at least two
/// overlapping cluster pairs in a series of length `n`.
pub fn default_cluster_sizes(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut m = 1usize;
    // Need n - 2m + 1 >= 2 cluster pairs, i.e. 2m + 1 <= n.
    while 2 * m < n {
        out.push(m);
        m *= 2;
    }
    out
}

/// Overlapping Allan deviation of a uniformly sampled signal.
///
/// `t0` is the sampling period (seconds per shot) and `cluster_sizes` the
/// averaging lengths m, giving tau = m * t0. For each m:
///
/// ```text
/// avar(m) = 1 / (2 (M - 2m + 1)) * sum_j (mean_{j+m..j+2m} - mean_{j..j+m})^2
/// ```
///
/// Cluster sizes that leave fewer than two overlapping pairs are omitted
/// and reported in `omitted_taus`.
pub fn allan_deviation(signal: &[f64], t0: f64, cluster_sizes: &[usize]) -> Result<AllanSeries> {
    if signal.len() < 3 {
        return Err(Error::Invalid(format!(
            "Allan analysis needs at least 3 samples, got {}",
            signal.len()
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite sample in signal series".into()));
    }
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::Invalid(format!("t0 must be positive, got {t0}")));
    }
    if cluster_sizes.is_empty() {
        return Err(Error::Invalid("no cluster sizes requested".into()));
    }
    let mut ms: Vec<usize> = cluster_sizes.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if ms[0] == 0 {
        return Err(Error::Invalid("cluster size 0 is meaningless".into()));
    }

    // Prefix sums: cluster mean over [j, j+m) in O(1).
    let n = signal.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0;
    for v in signal {
        acc += v;
        prefix.push(acc);
    }
    let cluster_mean = |j: usize, m: usize| (prefix[j + m] - prefix[j]) / m as f64;

    let mut taus = Vec::new();
    let mut deviations = Vec::new();
    let mut n_clusters = Vec::new();
    let mut omitted = Vec::new();
    for &m in &ms {
        if 2 * m + 1 > n {
            omitted.push(m as f64 * t0);
            continue;
        }
        let pairs = n - 2 * m + 1;
        let mut sum = 0.0;
        for j in 0..pairs {
            let d = cluster_mean(j + m, m) - cluster_mean(j, m);
            sum += d * d;
        }
        taus.push(m as f64 * t0);
        deviations.push((sum / (2.0 * pairs as f64)).sqrt());
        n_clusters.push(pairs);
    }
    if taus.is_empty() {
        return Err(Error::Invalid(
            "every requested tau exceeds the series span".into(),
        ));
    }

    let pts: Vec<(f64, f64)> = taus
        .iter()
        .zip(&deviations)
        .filter(|(_, d)| **d > 0.0)
        .map(|(t, d)| (t.ln(), d.ln()))
        .collect();
    let loglog_slope = if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };

    Ok(AllanSeries {
        taus,
        deviations,
        n_clusters,
        omitted_taus: omitted,
        loglog_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_series_has_zero_deviation_everywhere() {
        // 4.25 is exactly representable, so the prefix sums stay exact and
        // the cluster means cancel to literal zero.
        let series = vec![4.25; 256];
        let out = allan_deviation(&series, 38.0, &default_cluster_sizes(256)).unwrap();
        assert!(out.deviations.iter().all(|d| *d == 0.0));
        assert_eq!(out.loglog_slope, None);
    }

    #[test]
    fn white_noise_follows_the_inverse_sqrt_tau_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let series: Vec<f64> = (0..4096).map(|_| StandardNormal.sample(&mut rng)).collect();
        let out = allan_deviation(&series, 1.0, &default_cluster_sizes(series.len())).unwrap();
        let slope = out.loglog_slope.expect("positive deviations");
        assert!(
            (slope + 0.5).abs() < 0.1,
            "white-noise log-log slope {slope}"
        );
        // At m = 1 the Allan deviation of unit white noise is ~1.
        assert!((out.deviations[0] - 1.0).abs() < 0.1);
    }

    #[test]
    fn linear_drift_gives_growing_deviation() {
        let series: Vec<f64> = (0..1024).map(|t| 1e-3 * t as f64).collect();
        let out = allan_deviation(&series, 1.0, &default_cluster_sizes(series.len())).unwrap();
        let slope = out.loglog_slope.expect("positive deviations");
        assert!(slope > 0.0, "drift slope {slope}");
        // Closed form for a pure ramp: sigma(tau) = rate * tau / sqrt(2).
        let rate = 1e-3;
        for (tau, dev) in out.taus.iter().zip(&out.deviations) {
            let expect = rate * tau / std::f64::consts::SQRT_2;
            assert!(
                (dev - expect).abs() / expect < 1e-9,
                "tau {tau}: {dev} vs {expect}"
            );
        }
    }

    #[test]
    fn taus_are_strictly_increasing_and_clusters_sufficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let series: Vec<f64> = (0..300).map(|_| StandardNormal.sample(&mut rng)).collect();
        let out = allan_deviation(&series, 38.0, &[4, 1, 2, 2, 8]).unwrap();
        assert!(out.taus.windows(2).all(|w| w[0] < w[1]));
        assert!(out.n_clusters.iter().all(|n| *n >= 2));
        assert_eq!(out.taus[0], 38.0);
    }

    #[test]
    fn oversized_taus_are_omitted_with_note() {
        let series: Vec<f64> = (0..64).map(|t| t as f64).collect();
        let out = allan_deviation(&series, 1.0, &[1, 2, 64]).unwrap();
        assert_eq!(out.taus.len(), 2);
        assert_eq!(out.omitted_taus, vec![64.0]);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(allan_deviation(&[1.0, 2.0], 1.0, &[1]).is_err());
        assert!(allan_deviation(&[1.0; 16], 0.0, &[1]).is_err());
        assert!(allan_deviation(&[1.0; 16], 1.0, &[]).is_err());
        assert!(allan_deviation(&[1.0; 16], 1.0, &[0, 1]).is_err());
        assert!(allan_deviation(&[f64::NAN; 16], 1.0, &[1]).is_err());
        // All requested taus too large for the span.
        assert!(allan_deviation(&[1.0; 16], 1.0, &[32]).is_err());
    }
}

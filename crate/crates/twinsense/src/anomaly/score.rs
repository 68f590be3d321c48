//! The composite anomaly score `A = A_R + λ·A_D` and its localization map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gan::{normalized_row, GanBundle, LatentVector};
use crate::sim::{Dataset, TofImage};
use crate::{Error, Result};

use super::Encoder;

pub(crate) fn validate_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() || !(-1.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange(format!(
            "lambda must lie in [-1, 1], got {lambda}"
        )));
    }
    Ok(())
}

/// Everything the score pipeline knows about one image.
#[derive(Debug, Clone, PartialEq)]
pub struct AnomalyReport {
    pub shot_index: usize,
    /// Impulse label carried by the shot, N*s.
    pub impulse: f64,
    /// `A_R`: Euclidean norm of the reconstruction residual, normalized
    /// pixel units.
    pub residual_loss: f64,
    /// `A_D`: Euclidean distance between the discriminator's feature-layer
    /// activations on the image and on its reconstruction.
    pub discrimination_loss: f64,
    pub lambda: f64,
    /// `A = A_R + lambda * A_D`.
    pub score: f64,
    /// Elementwise `|x - reconstruction|` in the original pixel layout;
    /// its Euclidean norm equals `residual_loss` exactly.
    pub localization_map: TofImage,
}

fn well_matched(bundle: &GanBundle, encoder: &Encoder) -> Result<()> {
    if !bundle.is_frozen() || !encoder.is_frozen() {
        return Err(Error::Contract(
            "scoring requires frozen bundle and encoder".into(),
        ));
    }
    if encoder.latent_dim() != bundle.latent_dim() {
        return Err(Error::Invalid(format!(
            "encoder emits {}-d latents, generator expects {}-d",
            encoder.latent_dim(),
            bundle.latent_dim()
        )));
    }
    if encoder.manifest().generator_checksum != bundle.manifest().generator_checksum {
        return Err(Error::Contract(
            "encoder was trained against a different generator (checksum mismatch)".into(),
        ));
    }
    Ok(())
}

/// Scores one image: encode, reconstruct once through the frozen
/// generator, then derive the residual map, both loss terms, and the
/// combined score from that single reconstruction.
///
/// All norms are taken in the per-shot normalized `[-1,1]` model space,
/// with the arithmetic widened to f64 so the report's identities hold to
/// 64-bit rounding.
pub fn anomaly_score(
    image: &TofImage,
    bundle: &GanBundle,
    encoder: &Encoder,
    lambda: f64,
) -> Result<AnomalyReport> {
    validate_lambda(lambda)?;
    well_matched(bundle, encoder)?;

    let x = normalized_row(image)?;
    let z = encoder.encode(&x)?;
    let x_hat = bundle.replica_for(&LatentVector { values: z })?;

    let map_pixels: Vec<f64> = x
        .iter()
        .zip(&x_hat)
        .map(|(&xi, &ri)| (xi as f64 - ri as f64).abs())
        .collect();
    // A_R is defined from the map itself, so its norm identity is exact.
    let residual_loss = map_pixels.iter().map(|m| m * m).sum::<f64>().sqrt();

    let h_x = bundle.discriminator_features(&x)?;
    let h_hat = bundle.discriminator_features(&x_hat)?;
    let discrimination_loss = h_x
        .iter()
        .zip(&h_hat)
        .map(|(&a, &b)| {
            let d = a as f64 - b as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt();

    let mut localization_map = TofImage::new(image.width, image.height, map_pixels);
    localization_map.shot_index = image.shot_index;
    localization_map.impulse = image.impulse;

    Ok(AnomalyReport {
        shot_index: image.shot_index,
        impulse: image.impulse,
        residual_loss,
        discrimination_loss,
        lambda,
        score: residual_loss + lambda * discrimination_loss,
        localization_map,
    })
}

/// Residual map alone, in the original pixel layout.
pub fn localization_map(
    image: &TofImage,
    bundle: &GanBundle,
    encoder: &Encoder,
) -> Result<TofImage> {
    Ok(anomaly_score(image, bundle, encoder, 0.0)?.localization_map)
}

/// Mean squared map value inside an annulus of `half_width` pixels around
/// radius `radius` from the image center — the natural probe for signal
/// that lives on the first-order Bragg peaks.
pub fn bragg_annulus_energy(map: &TofImage, radius: f64, half_width: f64) -> Result<f64> {
    if !(radius.is_finite() && radius > 0.0 && half_width.is_finite() && half_width > 0.0) {
        return Err(Error::Invalid(format!(
            "annulus geometry must be positive, got radius {radius} half-width {half_width}"
        )));
    }
    let cx = (map.width as f64 - 1.0) / 2.0;
    let cy = (map.height as f64 - 1.0) / 2.0;
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..map.height {
        for x in 0..map.width {
            let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            if (r - radius).abs() <= half_width {
                let v = map.pixels[y * map.width + x];
                sum += v * v;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Invalid(format!(
            "annulus at radius {radius} px lies outside the {}x{} map",
            map.width, map.height
        )));
    }
    Ok(sum / count as f64)
}

/// One scored shot, without the (bulky) localization map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub shot_index: usize,
    pub impulse: f64,
    pub residual_loss: f64,
    pub discrimination_loss: f64,
    pub score: f64,
}

/// Scores for a whole dataset in shot order, with distribution summary
/// statistics attached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    pub lambda: f64,
    pub rows: Vec<ScoreRow>,
    pub mean: f64,
    /// Sample standard deviation (n-1); zero for fewer than two rows.
    pub std: f64,
    /// Third standardized moment; zero when the variance vanishes.
    pub skewness: f64,
}

impl ScoreSeries {
    /// Builds the series and its summary statistics from scored rows.
    pub fn from_rows(lambda: f64, rows: Vec<ScoreRow>) -> Result<Self> {
        validate_lambda(lambda)?;
        if rows.is_empty() {
            return Err(Error::Invalid("score series cannot be empty".into()));
        }
        let n = rows.len() as f64;
        // A constant series is exactly constant — don't let summation
        // rounding manufacture spurious variance.
        let (mean, m2, m3) = if rows.iter().all(|r| r.score == rows[0].score) {
            (rows[0].score, 0.0, 0.0)
        } else {
            let mean = rows.iter().map(|r| r.score).sum::<f64>() / n;
            let m2 = rows.iter().map(|r| (r.score - mean).powi(2)).sum::<f64>() / n;
            let m3 = rows.iter().map(|r| (r.score - mean).powi(3)).sum::<f64>() / n;
            (mean, m2, m3)
        };
        let std = if rows.len() < 2 {
            0.0
        } else {
            (m2 * n / (n - 1.0)).sqrt()
        };
        let skewness = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        Ok(Self {
            lambda,
            rows,
            mean,
            std,
            skewness,
        })
    }

    /// Recombines the stored loss terms under a different λ without
    /// touching any model — scoring is affine in λ, so calibration sweeps
    /// are free once the two loss series exist.
    pub fn rescore(&self, lambda: f64) -> Result<Self> {
        let rows = self
            .rows
            .iter()
            .map(|r| ScoreRow {
                score: r.residual_loss + lambda * r.discrimination_loss,
                ..r.clone()
            })
            .collect();
        Self::from_rows(lambda, rows)
    }

    pub fn scores(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.score).collect()
    }

    /// Rows bucketed by exact impulse label, levels ascending — the group
    /// layout the response-fit and sensitivity routines consume.
    pub fn impulse_groups(&self) -> Vec<(f64, Vec<f64>)> {
        let mut levels: Vec<f64> = self.rows.iter().map(|r| r.impulse).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels
            .into_iter()
            .map(|level| {
                let scores = self
                    .rows
                    .iter()
                    .filter(|r| r.impulse == level)
                    .map(|r| r.score)
                    .collect();
                (level, scores)
            })
            .collect()
    }
}

/// Scores every shot of a dataset in parallel (the models are frozen, so
/// shots are independent), preserving shot order.
pub fn score_dataset(
    dataset: &Dataset,
    bundle: &GanBundle,
    encoder: &Encoder,
    lambda: f64,
) -> Result<ScoreSeries> {
    validate_lambda(lambda)?;
    well_matched(bundle, encoder)?;
    if dataset.n_shots() == 0 {
        return Err(Error::Invalid("cannot score an empty dataset".into()));
    }
    let per_shot: Vec<Result<ScoreRow>> = dataset
        .images
        .par_iter()
        .map(|img| {
            anomaly_score(img, bundle, encoder, lambda).map(|rep| ScoreRow {
                shot_index: rep.shot_index,
                impulse: rep.impulse,
                residual_loss: rep.residual_loss,
                discrimination_loss: rep.discrimination_loss,
                score: rep.score,
            })
        })
        .collect();
    let mut rows = Vec::with_capacity(per_shot.len());
    for row in per_shot {
        rows.push(row?);
    }
    ScoreSeries::from_rows(lambda, rows)
}

//! Center-of-mass momentum readout.

use crate::sim::TofImage;
use crate::{Error, Result};

/// Intensity-weighted centroid relative to the grid center, in pixels.
///
/// Expects raw (non-negative) intensities; callers holding normalized
/// [-1,1] images must denormalize first, since negative weights make the
/// centroid meaningless.
pub fn com_momentum(image: &TofImage) -> Result<(f64, f64)> {
    if image.pixels.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite pixel intensity".into()));
    }
    if image.pixels.iter().any(|v| *v < 0.0) {
        return Err(Error::Invalid(
            "negative intensities: COM expects raw (denormalized) images".into(),
        ));
    }
    let total = image.integrated_intensity();
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "zero integrated intensity has no centroid".into(),
        ));
    }
    let (mut sx, mut sy) = (0.0f64, 0.0f64);
    for y in 0..image.height {
        let row = &image.pixels[y * image.width..(y + 1) * image.width];
        let mut row_sum = 0.0;
        for (x, v) in row.iter().enumerate() {
            sx += v * x as f64;
            row_sum += v;
        }
        sy += row_sum * y as f64;
    }
    let cx = (image.width as f64 - 1.0) / 2.0;
    let cy = (image.height as f64 - 1.0) / 2.0;
    Ok((sx / total - cx, sy / total - cy))
}

/// COM of the Gaussian-low-pass-filtered image.
///
/// Separable zero-padded convolution, kernel truncated at four sigma. In the
/// grid interior convolution preserves mass and first moment, so the
/// centroid itself is untouched; the payoff is that border pixels — the
/// highest-leverage noise contributions — lose kernel mass off the edge and
/// are down-weighted, which lowers the COM variance on noisy shots.
pub fn gaussian_denoise_com(image: &TofImage, kernel_sigma: f64) -> Result<(f64, f64)> {
    if !(kernel_sigma.is_finite() && kernel_sigma > 0.0) {
        return Err(Error::Invalid(format!(
            "kernel sigma must be positive, got {kernel_sigma}"
        )));
    }
    let radius = (4.0 * kernel_sigma).ceil() as usize;
    let kernel: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|d| (-((d * d) as f64) / (2.0 * kernel_sigma * kernel_sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();

    let (w, h) = (image.width, image.height);
    let convolve_rows = |src: &[f64], width: usize, height: usize, dst: &mut Vec<f64>| {
        dst.clear();
        dst.resize(width * height, 0.0);
        for y in 0..height {
            let row = &src[y * width..(y + 1) * width];
            let out = &mut dst[y * width..(y + 1) * width];
            for (x, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (ki, k) in kernel.iter().enumerate() {
                    let sx = x as isize + ki as isize - radius as isize;
                    if (0..width as isize).contains(&sx) {
                        acc += k * row[sx as usize];
                    }
                }
                *o = acc;
            }
        }
    };

    let mut tmp = Vec::new();
    convolve_rows(&image.pixels, w, h, &mut tmp);
    // Transpose, filter the other axis, transpose back.
    let mut t = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            t[x * h + y] = tmp[y * w + x];
        }
    }
    let mut tmp2 = Vec::new();
    convolve_rows(&t, h, w, &mut tmp2);
    let mut smoothed = vec![0.0; w * h];
    for x in 0..w {
        for y in 0..h {
            smoothed[y * w + x] = tmp2[x * h + y];
        }
    }

    let mut out = image.clone();
    out.pixels = smoothed;
    com_momentum(&out)
}

//! Single-shot rendering: lattice peaks, thermal background, noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::sim::{SimConfig, TofImage};
use crate::{Error, Result};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Adds one isotropic Gaussian to the buffer via separable row/column
/// factors. Peak centers sit in pixel-index coordinates.
fn add_gaussian(
    pixels: &mut [f64],
    width: usize,
    height: usize,
    center: (f64, f64),
    amplitude: f64,
    sigma: f64,
) {
    if amplitude == 0.0 {
        return;
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let ex: Vec<f64> = (0..width)
        .map(|x| (-(x as f64 - center.0).powi(2) * inv).exp())
        .collect();
    let ey: Vec<f64> = (0..height)
        .map(|y| (-(y as f64 - center.1).powi(2) * inv).exp())
        .collect();
    for y in 0..height {
        let a = amplitude * ey[y];
        let row = &mut pixels[y * width..(y + 1) * width];
        for x in 0..width {
            row[x] += a * ex[x];
        }
    }
}

/// Renders one shot with an explicit drift offset.
///
/// RNG draw order is fixed: one global amplitude draw, then two draws per
/// peak with nonzero position jitter (peak order), then one draw per pixel
/// in row-major order when shot noise is enabled.
pub(crate) fn render_with_drift(
    config: &SimConfig,
    rng: &mut (impl Rng + ?Sized),
    impulse: f64,
    drift: (f64, f64),
) -> Result<TofImage> {
    if !impulse.is_finite() {
        return Err(Error::Invalid(format!("impulse must be finite, got {impulse}")));
    }
    let shift = config.displacement_px(impulse);
    if !shift.is_finite() {
        return Err(Error::Numeric("non-finite pattern displacement".into()));
    }
    let (cx, cy) = config.center();
    let (w, h) = (config.width, config.height);

    let amp_scale = {
        let draw = if config.atom_number_jitter > 0.0 {
            1.0 + config.atom_number_jitter * normal(rng)
        } else {
            1.0
        };
        (config.atom_number_mean * draw).max(0.0)
    };

    let mut pixels = vec![0.0f64; w * h];
    for (i, peak) in config.peaks.iter().enumerate() {
        let jitter = if peak.position_jitter > 0.0 {
            (
                peak.position_jitter * normal(rng),
                peak.position_jitter * normal(rng),
            )
        } else {
            (0.0, 0.0)
        };
        let coupled_shift = if peak.couples_to_impulse { shift } else { 0.0 };
        let center = (
            cx + peak.position.0 + coupled_shift + drift.0 + jitter.0,
            cy + peak.position.1 + drift.1 + jitter.1,
        );
        if center.0 < 0.0
            || center.0 > (w - 1) as f64
            || center.1 < 0.0
            || center.1 > (h - 1) as f64
        {
            return Err(Error::OutOfRange(format!(
                "peak {i} center ({:.2}, {:.2}) left the {w}x{h} grid (impulse {impulse:.3e} N*s)",
                center.0, center.1
            )));
        }
        add_gaussian(
            &mut pixels,
            w,
            h,
            center,
            amp_scale * peak.amplitude,
            peak.width,
        );
    }
    // The thermal cloud receives the same momentum kick and rides the same
    // drift as the lattice pattern, but has no pointing jitter of its own.
    add_gaussian(
        &mut pixels,
        w,
        h,
        (cx + shift + drift.0, cy + drift.1),
        amp_scale * config.thermal_amplitude,
        config.thermal_width,
    );

    if config.shot_noise_scale > 0.0 {
        for v in &mut pixels {
            *v += config.shot_noise_scale * v.max(0.0).sqrt() * normal(rng);
            *v = v.max(0.0);
        }
    }

    Ok(TofImage::new(w, h, pixels))
}

/// Renders one drift-free shot. Pure given the RNG state: identical states
/// give identical images.
pub fn render_image(
    config: &SimConfig,
    rng: &mut (impl Rng + ?Sized),
    impulse: f64,
) -> Result<TofImage> {
    config.validate()?;
    render_with_drift(config, rng, impulse, (0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::PeakSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent centroid oracle (relative to grid center).
    fn centroid(img: &TofImage) -> (f64, f64) {
        let (mut sx, mut sy, mut total) = (0.0, 0.0, 0.0);
        for y in 0..img.height {
            for x in 0..img.width {
                let v = img.pixel(x, y);
                sx += v * x as f64;
                sy += v * y as f64;
                total += v;
            }
        }
        let cx = (img.width as f64 - 1.0) / 2.0;
        let cy = (img.height as f64 - 1.0) / 2.0;
        (sx / total - cx, sy / total - cy)
    }

    /// Noiseless config whose Gaussians sit far from the grid edge, so the
    /// analytic centroid survives truncation to well below 1e-9 px.
    fn contained_noiseless() -> SimConfig {
        let mut peaks = vec![PeakSpec::new((0.0, 0.0), 1.0, 2.0)];
        peaks.extend(crate::sim::config::hexagon(8.0, 0.4, 1.2));
        SimConfig {
            peaks,
            thermal_amplitude: 0.0,
            atom_number_jitter: 0.0,
            shot_noise_scale: 0.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn noiseless_force_free_com_is_centered() {
        let c = contained_noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = render_image(&c, &mut rng, 0.0).unwrap();
        let (x, y) = centroid(&img);
        assert!(x.abs() < 1e-9 && y.abs() < 1e-9, "({x}, {y})");
    }

    #[test]
    fn noiseless_com_shifts_by_exactly_the_impulse_displacement() {
        let c = contained_noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for frac in [0.25, 0.5, 1.0, -0.75] {
            let impulse = c.impulse_fraction(frac);
            let img = render_image(&c, &mut rng, impulse).unwrap();
            let (x, y) = centroid(&img);
            let expect = c.displacement_px(impulse);
            assert!(
                (x - expect).abs() < 1e-9,
                "impulse fraction {frac}: COM x {x} vs {expect}"
            );
            assert!(y.abs() < 1e-9);
        }
    }

    #[test]
    fn doubling_amplitudes_doubles_intensity_and_fixes_com() {
        let c = contained_noiseless();
        let mut doubled = c.clone();
        for p in &mut doubled.peaks {
            p.amplitude *= 2.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = render_image(&c, &mut rng, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = render_image(&doubled, &mut rng, 0.0).unwrap();
        assert!(
            (b.integrated_intensity() - 2.0 * a.integrated_intensity()).abs()
                / a.integrated_intensity()
                < 1e-12
        );
        let (ax, ay) = centroid(&a);
        let (bx, by) = centroid(&b);
        assert!((ax - bx).abs() < 1e-12 && (ay - by).abs() < 1e-12);
    }

    #[test]
    fn off_grid_displacement_is_an_error() {
        let c = contained_noiseless();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // 64 px of displacement pushes the hexagon off a 64 px grid.
        let err = render_image(&c, &mut rng, c.impulse_fraction(64.0));
        assert!(matches!(err, Err(Error::OutOfRange(_))));
    }

    #[test]
    fn identical_rng_states_give_identical_images() {
        let c = SimConfig::desk_regime();
        let a = render_image(&c, &mut ChaCha8Rng::seed_from_u64(9), 0.0).unwrap();
        let b = render_image(&c, &mut ChaCha8Rng::seed_from_u64(9), 0.0).unwrap();
        assert_eq!(a.pixels, b.pixels);
    }

    #[test]
    fn intensities_are_non_negative_with_noise() {
        let mut c = SimConfig::desk_regime();
        c.shot_noise_scale = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = render_image(&c, &mut rng, 0.0).unwrap();
        assert!(img.pixels.iter().all(|v| *v >= 0.0));
        assert!(img.integrated_intensity() > 0.0);
    }

    #[test]
    fn decoupled_peak_ignores_the_impulse() {
        let mut c = contained_noiseless();
        for p in &mut c.peaks {
            p.couples_to_impulse = false;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let img = render_image(&c, &mut rng, c.impulse_fraction(1.0)).unwrap();
        let (x, _) = centroid(&img);
        assert!(x.abs() < 1e-9, "COM moved to {x}");
    }
}

//! Shot images and the [-1,1] pixel normalization used for model input.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One time-of-flight shot: a row-major intensity grid plus its label.
///
/// Raw rendered intensities are non-negative; a normalized image (model
/// input space) lies in [-1,1]. An impulse of exactly zero marks the shot as
/// force-free.
#[derive(Debug, Clone, PartialEq)]
pub struct TofImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
    pub shot_index: usize,
    /// Applied impulse in newton-seconds; 0 means force-free.
    pub impulse: f64,
}

impl TofImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer shape");
        Self {
            width,
            height,
            pixels,
            shot_index: 0,
            impulse: 0.0,
        }
    }

    pub fn is_force_free(&self) -> bool {
        self.impulse == 0.0
    }

    pub fn integrated_intensity(&self) -> f64 {
        self.pixels.iter().sum()
    }

    pub fn pixel(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut f64 {
        &mut self.pixels[y * self.width + x]
    }
}

/// Inverse-map metadata of a normalization: the original [min, max] range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

/// Affine map of the image's [min, max] onto [-1, 1].
pub fn normalize(image: &TofImage) -> Result<(TofImage, Normalization)> {
    if !image.pixels.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite pixel intensity".into()));
    }
    if image.integrated_intensity() <= 0.0 {
        return Err(Error::Degenerate(
            "cannot normalize an image with non-positive integrated intensity".into(),
        ));
    }
    let min = image.pixels.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = image.pixels.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return Err(Error::Degenerate(
            "constant image has no intensity range to normalize".into(),
        ));
    }
    let scale = 2.0 / (max - min);
    let mut out = image.clone();
    for v in &mut out.pixels {
        *v = (*v - min) * scale - 1.0;
    }
    Ok((out, Normalization { min, max }))
}

/// Undo [`normalize`] using its retained metadata.
pub fn denormalize(image: &TofImage, norm: &Normalization) -> TofImage {
    let scale = (norm.max - norm.min) / 2.0;
    let mut out = image.clone();
    for v in &mut out.pixels {
        *v = (*v + 1.0) * scale + norm.min;
    }
    out
}

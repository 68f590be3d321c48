//! Synthetic time-of-flight imagery with controllable signal and noise.
//!
//! A shot is rendered as a sum of isotropic Gaussian lattice peaks (central
//! condensate plus Bragg orders) over a broad thermal background. An applied
//! impulse translates the whole momentum pattern along x by
//! `impulse / pixel_momentum_scale` pixels; noise enters through global
//! atom-number jitter, optional per-peak position jitter, per-pixel shot
//! noise, and a slow shot-indexed drift (random walk plus sinusoid).

mod config;
mod dataset;
mod image;
mod render;

pub use config::{PeakSpec, SimConfig, CYCLE_TIME_S, FORCE_F0_N, RB87_MASS_KG};
pub use dataset::{
    dataset_checksum, generate_dataset, load_dataset, save_dataset, Dataset, DatasetHeader,
    ImpulseSchedule,
};
pub use image::{denormalize, normalize, Normalization, TofImage};
pub use render::render_image;

pub(crate) use render::render_with_drift;

//! Adversarial digital twinning of TOF images.
//!
//! A generator maps latent vectors to synthetic shots and a discriminator
//! separates real from generated ones; both are trained only on force-free
//! data, so the frozen pair captures the full force-free measurement
//! distribution — noise channels included. Downstream, the frozen bundle
//! supplies reconstructions and the discriminator's feature layer for
//! anomaly scoring.
//!
//! Model space is per-shot normalized: every image is rescaled to `[-1,1]`
//! by its own extrema before it meets a network, which keeps the networks
//! independent of slow overall-intensity drift.

mod bundle;
mod hyper;
mod train;

pub use bundle::{
    load_bundle, save_bundle, BundleManifest, GanBundle, LatentVector, DISCRIMINATOR_FILE,
    GENERATOR_FILE, MANIFEST_FILE,
};
pub use hyper::GanHyper;
pub use train::{
    ensure_force_free, normalized_row, normalized_rows, train_gan, EpochLog, TrainingLog,
};
pub(crate) use train::split_indices;

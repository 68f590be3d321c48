//! Digital-twin force sensing on simulated time-of-flight imagery.
//!
//! A cold-atom force sensor reads out as a momentum-space image: release the
//! cloud, let it expand, photograph where the atoms land. An impulse applied
//! during the hold shifts that distribution, and the size of the smallest
//! resolvable shift sets the sensitivity. This crate reproduces such a
//! pipeline end to end, at desk scale, on synthetic data:
//!
//! * [`sim`] renders shot-noise-limited time-of-flight images of an optical
//!   lattice with a configurable applied impulse, thermal background, and
//!   slow drift.
//! * [`nn`] is a small dense-network engine (exact backprop, batchnorm,
//!   adaptive-moment updates) generic over `f32`/`f64`.
//! * [`gan`] trains a generator/discriminator pair on force-free shots so
//!   the generator becomes a digital twin of the quiescent sensor.
//! * [`anomaly`] inverts the generator with an encoder and turns
//!   reconstruction plus discriminator-feature residuals into a per-shot
//!   anomaly score — the learned signal that replaces the classical readout.
//! * [`metrology`] implements the classical center-of-mass readout, linear
//!   response fits, force sensitivity, signal-to-noise, and overlapping
//!   Allan deviation for stability analysis.
//! * [`pipeline`] wires the stages together behind reproducible,
//!   manifest-stamped commands; the `twinsense` binary exposes them as
//!   subcommands.
//!
//! Start with the `examples/` directory: each example is a runnable tour of
//! one capability, from `simulate_dataset` through `full_pipeline`.

pub mod anomaly;
mod error;
pub mod gan;
pub mod io;
pub mod metrology;
pub mod nn;
pub mod pipeline;
pub mod sim;

pub use error::{Error, Result};

//! Published reference figures for the physical apparatus the simulation
//! is modeled after.
//!
//! These are measured values from the laboratory optical-lattice force
//! sensor, recorded here so that reports and examples can quote them next
//! to the synthetic results. They are *not* targets the synthetic
//! pipeline is expected to reproduce numerically — the desk-scale
//! simulation shares the mechanism (anomaly scoring outperforming the
//! center-of-mass readout when the noise lives at low momentum) but not
//! the apparatus noise floor.

/// Measured force sensitivity of the center-of-mass readout, N/sqrt(Hz).
pub const SENSITIVITY_COM: f64 = 6.8e-24;

/// One-sigma uncertainty on [`SENSITIVITY_COM`], N/sqrt(Hz).
pub const SENSITIVITY_COM_UNCERTAINTY: f64 = 0.9e-24;

/// Measured force sensitivity of the anomaly-score readout, N/sqrt(Hz).
pub const SENSITIVITY_ANOMALY: f64 = 1.7e-25;

/// One-sigma uncertainty on [`SENSITIVITY_ANOMALY`], N/sqrt(Hz).
pub const SENSITIVITY_ANOMALY_UNCERTAINTY: f64 = 0.4e-25;

/// Center-of-mass sensitivity after Gaussian denoising of the images,
/// N/sqrt(Hz) — the strongest classical baseline reported.
pub const SENSITIVITY_COM_REDUCED: f64 = 1.6e-24;

/// One-sigma uncertainty on [`SENSITIVITY_COM_REDUCED`], N/sqrt(Hz).
pub const SENSITIVITY_COM_REDUCED_UNCERTAINTY: f64 = 0.4e-24;

/// Discrimination weight selected by the laboratory calibration scan.
pub const LAMBDA_OPTIMAL: f64 = -0.76;

//! Signal extraction and sensing figures of merit.
//!
//! The classical readout is the center-of-mass momentum of a shot; any
//! per-shot scalar (COM component or anomaly score) becomes a force signal
//! through a linear response fit, and the fit feeds the one-sigma
//! sensitivity `S = sqrt(T0) * sigma0 / |dq/dF|`, the shot-averaged SNR, and
//! the overlapping Allan deviation for long-term stability.

mod allan;
mod com;
mod linfit;
pub mod reference;
mod sensitivity;

pub use allan::{allan_deviation, default_cluster_sizes, AllanSeries};
pub use com::{com_momentum, gaussian_denoise_com};
pub use linfit::{linear_response_fit, GroupStat, ResponseFit};
pub use sensitivity::{
    sensitivity, sensitivity_with_floor, snr, SensitivityEstimate, DEFAULT_R2_FLOOR,
};

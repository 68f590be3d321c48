//! Anomaly-score signal extraction on top of the frozen digital twin.
//!
//! An encoder inverts the generator so each shot can be compared with its
//! own reconstruction: the residual norm `A_R`, the discriminator-feature
//! distance `A_D`, and the mix `A = A_R + λ·A_D` turn "how atypical is
//! this image" into a scalar force signal. Calibration then picks the λ
//! that minimizes the one-sigma sensitivity.
//!
//! The mixing weight λ is the one place the otherwise force-free pipeline
//! touches labeled force-on data: sensitivities need a response slope, and
//! a slope needs scored shots at several impulse levels. Training of the
//! generator, discriminator, and encoder never does.

mod calibrate;
mod encoder;
mod score;

pub use calibrate::{calibrate_lambda, default_lambda_grid, LambdaCalibration};
pub use encoder::{
    load_encoder, save_encoder, train_encoder, Encoder, EncoderHyper, EncoderManifest,
};
pub use score::{
    anomaly_score, bragg_annulus_energy, localization_map, score_dataset, AnomalyReport,
    ScoreRow, ScoreSeries,
};

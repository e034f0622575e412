//! Config-driven front end: simulate, train, compare, gradcheck and plot,
//! each writing CSV/SVG artifacts plus a digest manifest.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod manifest;
pub mod plot;

pub use config::{ExperimentConfig, TrainEstimator};
pub use error::{CliError, Result};
pub use manifest::RunManifest;

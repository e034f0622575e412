//! Orthogonality-constrained deep instrumental-variable estimation.
//!
//! The crate is organised bottom-up:
//!
//! - [`numkit`]: dense row-major matrices and seeded random streams.
//! - [`nn`]: a fixed menu of layers with hand-derived backward passes,
//!   the MSE loss, Adam and a finite-difference gradient checker.
//! - [`model`]: interaction features, the dual-path network, the
//!   orthogonality penalty, the staged trainer and θ(x) estimators.
//! - [`sim`]: synthetic data-generating processes and the true effect.

pub mod checks;
pub mod error;
pub mod model;
pub mod nn;
pub mod numkit;
pub mod sim;

pub use error::{Error, Result};
pub use model::{
    build_features, estimate_theta_two_stage, estimate_theta_two_stage_with, moving_average, ortho_grad, ortho_penalty,
    poly_features, predict_theta_code_faithful, staged_train, staged_train_with, DualPathNet, FeatureExtractor,
    LossRecord, TrainConfig, TrainOutcome,
};
pub use nn::{Mode, TrainingMasks};
pub use numkit::{Matrix, RngStream};
pub use sim::{gen_code_faithful, gen_confounded, theta_true, DgpKind, DgpSpec, Dataset, Effect};

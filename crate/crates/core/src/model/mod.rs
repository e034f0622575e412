//! The orthogonality-constrained dual-path IV model.

mod estimate;
mod features;
mod network;
mod ortho;
mod smoothing;
mod train;

pub use estimate::{
    estimate_theta_two_stage, estimate_theta_two_stage_with, predict_theta_code_faithful, theta_contrast, TwoStageFit,
};
pub use features::{build_features, poly_features};
pub use network::{DualPathNet, FeatureExtractor, NetCache, NetGrads, HIDDEN_WIDTH};
pub use ortho::{ortho_grad, ortho_grad_matrix, ortho_penalty, ortho_penalty_matrix};
pub use smoothing::{moving_average, DEFAULT_SMOOTHING_WINDOW};
pub use train::{
    staged_train, staged_train_with, LossRecord, TrainConfig, TrainOutcome, DROPOUT_STREAM,
    INIT_STREAM,
};

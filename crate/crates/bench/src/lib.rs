//! Baseline estimators and estimator comparison.
//!
//! Closed-form baselines ([`fit_naive_ols`], [`fit_2sls`],
//! [`fit_linear_dml`]) share a linear effect basis `[1, x1, x2, x1·x2]` so
//! they can represent the simulated effect exactly. The neural entries wrap
//! the core model, and [`fit_ablation_no_ortho`] is the same model with the
//! penalty switched off.

mod baselines;
mod compare;
mod error;
mod linalg;
mod metrics;
mod neural;

pub use baselines::{fit_2sls, fit_linear_dml, fit_naive_ols, ols_design, MIN_FOLD_ROWS};
pub use compare::{
    compare, compare_replicated, fit, ComparisonRow, ComparisonTable, EstimatorKind, FitOptions,
    MetricSummary, NeuralMode, RowStatus,
};
pub use error::{BenchError, Result};
pub use linalg::least_squares;
pub use metrics::{mean_std, mse, pearson, EstimateResult};
pub use neural::{fit_ablation_no_ortho, fit_oc_deepiv_code_faithful, fit_oc_deepiv_two_stage};

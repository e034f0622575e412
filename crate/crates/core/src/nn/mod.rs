//! Hand-written layers with exact backward passes.
//!
//! Every layer is a plain value. Forward passes that need state for the
//! backward pass return an explicit cache; nothing is recorded implicitly.

mod adam;
mod dropout;
mod gradcheck;
mod linear;
mod loss;
mod norm;
mod params;
mod relu;

pub use adam::Adam;
pub use dropout::Dropout;
pub use gradcheck::{grad_check, GradCheckReport, FD_STEP};
pub use linear::{Linear, LinearGrads};
pub use loss::mse_loss;
pub use norm::{BatchNorm, BatchNormCache, LayerNorm, LayerNormCache, NormGrads};
pub(crate) use params::with_prefix;
pub use params::{flatten_params, load_params, GradientSet, ParamShape, ParamView, Parameterized};
pub use relu::{relu_backward, relu_forward};

/// Forward-pass mode. Train uses batch statistics and samples dropout masks;
/// Eval uses running statistics and is deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Dropout masks for one Train-mode forward pass of a dual-path network,
/// one `batch×hidden` mask per path. Fixing them makes the forward pass a
/// pure function of parameters and inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingMasks {
    pub path_a: crate::numkit::Matrix,
    pub path_b: crate::numkit::Matrix,
}

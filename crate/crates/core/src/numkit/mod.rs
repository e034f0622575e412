//! Dense matrix kernels and seeded random number streams.

mod matrix;
mod rng;

pub use matrix::Matrix;
pub use rng::RngStream;

use crate::error::{Error, Result};
use crate::numkit::Matrix;

pub fn relu_forward(x: &Matrix) -> Matrix {
    x.map(|v| v.max(0.0))
}

/// Masks `upstream` where the forward input was `≤ 0`; the subgradient at
/// exactly zero is taken as zero.
pub fn relu_backward(input: &Matrix, upstream: &Matrix) -> Result<Matrix> {
    if input.shape() != upstream.shape() {
        return Err(Error::shape("relu backward", input.shape(), upstream.shape()));
    }
    input.zip_map(upstream, |x, g| if x > 0.0 { g } else { 0.0 })
}

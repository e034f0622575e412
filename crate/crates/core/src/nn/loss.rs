use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("mse_loss", pred.shape(), target.shape()));
    }
    let n = pred.as_slice().len().max(1) as f64;
    let diff = pred.sub(target)?;
    let loss = diff.frobenius_sq() / n;
    Ok((loss, diff.scale(2.0 / n)))
}

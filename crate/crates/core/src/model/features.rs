use crate::error::{Error, Result};
use crate::numkit::Matrix;

/// Covariate features `[x1, x2, x1², x2², x1·t, x2·t]`.
pub fn build_features(x: &Matrix, t: &Matrix) -> Result<Matrix> {
    if x.cols() != 2 || t.cols() != 1 || x.rows() != t.rows() {
        return Err(Error::shape("build_features", x.shape(), t.shape()));
    }
    let mut out = Matrix::zeros(x.rows(), 6);
    for r in 0..x.rows() {
        let (x1, x2) = (x.get(r, 0), x.get(r, 1));
        let tr = t.get(r, 0);
        out.row_mut(r)
            .copy_from_slice(&[x1, x2, x1 * x1, x2 * x2, x1 * tr, x2 * tr]);
    }
    Ok(out)
}

/// Second-order covariate expansion `[x1, x2, x1², x2²]`, without any
/// treatment interaction.
pub fn poly_features(x: &Matrix) -> Result<Matrix> {
    if x.cols() != 2 {
        return Err(Error::shape("poly_features", x.shape(), (x.rows(), 2)));
    }
    let mut out = Matrix::zeros(x.rows(), 4);
    for r in 0..x.rows() {
        let (x1, x2) = (x.get(r, 0), x.get(r, 1));
        out.row_mut(r).copy_from_slice(&[x1, x2, x1 * x1, x2 * x2]);
    }
    Ok(out)
}

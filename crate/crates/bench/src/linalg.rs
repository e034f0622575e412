use nalgebra::{DMatrix, DVector};
use ocdeepiv_core::Matrix;

use crate::error::{BenchError, Result};

// Reciprocal condition threshold on XᵀX below which the design is treated as singular.
const RCOND_MIN: f64 = 1e-12;

/// Least-squares coefficients of `y` on the columns of `design`, via the
/// normal equations solved by SVD.
pub fn least_squares(design: &Matrix, y: &[f64], context: &str) -> Result<Vec<f64>> {
    let (n, p) = design.shape();
    if y.len() != n {
        return Err(BenchError::Core(ocdeepiv_core::Error::Shape {
            op: "least_squares",
            left: design.shape(),
            right: (y.len(), 1),
        }));
    }
    if n < p {
        return Err(BenchError::Rank(format!("{context}: {n} rows for {p} columns")));
    }
    let xtx = design.matmul_tn(design)?;
    let xty = design.matmul_tn(&Matrix::column(y))?;
    let a = DMatrix::from_row_slice(p, p, xtx.as_slice());
    let b = DVector::from_column_slice(xty.as_slice());
    let svd = a.svd(true, true);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if max.is_nan() || max <= 0.0 || min / max < RCOND_MIN {
        return Err(BenchError::Rank(format!("{context}: condition {min:e}/{max:e}")));
    }
    let coef = svd
        .solve(&b, 0.0)
        .map_err(|e| BenchError::Rank(format!("{context}: {e}")))?;
    Ok(coef.iter().copied().collect())
}

use std::time::Duration;

use ocdeepiv_core::{LossRecord, Matrix};

use crate::compare::EstimatorKind;

/// One estimator's θ̂ on one dataset, with error metrics against the truth.
#[derive(Clone, Debug)]
pub struct EstimateResult {
    pub kind: EstimatorKind,
    pub theta_hat: Matrix,
    pub theta_hat_smoothed: Matrix,
    pub mse_raw: f64,
    pub mse_smoothed: f64,
    pub smoothing_window: usize,
    /// Final-stage training history; empty for closed-form estimators.
    pub loss_history: Vec<LossRecord>,
    /// Unweighted `Σ‖WᵀW − I‖²` of the final-stage network, if any.
    pub final_ortho: Option<f64>,
    pub wall_time: Duration,
}

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "mse over unequal lengths");
    if a.is_empty() {
        return 0.0;
    }
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Pearson correlation; zero when either side is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "correlation over unequal lengths");
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        cov / (va * vb).sqrt()
    }
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl EstimateResult {
    pub(crate) fn assemble(
        kind: EstimatorKind,
        data: &ocdeepiv_core::Dataset,
        theta_hat: Matrix,
        loss_history: Vec<LossRecord>,
        final_ortho: Option<f64>,
        window: usize,
        wall_time: Duration,
    ) -> crate::Result<Self> {
        let smoothed = ocdeepiv_core::moving_average(theta_hat.as_slice(), window)?;
        let truth = data.theta_true.as_slice();
        let mse_raw = mse(theta_hat.as_slice(), truth);
        let mse_smoothed = mse(&smoothed, truth);
        Ok(Self {
            kind,
            theta_hat,
            theta_hat_smoothed: Matrix::column(&smoothed),
            mse_raw,
            mse_smoothed,
            smoothing_window: window,
            loss_history,
            final_ortho,
            wall_time,
        })
    }
}

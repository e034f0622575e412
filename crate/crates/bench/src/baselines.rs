use std::time::Instant;

use ocdeepiv_core::{Dataset, Matrix, RngStream};

use crate::compare::{EstimatorKind, FitOptions};
use crate::error::{BenchError, Result};
use crate::linalg::least_squares;
use crate::metrics::EstimateResult;

/// Cross-fitting folds smaller than this are rejected.
pub const MIN_FOLD_ROWS: usize = 20;

const DML_FOLD_STREAM: u64 = 301;

/// Outcome design `[1, t, x1, x2, x1·t, x2·t, x1·x2·t]`.
pub fn ols_design(x: &Matrix, t: &[f64]) -> Matrix {
    let mut d = Matrix::zeros(x.rows(), 7);
    for (r, &tr) in t.iter().enumerate() {
        let (x1, x2) = (x.get(r, 0), x.get(r, 1));
        d.row_mut(r)
            .copy_from_slice(&[1.0, tr, x1, x2, x1 * tr, x2 * tr, x1 * x2 * tr]);
    }
    d
}

/// θ̂(x) = b_t + b_{x1t}·x1 + b_{x2t}·x2 + b_{x1x2t}·x1·x2 from [`ols_design`] coefficients.
fn theta_from_design_coef(x: &Matrix, b: &[f64]) -> Matrix {
    let values: Vec<f64> = (0..x.rows())
        .map(|r| {
            let (x1, x2) = (x.get(r, 0), x.get(r, 1));
            b[1] + b[4] * x1 + b[5] * x2 + b[6] * x1 * x2
        })
        .collect();
    Matrix::column(&values)
}

/// Least squares of `Y` on [`ols_design`] using the observed treatment.
pub fn fit_naive_ols(data: &Dataset, opts: &FitOptions) -> Result<EstimateResult> {
    let start = Instant::now();
    let y = data.require_y()?;
    let b = least_squares(&ols_design(&data.x, data.t.as_slice()), y.as_slice(), "naive OLS")?;
    let theta = theta_from_design_coef(&data.x, &b);
    EstimateResult::assemble(EstimatorKind::NaiveOls, data, theta, Vec::new(), None, opts.smoothing_window, start.elapsed())
}

/// Two-stage least squares: `T̂` from a linear projection of `T` on
/// `[1, Z, X]`, then least squares of `Y` on [`ols_design`] built from `T̂`.
pub fn fit_2sls(data: &Dataset, opts: &FitOptions) -> Result<EstimateResult> {
    let start = Instant::now();
    let y = data.require_y()?;
    let ones = Matrix::filled(data.len(), 1, 1.0);
    let first = Matrix::hstack(&[&ones, &data.z, &data.x])?;
    let g = least_squares(&first, data.t.as_slice(), "2SLS first stage")?;
    let t_hat = first.matmul(&Matrix::column(&g))?;
    let b = least_squares(&ols_design(&data.x, t_hat.as_slice()), y.as_slice(), "2SLS second stage")?;
    let theta = theta_from_design_coef(&data.x, &b);
    EstimateResult::assemble(EstimatorKind::TwoSls, data, theta, Vec::new(), None, opts.smoothing_window, start.elapsed())
}

fn nuisance_design(x: &Matrix) -> Matrix {
    let mut d = Matrix::zeros(x.rows(), 5);
    for r in 0..x.rows() {
        let (x1, x2) = (x.get(r, 0), x.get(r, 1));
        d.row_mut(r).copy_from_slice(&[1.0, x1, x2, x1 * x1, x2 * x2]);
    }
    d
}

/// Linear double machine learning with 2-fold cross-fitting.
///
/// `Y` and `T` are residualised on `[1, X, X²]` out of fold; the outcome
/// residual is then regressed on the treatment residual interacted with
/// `[1, x1, x2, x1·x2]`. Instruments are not used.
pub fn fit_linear_dml(data: &Dataset, opts: &FitOptions) -> Result<EstimateResult> {
    let start = Instant::now();
    let y = data.require_y()?;
    let n = data.len();
    let order = RngStream::new(opts.dml_fold_seed, DML_FOLD_STREAM).permutation(n);
    let folds = [&order[..n / 2], &order[n / 2..]];
    if let Some(small) = folds.iter().find(|f| f.len() < MIN_FOLD_ROWS) {
        return Err(BenchError::FoldTooSmall { rows: small.len(), min: MIN_FOLD_ROWS });
    }

    let design = nuisance_design(&data.x);
    let mut y_res = vec![0.0; n];
    let mut t_res = vec![0.0; n];
    for (k, held_out) in folds.iter().enumerate() {
        let train = folds[1 - k];
        let d_train = design.select_rows(train);
        let d_test = design.select_rows(held_out);
        for (target, resid) in [(y.as_slice(), &mut y_res), (data.t.as_slice(), &mut t_res)] {
            let fit_target: Vec<f64> = train.iter().map(|&i| target[i]).collect();
            let b = least_squares(&d_train, &fit_target, "DML nuisance")?;
            let pred = d_test.matmul(&Matrix::column(&b))?;
            for (j, &i) in held_out.iter().enumerate() {
                resid[i] = target[i] - pred.get(j, 0);
            }
        }
    }

    let mut effect = Matrix::zeros(n, 4);
    for (r, &tr) in t_res.iter().enumerate() {
        let (x1, x2) = (data.x.get(r, 0), data.x.get(r, 1));
        effect.row_mut(r).copy_from_slice(&[tr, tr * x1, tr * x2, tr * x1 * x2]);
    }
    let c = least_squares(&effect, &y_res, "DML final stage")?;
    let theta: Vec<f64> = (0..n)
        .map(|r| {
            let (x1, x2) = (data.x.get(r, 0), data.x.get(r, 1));
            c[0] + c[1] * x1 + c[2] * x2 + c[3] * x1 * x2
        })
        .collect();
    EstimateResult::assemble(
        EstimatorKind::LinearDml,
        data,
        Matrix::column(&theta),
        Vec::new(),
        None,
        opts.smoothing_window,
        start.elapsed(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use ocdeepiv_core::{gen_code_faithful, gen_confounded, DgpSpec, Effect};

    fn opts() -> FitOptions {
        FitOptions::default()
    }

    fn constant_effect(n: usize, seed: u64, confounded: bool) -> Dataset {
        let mut spec = DgpSpec::confounded(n, seed);
        spec.effect = Effect::Constant(1.0);
        if !confounded {
            spec.kappa_t = 0.0;
            spec.kappa_y = 0.0;
        }
        gen_confounded(&spec).unwrap()
    }

    #[test]
    fn ols_recovers_noiseless_basis_coefficients() {
        let base = gen_code_faithful(200, 4).unwrap();
        let coef = [0.3, 1.2, -0.4, 0.9, 0.5, -0.25, 0.1];
        let design = ols_design(&base.x, base.t.as_slice());
        let y = design.matmul(&Matrix::column(&coef)).unwrap();
        let data = Dataset { y: Some(y), ..base };
        let b = least_squares(&design, data.y.as_ref().unwrap().as_slice(), "t").unwrap();
        for (a, e) in b.iter().zip(coef) {
            assert!((a - e).abs() < 1e-8, "{a} vs {e}");
        }
        let est = fit_naive_ols(&data, &opts()).unwrap();
        for r in 0..data.len() {
            let (x1, x2) = (data.x.get(r, 0), data.x.get(r, 1));
            let want = 1.2 + 0.5 * x1 - 0.25 * x2 + 0.1 * x1 * x2;
            assert!((est.theta_hat.get(r, 0) - want).abs() < 1e-8);
        }
    }

    #[test]
    fn closed_forms_are_deterministic() {
        let data = gen_confounded(&DgpSpec::confounded(500, 8)).unwrap();
        for f in [fit_naive_ols, fit_2sls, fit_linear_dml] {
            let a = f(&data, &opts()).unwrap();
            let b = f(&data, &opts()).unwrap();
            assert_eq!(a.theta_hat, b.theta_hat);
            assert!(a.mse_raw.is_finite() && a.mse_smoothed.is_finite());
        }
    }

    #[test]
    fn requires_outcome() {
        let data = gen_code_faithful(100, 0).unwrap();
        for f in [fit_naive_ols, fit_2sls, fit_linear_dml] {
            assert!(matches!(f(&data, &opts()), Err(BenchError::Core(ocdeepiv_core::Error::Precondition(_)))));
        }
    }

    #[test]
    fn ols_is_biased_and_2sls_is_not_under_confounding() {
        let data = constant_effect(100_000, 21, true);
        let ols = fit_naive_ols(&data, &opts()).unwrap().theta_hat.mean();
        let tsls = fit_2sls(&data, &opts()).unwrap().theta_hat.mean();
        assert!(ols - 1.0 >= 0.1, "OLS mean {ols}");
        assert!((tsls - 1.0).abs() <= 0.1, "2SLS mean {tsls}");
    }

    #[test]
    fn no_confounding_sanity() {
        let data = constant_effect(100_000, 22, false);
        let ols = fit_naive_ols(&data, &opts()).unwrap().theta_hat.mean();
        assert!((ols - 1.0).abs() <= 0.05, "OLS mean {ols}");
        let tsls = fit_2sls(&data, &opts()).unwrap().theta_hat.mean();
        assert!((tsls - ols).abs() < 0.05, "2SLS {tsls} vs OLS {ols}");
        let dml = fit_linear_dml(&data, &opts()).unwrap().theta_hat.mean();
        assert!((dml - 1.0).abs() <= 0.05, "DML mean {dml}");
    }

    #[test]
    fn dml_ignores_instruments() {
        let data = gen_confounded(&DgpSpec::confounded(400, 9)).unwrap();
        let mut shuffled = data.clone();
        let perm = RngStream::new(1, 1).permutation(400);
        shuffled.z = data.z.select_rows(&perm);
        let a = fit_linear_dml(&data, &opts()).unwrap();
        let b = fit_linear_dml(&shuffled, &opts()).unwrap();
        assert_eq!(a.theta_hat, b.theta_hat);
    }

    #[test]
    fn dml_rejects_tiny_folds() {
        let data = gen_confounded(&DgpSpec::confounded(30, 1)).unwrap();
        let mut o = opts();
        o.smoothing_window = 3;
        assert!(matches!(fit_linear_dml(&data, &o), Err(BenchError::FoldTooSmall { rows: 15, .. })));
    }
}

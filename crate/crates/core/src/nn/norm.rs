use super::params::{ParamShape, ParamView, Parameterized};
use super::Mode;
use crate::error::{Error, Result};
use crate::numkit::Matrix;

pub const NORM_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct NormGrads {
    pub input: Matrix,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

/// Per-feature batch normalisation.
///
/// Train mode normalises with the biased batch variance and folds the
/// unbiased variance into the running estimate; Eval mode uses the running
/// estimates only.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub eps: f64,
    pub momentum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormCache {
    x_hat: Matrix,
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var_unbiased: Vec<f64>,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            eps: NORM_EPS,
            momentum: BN_MOMENTUM,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.width() {
            return Err(Error::shape("batchnorm", x.shape(), (1, self.width())));
        }
        Ok(())
    }

    /// Forward pass. In Train mode the running statistics are updated and the
    /// cache needed by [`BatchNorm::backward`] is returned.
    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, Option<BatchNormCache>)> {
        match mode {
            Mode::Train => {
                let (y, cache) = self.forward_train(x)?;
                self.update_running(&cache);
                Ok((y, Some(cache)))
            }
            Mode::Eval => Ok((self.forward_eval(x)?, None)),
        }
    }

    /// Train-mode normalisation without touching the running statistics.
    pub fn forward_train(&self, x: &Matrix) -> Result<(Matrix, BatchNormCache)> {
        self.check_width(x)?;
        let n = x.rows();
        if n < 2 {
            return Err(Error::Training(format!(
                "batch normalisation needs at least 2 rows in train mode, got {n}"
            )));
        }
        let width = self.width();
        let nf = n as f64;
        let mean: Vec<f64> = x.col_sums().into_iter().map(|s| s / nf).collect();
        let mut sq = vec![0.0; width];
        for r in 0..n {
            for ((s, &v), &m) in sq.iter_mut().zip(x.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let inv_std: Vec<f64> = sq.iter().map(|s| 1.0 / (s / nf + self.eps).sqrt()).collect();
        let batch_var_unbiased = sq.iter().map(|s| s / (nf - 1.0)).collect();

        let mut x_hat = Matrix::zeros(n, width);
        let mut y = Matrix::zeros(n, width);
        for r in 0..n {
            let xr = x.row(r);
            for c in 0..width {
                let h = (xr[c] - mean[c]) * inv_std[c];
                x_hat.set(r, c, h);
                y.set(r, c, self.gamma[c] * h + self.beta[c]);
            }
        }
        Ok((
            y,
            BatchNormCache {
                x_hat,
                inv_std,
                batch_mean: mean,
                batch_var_unbiased,
            },
        ))
    }

    pub fn update_running(&mut self, cache: &BatchNormCache) {
        let m = self.momentum;
        for (r, b) in self.running_mean.iter_mut().zip(&cache.batch_mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(&cache.batch_var_unbiased) {
            *r = (1.0 - m) * *r + m * b;
        }
    }

    pub fn forward_eval(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        let scale: Vec<f64> = self
            .running_var
            .iter()
            .zip(&self.gamma)
            .map(|(v, g)| g / (v + self.eps).sqrt())
            .collect();
        let mut y = x.clone();
        for r in 0..y.rows() {
            for (c, v) in y.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.running_mean[c]) * scale[c] + self.beta[c];
            }
        }
        Ok(y)
    }

    /// Exact gradient of the Train-mode forward, batch statistics included.
    pub fn backward(&self, cache: Option<&BatchNormCache>, upstream: &Matrix) -> Result<NormGrads> {
        let cache = cache.ok_or_else(|| {
            Error::Training("batch-norm backward needs a train-mode forward cache".into())
        })?;
        if upstream.shape() != cache.x_hat.shape() {
            return Err(Error::shape("batchnorm backward", cache.x_hat.shape(), upstream.shape()));
        }
        let (n, width) = upstream.shape();
        let nf = n as f64;
        let mut gamma = vec![0.0; width];
        let mut beta = vec![0.0; width];
        for r in 0..n {
            let (up, xh) = (upstream.row(r), cache.x_hat.row(r));
            for c in 0..width {
                gamma[c] += up[c] * xh[c];
                beta[c] += up[c];
            }
        }
        // dx = γ·inv_std/N · (N·dy − Σdy − x̂·Σ(dy·x̂))
        let mut input = Matrix::zeros(n, width);
        for r in 0..n {
            let (up, xh) = (upstream.row(r), cache.x_hat.row(r));
            let out = input.row_mut(r);
            for c in 0..width {
                out[c] = self.gamma[c] * cache.inv_std[c] / nf
                    * (nf * up[c] - beta[c] - xh[c] * gamma[c]);
            }
        }
        Ok(NormGrads { input, gamma, beta })
    }
}

impl Parameterized for BatchNorm {
    fn params(&self) -> Vec<ParamView<'_>> {
        affine_views(&self.gamma, &self.beta)
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

/// Per-row layer normalisation with biased variance. Mode independent.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNormCache {
    x_hat: Matrix,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(width: usize) -> Self {
        Self {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            eps: NORM_EPS,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &Matrix) -> Result<(Matrix, LayerNormCache)> {
        if x.cols() != self.width() {
            return Err(Error::shape("layernorm", x.shape(), (1, self.width())));
        }
        let (n, width) = x.shape();
        let wf = width as f64;
        let mut x_hat = Matrix::zeros(n, width);
        let mut y = Matrix::zeros(n, width);
        let mut inv_std = Vec::with_capacity(n);
        for r in 0..n {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() / wf;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / wf;
            let is = 1.0 / (var + self.eps).sqrt();
            inv_std.push(is);
            let (hr, yr) = (x_hat.row_mut(r), y.row_mut(r));
            for c in 0..width {
                hr[c] = (row[c] - mean) * is;
                yr[c] = self.gamma[c] * hr[c] + self.beta[c];
            }
        }
        Ok((y, LayerNormCache { x_hat, inv_std }))
    }

    pub fn backward(&self, cache: &LayerNormCache, upstream: &Matrix) -> Result<NormGrads> {
        if upstream.shape() != cache.x_hat.shape() {
            return Err(Error::shape("layernorm backward", cache.x_hat.shape(), upstream.shape()));
        }
        let (n, width) = upstream.shape();
        let wf = width as f64;
        let mut gamma = vec![0.0; width];
        let mut beta = vec![0.0; width];
        let mut input = Matrix::zeros(n, width);
        let mut dxh = vec![0.0; width];
        for r in 0..n {
            let (up, xh) = (upstream.row(r), cache.x_hat.row(r));
            let mut sum_d = 0.0;
            let mut sum_dx = 0.0;
            for c in 0..width {
                gamma[c] += up[c] * xh[c];
                beta[c] += up[c];
                dxh[c] = up[c] * self.gamma[c];
                sum_d += dxh[c];
                sum_dx += dxh[c] * xh[c];
            }
            let is = cache.inv_std[r];
            let out = input.row_mut(r);
            for c in 0..width {
                out[c] = is / wf * (wf * dxh[c] - sum_d - xh[c] * sum_dx);
            }
        }
        Ok(NormGrads { input, gamma, beta })
    }
}

impl Parameterized for LayerNorm {
    fn params(&self) -> Vec<ParamView<'_>> {
        affine_views(&self.gamma, &self.beta)
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.gamma, &mut self.beta]
    }
}

fn affine_views<'a>(gamma: &'a [f64], beta: &'a [f64]) -> Vec<ParamView<'a>> {
    vec![
        ParamView {
            name: "weight".into(),
            shape: ParamShape::Vector(gamma.len()),
            values: gamma,
        },
        ParamView {
            name: "bias".into(),
            shape: ParamShape::Vector(beta.len()),
            values: beta,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::grad_check;
    use crate::numkit::RngStream;

    fn two_point() -> f64 {
        1.0 / (1.0 + 1e-5f64).sqrt()
    }

    fn dot(a: &Matrix, b: &Matrix) -> f64 {
        a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn batchnorm_two_point_batch() {
        let mut bn = BatchNorm::new(1);
        let (y, _) = bn.forward(&Matrix::column(&[1.0, 3.0]), Mode::Train).unwrap();
        assert!((y.get(0, 0) + two_point()).abs() < 1e-15);
        assert!((y.get(1, 0) - two_point()).abs() < 1e-15);
        // running stats: mean 0.9·0 + 0.1·2, unbiased var of [1,3] is 2
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - (0.9 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn batchnorm_constant_column_gives_beta() {
        let mut bn = BatchNorm::new(2);
        bn.beta = vec![0.0, 0.75];
        let (y, _) = bn.forward(&Matrix::filled(5, 2, 4.2), Mode::Train).unwrap();
        for r in 0..5 {
            assert_eq!(y.row(r), &[0.0, 0.75]);
        }
    }

    #[test]
    fn batchnorm_eval_with_unit_stats_is_near_identity() {
        let mut bn = BatchNorm::new(3);
        let x = RngStream::new(0, 0).sample_standard_normal(4, 3);
        let (y, cache) = bn.forward(&x, Mode::Eval).unwrap();
        assert!(cache.is_none());
        let s = 1.0 / (1.0 + 1e-5f64).sqrt();
        for (a, b) in y.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b * s).abs() < 1e-15);
        }
        assert_eq!(bn.running_mean, vec![0.0; 3], "eval must not touch running stats");
    }

    #[test]
    fn batchnorm_train_needs_two_rows() {
        let mut bn = BatchNorm::new(2);
        assert!(matches!(
            bn.forward(&Matrix::zeros(1, 2), Mode::Train),
            Err(Error::Training(_))
        ));
        assert!(bn.forward(&Matrix::zeros(1, 2), Mode::Eval).is_ok());
    }

    #[test]
    fn batchnorm_backward_without_cache_errors() {
        let bn = BatchNorm::new(2);
        assert!(matches!(bn.backward(None, &Matrix::zeros(3, 2)), Err(Error::Training(_))));
    }

    #[test]
    fn batchnorm_output_moments() {
        let mut rng = RngStream::new(4, 0);
        let x = rng.sample_standard_normal(32, 5).map(|v| 3.0 * v + 1.5);
        let (_, cache) = BatchNorm::new(5).forward_train(&x).unwrap();
        for c in 0..5 {
            let col = cache.x_hat.col(c);
            let mean = col.iter().sum::<f64>() / 32.0;
            let var = col.iter().map(|v| v * v).sum::<f64>() / 32.0;
            let raw = x.col(c);
            let rm = raw.iter().sum::<f64>() / 32.0;
            let rv = raw.iter().map(|v| (v - rm).powi(2)).sum::<f64>() / 32.0;
            assert!(mean.abs() < 1e-10);
            assert!((var - rv / (rv + 1e-5)).abs() < 1e-10);
        }
    }

    #[test]
    fn batchnorm_backward_zero_upstream() {
        let bn = BatchNorm::new(3);
        let x = RngStream::new(5, 0).sample_standard_normal(6, 3);
        let (_, cache) = bn.forward_train(&x).unwrap();
        let g = bn.backward(Some(&cache), &Matrix::zeros(6, 3)).unwrap();
        assert_eq!(g.input, Matrix::zeros(6, 3));
        assert_eq!(g.gamma, vec![0.0; 3]);
        assert_eq!(g.beta, vec![0.0; 3]);
    }

    #[test]
    fn batchnorm_backward_matches_finite_differences() {
        let mut rng = RngStream::new(6, 0);
        let mut bn = BatchNorm::new(4);
        bn.gamma = (0..4).map(|_| rng.uniform_range(0.5, 1.5)).collect();
        bn.beta = (0..4).map(|_| rng.standard_normal()).collect();
        let x = rng.sample_standard_normal(8, 4);
        let probe = rng.sample_standard_normal(8, 4);
        let (_, cache) = bn.forward_train(&x).unwrap();
        let g = bn.backward(Some(&cache), &probe).unwrap();

        let report = grad_check(x.as_slice(), g.input.as_slice(), |v| {
            let xm = Matrix::from_vec(8, 4, v.to_vec()).unwrap();
            dot(&bn.forward_train(&xm).unwrap().0, &probe)
        })
        .unwrap();
        assert!(report.passes(1e-6), "{report:?}");

        let mut analytic = g.gamma.clone();
        analytic.extend_from_slice(&g.beta);
        let report = grad_check(&crate::nn::flatten_params(&bn), &analytic, |p| {
            let mut b = bn.clone();
            crate::nn::load_params(&mut b, p).unwrap();
            dot(&b.forward_train(&x).unwrap().0, &probe)
        })
        .unwrap();
        assert!(report.passes(1e-6), "{report:?}");
    }

    #[test]
    fn batchnorm_input_gradient_columns_sum_to_zero() {
        for seed in 0..5 {
            let mut rng = RngStream::new(seed, 1);
            let x = rng.sample_standard_normal(10, 3);
            let up = rng.sample_standard_normal(10, 3);
            let bn = BatchNorm::new(3);
            let (_, cache) = bn.forward_train(&x).unwrap();
            let g = bn.backward(Some(&cache), &up).unwrap();
            for s in g.input.col_sums() {
                assert!(s.abs() < 1e-12, "column sum {s}");
            }
        }
    }

    #[test]
    fn layernorm_examples() {
        let ln = LayerNorm::new(2);
        let (y, _) = ln.forward(&Matrix::from_rows(&[[1.0, 3.0]])).unwrap();
        assert!((y.get(0, 0) + two_point()).abs() < 1e-15);
        assert!((y.get(0, 1) - two_point()).abs() < 1e-15);

        let (y, _) = LayerNorm::new(4).forward(&Matrix::filled(2, 4, -7.0)).unwrap();
        assert_eq!(y, Matrix::zeros(2, 4));

        assert!(matches!(ln.forward(&Matrix::zeros(1, 3)), Err(Error::Shape { .. })));
    }

    #[test]
    fn layernorm_backward_matches_finite_differences() {
        let mut rng = RngStream::new(7, 0);
        let mut ln = LayerNorm::new(5);
        ln.gamma = (0..5).map(|_| rng.uniform_range(0.5, 1.5)).collect();
        ln.beta = (0..5).map(|_| rng.standard_normal()).collect();
        let x = rng.sample_standard_normal(6, 5);
        let probe = rng.sample_standard_normal(6, 5);
        let (_, cache) = ln.forward(&x).unwrap();
        let g = ln.backward(&cache, &probe).unwrap();

        let report = grad_check(x.as_slice(), g.input.as_slice(), |v| {
            let xm = Matrix::from_vec(6, 5, v.to_vec()).unwrap();
            dot(&ln.forward(&xm).unwrap().0, &probe)
        })
        .unwrap();
        assert!(report.passes(1e-6), "{report:?}");

        let mut analytic = g.gamma.clone();
        analytic.extend_from_slice(&g.beta);
        let report = grad_check(&crate::nn::flatten_params(&ln), &analytic, |p| {
            let mut l = ln.clone();
            crate::nn::load_params(&mut l, p).unwrap();
            dot(&l.forward(&x).unwrap().0, &probe)
        })
        .unwrap();
        assert!(report.passes(1e-6), "{report:?}");
    }
}

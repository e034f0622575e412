//! Synthetic data-generating processes.
//!
//! Two generators are provided. [`gen_code_faithful`] reproduces the
//! reference experiment: instruments and covariates are standard normal and
//! the treatment is an independent coin flip, with no outcome. The
//! [`gen_confounded`] process draws a binary treatment from a latent index
//! in the instruments, covariates and an unobserved confounder `u`, and an
//! outcome in which `u` also appears, so naive regression is biased upward.

use crate::error::{Error, Result};
use crate::numkit::{Matrix, RngStream};

/// Stream id used by every generator.
pub const DATA_STREAM: u64 = 0;

/// True conditional effect `θ(x) = 0.5·x1 − 0.3·x2 + 0.1·x1·x2`.
pub fn theta_true(x: &Matrix) -> Result<Matrix> {
    if x.cols() != 2 {
        return Err(Error::shape("theta_true", x.shape(), (x.rows(), 2)));
    }
    let values: Vec<f64> = (0..x.rows())
        .map(|r| {
            let (x1, x2) = (x.get(r, 0), x.get(r, 1));
            0.5 * x1 - 0.3 * x2 + 0.1 * (x1 * x2)
        })
        .collect();
    Ok(Matrix::column(&values))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DgpKind {
    CodeFaithful,
    LogisticConfounded,
}

/// Treatment-effect function used when generating `Y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Effect {
    /// [`theta_true`].
    Heterogeneous,
    /// θ(x) ≡ c.
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub n: usize,
    pub seed: u64,
    pub effect: Effect,
    /// Instrument strength in the treatment index.
    pub gamma: [f64; 3],
    /// Covariate coefficients in the treatment index.
    pub beta: [f64; 2],
    pub kappa_t: f64,
    pub kappa_y: f64,
    /// Covariate coefficients in the outcome baseline.
    pub delta: [f64; 2],
    pub treatment_noise: f64,
    pub outcome_noise: f64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        Self {
            kind: DgpKind::CodeFaithful,
            n: 10_000,
            seed: 0,
            effect: Effect::Heterogeneous,
            gamma: [0.8, 0.8, 0.8],
            beta: [0.3, 0.3],
            kappa_t: 0.7,
            kappa_y: 0.7,
            delta: [0.5, -0.5],
            treatment_noise: 1.0,
            outcome_noise: 1.0,
        }
    }
}

impl DgpSpec {
    pub fn confounded(n: usize, seed: u64) -> Self {
        Self {
            kind: DgpKind::LogisticConfounded,
            n,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.treatment_noise > 0.0 && self.outcome_noise > 0.0) {
            return Err(Error::Config("noise scales must be positive".into()));
        }
        Ok(())
    }

    /// Non-fatal problems with the specification.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.kind == DgpKind::LogisticConfounded && self.gamma.iter().all(|&g| g == 0.0) {
            out.push("all instrument strengths are zero: instruments are irrelevant".to_string());
        }
        out
    }

    pub fn generate(&self) -> Result<Dataset> {
        match self.kind {
            DgpKind::CodeFaithful => {
                self.validate()?;
                gen_code_faithful(self.n, self.seed)
            }
            DgpKind::LogisticConfounded => gen_confounded(self),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub z: Matrix,
    pub x: Matrix,
    /// Binary treatment, `N×1`.
    pub t: Matrix,
    pub y: Option<Matrix>,
    /// The effect function used by the generator, evaluated at each row.
    pub theta_true: Matrix,
    pub kind: DgpKind,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn require_y(&self) -> Result<&Matrix> {
        self.y
            .as_ref()
            .ok_or_else(|| Error::Precondition("requires Y".into()))
    }

    /// Checks row alignment, treatment binarity and column widths.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let col = |m: &Matrix, cols: usize, what: &'static str| {
            if m.rows() != n || m.cols() != cols {
                Err(Error::shape(what, m.shape(), (n, cols)))
            } else {
                Ok(())
            }
        };
        col(&self.z, 3, "dataset z")?;
        col(&self.x, 2, "dataset x")?;
        col(&self.t, 1, "dataset t")?;
        col(&self.theta_true, 1, "dataset theta_true")?;
        if let Some(y) = &self.y {
            col(y, 1, "dataset y")?;
        }
        if self.t.as_slice().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Precondition("treatment must be binary".into()));
        }
        Ok(())
    }
}

/// Instruments and covariates i.i.d. standard normal; `T = 1{ε > 0}` with
/// `ε` independent of both. No outcome.
pub fn gen_code_faithful(n: usize, seed: u64) -> Result<Dataset> {
    let mut rng = RngStream::new(seed, DATA_STREAM);
    let z = rng.sample_standard_normal(n, 3);
    let x = rng.sample_standard_normal(n, 2);
    let t = rng.sample_standard_normal(n, 1).map(|e| if e > 0.0 { 1.0 } else { 0.0 });
    let theta_true = theta_true(&x)?;
    Ok(Dataset {
        z,
        x,
        t,
        y: None,
        theta_true,
        kind: DgpKind::CodeFaithful,
        seed,
    })
}

/// `T = 1{Zγ + Xβ + κ_T·u + ε > 0}`,
/// `Y = θ(X)·T + Xδ + κ_Y·u + η`, with `u, ε, η` independent normals.
pub fn gen_confounded(spec: &DgpSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n;
    let mut rng = RngStream::new(spec.seed, DATA_STREAM);
    let z = rng.sample_standard_normal(n, 3);
    let x = rng.sample_standard_normal(n, 2);
    let u = rng.sample_standard_normal(n, 1);
    let eps = rng.sample_standard_normal(n, 1);
    let eta = rng.sample_standard_normal(n, 1);

    let theta = match spec.effect {
        Effect::Heterogeneous => theta_true(&x)?,
        Effect::Constant(c) => Matrix::filled(n, 1, c),
    };
    let mut t = Matrix::zeros(n, 1);
    let mut y = Matrix::zeros(n, 1);
    for r in 0..n {
        let zr = z.row(r);
        let xr = x.row(r);
        let ur = u.get(r, 0);
        let index = zr.iter().zip(&spec.gamma).map(|(a, b)| a * b).sum::<f64>()
            + xr.iter().zip(&spec.beta).map(|(a, b)| a * b).sum::<f64>()
            + spec.kappa_t * ur
            + spec.treatment_noise * eps.get(r, 0);
        let tr = if index > 0.0 { 1.0 } else { 0.0 };
        t.set(r, 0, tr);
        let baseline = xr.iter().zip(&spec.delta).map(|(a, b)| a * b).sum::<f64>();
        y.set(
            r,
            0,
            theta.get(r, 0) * tr + baseline + spec.kappa_y * ur + spec.outcome_noise * eta.get(r, 0),
        );
    }
    Ok(Dataset {
        z,
        x,
        t,
        y: Some(y),
        theta_true: theta,
        kind: DgpKind::LogisticConfounded,
        seed: spec.seed,
    })
}

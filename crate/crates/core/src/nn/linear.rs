use super::params::{ParamShape, ParamView, Parameterized};
use crate::error::{Error, Result};
use crate::numkit::{Matrix, RngStream};

/// Fully connected layer `y = x·Wᵀ + b` with `W` stored `out×in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearGrads {
    pub input: Matrix,
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape("linear bias", weight.shape(), (bias.len(), 1)));
        }
        Ok(Self { weight, bias })
    }

    /// Uniform `±1/√in` initialisation for weights and biases, the usual
    /// default for fully connected layers in mainstream frameworks.
    pub fn init(in_features: usize, out_features: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / (in_features as f64).sqrt();
        let mut weight = Matrix::zeros(out_features, in_features);
        for w in weight.as_mut_slice() {
            *w = rng.uniform_range(-bound, bound);
        }
        let bias = (0..out_features).map(|_| rng.uniform_range(-bound, bound)).collect();
        Self { weight, bias }
    }

    pub fn in_features(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_features(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.weight.cols() {
            return Err(Error::shape("linear forward", x.shape(), self.weight.shape()));
        }
        let mut y = x.matmul_nt(&self.weight)?;
        for r in 0..y.rows() {
            for (v, b) in y.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        Ok(y)
    }

    pub fn backward(&self, x: &Matrix, upstream: &Matrix) -> Result<LinearGrads> {
        if x.cols() != self.in_features() || upstream.cols() != self.out_features() {
            return Err(Error::shape("linear backward", x.shape(), upstream.shape()));
        }
        if x.rows() != upstream.rows() {
            return Err(Error::shape("linear backward", x.shape(), upstream.shape()));
        }
        Ok(LinearGrads {
            input: upstream.matmul(&self.weight)?,
            weight: upstream.matmul_tn(x)?,
            bias: upstream.col_sums(),
        })
    }
}

impl Parameterized for Linear {
    fn params(&self) -> Vec<ParamView<'_>> {
        vec![
            ParamView {
                name: "weight".into(),
                shape: ParamShape::Matrix {
                    rows: self.weight.rows(),
                    cols: self.weight.cols(),
                },
                values: self.weight.as_slice(),
            },
            ParamView {
                name: "bias".into(),
                shape: ParamShape::Vector(self.bias.len()),
                values: &self.bias,
            },
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

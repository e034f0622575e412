use super::Mode;
use crate::error::{Error, Result};
use crate::numkit::{Matrix, RngStream};

/// Inverted dropout: surviving activations are scaled by `1/(1−p)` in Train
/// mode so that Eval mode is the identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    p: f64,
}

impl Dropout {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout rate must lie in [0, 1), got {p}")));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn sample_mask(&self, rows: usize, cols: usize, rng: &mut RngStream) -> Result<Matrix> {
        rng.sample_bernoulli_mask(rows, cols, 1.0 - self.p)
    }

    /// Returns the output and the mask used (all ones in Eval mode).
    pub fn forward(&self, x: &Matrix, mode: Mode, rng: &mut RngStream) -> Result<(Matrix, Matrix)> {
        match mode {
            Mode::Eval => Ok((x.clone(), Matrix::filled(x.rows(), x.cols(), 1.0))),
            Mode::Train => {
                let mask = self.sample_mask(x.rows(), x.cols(), rng)?;
                Ok((self.apply_mask(x, &mask)?, mask))
            }
        }
    }

    pub fn apply_mask(&self, x: &Matrix, mask: &Matrix) -> Result<Matrix> {
        let scale = 1.0 / (1.0 - self.p);
        x.zip_map(mask, |v, m| v * m * scale)
    }

    pub fn backward(&self, mask: &Matrix, upstream: &Matrix) -> Result<Matrix> {
        self.apply_mask(upstream, mask)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_p_zero_are_identity() {
        let mut rng = RngStream::new(0, 0);
        let x = rng.sample_standard_normal(4, 4);
        let (y, mask) = Dropout::new(0.3).unwrap().forward(&x, Mode::Eval, &mut rng).unwrap();
        assert_eq!(y, x);
        assert_eq!(mask, Matrix::filled(4, 4, 1.0));
        let (y, _) = Dropout::new(0.0).unwrap().forward(&x, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn train_preserves_expectation() {
        let mut rng = RngStream::new(1, 0);
        let x = Matrix::filled(1000, 100, 1.0);
        let (y, _) = Dropout::new(0.3).unwrap().forward(&x, Mode::Train, &mut rng).unwrap();
        let mean = y.mean();
        assert!((0.97..=1.03).contains(&mean), "mean {mean}");
    }

    #[test]
    fn backward_uses_the_same_mask() {
        let d = Dropout::new(0.5).unwrap();
        let mask = Matrix::from_rows(&[[1.0, 0.0]]);
        let g = d.backward(&mask, &Matrix::from_rows(&[[3.0, 3.0]])).unwrap();
        assert_eq!(g, Matrix::from_rows(&[[6.0, 0.0]]));
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(Dropout::new(1.0).is_err());
        assert!(Dropout::new(-0.1).is_err());
    }
}

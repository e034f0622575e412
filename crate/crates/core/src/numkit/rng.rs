use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::Matrix;
use crate::error::{Error, Result};

/// Seeded, counter-based random stream.
///
/// `(seed, stream_id)` fully determines the sequence. Streams that share a
/// seed but differ in `stream_id` are independent ChaCha streams, so
/// replications and components can each own one without coordination.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha20Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Rewinds to the start of the stream.
    pub fn reset(&mut self) {
        *self = Self::new(self.seed, self.stream_id);
    }

    /// A fresh stream with the same seed and a different id.
    pub fn fork(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform draw in `[low, high)`.
    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// `rows×cols` i.i.d. N(0,1) draws, filled row-major.
    pub fn sample_standard_normal(&mut self, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| self.standard_normal()).collect();
        Matrix::from_vec(rows, cols, data).expect("length matches by construction")
    }

    /// `rows×cols` mask with entries in {0, 1}, each 1 with probability `keep_prob`.
    pub fn sample_bernoulli_mask(&mut self, rows: usize, cols: usize, keep_prob: f64) -> Result<Matrix> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::Config(format!(
                "keep probability must lie in (0, 1], got {keep_prob}"
            )));
        }
        let data = (0..rows * cols)
            .map(|_| if self.uniform() < keep_prob { 1.0 } else { 0.0 })
            .collect();
        Ok(Matrix::from_vec(rows, cols, data).expect("length matches by construction"))
    }

    /// Fisher–Yates permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            idx.swap(i, j);
        }
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn same_stream_is_reproducible() {
        let mut a = RngStream::new(7, 3);
        let first = a.sample_standard_normal(4, 5);
        a.reset();
        assert_eq!(a.sample_standard_normal(4, 5), first);
        assert_eq!(RngStream::new(7, 3).sample_standard_normal(4, 5), first);
    }

    #[test]
    fn normal_moments_within_four_sigma() {
        let x = RngStream::new(11, 0).sample_standard_normal(10_000, 1);
        let (mean, var) = mean_var(x.as_slice());
        assert!(mean.abs() < 0.04, "mean {mean}");
        assert!((0.94..=1.06).contains(&var), "var {var}");
    }

    #[test]
    fn distinct_streams_are_uncorrelated() {
        let a = RngStream::new(11, 0).sample_standard_normal(10_000, 1);
        let b = RngStream::new(11, 1).sample_standard_normal(10_000, 1);
        let (ma, va) = mean_var(a.as_slice());
        let (mb, vb) = mean_var(b.as_slice());
        let cov = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - ma) * (y - mb))
            .sum::<f64>()
            / 9_999.0;
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.04, "corr {corr}");
    }

    #[test]
    fn bernoulli_mask() {
        let mut rng = RngStream::new(5, 9);
        let ones = rng.sample_bernoulli_mask(10, 10, 1.0).unwrap();
        assert!(ones.as_slice().iter().all(|&v| v == 1.0));

        let mask = rng.sample_bernoulli_mask(100, 100, 0.7).unwrap();
        assert!(mask.as_slice().iter().all(|&v| v == 0.0 || v == 1.0));
        let frac = mask.mean();
        assert!((0.68..=0.72).contains(&frac), "fraction {frac}");

        let m1 = RngStream::new(1, 1).sample_bernoulli_mask(3, 3, 0.5).unwrap();
        let m2 = RngStream::new(1, 1).sample_bernoulli_mask(3, 3, 0.5).unwrap();
        assert_eq!(m1, m2);

        for bad in [0.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(
                rng.sample_bernoulli_mask(1, 1, bad),
                Err(Error::Config(_))
            ));
        }
    }

    #[test]
    fn permutation_is_a_permutation() {
        let mut p = RngStream::new(3, 0).permutation(50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }
}

use crate::error::{Error, Result};

pub const DEFAULT_SMOOTHING_WINDOW: usize = 15;

/// Uniform moving average with `'same'`-length output and zero padding at
/// both ends, so edge values are pulled toward zero.
///
/// Output `i` averages `x[i − (w−1−s) ..= i + s]` with `s = (w−1)/2`,
/// treating out-of-range entries as zero. For even `w` the window leans one
/// step to the left.
pub fn moving_average(x: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(Error::Config("moving-average window must be at least 1".into()));
    }
    if window > x.len() {
        return Err(Error::Config(format!(
            "moving-average window {window} exceeds series length {}",
            x.len()
        )));
    }
    let weight = 1.0 / window as f64;
    let right = (window - 1) / 2;
    let left = window - 1 - right;
    let n = x.len() as isize;
    Ok((0..n)
        .map(|i| {
            let lo = (i - left as isize).max(0) as usize;
            let hi = (i + right as isize).min(n - 1) as usize;
            x[lo..=hi].iter().map(|v| v * weight).sum()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::RngStream;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let y = moving_average(&[1.0; 5], 3).unwrap();
        let expect = [2.0 / 3.0, 1.0, 1.0, 1.0, 2.0 / 3.0];
        for (a, b) in y.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let x = RngStream::new(0, 0).sample_standard_normal(9, 1).into_vec();
        assert_eq!(moving_average(&x, 1).unwrap(), x);
    }

    #[test]
    fn window_errors() {
        assert!(matches!(moving_average(&[1.0, 2.0], 3), Err(Error::Config(_))));
        assert!(matches!(moving_average(&[1.0, 2.0], 0), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn interior_is_window_mean(seed in 0u64..1000, half in 0usize..8, len in 20usize..60) {
            let w = 2 * half + 1;
            let x = RngStream::new(seed, 0).sample_standard_normal(len, 1).into_vec();
            let y = moving_average(&x, w).unwrap();
            for i in half..len - half {
                let mean = x[i - half..=i + half].iter().sum::<f64>() / w as f64;
                prop_assert!((y[i] - mean).abs() < 1e-12);
            }
        }
    }
}

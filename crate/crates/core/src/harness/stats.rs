//! Bootstrap helpers for the ensemble ordering and trend checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Least-squares slope of y over x.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|&x| (x - mx) * (x - mx)).sum();
    cov / var
}

/// Paired bootstrap on per-drop differences a_i - b_i: the fraction of
/// resampled means that are >= 0. Values near 1 support "a >= b".
pub fn bootstrap_fraction_ge(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> f64 {
    assert_eq!(a.len(), b.len(), "paired bootstrap needs matched samples");
    let diffs: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
    let n = diffs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..resamples {
        let mean: f64 = (0..n).map(|_| diffs[rng.random_range(0..n)]).sum::<f64>() / n as f64;
        if mean >= 0.0 {
            hits += 1;
        }
    }
    hits as f64 / resamples as f64
}

/// Bootstrap the sign of the trend slope across axis points: resample the
/// per-point drop samples, fit a line through the resampled means, and
/// return (fraction of nonnegative slopes, fraction of nonpositive slopes).
pub fn bootstrap_slope_sign(
    xs: &[f64],
    samples_per_point: &[Vec<f64>],
    resamples: usize,
    seed: u64,
) -> (f64, f64) {
    assert_eq!(xs.len(), samples_per_point.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nonneg = 0usize;
    let mut nonpos = 0usize;
    for _ in 0..resamples {
        let means: Vec<f64> = samples_per_point
            .iter()
            .map(|samples| {
                let n = samples.len();
                (0..n).map(|_| samples[rng.random_range(0..n)]).sum::<f64>() / n as f64
            })
            .collect();
        let s = slope(xs, &means);
        if s >= 0.0 {
            nonneg += 1;
        }
        if s <= 0.0 {
            nonpos += 1;
        }
    }
    (
        nonneg as f64 / resamples as f64,
        nonpos as f64 / resamples as f64,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        assert!((slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bootstrap_detects_clear_ordering() {
        let a: Vec<f64> = (0..60).map(|i| 10.0 + (i % 5) as f64).collect();
        let b: Vec<f64> = (0..60).map(|i| 5.0 + (i % 7) as f64).collect();
        assert!(bootstrap_fraction_ge(&a, &b, 500, 1) > 0.99);
        assert!(bootstrap_fraction_ge(&b, &a, 500, 1) < 0.01);
    }

    #[test]
    fn bootstrap_slope_sign_detects_trend() {
        let xs = [1.0, 2.0, 3.0];
        let increasing: Vec<Vec<f64>> = xs
            .iter()
            .map(|&x| (0..40).map(|i| 2.0 * x + 0.01 * (i % 3) as f64).collect())
            .collect();
        let (nonneg, _) = bootstrap_slope_sign(&xs, &increasing, 400, 2);
        assert!(nonneg > 0.99);
    }
}

//! Small statistical helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Two-sided standard normal quantile for confidence `level`, e.g. 2.5758 at 0.99.
pub fn z_for(level: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(0.5 + level / 2.0)
}

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Pearson statistic and upper-tail p-value for `observed` against `probs`.
/// Cells with zero probability must have zero count.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> (f64, f64) {
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    let mut cells = 0usize;
    for (&o, &p) in observed.iter().zip(probs) {
        if p > 0.0 {
            let e = p * n as f64;
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        } else if o > 0 {
            return (f64::INFINITY, 0.0);
        }
    }
    if cells < 2 {
        return (0.0, 1.0);
    }
    let dist = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    (stat, 1.0 - dist.cdf(stat))
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lag-1 sample autocorrelation.
pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    let cov: f64 = xs.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    cov / var
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_and_quantile() {
        assert!((z_for(0.99) - 2.5758293).abs() < 1e-6);
        let (lo, hi) = wilson(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.03 && hi < 0.04);
        let (lo, hi) = wilson(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn chi_square_cases() {
        let (s, p) = chi_square(&[25, 25, 25, 25], &[0.25; 4]);
        assert_eq!(s, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let (_, p) = chi_square(&[100, 0], &[0.5, 0.5]);
        assert!(p < 1e-10);
        assert_eq!(chi_square(&[1, 1], &[1.0, 0.0]).1, 0.0);
    }

    #[test]
    fn order_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(lag1_autocorrelation(&[1.0, -1.0, 1.0, -1.0, 1.0, -1.0]) < -0.5);
    }
}

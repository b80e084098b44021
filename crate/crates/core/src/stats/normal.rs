use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
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

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample Kolmogorov-Smirnov test of `xs` against `N(mu, sd^2)`.
///
/// The p-value uses the asymptotic Kolmogorov series with Stephens'
/// finite-sample correction.
pub fn ks_normal(xs: &[f64], mu: f64, sd: f64) -> KsResult {
    let mut v: Vec<f64> = xs.iter().map(|x| (x - mu) / sd).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let f = normal_cdf(*x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let sq = nf.sqrt();
    KsResult { statistic: d, p_value: kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d), n }
}

fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        s += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn cdf_reference_values() {
        // values from standard tables; erfc is good to about 1e-11
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.0) - 0.841_344_746_068_543).abs() < 1e-10);
        assert!((normal_cdf(-1.959_963_984_540_054) - 0.025).abs() < 1e-10);
        assert!((normal_cdf(-5.0) - 2.866_515_718_791_939e-7).abs() < 1e-15);
        assert!((normal_quantile(0.975) - super::super::Z95).abs() < 1e-9);
    }

    #[test]
    fn wilson_contains_truth() {
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
        assert_eq!(wilson_interval(0, 10, 1.96).0, 0.0);
    }

    #[test]
    fn ks_accepts_normal_and_rejects_shift() {
        let mut rng = RngStream::new(2, 0);
        let xs: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        assert!(ks_normal(&xs, 0.0, 1.0).p_value > 0.01);
        assert!(ks_normal(&xs, 0.3, 1.0).p_value < 0.01);
        assert!(ks_normal(&xs, 0.0, 1.5).p_value < 0.01);
    }
}

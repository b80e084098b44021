use serde::{Deserialize, Serialize};

use super::median;
use crate::engine::Trajectory;
use crate::error::{Error, Result};
use crate::geometry::dist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendReport {
    pub scales: Vec<f64>,
    /// Replica median of `m^{-1/2} * value` at each scale.
    pub scaled_medians: Vec<f64>,
    pub decreasing: bool,
}

/// Scales each group's values by `m^{-1/2}`, takes the replica median, and
/// reports whether the medians strictly decrease as `m` grows.
pub fn scaled_median_trend(groups: &[(f64, Vec<f64>)]) -> Result<TrendReport> {
    if groups.len() < 2 {
        return Err(Error::domain("need at least two scales"));
    }
    if groups.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::domain("scales must increase"));
    }
    let scales: Vec<f64> = groups.iter().map(|g| g.0).collect();
    let scaled_medians: Vec<f64> = groups.iter().map(|(m, v)| median(v) / m.sqrt()).collect();
    let decreasing = scaled_medians.windows(2).all(|w| w[1] < w[0]);
    Ok(TrendReport { scales, scaled_medians, decreasing })
}

/// `sup_t |Xbar(t) - X_1(t)|` over the recorded instants of a trajectory.
pub fn leader_gap_sup(traj: &Trajectory) -> f64 {
    traj.observations
        .iter()
        .map(|o| dist(&o.config.barycenter().0, o.config.position(0)))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewalRates {
    /// `E[dx] / E[dt]`.
    pub drift: Vec<f64>,
    /// `Cov(dx) / E[dt]`, row-major `d x d`.
    pub covariance_rate: Vec<f64>,
    pub mean_cycle: f64,
}

/// Invariance-principle constants from i.i.d. renewal cycles `(dt, dx)`:
/// drift `E[dx]/E[dt]` and diffusion matrix `Cov(dx)/E[dt]`.
pub fn renewal_rates(cycles: &[(f64, Vec<f64>)]) -> Result<RenewalRates> {
    let n = cycles.len();
    if n < 2 {
        return Err(Error::domain("need at least two renewal cycles"));
    }
    let d = cycles[0].1.len();
    if cycles.iter().any(|c| c.1.len() != d) {
        return Err(Error::domain("cycle increments must share a dimension"));
    }
    let nf = n as f64;
    let mean_cycle = cycles.iter().map(|c| c.0).sum::<f64>() / nf;
    if !(mean_cycle > 0.0) {
        return Err(Error::domain("mean cycle length must be positive"));
    }
    let mu: Vec<f64> = (0..d).map(|k| cycles.iter().map(|c| c.1[k]).sum::<f64>() / nf).collect();
    let mut cov = vec![0.0; d * d];
    for (_, x) in cycles {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (x[i] - mu[i]) * (x[j] - mu[j]);
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= (nf - 1.0) * mean_cycle);
    Ok(RenewalRates { drift: mu.iter().map(|m| m / mean_cycle).collect(), covariance_rate: cov, mean_cycle })
}

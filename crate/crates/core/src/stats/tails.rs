use serde::{Deserialize, Serialize};

use super::{median, EstimatorReport, Estimate, Z95};
use crate::error::{Error, Result};

/// Survivors below this count are too noisy to enter the slope fit.
const MIN_SURVIVORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub report: EstimatorReport,
    /// `(threshold, empirical P(T > threshold))`.
    pub survival: Vec<(f64, f64)>,
    pub degenerate: bool,
}

impl TailFit {
    pub fn slope(&self) -> Option<&Estimate> {
        self.report.estimate("slope")
    }
}

/// Exponential-tail diagnostics for a sample of hitting times.
///
/// Censored samples may be passed as `f64::INFINITY`. With an empty
/// `thresholds` slice a grid of 60 points from 0 to the largest finite sample
/// is used.
///
/// * `slope`: weighted least-squares slope of `ln S(t)` over thresholds at or
///   beyond the median that keep at least 10 survivors. Weights are the inverse
///   delta-method variances `n S / (1 - S)`; the standard error treats the
///   curve points as independent, so it is optimistic.
/// * `slope_negative_3se` check: `slope + 3 se < 0`.
/// * `geometric_dominance` check: with `c` the median and `q = S(c)`,
///   `S(kc) <= q^k + 3 sqrt(q^k (1 - q^k) / n)` for every `k >= 1` with
///   `kc` inside the fitted range.
/// * `early_slope`/`late_slope`: fits on each half of the region, for a
///   concave-or-linear reading of the log-survival curve.
pub fn fit_tail(samples: &[f64], thresholds: &[f64]) -> Result<TailFit> {
    let n = samples.len();
    if n < 100 {
        return Err(Error::domain(format!("need at least 100 samples, got {n}")));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("hitting-time samples contain NaN"));
    }
    let nf = n as f64;
    let mut report = EstimatorReport::new("tail_fit", n);
    let finite: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    let censored = n - finite.len();
    if censored > 0 {
        report.notes.push(format!("{censored} censored samples"));
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let grid: Vec<f64> = if thresholds.is_empty() {
        if finite.is_empty() {
            Vec::new()
        } else {
            (0..60).map(|i| hi * i as f64 / 59.0).collect()
        }
    } else {
        thresholds.to_vec()
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let survivors = |t: f64| n - sorted.partition_point(|&x| x <= t);
    let survival: Vec<(f64, f64)> = grid.iter().map(|&t| (t, survivors(t) as f64 / nf)).collect();

    if finite.len() < 2 || lo == hi {
        report.notes.push("degenerate sample: no spread".into());
        return Ok(TailFit { report, survival, degenerate: true });
    }

    let med = median(samples);
    let region: Vec<(f64, f64, f64)> = grid
        .iter()
        .filter(|&&t| t >= med && survivors(t) >= MIN_SURVIVORS && survivors(t) < n)
        .map(|&t| {
            let s = survivors(t) as f64 / nf;
            (t, s.ln(), nf * s / (1.0 - s))
        })
        .collect();
    if region.len() < 3 {
        report.notes.push("fewer than 3 thresholds in the tail region".into());
        return Ok(TailFit { report, survival, degenerate: true });
    }

    let (slope, se) = wls(&region);
    report.push(Estimate::new("slope", slope, se, Z95));
    report.check("slope_negative_3se", slope + 3.0 * se < 0.0, slope + 3.0 * se, 0.0);

    let half = region.len() / 2;
    if half >= 3 && region.len() - half >= 3 {
        let (early, early_se) = wls(&region[..half]);
        let (late, late_se) = wls(&region[half..]);
        report.push(Estimate::new("early_slope", early, early_se, Z95));
        report.push(Estimate::new("late_slope", late, late_se, Z95));
    }

    // geometric decay measured in units of the median
    let fit_end = region.last().map_or(med, |r| r.0);
    let c = if med > 0.0 { med } else { mean_finite(&finite) };
    let q = survivors(c) as f64 / nf;
    let mut worst = f64::NEG_INFINITY;
    let mut k = 1;
    while (k as f64) * c <= fit_end && c > 0.0 {
        let bound = q.powi(k);
        let tol = 3.0 * (bound * (1.0 - bound) / nf).sqrt();
        let s = survivors(k as f64 * c) as f64 / nf;
        worst = worst.max(s - bound - tol);
        k += 1;
    }
    if worst.is_finite() {
        report.check("geometric_dominance", worst <= 0.0, worst, 0.0);
    }
    Ok(TailFit { report, survival, degenerate: false })
}

fn mean_finite(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn wls(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let tx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ty = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - tx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - tx) * (p.1 - ty)).sum();
    (sxy / sxx, (1.0 / sxx).sqrt())
}

//! Estimators and tests that confront simulation output with theory.
//!
//! Every routine returns an [`EstimatorReport`] (or a type embedding one)
//! that records the point estimates, their standard errors, the confidence
//! level, and each pass/fail check with the threshold it was judged against.

mod diagnostics;
mod diffusivity;
mod measure;
mod minorization;
mod normal;
mod occupation;
mod paths;
mod tails;

pub use diagnostics::{leader_gap_sup, renewal_rates, scaled_median_trend, RenewalRates, TrendReport};
pub use diffusivity::{drift_and_isotropy, estimate_sigma2};
pub use measure::{empirical_measure, Histogram, HistogramGrid, MeasureReport};
pub use minorization::{minorization_check, minorization_gamma, BoxRegion, MinorizationSetup};
pub use normal::{ks_normal, normal_cdf, normal_quantile, wilson_interval, KsResult};
pub use occupation::{occupation_fraction, OccupationReport};
pub use paths::{donsker_rescale, renewal_index};
pub use tails::{fit_tail, TailFit};

use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub se: f64,
    pub ci: (f64, f64),
}

impl Estimate {
    pub fn new(name: impl Into<String>, value: f64, se: f64, z: f64) -> Self {
        Estimate { name: name.into(), value, se, ci: (value - z * se, value + z * se) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub statistic: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub name: String,
    pub estimates: Vec<Estimate>,
    pub ci_level: f64,
    pub samples: usize,
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl EstimatorReport {
    pub fn new(name: impl Into<String>, samples: usize) -> Self {
        EstimatorReport {
            name: name.into(),
            estimates: Vec::new(),
            ci_level: 0.95,
            samples,
            seed: None,
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn push(&mut self, e: Estimate) {
        self.estimates.push(e);
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, statistic: f64, threshold: f64) {
        self.checks.push(Check { name: name.into(), passed, statistic, threshold });
    }

    pub fn estimate(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    pub fn get_check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// All recorded checks passed (vacuously true when there are none).
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Adds a check that estimate `name` lies within `rel_tol` of `target`.
    pub fn against_target(&mut self, name: &str, target: f64, rel_tol: f64) {
        if let Some(e) = self.estimate(name) {
            let stat = (e.value - target).abs() / target.abs().max(f64::MIN_POSITIVE);
            let passed = stat <= rel_tol;
            self.check(format!("{name}_within_rel_tol_of_{target}"), passed, stat, rel_tol);
        }
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two samples.
pub(crate) fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Median of a sample; NaN for an empty one.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

use serde::{Deserialize, Serialize};

use super::{ks_normal, normal_cdf, wilson_interval, Estimate, EstimatorReport, Z95};
use crate::engine::{self, BranchEvent, InstantKind, Observer};
use crate::error::{Error, Result};
use crate::geometry::Configuration;
use crate::manifest::RunManifest;
use crate::replicas::{map_replicas, Execution};

/// Axis-aligned box in `R^{d x N}`, coordinates particle-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxRegion {
    /// The same interval on every one of `len` coordinates.
    pub fn cube(len: usize, lo: f64, hi: f64) -> Self {
        BoxRegion { lower: vec![lo; len], upper: vec![hi; len] }
    }

    pub fn contains(&self, flat: &[f64]) -> bool {
        flat.iter().zip(self.lower.iter().zip(&self.upper)).all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    /// Mass under the product standard Gaussian, as a product of one-dimensional
    /// CDF differences.
    pub fn gaussian_mass(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&lo, &hi)| if hi > lo { normal_cdf(hi) - normal_cdf(lo) } else { 0.0 })
            .product()
    }
}

/// Lower-bound constant `e^{-2N} e^{-N L^2 / 2}`.
pub fn minorization_gamma(n: usize, l: f64) -> f64 {
    let n = n as f64;
    (-2.0 * n).exp() * (-n * l * l / 2.0).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinorizationSetup {
    pub start: Configuration,
    pub l: f64,
    pub t: f64,
    pub boxes: Vec<BoxRegion>,
    pub replicas: u64,
    pub seed: u64,
}

#[derive(Default)]
struct Snapshot {
    at: f64,
    state: Option<Configuration>,
    events_before_two: usize,
}

impl Observer for Snapshot {
    fn on_instant(&mut self, time: f64, kind: InstantKind, config: &Configuration) {
        if kind == InstantKind::Grid && (time - self.at).abs() < 1e-12 {
            self.state = Some(config.clone());
        }
    }

    fn on_event(&mut self, ev: &BranchEvent, _: &Configuration, _: &Configuration) {
        if ev.time <= 2.0 {
            self.events_before_two += 1;
        }
    }
}

/// Monte Carlo check of `mu_{t,x}(A) >= gamma phi(A)` for each box `A`.
///
/// `mu_{t,x}` is the law of the recentered configuration at time `t` started
/// from `x`; `phi` is the product standard Gaussian on `R^{d x N}`. A box
/// passes when the lower end of the 95% Wilson interval for `mu` is at least
/// `gamma phi(A)`; boxes with `phi(A) = 0` pass trivially.
///
/// The recentered law lives on the zero-sum subspace, so a box that misses
/// that subspace has `mu(A) = 0` and fails whenever `phi(A) > 0`.
///
/// On the replicas with no branching in `[0, 2]` the report also KS-tests
/// every coordinate of `X_i(t) - xbar(0)` against `N(x_i - xbar(0), t)` at the
/// 1% level (checks `conditioned_ks_p{i}_c{c}`).
pub fn minorization_check(setup: &MinorizationSetup, exec: Execution) -> Result<EstimatorReport> {
    let x = &setup.start;
    let n = x.capacity();
    if x.len() != n {
        return Err(Error::domain("start configuration must hold N particles"));
    }
    if x.extent() > setup.l {
        return Err(Error::domain(format!("start extent {} exceeds L = {}", x.extent(), setup.l)));
    }
    if !(1.0..=2.0).contains(&setup.t) {
        return Err(Error::domain("t must lie in [1, 2]"));
    }
    let width = n * x.dim();
    if setup.boxes.iter().any(|b| b.lower.len() != width || b.upper.len() != width) {
        return Err(Error::domain(format!("boxes must have {width} coordinates")));
    }
    let manifest = RunManifest::new(n, x.dim(), 2.0)
        .with_explicit(x.points().into_iter().map(|p| p.0).collect())
        .with_dt_obs(setup.t)
        .with_seed(setup.seed)
        .with_replicas(setup.replicas);

    let snaps = map_replicas(setup.seed, setup.replicas, exec, |_, mut rng| {
        let mut snap = Snapshot { at: setup.t, ..Snapshot::default() };
        engine::run_with(&manifest, &mut rng, &mut snap)?;
        let state = snap.state.ok_or_else(|| Error::domain("time t was not recorded"))?;
        Ok((state, snap.events_before_two == 0))
    })?;

    let gamma = minorization_gamma(n, setup.l);
    let total = snaps.len();
    let mut report = EstimatorReport::new("minorization", total).with_seed(setup.seed);
    report.push(Estimate::new("gamma", gamma, 0.0, 0.0));
    let recentred: Vec<Configuration> = snaps.iter().map(|(c, _)| c.recenter()).collect();
    for (i, b) in setup.boxes.iter().enumerate() {
        let hits = recentred.iter().filter(|c| b.contains(c.flat())).count();
        let p = hits as f64 / total as f64;
        let (lo, hi) = wilson_interval(hits, total, Z95);
        report.push(Estimate { name: format!("mu_box{i}"), value: p, se: (p * (1.0 - p) / total as f64).sqrt(), ci: (lo, hi) });
        let phi = b.gaussian_mass();
        report.push(Estimate::new(format!("phi_box{i}"), phi, 0.0, 0.0));
        let target = gamma * phi;
        report.check(format!("box{i}_lower_ci_ge_gamma_phi"), phi == 0.0 || lo >= target, lo, target);
    }

    let conditioned: Vec<&Configuration> = snaps.iter().filter(|(_, quiet)| *quiet).map(|(c, _)| c).collect();
    report.push(Estimate::new("p_no_branching", conditioned.len() as f64 / total as f64, 0.0, 0.0));
    if conditioned.len() >= 20 {
        let x0bar = x.barycenter();
        for i in 0..n {
            for c in 0..x.dim() {
                let vals: Vec<f64> = conditioned.iter().map(|s| s.position(i)[c] - x0bar.0[c]).collect();
                let ks = ks_normal(&vals, x.position(i)[c] - x0bar.0[c], setup.t.sqrt());
                report.check(format!("conditioned_ks_p{i}_c{c}"), ks.p_value >= 0.01, ks.p_value, 0.01);
            }
        }
    } else {
        report.notes.push(format!("only {} replicas without branching; KS sub-check skipped", conditioned.len()));
    }
    Ok(report)
}

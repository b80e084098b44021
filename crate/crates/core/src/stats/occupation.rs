use serde::{Deserialize, Serialize};

use super::{mean, Estimate, EstimatorReport, Z95};
use crate::engine::{InstantKind, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::dist_sq;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupationReport {
    pub report: EstimatorReport,
    /// `(block start, fraction of grid instants inside the set)`.
    pub blocks: Vec<(f64, f64)>,
}

/// Fraction of grid instants at which every recentered particle lies in the
/// open ball `B(center, radius)`, overall and per time block of length `block`.
///
/// Grid instants are equally spaced, so the fraction is a Riemann estimate of
/// the occupation time divided by elapsed time.
pub fn occupation_fraction(traj: &Trajectory, center: &[f64], radius: f64, block: f64) -> Result<OccupationReport> {
    let grid: Vec<_> = traj.observations.iter().filter(|o| o.kind == InstantKind::Grid).collect();
    if grid.is_empty() {
        return Err(Error::domain("trajectory has no grid observations"));
    }
    if !(block > 0.0) {
        return Err(Error::domain("block length must be positive"));
    }
    let r2 = radius * radius;
    let inside: Vec<(f64, f64)> = grid
        .iter()
        .map(|o| {
            let rc = o.config.recenter();
            let hit = rc.positions().all(|p| dist_sq(p, center) < r2);
            (o.time, if hit { 1.0 } else { 0.0 })
        })
        .collect();

    let mut blocks: Vec<(f64, Vec<f64>)> = Vec::new();
    for &(t, v) in &inside {
        let start = (t / block).floor() * block;
        match blocks.last_mut() {
            Some((s, vals)) if *s == start => vals.push(v),
            _ => blocks.push((start, vec![v])),
        }
    }
    let blocks: Vec<(f64, f64)> = blocks.into_iter().map(|(s, v)| (s, mean(&v))).collect();

    let vals: Vec<f64> = inside.iter().map(|p| p.1).collect();
    let fraction = mean(&vals);
    let mut report = EstimatorReport::new("occupation_fraction", vals.len());
    let bvals: Vec<f64> = blocks.iter().map(|b| b.1).collect();
    let block_se = if bvals.len() > 1 { (super::variance(&bvals) / bvals.len() as f64).sqrt() } else { 0.0 };
    report.push(Estimate::new("fraction", fraction, block_se, Z95));
    report.push(Estimate::new("occupation_time", fraction * traj.horizon(), block_se * traj.horizon(), Z95));
    Ok(OccupationReport { report, blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::manifest::RunManifest;
    use crate::rng::RngStream;

    #[test]
    fn single_particle_is_always_home() {
        let m = RunManifest::new(1, 2, 5.0).with_dt_obs(0.1);
        let t = simulate(&m, &mut RngStream::new(0, 0)).unwrap();
        let r = occupation_fraction(&t, &[0.0, 0.0], 0.5, 1.0).unwrap();
        assert_eq!(r.report.estimate("fraction").unwrap().value, 1.0);
        let r = occupation_fraction(&t, &[0.0, 0.0], 0.0, 1.0).unwrap();
        assert_eq!(r.report.estimate("fraction").unwrap().value, 0.0);
    }

    #[test]
    fn blocks_partition_the_grid() {
        let m = RunManifest::new(3, 1, 10.0).with_dt_obs(0.5);
        let t = simulate(&m, &mut RngStream::new(1, 0)).unwrap();
        let r = occupation_fraction(&t, &[0.0], 5.0, 2.0).unwrap();
        assert_eq!(r.blocks.len(), 6);
        assert_eq!(r.blocks[1].0, 2.0);
    }
}

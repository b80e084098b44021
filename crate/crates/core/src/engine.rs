//! Exact event-driven simulation of the barycentric Brownian bees process.
//!
//! Between branchings the particles are independent Brownian motions, so the
//! state is advanced from one recorded instant to the next by a single exact
//! Gaussian increment. Branch instants come from an exponential clock of rate
//! `n` (one unit-rate clock per particle); the parent is uniform. Once the
//! population is at capacity, the newborn is placed on its parent and the
//! particle farthest from the `(N+1)`-particle barycenter is removed.
//!
//! Draw order per replica stream, which the lineage module relies on:
//! initial condition, then for each inter-branch period the exponential wait,
//! the Gaussian increments of every grid instant inside it (particle-major),
//! the increment up to the branch instant, and finally the parent index.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist_sq, Configuration, Point};
use crate::manifest::RunManifest;
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchEvent {
    pub time: f64,
    pub parent: usize,
    /// Slot overwritten by the newborn; `None` while the population grows.
    pub killed: Option<usize>,
    pub barycenter_before: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstantKind {
    Grid,
    Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub time: f64,
    pub kind: InstantKind,
    pub config: Configuration,
}

/// Recorded output of one replica. Observations hold every grid instant and
/// the post-jump state at every branch instant, in time order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub manifest: RunManifest,
    pub replica: u64,
    pub observations: Vec<Observation>,
    pub events: Vec<BranchEvent>,
}

impl Trajectory {
    pub fn horizon(&self) -> f64 {
        self.observations.last().map_or(0.0, |o| o.time)
    }

    /// The last observation recorded at or before `t`.
    pub fn state_at(&self, t: f64) -> Option<&Observation> {
        let idx = self.observations.partition_point(|o| o.time <= t);
        idx.checked_sub(1).map(|i| &self.observations[i])
    }

    /// The observation recorded exactly at `t` (to within `1e-9`), preferring
    /// the latest one when an event and a grid instant coincide.
    pub fn observation_at(&self, t: f64) -> Option<&Observation> {
        self.observations.iter().rev().find(|o| (o.time - t).abs() <= 1e-9)
    }

    pub fn events_in(&self, from: f64, to: f64) -> impl Iterator<Item = &BranchEvent> {
        self.events.iter().filter(move |e| e.time >= from && e.time <= to)
    }
}

/// Hooks invoked by [`run_with`] as the simulation advances.
pub trait Observer {
    /// Called at every recorded instant with the (post-jump) state.
    fn on_instant(&mut self, _time: f64, _kind: InstantKind, _config: &Configuration) {}

    /// Called at every branch, before the matching `on_instant`.
    fn on_event(&mut self, _event: &BranchEvent, _before: &Configuration, _after: &Configuration) {}

    /// Returning `true` stops the run after the current instant.
    fn done(&self) -> bool {
        false
    }
}

impl Observer for () {}

/// Index killed when slot `parent` branches in a full configuration.
///
/// Ties in squared distance go to the lowest index.
pub fn kill_index(c: &Configuration, parent: usize) -> Result<usize> {
    if !c.is_full() {
        return Err(Error::domain(format!(
            "no killing below capacity ({} of {} particles)",
            c.len(),
            c.capacity()
        )));
    }
    if parent >= c.len() {
        return Err(Error::domain(format!("parent {parent} out of range")));
    }
    Ok(farthest_after_branch(c, parent))
}

fn farthest_after_branch(c: &Configuration, parent: usize) -> usize {
    let d = c.dim();
    let n = c.len();
    let mut b = c.position(parent).to_vec();
    for p in c.positions() {
        for k in 0..d {
            b[k] += p[k];
        }
    }
    let scale = 1.0 / (n as f64 + 1.0);
    b.iter_mut().for_each(|x| *x *= scale);
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (j, p) in c.positions().enumerate() {
        let dj = dist_sq(p, &b);
        if dj > best_d {
            best_d = dj;
            best = j;
        }
    }
    best
}

/// Branches slot `parent` at `time`, in place. Returns the event record.
pub fn branch_in_place(c: &mut Configuration, parent: usize, time: f64) -> Result<BranchEvent> {
    if parent >= c.len() {
        return Err(Error::domain(format!("parent {parent} out of range")));
    }
    let barycenter_before = c.barycenter();
    let killed = if c.is_full() {
        let k = farthest_after_branch(c, parent);
        c.copy_within(parent, k);
        Some(k)
    } else {
        c.push_copy(parent);
        None
    };
    Ok(BranchEvent { time, parent, killed, barycenter_before })
}

/// Pure form of [`branch_in_place`], stamped at time zero.
pub fn apply_branch(c: &Configuration, parent: usize) -> Result<(Configuration, BranchEvent)> {
    let mut out = c.clone();
    let ev = branch_in_place(&mut out, parent, 0.0)?;
    Ok((out, ev))
}

/// Exponential waiting time with rate `n`.
pub fn sample_interbranch(rng: &mut RngStream, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("branching rate needs at least one particle"));
    }
    let e: f64 = Exp1.sample(rng);
    Ok(e / n as f64)
}

/// Runs one replica to the manifest horizon, reporting to `observer`.
/// Returns the final configuration.
pub fn run_with<O: Observer + ?Sized>(
    manifest: &RunManifest,
    rng: &mut RngStream,
    observer: &mut O,
) -> Result<Configuration> {
    manifest.validate()?;
    let mut state = manifest.initial_configuration(rng)?;
    let grid = manifest.grid_times();
    let horizon = manifest.horizon;
    let mut now = 0.0;
    let mut next_grid = 0usize;

    // time zero is always a grid instant
    observer.on_instant(0.0, InstantKind::Grid, &state);
    next_grid += 1;
    if observer.done() {
        return Ok(state);
    }

    loop {
        let wait = sample_interbranch(rng, state.len())?;
        let event_time = now + wait;
        while next_grid < grid.len() && grid[next_grid] < event_time {
            let g = grid[next_grid];
            state.diffuse(g - now, rng)?;
            now = g;
            next_grid += 1;
            observer.on_instant(g, InstantKind::Grid, &state);
            if observer.done() {
                return Ok(state);
            }
        }
        if event_time > horizon {
            break;
        }
        state.diffuse(event_time - now, rng)?;
        now = event_time;
        let parent = rng.random_range(0..state.len());
        let before = state.clone();
        let ev = branch_in_place(&mut state, parent, event_time)?;
        observer.on_event(&ev, &before, &state);
        observer.on_instant(event_time, InstantKind::Event, &state);
        if observer.done() {
            return Ok(state);
        }
    }
    Ok(state)
}

struct Recorder {
    observations: Vec<Observation>,
    events: Vec<BranchEvent>,
}

impl Observer for Recorder {
    fn on_instant(&mut self, time: f64, kind: InstantKind, config: &Configuration) {
        self.observations.push(Observation { time, kind, config: config.clone() });
    }

    fn on_event(&mut self, event: &BranchEvent, _before: &Configuration, _after: &Configuration) {
        self.events.push(event.clone());
    }
}

/// Simulates one replica and records every grid and event instant.
pub fn simulate(manifest: &RunManifest, rng: &mut RngStream) -> Result<Trajectory> {
    let mut rec = Recorder { observations: Vec::new(), events: Vec::new() };
    run_with(manifest, rng, &mut rec)?;
    Ok(Trajectory {
        manifest: manifest.clone(),
        replica: rng.stream(),
        observations: rec.observations,
        events: rec.events,
    })
}

//! The process embedded in a full dyadic branching Brownian motion.
//!
//! Particles currently indexed by the bees process ("slots") are driven by the
//! replica stream through [`engine::run_with`], so the embedded process
//! consumes exactly the draws the engine would. Every other BBM particle (a
//! "ghost": a particle killed in the bees process, or a descendant of one)
//! moves and branches using the replica's auxiliary stream. Ghost positions
//! are advanced lazily, only when a ghost branches, expires, or a grid
//! instant is reached; independence of Brownian increments makes this exact.
//!
//! With [`GhostRetention::OneUnit`] a ghost tree is dropped one time unit
//! after its root was killed, which is exactly as long as the `B` event
//! needs it and keeps the population bounded.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::engine::{self, BranchEvent, InstantKind, Observation, Observer, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{dist, dist_sq, Configuration};
use crate::manifest::RunManifest;
use crate::rng::RngStream;

/// Tolerance used to match requested anchor times against recorded instants.
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BbmNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub birth: f64,
    /// Instants at which this particle branched (it keeps its id; the child
    /// is a new node).
    pub branch_times: Vec<f64>,
    /// End of tracking: expiry of a pruned ghost. `None` while open.
    #[serde(rename = "death")]
    pub end: Option<f64>,
    pub path: Vec<(f64, Vec<f64>)>,
}

impl BbmNode {
    fn new(id: usize, parent: Option<usize>, birth: f64, pos: &[f64]) -> Self {
        BbmNode { id, parent, birth, branch_times: Vec::new(), end: None, path: vec![(birth, pos.to_vec())] }
    }

    fn record(&mut self, t: f64, pos: &[f64]) {
        match self.path.last() {
            Some((last, _)) if *last == t => {}
            _ => self.path.push((t, pos.to_vec())),
        }
    }

    /// Sampled position at `t`, if `t` is one of this node's recorded instants.
    pub fn position_at(&self, t: f64) -> Option<&[f64]> {
        let i = self.path.partition_point(|(s, _)| *s < t - TIME_TOL);
        self.path.get(i).filter(|(s, _)| (s - t).abs() <= TIME_TOL).map(|(_, p)| p.as_slice())
    }

    pub fn samples_in(&self, from: f64, to: f64) -> impl Iterator<Item = &(f64, Vec<f64>)> {
        self.path.iter().filter(move |(s, _)| *s >= from - TIME_TOL && *s <= to + TIME_TOL)
    }

    fn alive_at(&self, t: f64) -> bool {
        self.birth <= t + TIME_TOL && self.end.is_none_or(|e| e >= t - TIME_TOL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexChange {
    pub time: f64,
    pub slot: usize,
    pub id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GhostRetention {
    /// Track every BBM particle for the whole window.
    Full,
    /// Drop ghost trees one time unit after their root left the bees process.
    #[default]
    OneUnit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineageOptions {
    pub retention: GhostRetention,
    /// Upper bound on the number of BBM nodes ever created.
    pub max_nodes: usize,
    /// Largest accepted window.
    pub window_cap: f64,
}

impl Default for LineageOptions {
    fn default() -> Self {
        LineageOptions { retention: GhostRetention::OneUnit, max_nodes: 1 << 22, window_cap: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineageRecord {
    pub manifest: RunManifest,
    pub replica: u64,
    pub horizon: f64,
    pub nodes: Vec<BbmNode>,
    pub initial_index: Vec<usize>,
    pub index_changes: Vec<IndexChange>,
    pub events: Vec<BranchEvent>,
    pub instants: Vec<(f64, InstantKind)>,
    #[serde(skip)]
    children: Vec<Vec<usize>>,
}

impl LineageRecord {
    /// Assembles a record from raw parts (used for crafted scenarios).
    pub fn from_parts(
        manifest: RunManifest,
        horizon: f64,
        nodes: Vec<BbmNode>,
        initial_index: Vec<usize>,
        index_changes: Vec<IndexChange>,
        events: Vec<BranchEvent>,
    ) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::domain("node ids must equal their position in the node list"));
            }
            if let Some(p) = n.parent {
                if p >= i {
                    return Err(Error::domain("a parent must precede its children"));
                }
            }
        }
        let mut rec = LineageRecord {
            manifest,
            replica: 0,
            horizon,
            nodes,
            initial_index,
            index_changes,
            events,
            instants: Vec::new(),
            children: Vec::new(),
        };
        rec.build_children();
        Ok(rec)
    }

    fn build_children(&mut self) {
        let mut children = vec![Vec::new(); self.nodes.len()];
        for n in &self.nodes {
            if let Some(p) = n.parent {
                children[p].push(n.id);
            }
        }
        self.children = children;
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.children[id]
    }

    /// `I(t)`: the BBM id held by each slot at time `t` (changes at `t` included).
    pub fn index_at(&self, t: f64) -> Vec<usize> {
        let mut idx = self.initial_index.clone();
        for ch in self.index_changes.iter().take_while(|c| c.time <= t + TIME_TOL) {
            if ch.slot == idx.len() {
                idx.push(ch.id);
            } else {
                idx[ch.slot] = ch.id;
            }
        }
        idx
    }

    /// Number of BBM particles alive at `t` (counting only tracked ones).
    pub fn population_at(&self, t: f64) -> usize {
        self.nodes.iter().filter(|n| n.alive_at(t)).count()
    }

    /// `id` together with all nodes descending from it through births after `since`.
    pub fn descendants(&self, id: usize, since: f64) -> Vec<usize> {
        let mut out = vec![id];
        let mut i = 0;
        while i < out.len() {
            let cur = out[i];
            for &c in &self.children[cur] {
                if self.nodes[c].birth >= since - TIME_TOL {
                    out.push(c);
                }
            }
            i += 1;
        }
        out
    }

    /// Whether node `id` descends from node `ancestor` as seen at time `since`.
    pub fn is_descendant(&self, mut id: usize, ancestor: usize, since: f64) -> bool {
        loop {
            if id == ancestor {
                return true;
            }
            let n = &self.nodes[id];
            match n.parent {
                Some(p) if n.birth >= since - TIME_TOL => id = p,
                _ => return false,
            }
        }
    }

    /// Reads the embedded bees process off the BBM at every recorded instant.
    pub fn project(&self) -> Result<Trajectory> {
        let d = self.manifest.d;
        let mut observations = Vec::with_capacity(self.instants.len());
        for &(t, kind) in &self.instants {
            let idx = self.index_at(t);
            let mut coords = Vec::with_capacity(idx.len() * d);
            for &id in &idx {
                let p = self.nodes[id]
                    .position_at(t)
                    .ok_or_else(|| Error::domain(format!("node {id} has no sample at t={t}")))?;
                coords.extend_from_slice(p);
            }
            observations.push(Observation { time: t, kind, config: Configuration::from_flat(d, self.manifest.n, coords)? });
        }
        Ok(Trajectory { manifest: self.manifest.clone(), replica: self.replica, observations, events: self.events.clone() })
    }
}

struct Ghost {
    id: usize,
    expiry: f64,
    last_time: f64,
    last_pos: Vec<f64>,
}

struct Builder {
    nodes: Vec<BbmNode>,
    slots: Vec<usize>,
    ghosts: Vec<Ghost>,
    ghost_rng: RngStream,
    ghost_now: f64,
    index_changes: Vec<IndexChange>,
    events: Vec<BranchEvent>,
    instants: Vec<(f64, InstantKind)>,
    opts: LineageOptions,
    error: Option<Error>,
}

impl Builder {
    fn push_node(&mut self, parent: Option<usize>, birth: f64, pos: &[f64]) -> usize {
        let id = self.nodes.len();
        if id >= self.opts.max_nodes && self.error.is_none() {
            self.error = Some(Error::Resource(format!("BBM population exceeded {} nodes", self.opts.max_nodes)));
        }
        self.nodes.push(BbmNode::new(id, parent, birth, pos));
        id
    }

    fn move_ghost(&mut self, g: usize, t: f64) {
        let ghost = &mut self.ghosts[g];
        let dt = t - ghost.last_time;
        if dt > 0.0 {
            let s = dt.sqrt();
            for x in ghost.last_pos.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut self.ghost_rng);
                *x += s * z;
            }
            ghost.last_time = t;
        }
        let (id, pos) = (ghost.id, ghost.last_pos.clone());
        self.nodes[id].record(t, &pos);
    }

    /// Runs the ghost population forward to `t`, branching and expiring as it goes.
    fn advance_ghosts(&mut self, t: f64) {
        loop {
            if self.ghosts.is_empty() {
                break;
            }
            let first_expiry = self.ghosts.iter().map(|g| g.expiry).fold(f64::INFINITY, f64::min);
            let target = t.min(first_expiry);
            let e: f64 = Exp1.sample(&mut self.ghost_rng);
            let candidate = self.ghost_now + e / self.ghosts.len() as f64;
            if candidate <= target {
                self.ghost_now = candidate;
                let g = self.ghost_rng.random_range(0..self.ghosts.len());
                self.move_ghost(g, candidate);
                let (pid, expiry, pos) = (self.ghosts[g].id, self.ghosts[g].expiry, self.ghosts[g].last_pos.clone());
                self.nodes[pid].branch_times.push(candidate);
                let child = self.push_node(Some(pid), candidate, &pos);
                self.ghosts.push(Ghost { id: child, expiry, last_time: candidate, last_pos: pos });
                if self.error.is_some() {
                    return;
                }
                continue;
            }
            self.ghost_now = target;
            if first_expiry <= t {
                let mut i = 0;
                while i < self.ghosts.len() {
                    if self.ghosts[i].expiry <= first_expiry {
                        self.move_ghost(i, first_expiry);
                        let g = self.ghosts.swap_remove(i);
                        self.nodes[g.id].end = Some(first_expiry);
                    } else {
                        i += 1;
                    }
                }
                continue;
            }
            break;
        }
        self.ghost_now = t;
    }
}

impl Observer for Builder {
    fn on_instant(&mut self, time: f64, kind: InstantKind, config: &Configuration) {
        if self.error.is_some() {
            return;
        }
        self.advance_ghosts(time);
        for (j, pos) in config.positions().enumerate() {
            let id = self.slots[j];
            self.nodes[id].record(time, pos);
        }
        if kind == InstantKind::Grid {
            for g in 0..self.ghosts.len() {
                self.move_ghost(g, time);
            }
        }
        self.instants.push((time, kind));
    }

    fn on_event(&mut self, ev: &BranchEvent, before: &Configuration, after: &Configuration) {
        if self.error.is_some() {
            return;
        }
        let tau = ev.time;
        self.advance_ghosts(tau);
        let parent_id = self.slots[ev.parent];
        self.nodes[parent_id].record(tau, before.position(ev.parent));
        self.nodes[parent_id].branch_times.push(tau);
        let newborn = self.push_node(Some(parent_id), tau, before.position(ev.parent));
        match ev.killed {
            Some(k) => {
                let old = self.slots[k];
                self.nodes[old].record(tau, before.position(k));
                let expiry = match self.opts.retention {
                    GhostRetention::Full => f64::INFINITY,
                    GhostRetention::OneUnit => tau + 1.0,
                };
                self.ghosts.push(Ghost { id: old, expiry, last_time: tau, last_pos: before.position(k).to_vec() });
                self.slots[k] = newborn;
                self.index_changes.push(IndexChange { time: tau, slot: k, id: newborn });
            }
            None => {
                self.slots.push(newborn);
                self.index_changes.push(IndexChange { time: tau, slot: after.len() - 1, id: newborn });
            }
        }
        self.events.push(ev.clone());
    }

    fn done(&self) -> bool {
        self.error.is_some()
    }
}

/// Simulates the bees process over `[0, window]` inside a full BBM.
///
/// The replica stream is consumed exactly as [`engine::simulate`] would
/// consume it on the same manifest with `horizon = window`, so the projection
/// of the result equals that trajectory pathwise.
pub fn simulate_bbm_embedded(
    manifest: &RunManifest,
    rng: &mut RngStream,
    window: f64,
    opts: LineageOptions,
) -> Result<LineageRecord> {
    if !(window >= 0.0) || window > opts.window_cap {
        return Err(Error::domain(format!("window {window} outside [0, {}]", opts.window_cap)));
    }
    let mut m = manifest.clone();
    m.horizon = window;
    m.validate()?;

    // Roots are created from the initial state seen at the first instant.
    let mut probe = rng.clone();
    let init = m.initial_configuration(&mut probe)?;
    let mut b = Builder {
        nodes: Vec::new(),
        slots: Vec::new(),
        ghosts: Vec::new(),
        ghost_rng: rng.auxiliary(),
        ghost_now: 0.0,
        index_changes: Vec::new(),
        events: Vec::new(),
        instants: Vec::new(),
        opts,
        error: None,
    };
    for pos in init.positions() {
        let id = b.push_node(None, 0.0, pos);
        b.slots.push(id);
    }
    let initial_index = b.slots.clone();
    engine::run_with(&m, rng, &mut b)?;
    if let Some(e) = b.error {
        return Err(e);
    }
    b.advance_ghosts(window);
    if let Some(e) = b.error {
        return Err(e);
    }
    let mut rec = LineageRecord {
        manifest: m,
        replica: rng.stream(),
        horizon: window,
        nodes: b.nodes,
        initial_index,
        index_changes: b.index_changes,
        events: b.events,
        instants: b.instants,
        children: Vec::new(),
    };
    rec.build_children();
    Ok(rec)
}

/// Radius `1/(4(N+1))` of every ball constraint.
pub fn r_n(n: usize) -> f64 {
    1.0 / (4.0 * (n as f64 + 1.0))
}

/// First coordinate of the centre ball: `0` for odd `N`, `-5/(N-1)` for even `N`.
pub fn gamma(n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let m = n - 1;
    let ceil = m.div_ceil(2) as f64;
    let floor = (m / 2) as f64;
    (-5.0 * ceil + 5.0 * floor) / m as f64
}

fn e1_point(d: usize, x: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[0] = x;
    v
}

/// Slots in the left group (0-based `1..ceil((N+1)/2)`).
pub fn left_group(n: usize) -> std::ops::Range<usize> {
    1..(n + 1).div_ceil(2)
}

/// Slots in the right group (0-based `ceil((N+1)/2)..N`).
pub fn right_group(n: usize) -> std::ops::Range<usize> {
    (n + 1).div_ceil(2)..n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct APart {
    pub a1: bool,
    pub a2: bool,
    pub a3: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BPart {
    pub b1: bool,
    pub b2: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub t: f64,
    pub a: Option<APart>,
    pub b: Option<BPart>,
}

impl EventReport {
    pub fn both_hold(&self) -> bool {
        matches!((self.a, self.b), (Some(a), Some(b)) if a.holds && b.holds)
    }
}

/// Evaluates the three `A` conditions for anchor `t`.
///
/// Ball membership is closed (`<=`). Positions are read at the instants
/// recorded exactly at `t` and `t + 1`.
pub fn detect_a(traj: &Trajectory, t: f64) -> Result<APart> {
    let n = traj.manifest.n;
    if n < 3 {
        return Err(Error::domain("the A event needs N >= 3"));
    }
    let start = traj
        .observation_at(t)
        .ok_or_else(|| Error::domain(format!("no recorded instant at t={t}")))?;
    let end = traj
        .observation_at(t + 1.0)
        .ok_or_else(|| Error::domain(format!("no recorded instant at t+1={}", t + 1.0)))?;
    if start.config.len() != n || end.config.len() != n {
        return Err(Error::domain("the A event needs a full population"));
    }
    let d = start.config.dim();
    let r = r_n(n);
    let b = start.config.barycenter();
    let rel = |j: usize| -> Vec<f64> { end.config.position(j).iter().zip(&b.0).map(|(x, c)| x - c).collect() };

    let a1 = traj.events_in(t, t + 1.0).next().is_none();
    let left = e1_point(d, -5.0);
    let right = e1_point(d, 5.0);
    let a2 = left_group(n).all(|j| dist(&rel(j), &left) <= r) && right_group(n).all(|j| dist(&rel(j), &right) <= r);
    let a3 = dist(&rel(0), &e1_point(d, gamma(n))) <= r;
    Ok(APart { a1, a2, a3, holds: a1 && a2 && a3 })
}

/// Evaluates the two `B` conditions for anchor `t` on the window `[t+1, t+2]`.
pub fn detect_b(rec: &LineageRecord, t: f64) -> Result<BPart> {
    let n = rec.manifest.n;
    let (from, to) = (t + 1.0, t + 2.0);
    if to > rec.horizon + TIME_TOL {
        return Err(Error::domain(format!("record ends at {} before t+2={to}", rec.horizon)));
    }
    let idx = rec.index_at(from);
    if idx.len() != n {
        return Err(Error::domain("the B event needs a full population at t+1"));
    }
    let r = r_n(n);
    let in_window = |s: &f64| *s >= from - TIME_TOL && *s <= to + TIME_TOL;

    let queen = idx[0];
    let queen_line = rec.descendants(queen, from);
    let queen_branches: usize =
        queen_line.iter().map(|&id| rec.nodes[id].branch_times.iter().filter(|s| in_window(s)).count()).sum();
    let others_quiet = idx[1..].iter().all(|&id| !rec.nodes[id].branch_times.iter().any(in_window));
    let b1 = queen_branches + 1 >= n && others_quiet;

    let mut b2 = true;
    'slots: for &anc in &idx {
        let origin = rec.nodes[anc]
            .position_at(from)
            .ok_or_else(|| Error::domain(format!("node {anc} has no sample at t+1={from}")))?
            .to_vec();
        for id in rec.descendants(anc, from) {
            for (_, p) in rec.nodes[id].samples_in(from, to) {
                if dist_sq(p, &origin) > r * r {
                    b2 = false;
                    break 'slots;
                }
            }
        }
    }
    Ok(BPart { b1, b2, holds: b1 && b2 })
}

/// Runs both detectors at anchor `t`; a detector whose coverage is missing
/// reports `None`.
pub fn detect_events(rec: &LineageRecord, traj: &Trajectory, t: f64) -> EventReport {
    EventReport { t, a: detect_a(traj, t).ok(), b: detect_b(rec, t).ok() }
}

/// Partition `(G, C, D)` witnessing membership in the set `S`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SPartition {
    pub g: Vec<usize>,
    pub c: Vec<usize>,
    pub d: Vec<usize>,
}

/// Membership test for `S` on a configuration already expressed relative to
/// the reference barycenter. Balls of radius `2 r_N` around `-5 e1`, `gamma e1`
/// and `5 e1` are disjoint, so the partition is forced; only the cardinality
/// constraints remain to be checked. Returns `None` for `N < 2`.
pub fn in_s(c: &Configuration) -> Option<SPartition> {
    let n = c.len();
    if n < 2 || n != c.capacity() {
        return None;
    }
    let d = c.dim();
    let r2 = 2.0 * r_n(n);
    let (left, mid, right) = (e1_point(d, -5.0), e1_point(d, gamma(n)), e1_point(d, 5.0));
    let mut part = SPartition { g: Vec::new(), c: Vec::new(), d: Vec::new() };
    for (i, p) in c.positions().enumerate() {
        if dist(p, &mid) <= r2 {
            part.c.push(i);
        } else if dist(p, &left) <= r2 {
            part.g.push(i);
        } else if dist(p, &right) <= r2 {
            part.d.push(i);
        } else {
            return None;
        }
    }
    let half_up = (n - 1).div_ceil(2);
    let half_down = (n - 1) / 2;
    let ok = !part.c.is_empty() && part.g.len() + part.c.len() > half_up && part.d.len() + part.c.len() > half_down;
    ok.then_some(part)
}

/// Earliest recorded instant (grid or event) with extent `<= l`, restricted
/// to times `>= 1` when `from_one` is set.
///
/// Detection only sees recorded instants, so the result can lag the true
/// continuous-path hitting time by up to one grid step.
pub fn first_extent_time(traj: &Trajectory, l: f64, from_one: bool) -> Option<f64> {
    let start = if from_one { 1.0 } else { 0.0 };
    traj.observations.iter().find(|o| o.time >= start && o.config.extent() <= l).map(|o| o.time)
}

/// Streaming form of [`first_extent_time`] that stops the run at the hit.
#[derive(Debug, Clone)]
pub struct ExtentHit {
    pub level: f64,
    pub from: f64,
    pub hit: Option<f64>,
}

impl ExtentHit {
    pub fn new(level: f64, from_one: bool) -> Self {
        ExtentHit { level, from: if from_one { 1.0 } else { 0.0 }, hit: None }
    }
}

impl Observer for ExtentHit {
    fn on_instant(&mut self, time: f64, _kind: InstantKind, config: &Configuration) {
        if self.hit.is_none() && time >= self.from && config.extent() <= self.level {
            self.hit = Some(time);
        }
    }

    fn done(&self) -> bool {
        self.hit.is_some()
    }
}

/// Branch indices inside `C` that would kill a `C` particle. Empty for every
/// member of `S` with a nonempty `G` or `D`.
pub fn center_kills(c: &Configuration, part: &SPartition) -> Vec<(usize, usize)> {
    let centre: HashSet<usize> = part.c.iter().copied().collect();
    part.c
        .iter()
        .filter_map(|&l| {
            let k = engine::kill_index(c, l).ok()?;
            centre.contains(&k).then_some((l, k))
        })
        .collect()
}

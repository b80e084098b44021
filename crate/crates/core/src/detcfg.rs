//! Weighted configurations: fixed sites with integer multiplicities.
//!
//! A site with weight `w_i` stands for `w_i` coincident particles. Branching
//! at site `l` adds one particle there; the positive-weight site farthest from
//! the `(N+1)`-particle barycenter then loses one. When every weight vector
//! summing to `N + 1` gives a strict distance ordering (the configuration is
//! unambiguous), repeatedly branching at the site nearest the current
//! barycenter drives all weight onto a single site within `(N-1)^2` steps;
//! [`collapse`] constructs that sequence.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dist, dist_sq, Configuration};
use crate::rng::RngStream;

/// Margins below `AMBIGUITY_BAND * (1 + max |x_i|)` count as exact ties.
pub const AMBIGUITY_BAND: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedConfig {
    pub positions: Configuration,
    pub weights: Vec<u32>,
}

impl WeightedConfig {
    pub fn new(positions: Configuration, weights: Vec<u32>) -> Result<Self> {
        check_weights(&positions, &weights)?;
        Ok(WeightedConfig { positions, weights })
    }

    pub fn uniform(positions: Configuration) -> Self {
        let weights = vec![1; positions.len()];
        WeightedConfig { positions, weights }
    }
}

fn check_weights(x: &Configuration, w: &[u32]) -> Result<()> {
    if w.len() != x.len() {
        return Err(Error::domain(format!("{} weights for {} sites", w.len(), x.len())));
    }
    let total: u64 = w.iter().map(|&v| v as u64).sum();
    if total != x.len() as u64 {
        return Err(Error::domain(format!("weights sum to {total}, expected {}", x.len())));
    }
    Ok(())
}

fn weighted_barycenter(x: &Configuration, w: &[u32], extra: Option<usize>, denom: f64) -> Vec<f64> {
    let mut b = vec![0.0; x.dim()];
    for (p, &wi) in x.positions().zip(w) {
        if wi > 0 {
            for (acc, v) in b.iter_mut().zip(p) {
                *acc += wi as f64 * v;
            }
        }
    }
    if let Some(l) = extra {
        for (acc, v) in b.iter_mut().zip(x.position(l)) {
            *acc += v;
        }
    }
    b.iter_mut().for_each(|v| *v /= denom);
    b
}

/// Positive-weight site farthest from the barycenter after a branch at `l`.
/// Ties go to the lowest index.
pub fn select_kill(x: &Configuration, w: &[u32], l: usize) -> Result<usize> {
    Ok(kill_decision(x, w, l)?.0)
}

/// Best and runner-up distances among positive-weight sites; `best_is_max`
/// picks the farthest, otherwise the nearest. Returns `(index, runner-up
/// index, gap)` with the gap infinite when only one site is positive.
fn ranked(x: &Configuration, w: &[u32], b: &[f64], best_is_max: bool) -> (usize, usize, f64) {
    let sign = if best_is_max { 1.0 } else { -1.0 };
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    let mut second = (usize::MAX, f64::NEG_INFINITY);
    for (j, p) in x.positions().enumerate() {
        if w[j] == 0 {
            continue;
        }
        let s = sign * dist_sq(p, b).sqrt();
        if s > best.1 {
            second = best;
            best = (j, s);
        } else if s > second.1 {
            second = (j, s);
        }
    }
    if second.0 == usize::MAX {
        (best.0, best.0, f64::INFINITY)
    } else {
        (best.0, second.0, best.1 - second.1)
    }
}

fn kill_decision(x: &Configuration, w: &[u32], l: usize) -> Result<(usize, usize, f64)> {
    check_weights(x, w)?;
    if l >= w.len() || w[l] == 0 {
        return Err(Error::InvalidBranch { site: l });
    }
    let b = weighted_barycenter(x, w, Some(l), x.len() as f64 + 1.0);
    Ok(ranked(x, w, &b, true))
}

/// Weights after branching at `l` and killing per [`select_kill`].
pub fn branch_update(x: &Configuration, w: &[u32], l: usize) -> Result<Vec<u32>> {
    let k = select_kill(x, w, l)?;
    let mut g = w.to_vec();
    g[l] += 1;
    g[k] -= 1;
    Ok(g)
}

/// Positive-weight site nearest the current (`N`-particle) barycenter.
pub fn nearest_site(x: &Configuration, w: &[u32]) -> usize {
    let b0 = weighted_barycenter(x, w, None, x.len() as f64);
    ranked(x, w, &b0, false).0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseTrace {
    /// Branch sites `l_1..l_m`.
    pub sequence: Vec<usize>,
    /// Killed sites `k_1..k_m`.
    pub kills: Vec<usize>,
    /// `w^(0)..w^(m)`.
    pub weights: Vec<Vec<u32>>,
    /// Index into `sequence` where each phase begins.
    pub phase_starts: Vec<usize>,
    /// Smallest distance gap behind any decision the trace took (choice of
    /// `l` at a phase start, or of the killed site). Infinite for an empty
    /// trace.
    pub path_margin: f64,
}

impl CollapseTrace {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    pub fn final_weights(&self) -> &[u32] {
        self.weights.last().expect("trace always holds the initial weights")
    }
}

/// Builds the collapsing sequence for `(x, w)`.
///
/// Each phase fixes `l` as the positive site nearest the barycenter and
/// branches there until some site's weight reaches zero.
///
/// Inputs are rejected as ambiguous when a decision the trace depends on is
/// a tie up to [`ambiguity_threshold`]. For odd `N` every configuration has
/// zero [`unambiguity_margin`] (put `(N+1)/2` on each of two sites), so the
/// check is made along the trace rather than over all weight vectors.
pub fn collapse(x: &Configuration, w: &[u32]) -> Result<CollapseTrace> {
    check_weights(x, w)?;
    let n = x.len();
    let tol = ambiguity_threshold(x);
    let ambiguous = |a: usize, b: usize, f: Vec<u32>, gap: f64| Error::Ambiguous {
        first: a.min(b),
        second: a.max(b),
        weights: f,
        gap,
    };
    let mut trace = CollapseTrace {
        sequence: Vec::new(),
        kills: Vec::new(),
        weights: vec![w.to_vec()],
        phase_starts: Vec::new(),
        path_margin: f64::INFINITY,
    };
    let mut cur = w.to_vec();
    let max_steps = (n - 1) * (n - 1);
    while cur.iter().filter(|&&v| v > 0).count() > 1 {
        let b0 = weighted_barycenter(x, &cur, None, n as f64);
        let (l, other, gap) = ranked(x, &cur, &b0, false);
        if gap < tol {
            // report as an (N+1)-composition: the tie is at the N-barycenter
            let mut f = cur.clone();
            f[l] += 1;
            return Err(ambiguous(l, other, f, gap));
        }
        trace.path_margin = trace.path_margin.min(gap);
        trace.phase_starts.push(trace.sequence.len());
        loop {
            let (k, other, gap) = kill_decision(x, &cur, l)?;
            if gap < tol {
                let mut f = cur.clone();
                f[l] += 1;
                return Err(ambiguous(k, other, f, gap));
            }
            trace.path_margin = trace.path_margin.min(gap);
            if k == l {
                return Err(Error::domain(format!("collapse stalled: site {l} killed itself with weights {cur:?}")));
            }
            cur[l] += 1;
            cur[k] -= 1;
            trace.sequence.push(l);
            trace.kills.push(k);
            trace.weights.push(cur.clone());
            if trace.sequence.len() > max_steps {
                return Err(Error::domain(format!("collapse exceeded {max_steps} steps")));
            }
            if cur[k] == 0 {
                break;
            }
        }
    }
    Ok(trace)
}

/// All nonnegative integer `n`-vectors summing to `n + 1`, lexicographically.
pub fn enumerate_compositions(n: usize) -> Vec<Vec<u32>> {
    fn rec(prefix: &mut Vec<u32>, left: u32, slots: usize, out: &mut Vec<Vec<u32>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for v in 0..=left {
            prefix.push(v);
            rec(prefix, left - v, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(&mut Vec::with_capacity(n), n as u32 + 1, n, &mut out);
    out
}

/// Where the smallest distance gap is attained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginWitness {
    pub margin: f64,
    pub pair: (usize, usize),
    pub f: Vec<u32>,
}

/// Smallest `| |x_j - b_f| - |x_k - b_f| |` over weight vectors `f` summing
/// to `N + 1` and pairs `j < k`, with `b_f = sum f_i x_i / (N + 1)`.
/// Infinite for a single site.
pub fn unambiguity_margin(x: &Configuration) -> f64 {
    margin_witness(x).margin
}

/// [`unambiguity_margin`] together with the minimizing pair and weights.
///
/// Weight vectors are walked depth-first with the partial weighted sum carried
/// down the recursion, so each leaf costs one pass over the sites.
pub fn margin_witness(x: &Configuration) -> MarginWitness {
    let n = x.len();
    let mut best = MarginWitness { margin: f64::INFINITY, pair: (0, 0), f: Vec::new() };
    if n < 2 {
        return best;
    }
    let d = x.dim();
    let scale = 1.0 / (n as f64 + 1.0);
    let mut f = vec![0u32; n];
    let mut sums = vec![vec![0.0; d]; n + 1];
    let mut dists = vec![0.0; n];

    struct Ctx<'a> {
        x: &'a Configuration,
        n: usize,
        scale: f64,
    }

    fn walk(
        ctx: &Ctx,
        site: usize,
        left: u32,
        f: &mut Vec<u32>,
        sums: &mut Vec<Vec<f64>>,
        dists: &mut [f64],
        best: &mut MarginWitness,
    ) {
        if site == ctx.n - 1 {
            f[site] = left;
            let (head, tail) = sums.split_at_mut(site + 1);
            for (dst, (s, v)) in tail[0].iter_mut().zip(head[site].iter().zip(ctx.x.position(site))) {
                *dst = s + left as f64 * v;
            }
            let b: Vec<f64> = tail[0].iter().map(|v| v * ctx.scale).collect();
            for (j, dj) in dists.iter_mut().enumerate() {
                *dj = dist(ctx.x.position(j), &b);
            }
            for j in 0..ctx.n {
                for k in (j + 1)..ctx.n {
                    let gap = (dists[j] - dists[k]).abs();
                    if gap < best.margin {
                        best.margin = gap;
                        best.pair = (j, k);
                        best.f = f.clone();
                    }
                }
            }
            return;
        }
        for v in 0..=left {
            f[site] = v;
            let (head, tail) = sums.split_at_mut(site + 1);
            for (dst, (s, p)) in tail[0].iter_mut().zip(head[site].iter().zip(ctx.x.position(site))) {
                *dst = s + v as f64 * p;
            }
            walk(ctx, site + 1, left - v, f, sums, dists, best);
        }
    }

    let ctx = Ctx { x, n, scale };
    walk(&ctx, 0, n as u32 + 1, &mut f, &mut sums, &mut dists, &mut best);
    best
}

/// Tolerance band below which a margin is treated as an exact tie.
pub fn ambiguity_threshold(x: &Configuration) -> f64 {
    let max_norm = x.positions().map(crate::geometry::norm).fold(0.0, f64::max);
    AMBIGUITY_BAND * (1.0 + max_norm)
}

pub fn is_unambiguous(x: &Configuration) -> bool {
    unambiguity_margin(x) >= ambiguity_threshold(x)
}

/// Samples `samples` perturbations with every site moved by less than
/// `radius` and returns the first whose collapse trace (branch and kill
/// sequences) differs from that of `x`. Perturbations that become ambiguous
/// count as differing.
pub fn find_trace_divergence(
    x: &Configuration,
    w: &[u32],
    radius: f64,
    samples: usize,
    rng: &mut RngStream,
) -> Result<Option<Configuration>> {
    let reference = collapse(x, w)?;
    if radius <= 0.0 {
        return Ok(None);
    }
    let d = x.dim();
    for _ in 0..samples {
        let mut y = x.clone();
        for i in 0..y.len() {
            let step = uniform_in_ball(d, radius, rng);
            for (c, s) in y.position_mut(i).iter_mut().zip(step) {
                *c += s;
            }
        }
        let same = match collapse(&y, w) {
            Ok(t) => t.sequence == reference.sequence && t.kills == reference.kills,
            Err(_) => false,
        };
        if !same {
            return Ok(Some(y));
        }
    }
    Ok(None)
}

/// Whether sampled perturbations within `radius` all share `x`'s collapse
/// trace. Requires `8 * radius` not to exceed the trace's path margin.
pub fn neighborhood_stability(
    x: &Configuration,
    w: &[u32],
    radius: f64,
    samples: usize,
    rng: &mut RngStream,
) -> Result<bool> {
    let margin = collapse(x, w)?.path_margin;
    if !(radius >= 0.0) || 8.0 * radius > margin {
        return Err(Error::domain(format!("radius {radius} exceeds margin/8 = {}", margin / 8.0)));
    }
    Ok(find_trace_divergence(x, w, radius, samples, rng)?.is_none())
}

/// Uniform draw from the open ball of radius `r` in `R^d` (strictly inside).
pub fn uniform_in_ball<R: Rng + ?Sized>(d: usize, r: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n2: f64 = v.iter().map(|a| a * a).sum();
        if n2 < 1.0 {
            return v.into_iter().map(|a| a * r).collect();
        }
    }
}

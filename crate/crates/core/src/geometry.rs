//! Points, particle configurations and the elementary functionals on them.
//!
//! A [`Configuration`] stores `n` particles in `R^d` as one flat row-major
//! buffer (`coords[i * d + c]` is coordinate `c` of particle `i`) together with
//! the population cap `N`. Every other module reads positions through
//! [`Configuration::position`].

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A position in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("a point needs at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("point coordinates must be finite"));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point(vec![x])
    }
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist_sq(a, b).sqrt()
}

pub fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `n <= N` particles in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    dim: usize,
    capacity: usize,
    coords: Vec<f64>,
}

impl Configuration {
    /// Builds a configuration from a list of points. `capacity` is the
    /// population cap `N`; the list may be shorter than that.
    pub fn new(points: &[Point], capacity: usize) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::domain("configuration must hold at least one particle"));
        };
        let dim = first.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.dim() != dim {
                return Err(Error::domain("all points must share one dimension"));
            }
            coords.extend_from_slice(p.coords());
        }
        Self::from_flat(dim, capacity, coords)
    }

    /// Builds a configuration from a row-major coordinate buffer.
    pub fn from_flat(dim: usize, capacity: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if coords.is_empty() || !coords.len().is_multiple_of(dim) {
            return Err(Error::domain("coordinate buffer must hold a whole, nonzero number of points"));
        }
        let n = coords.len() / dim;
        if capacity < n {
            return Err(Error::domain(format!("{n} particles exceed capacity {capacity}")));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("particle coordinates must be finite"));
        }
        Ok(Configuration { dim, capacity, coords })
    }

    /// One-dimensional convenience constructor, with `capacity == xs.len()`.
    pub fn line(xs: &[f64]) -> Result<Self> {
        Self::from_flat(1, xs.len(), xs.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn points(&self) -> Vec<Point> {
        self.positions().map(|p| Point(p.to_vec())).collect()
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn push_copy(&mut self, i: usize) {
        let start = i * self.dim;
        self.coords.extend_from_within(start..start + self.dim);
    }

    pub(crate) fn copy_within(&mut self, from: usize, to: usize) {
        let d = self.dim;
        self.coords.copy_within(from * d..(from + 1) * d, to * d);
    }

    /// Coordinate-wise mean of the current particles (divisor `n`).
    pub fn barycenter(&self) -> Point {
        let n = self.len() as f64;
        let mut b = vec![0.0; self.dim];
        for p in self.positions() {
            for (acc, x) in b.iter_mut().zip(p) {
                *acc += x;
            }
        }
        b.iter_mut().for_each(|x| *x /= n);
        Point(b)
    }

    /// Largest pairwise Euclidean distance; zero for a single particle.
    pub fn extent(&self) -> f64 {
        let n = self.len();
        let mut best = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                best = best.max(dist_sq(self.position(i), self.position(j)));
            }
        }
        best.sqrt()
    }

    /// Returns a copy shifted so that the barycenter sits at the origin.
    pub fn recenter(&self) -> Configuration {
        let b = self.barycenter();
        self.translate_by(&b.0.iter().map(|x| -x).collect::<Vec<_>>())
    }

    pub fn translate_by(&self, shift: &[f64]) -> Configuration {
        let mut out = self.clone();
        for p in out.coords.chunks_exact_mut(self.dim) {
            for (x, s) in p.iter_mut().zip(shift) {
                *x += s;
            }
        }
        out
    }

    /// Applies `x -> m x + shift` to every particle; `m` is row-major `d x d`.
    pub fn map_affine(&self, m: &[f64], shift: &[f64]) -> Configuration {
        let d = self.dim;
        let mut out = self.clone();
        for (src, dst) in self.coords.chunks_exact(d).zip(out.coords.chunks_exact_mut(d)) {
            for r in 0..d {
                dst[r] = (0..d).map(|c| m[r * d + c] * src[c]).sum::<f64>() + shift[r];
            }
        }
        out
    }

    /// Adds independent `N(0, dt)` noise to every coordinate of every
    /// particle, in particle-major order.
    pub fn brownian_increment(&self, dt: f64, rng: &mut RngStream) -> Result<Configuration> {
        let mut out = self.clone();
        out.diffuse(dt, rng)?;
        Ok(out)
    }

    /// In-place form of [`Configuration::brownian_increment`].
    pub fn diffuse(&mut self, dt: f64, rng: &mut RngStream) -> Result<()> {
        if !(dt >= 0.0) {
            return Err(Error::domain(format!("negative time step {dt}")));
        }
        if dt == 0.0 {
            return Ok(());
        }
        let s = dt.sqrt();
        for x in self.coords.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *x += s * z;
        }
        Ok(())
    }
}

/// Free-function form of [`Configuration::barycenter`] that reports the empty case.
pub fn barycenter(c: &Configuration) -> Result<Point> {
    if c.is_empty() {
        return Err(Error::domain("barycenter of an empty configuration"));
    }
    Ok(c.barycenter())
}

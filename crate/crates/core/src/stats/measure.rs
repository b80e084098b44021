use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Configuration;

/// Regular grid on a `d`-dimensional box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramGrid {
    pub lower: Vec<f64>,
    pub width: Vec<f64>,
    pub bins: Vec<usize>,
}

impl HistogramGrid {
    /// `bins` cells per axis covering `[-half, half]^d`.
    pub fn centred(d: usize, half: f64, bins: usize) -> Self {
        HistogramGrid { lower: vec![-half; d], width: vec![2.0 * half / bins as f64; d], bins: vec![bins; d] }
    }

    pub fn cells(&self) -> usize {
        self.bins.iter().product()
    }

    /// Row-major cell index of `p`, or `None` outside the grid.
    pub fn cell(&self, p: &[f64]) -> Option<usize> {
        let mut idx = 0;
        for (k, x) in p.iter().enumerate() {
            let b = ((x - self.lower[k]) / self.width[k]).floor();
            if !(b >= 0.0 && (b as usize) < self.bins[k]) {
                return None;
            }
            idx = idx * self.bins[k] + b as usize;
        }
        Some(idx)
    }

    /// Lower corner of cell `idx`.
    pub fn lower_edge(&self, mut idx: usize) -> Vec<f64> {
        let d = self.bins.len();
        let mut out = vec![0.0; d];
        for k in (0..d).rev() {
            out[k] = self.lower[k] + (idx % self.bins[k]) as f64 * self.width[k];
            idx /= self.bins[k];
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub grid: HistogramGrid,
    pub counts: Vec<u64>,
    pub out_of_range: u64,
}

impl Histogram {
    pub fn new(grid: HistogramGrid) -> Self {
        let cells = grid.cells();
        Histogram { grid, counts: vec![0; cells], out_of_range: 0 }
    }

    pub fn add(&mut self, p: &[f64]) {
        match self.grid.cell(p) {
            Some(i) => self.counts[i] += 1,
            None => self.out_of_range += 1,
        }
    }

    pub fn total_in_range(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Cell masses normalized over in-range points (sums to 1 unless empty).
    pub fn normalized(&self) -> Vec<f64> {
        let total = self.total_in_range() as f64;
        self.counts.iter().map(|&c| if total > 0.0 { c as f64 / total } else { 0.0 }).collect()
    }

    pub fn l1_distance(&self, other: &Histogram) -> f64 {
        self.normalized().iter().zip(other.normalized()).map(|(a, b)| (a - b).abs()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub histogram: Histogram,
    /// L1 distance between the histograms of the first and second half of
    /// the replicas.
    pub split_half_l1: f64,
    pub warnings: Vec<String>,
}

/// Pooled histogram of recentered particle positions, one configuration per
/// replica, with a split-half stability figure.
pub fn empirical_measure(configs: &[Configuration], grid: &HistogramGrid) -> Result<MeasureReport> {
    let first = configs.first().ok_or_else(|| Error::domain("no configurations"))?;
    let n = first.capacity();
    if configs.iter().any(|c| c.len() != n || c.capacity() != n) {
        return Err(Error::domain("all configurations must hold N particles"));
    }
    if grid.bins.len() != first.dim() || grid.lower.len() != first.dim() || grid.width.len() != first.dim() {
        return Err(Error::domain("grid dimension does not match the configurations"));
    }
    let fill = |cs: &[Configuration]| {
        let mut h = Histogram::new(grid.clone());
        for c in cs {
            for p in c.recenter().positions() {
                h.add(p);
            }
        }
        h
    };
    let histogram = fill(configs);
    let half = configs.len() / 2;
    let split_half_l1 = if half > 0 { fill(&configs[..half]).l1_distance(&fill(&configs[half..2 * half])) } else { 0.0 };
    let mut warnings = Vec::new();
    if histogram.out_of_range > 0 {
        warnings.push(format!("mass leak: {} points outside the grid", histogram.out_of_range));
    }
    Ok(MeasureReport { histogram, split_half_l1, warnings })
}

//! Barycentric Brownian bees: an N-particle branching Brownian motion in
//! `R^d` where each branching removes the particle farthest from the
//! barycenter of the N + 1 particles present at that instant.
//!
//! - [`engine`] simulates the process exactly (exponential branch clocks,
//!   Gaussian increments between recorded instants).
//! - [`lineage`] embeds the same process in a branching Brownian motion and
//!   detects the regeneration events.
//! - [`detcfg`] holds the deterministic weighted-configuration dynamics.
//! - [`stats`] turns replica output into estimator reports.

pub mod detcfg;
pub mod engine;
pub mod error;
pub mod export;
pub mod geometry;
pub mod lineage;
pub mod manifest;
pub mod replicas;
pub mod rng;
pub mod stats;

pub use engine::{run_with, simulate, BranchEvent, InstantKind, Observation, Observer, Trajectory};
pub use error::{Error, Result};
pub use geometry::{Configuration, Point};
pub use manifest::{InitialCondition, RunManifest};
pub use replicas::{map_replicas, Execution};
pub use rng::RngStream;

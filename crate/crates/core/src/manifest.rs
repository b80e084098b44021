//! Experiment manifests: the reproducibility unit.
//!
//! JSON schema (field names are stable):
//!
//! ```json
//! {
//!   "N": 3,
//!   "d": 1,
//!   "horizon": 50.0,
//!   "initial": { "kind": "explicit", "positions": [[-20.0], [0.0], [20.0]] },
//!   "dt_obs": 0.05,
//!   "seed": 7,
//!   "replicas": 2000
//! }
//! ```
//!
//! `initial.kind` is one of `point_mass` (optional `at`, default the origin;
//! places all `N` particles there), `explicit` (`positions`, between 1 and `N`
//! points) or `gaussian_cloud` (`scale`; `N` i.i.d. centred Gaussian points
//! drawn from the replica stream).

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    PointMass {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<Vec<f64>>,
    },
    Explicit {
        positions: Vec<Vec<f64>>,
    },
    GaussianCloud {
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub horizon: f64,
    pub initial: InitialCondition,
    pub dt_obs: f64,
    pub seed: u64,
    pub replicas: u64,
}

impl RunManifest {
    /// A manifest starting all `n` particles at the origin of `R^d`.
    pub fn new(n: usize, d: usize, horizon: f64) -> Self {
        RunManifest {
            n,
            d,
            horizon,
            initial: InitialCondition::PointMass { at: None },
            dt_obs: 1.0,
            seed: 0,
            replicas: 1,
        }
    }

    pub fn with_initial(mut self, initial: InitialCondition) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_explicit(self, positions: Vec<Vec<f64>>) -> Self {
        self.with_initial(InitialCondition::Explicit { positions })
    }

    pub fn with_dt_obs(mut self, dt_obs: f64) -> Self {
        self.dt_obs = dt_obs;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_replicas(mut self, replicas: u64) -> Self {
        self.replicas = replicas;
        self
    }

    /// Checks the manifest invariants. A zero horizon is accepted: it
    /// describes an empty run that records only the initial state.
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("N must be at least 1"));
        }
        if self.d == 0 {
            return Err(Error::domain("d must be at least 1"));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::domain(format!("horizon must be finite and nonnegative, got {}", self.horizon)));
        }
        if !(self.dt_obs > 0.0) || !self.dt_obs.is_finite() {
            return Err(Error::domain(format!("dt_obs must be positive, got {}", self.dt_obs)));
        }
        if self.replicas == 0 {
            return Err(Error::domain("replicas must be at least 1"));
        }
        match &self.initial {
            InitialCondition::PointMass { at: Some(at) } if at.len() != self.d => {
                Err(Error::domain("point_mass location has the wrong dimension"))
            }
            InitialCondition::Explicit { positions } => {
                if positions.is_empty() || positions.len() > self.n {
                    return Err(Error::domain(format!(
                        "explicit initial condition needs between 1 and N={} points, got {}",
                        self.n,
                        positions.len()
                    )));
                }
                if positions.iter().any(|p| p.len() != self.d) {
                    return Err(Error::domain("explicit position has the wrong dimension"));
                }
                if positions.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::domain("explicit positions must be finite"));
                }
                Ok(())
            }
            InitialCondition::GaussianCloud { scale } if !(*scale >= 0.0) || !scale.is_finite() => {
                Err(Error::domain("gaussian_cloud scale must be finite and nonnegative"))
            }
            _ => Ok(()),
        }
    }

    /// Draws (or copies) the starting configuration. Only `gaussian_cloud`
    /// consumes randomness.
    pub fn initial_configuration(&self, rng: &mut RngStream) -> Result<Configuration> {
        self.validate()?;
        match &self.initial {
            InitialCondition::PointMass { at } => {
                let p = at.clone().unwrap_or_else(|| vec![0.0; self.d]);
                let coords = p.iter().copied().cycle().take(self.n * self.d).collect();
                Configuration::from_flat(self.d, self.n, coords)
            }
            InitialCondition::Explicit { positions } => {
                let pts: Vec<Point> = positions.iter().map(|p| Point(p.clone())).collect();
                Configuration::new(&pts, self.n)
            }
            InitialCondition::GaussianCloud { scale } => {
                let coords = (0..self.n * self.d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        scale * z
                    })
                    .collect();
                Configuration::from_flat(self.d, self.n, coords)
            }
        }
    }

    /// Observation instants `k * dt_obs` up to the horizon, plus the horizon
    /// itself when it is not a grid multiple.
    pub fn grid_times(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0u64;
        loop {
            let t = k as f64 * self.dt_obs;
            if t > self.horizon * (1.0 + 1e-12) {
                break;
            }
            out.push(t.min(self.horizon));
            k += 1;
        }
        if let Some(&last) = out.last() {
            if self.horizon - last > 1e-9 * self.dt_obs {
                out.push(self.horizon);
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("manifest serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(s).map_err(|e| Error::domain(format!("bad manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    /// Hex SHA-256 of the compact JSON form; embedded in every artifact.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_exact() {
        let m = RunManifest::new(3, 2, 0.1 + 0.2)
            .with_explicit(vec![vec![1.0 / 3.0, -2.5e-17], vec![0.0, 7.0]])
            .with_dt_obs(0.05)
            .with_seed(u64::MAX)
            .with_replicas(10);
        let back = RunManifest::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.hash(), m.hash());
    }

    #[test]
    fn schema_field_names() {
        let v: serde_json::Value = serde_json::from_str(&RunManifest::new(2, 1, 1.0).to_json()).unwrap();
        for key in ["N", "d", "horizon", "initial", "dt_obs", "seed", "replicas"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["initial"]["kind"], "point_mass");
        let cloud = r#"{"N":2,"d":1,"horizon":1,"initial":{"kind":"gaussian_cloud","scale":2},"dt_obs":0.5,"seed":1,"replicas":1}"#;
        assert!(RunManifest::from_json(cloud).is_ok());
        let extra = cloud.replace("\"seed\"", "\"bogus\":1,\"seed\"");
        assert!(RunManifest::from_json(&extra).is_err());
    }

    #[test]
    fn invariants_enforced() {
        assert!(RunManifest::new(0, 1, 1.0).validate().is_err());
        assert!(RunManifest::new(1, 0, 1.0).validate().is_err());
        assert!(RunManifest::new(1, 1, -1.0).validate().is_err());
        assert!(RunManifest::new(1, 1, 1.0).with_dt_obs(0.0).validate().is_err());
        assert!(RunManifest::new(1, 1, 1.0).with_replicas(0).validate().is_err());
        assert!(RunManifest::new(2, 1, 1.0).with_explicit(vec![vec![0.0]; 3]).validate().is_err());
        assert!(RunManifest::new(2, 1, 1.0).with_explicit(vec![vec![0.0, 1.0]]).validate().is_err());
        assert!(RunManifest::new(2, 1, 1.0).with_explicit(vec![vec![0.0]]).validate().is_ok());
    }

    #[test]
    fn grid() {
        assert_eq!(RunManifest::new(1, 1, 1.0).with_dt_obs(0.25).grid_times(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(RunManifest::new(1, 1, 0.0).grid_times(), vec![0.0]);
        assert_eq!(RunManifest::new(1, 1, 1.1).with_dt_obs(0.5).grid_times(), vec![0.0, 0.5, 1.0, 1.1]);
        assert_eq!(RunManifest::new(1, 1, 1.0).with_dt_obs(0.1).grid_times().len(), 11);
    }

    #[test]
    fn initial_conditions() {
        let mut rng = RngStream::new(0, 0);
        let c = RunManifest::new(3, 2, 1.0)
            .with_initial(InitialCondition::PointMass { at: Some(vec![1.0, 2.0]) })
            .initial_configuration(&mut rng)
            .unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.position(2), &[1.0, 2.0]);
        let c = RunManifest::new(4, 1, 1.0)
            .with_explicit(vec![vec![5.0]])
            .initial_configuration(&mut rng)
            .unwrap();
        assert_eq!((c.len(), c.capacity()), (1, 4));
    }
}

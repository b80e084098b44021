//! CSV and JSON artifact writers.
//!
//! CSV files start with one `# manifest=<hash> seed=<seed>` comment line,
//! then a header row. Floats use Rust's shortest round-trip formatting, so
//! identical inputs give byte-identical files.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::detcfg::CollapseTrace;
use crate::engine::{BranchEvent, Observation, Trajectory};
use crate::error::{Error, Result};
use crate::lineage::LineageRecord;
use crate::manifest::RunManifest;
use crate::stats::Histogram;

/// Reproducibility stamp carried by every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub manifest_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn of(manifest: &RunManifest) -> Self {
        Provenance { manifest_hash: manifest.hash(), seed: Some(manifest.seed) }
    }

    /// For artifacts driven by an input file rather than a run manifest.
    pub fn of_input(bytes: &[u8], seed: Option<u64>) -> Self {
        Provenance { manifest_hash: hex(&Sha256::digest(bytes)), seed }
    }

    pub fn comment(&self) -> String {
        match self.seed {
            Some(s) => format!("# manifest={} seed={s}\n", self.manifest_hash),
            None => format!("# manifest={}\n", self.manifest_hash),
        }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON artifact: provenance, optional manifest, and the payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact<T> {
    #[serde(flatten)]
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manifest: Option<RunManifest>,
    pub result: T,
}

pub fn write_json<W: Write, T: Serialize>(
    w: &mut W,
    provenance: &Provenance,
    manifest: Option<&RunManifest>,
    result: &T,
) -> Result<()> {
    let art = Artifact { provenance: provenance.clone(), manifest: manifest.cloned(), result };
    serde_json::to_writer_pretty(&mut *w, &art)?;
    w.write_all(b"\n")?;
    Ok(())
}

fn coord_header(d: usize) -> String {
    (0..d).map(|k| format!(",coord_{k}")).collect()
}

/// Rows `(replica, time, particle_index, coord_0..)`, one per particle per
/// recorded instant.
pub fn write_trajectory_csv<W: Write>(w: &mut W, provenance: &Provenance, trajs: &[Trajectory]) -> Result<()> {
    let d = trajs.first().map_or(0, |t| t.manifest.d);
    w.write_all(provenance.comment().as_bytes())?;
    writeln!(w, "replica,time,particle_index{}", coord_header(d))?;
    for t in trajs {
        for o in &t.observations {
            for (i, p) in o.config.positions().enumerate() {
                write!(w, "{},{},{i}", t.replica, o.time)?;
                for x in p {
                    write!(w, ",{x}")?;
                }
                w.write_all(b"\n")?;
            }
        }
    }
    Ok(())
}

/// Rows `(replica, time, parent, killed)`; `killed` is empty during growth.
pub fn write_events_csv<W: Write>(w: &mut W, provenance: &Provenance, trajs: &[Trajectory]) -> Result<()> {
    w.write_all(provenance.comment().as_bytes())?;
    writeln!(w, "replica,time,parent,killed")?;
    for t in trajs {
        for e in &t.events {
            let killed = e.killed.map(|k| k.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{killed}", t.replica, e.time, e.parent)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JsonlRecord {
    Header { provenance: Provenance, manifest: RunManifest },
    Observation { replica: u64, observation: Observation },
    Event { replica: u64, event: BranchEvent },
}

/// One JSON record per line: a header, then every observation and event of
/// each replica in time order.
pub fn write_trajectory_jsonl<W: Write>(w: &mut W, provenance: &Provenance, trajs: &[Trajectory]) -> Result<()> {
    let Some(first) = trajs.first() else { return Ok(()) };
    let mut line = |rec: &JsonlRecord| -> Result<()> {
        serde_json::to_writer(&mut *w, rec)?;
        w.write_all(b"\n")?;
        Ok(())
    };
    line(&JsonlRecord::Header { provenance: provenance.clone(), manifest: first.manifest.clone() })?;
    for t in trajs {
        let mut events = t.events.iter().peekable();
        for o in &t.observations {
            while let Some(e) = events.next_if(|e| e.time <= o.time) {
                line(&JsonlRecord::Event { replica: t.replica, event: e.clone() })?;
            }
            line(&JsonlRecord::Observation { replica: t.replica, observation: o.clone() })?;
        }
        for e in events {
            line(&JsonlRecord::Event { replica: t.replica, event: e.clone() })?;
        }
    }
    Ok(())
}

/// Reads back what [`write_trajectory_jsonl`] wrote.
pub fn read_trajectory_jsonl<R: BufRead>(r: R) -> Result<Vec<Trajectory>> {
    let mut manifest = None;
    let mut out: Vec<Trajectory> = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(&line)?;
        let replica = match &rec {
            JsonlRecord::Header { manifest: m, .. } => {
                manifest = Some(m.clone());
                continue;
            }
            JsonlRecord::Observation { replica, .. } | JsonlRecord::Event { replica, .. } => *replica,
        };
        let m = manifest.as_ref().ok_or_else(|| Error::Io("JSONL record before header".into()))?;
        if out.last().is_none_or(|t| t.replica != replica) {
            out.push(Trajectory { manifest: m.clone(), replica, observations: Vec::new(), events: Vec::new() });
        }
        let t = out.last_mut().expect("pushed above");
        match rec {
            JsonlRecord::Observation { observation, .. } => t.observations.push(observation),
            JsonlRecord::Event { event, .. } => t.events.push(event),
            JsonlRecord::Header { .. } => unreachable!(),
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct NodeLine<'a> {
    id: usize,
    parent: Option<usize>,
    birth: f64,
    death: Option<f64>,
    branch_times: &'a [f64],
}

/// Lineage nodes as JSONL `(id, parent, birth, death)`, preceded by a
/// provenance line.
pub fn write_lineage_nodes_jsonl<W: Write>(w: &mut W, provenance: &Provenance, rec: &LineageRecord) -> Result<()> {
    serde_json::to_writer(&mut *w, provenance)?;
    w.write_all(b"\n")?;
    for n in &rec.nodes {
        let line = NodeLine { id: n.id, parent: n.parent, birth: n.birth, death: n.end, branch_times: &n.branch_times };
        serde_json::to_writer(&mut *w, &line)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Sampled node paths as rows `(node, time, coord_0..)`.
pub fn write_lineage_paths_csv<W: Write>(w: &mut W, provenance: &Provenance, rec: &LineageRecord) -> Result<()> {
    w.write_all(provenance.comment().as_bytes())?;
    writeln!(w, "node,time{}", coord_header(rec.manifest.d))?;
    for n in &rec.nodes {
        for (t, p) in &n.path {
            write!(w, "{},{t}", n.id)?;
            for x in p {
                write!(w, ",{x}")?;
            }
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_collapse_json<W: Write>(w: &mut W, provenance: &Provenance, trace: &CollapseTrace) -> Result<()> {
    write_json(w, provenance, None, trace)
}

/// Rows `(config, margin)`.
pub fn write_margins_csv<W: Write>(w: &mut W, provenance: &Provenance, rows: &[(usize, f64)]) -> Result<()> {
    w.write_all(provenance.comment().as_bytes())?;
    writeln!(w, "config,margin")?;
    for (id, m) in rows {
        writeln!(w, "{id},{m}")?;
    }
    Ok(())
}

/// Rows `(lower_0.., count, mass)`, one per cell.
pub fn write_histogram_csv<W: Write>(w: &mut W, provenance: &Provenance, h: &Histogram) -> Result<()> {
    w.write_all(provenance.comment().as_bytes())?;
    let d = h.grid.bins.len();
    let lows: String = (0..d).map(|k| format!("lower_{k},")).collect();
    writeln!(w, "{lows}count,mass")?;
    for (i, (c, m)) in h.counts.iter().zip(h.normalized()).enumerate() {
        for x in h.grid.lower_edge(i) {
            write!(w, "{x},")?;
        }
        writeln!(w, "{c},{m}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::simulate;
    use crate::rng::RngStream;

    fn traj() -> Trajectory {
        let m = RunManifest::new(3, 2, 2.0).with_dt_obs(0.5).with_seed(4);
        simulate(&m, &mut RngStream::replica(4, 0)).unwrap()
    }

    #[test]
    fn zero_horizon_csv_has_one_row() {
        let m = RunManifest::new(1, 1, 0.0);
        let t = simulate(&m, &mut RngStream::replica(0, 0)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &Provenance::of(&m), &[t]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert!(lines[0].starts_with("# manifest="));
        assert_eq!(lines[1], "replica,time,particle_index,coord_0");
        assert_eq!(lines[2..], ["0,0,0,0"]);
    }

    #[test]
    fn jsonl_round_trip() {
        let t = traj();
        let mut buf = Vec::new();
        write_trajectory_jsonl(&mut buf, &Provenance::of(&t.manifest), std::slice::from_ref(&t)).unwrap();
        let back = read_trajectory_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, vec![t]);
    }

    #[test]
    fn csv_is_deterministic() {
        let write = || {
            let t = traj();
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &Provenance::of(&t.manifest), std::slice::from_ref(&t)).unwrap();
            write_events_csv(&mut buf, &Provenance::of(&t.manifest), &[t]).unwrap();
            buf
        };
        assert_eq!(write(), write());
    }

    #[test]
    fn json_artifact_carries_hash() {
        let m = RunManifest::new(2, 1, 1.0);
        let mut buf = Vec::new();
        write_json(&mut buf, &Provenance::of(&m), Some(&m), &1.5f64).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["manifest_hash"], m.hash());
        assert_eq!(v["result"], 1.5);
    }
}

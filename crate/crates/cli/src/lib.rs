//! The `bbb` command line: manifests in, CSV and JSON artifacts out.
//!
//! Every subcommand writes its artifacts into `--out` and prints one summary
//! line per artifact or headline number to stdout. Exit codes: 0 on success,
//! 1 on a domain error (bad parameters, ambiguous configuration, failed I/O),
//! 2 on a usage error.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use bbb_core::detcfg::{collapse, margin_witness, unambiguity_margin, CollapseTrace};
use bbb_core::export::{self, Provenance};
use bbb_core::lineage::{detect_a, detect_events, simulate_bbm_embedded, EventReport, ExtentHit, LineageOptions};
use bbb_core::replicas::with_threads;
use bbb_core::stats::{self, BoxRegion, HistogramGrid, MinorizationSetup};
use bbb_core::{
    map_replicas, run_with, simulate, Configuration, Execution, InitialCondition, InstantKind, Observer, Point,
    RunManifest,
};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "bbb", version, about = "Barycentric Brownian bees experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate trajectories and export them.
    Simulate {
        #[command(flatten)]
        run: ManifestArgs,
        /// `csv` (trajectory + events files) or `jsonl`.
        #[arg(long, default_value = "csv")]
        format: Format,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Estimate sigma^2, drift and isotropy from barycenter displacements.
    Diffusivity {
        #[command(flatten)]
        run: ManifestArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Extent hitting times and their tail fit.
    ExtentTails {
        #[command(flatten)]
        run: ManifestArgs,
        /// Extent level L.
        #[arg(long = "level")]
        level: f64,
        /// Start from N points evenly spaced along the first axis with this extent.
        #[arg(long)]
        initial_extent: Option<f64>,
        /// Only count hits at times >= 1.
        #[arg(long)]
        from_one: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Collapse a weighted configuration read from a JSON file.
    Collapse {
        /// JSON `{"positions": [[..], ..], "weights": [..]}`; weights default to all ones.
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Unambiguity margins for a batch of configurations.
    Unambiguity {
        /// JSON array of configurations, each an array of points.
        #[arg(long)]
        configs: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Monte Carlo check of the Gaussian minorization bound.
    Minorization {
        /// JSON `{"start": [[..], ..], "l": .., "t": .., "boxes": [{"lower": [..], "upper": [..]}]}`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        replicas: u64,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Histogram of recentered positions at the horizon, pooled over replicas.
    Measure {
        #[command(flatten)]
        run: ManifestArgs,
        /// Grid covers [-half_width, half_width]^d.
        #[arg(long, default_value_t = 5.0)]
        half_width: f64,
        /// Cells per axis.
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Detect the regeneration events A and B at regularly spaced anchors.
    Events {
        #[command(flatten)]
        run: ManifestArgs,
        /// Spacing of the anchor times.
        #[arg(long, default_value_t = 1.0)]
        anchor_step: f64,
        /// Read trajectories from this JSONL file instead of simulating; only A is detected.
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Also export each replica's lineage (nodes JSONL and path CSV).
        #[arg(long)]
        export_lineage: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(clap::ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Jsonl,
}

/// Flags mirroring the manifest fields.
#[derive(Args, Debug, Default)]
struct ManifestArgs {
    /// Number of particles.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Spatial dimension.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Observation grid spacing.
    #[arg(long)]
    dt_obs: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    /// Manifest JSON file; overrides the flags above when both are given.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "BBB_THREADS", default_value_t = 0)]
    threads: usize,
    /// Run replicas one after another.
    #[arg(long)]
    sequential: bool,
}

impl CommonArgs {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl ManifestArgs {
    fn any_flag(&self) -> bool {
        self.n.is_some()
            || self.d.is_some()
            || self.horizon.is_some()
            || self.dt_obs.is_some()
            || self.seed.is_some()
            || self.replicas.is_some()
    }

    fn resolve(&self, err: &mut dyn Write) -> Result<RunManifest> {
        if let Some(path) = &self.manifest {
            if self.any_flag() {
                writeln!(err, "warning: --manifest given; ignoring manifest flags on the command line")?;
            }
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            return Ok(RunManifest::from_json(&text)?);
        }
        let missing: Vec<&str> = [("--N", self.n.is_none()), ("--d", self.d.is_none()), ("--horizon", self.horizon.is_none())]
            .into_iter()
            .filter_map(|(name, gone)| gone.then_some(name))
            .collect();
        if !missing.is_empty() {
            return Err(UsageError(format!("missing {} (or pass --manifest)", missing.join(", "))).into());
        }
        let mut m = RunManifest::new(self.n.unwrap_or(1), self.d.unwrap_or(1), self.horizon.unwrap_or(0.0));
        if let Some(v) = self.dt_obs {
            m = m.with_dt_obs(v);
        }
        if let Some(v) = self.seed {
            m = m.with_seed(v);
        }
        if let Some(v) = self.replicas {
            m = m.with_replicas(v);
        }
        m.validate()?;
        Ok(m)
    }
}

/// Runs the command line `argv` (including the program name) and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with_io(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`run`] with explicit output streams.
pub fn run_with_io<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return if code == 0 { 0 } else { 2 };
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                2
            } else {
                1
            }
        }
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("writing {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn finish(mut w: BufWriter<File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn dispatch(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate { run, format, common } => {
            let m = run.resolve(err)?;
            cmd_simulate(&m, format, &common, out)
        }
        Command::Diffusivity { run, common } => {
            let m = run.resolve(err)?;
            cmd_diffusivity(&m, &common, out)
        }
        Command::ExtentTails { run, level, initial_extent, from_one, common } => {
            let mut m = run.resolve(err)?;
            if let Some(e) = initial_extent {
                let init = spread_initial(m.n, m.d, e)?;
                m = m.with_initial(init);
            }
            cmd_extent_tails(&m, level, from_one, &common, out)
        }
        Command::Collapse { config, common } => cmd_collapse(&config, &common, out),
        Command::Unambiguity { configs, common } => cmd_unambiguity(&configs, &common, out),
        Command::Minorization { config, seed, replicas, common } => cmd_minorization(&config, seed, replicas, &common, out),
        Command::Measure { run, half_width, bins, common } => {
            let m = run.resolve(err)?;
            cmd_measure(&m, half_width, bins, &common, out)
        }
        Command::Events { run, anchor_step, trajectory, export_lineage, common } => match trajectory {
            Some(path) => cmd_events_supplied(&path, anchor_step, &common, out),
            None => {
                let m = run.resolve(err)?;
                cmd_events(&m, anchor_step, export_lineage, &common, out)
            }
        },
    }
}

/// `n` points evenly spaced on the first axis, centred at the origin, with
/// extent `e`.
fn spread_initial(n: usize, d: usize, e: f64) -> Result<InitialCondition> {
    if !(e >= 0.0) {
        return Err(bbb_core::Error::Domain("initial extent must be nonnegative".into()).into());
    }
    let positions = (0..n)
        .map(|i| {
            let mut p = vec![0.0; d];
            if n > 1 {
                p[0] = -e / 2.0 + e * i as f64 / (n - 1) as f64;
            }
            p
        })
        .collect();
    Ok(InitialCondition::Explicit { positions })
}

fn cmd_simulate(m: &RunManifest, format: Format, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let trajs = with_threads(common.threads, || map_replicas(m.seed, m.replicas, common.exec(), |_, mut rng| simulate(m, &mut rng)))?;
    let prov = Provenance::of(m);
    match format {
        Format::Csv => {
            let mut w = create(&common.out, "trajectory.csv")?;
            export::write_trajectory_csv(&mut w, &prov, &trajs)?;
            finish(w)?;
            let mut w = create(&common.out, "events.csv")?;
            export::write_events_csv(&mut w, &prov, &trajs)?;
            finish(w)?;
            writeln!(out, "wrote {}", common.out.join("trajectory.csv").display())?;
            writeln!(out, "wrote {}", common.out.join("events.csv").display())?;
        }
        Format::Jsonl => {
            let mut w = create(&common.out, "trajectory.jsonl")?;
            export::write_trajectory_jsonl(&mut w, &prov, &trajs)?;
            finish(w)?;
            writeln!(out, "wrote {}", common.out.join("trajectory.jsonl").display())?;
        }
    }
    let events: usize = trajs.iter().map(|t| t.events.len()).sum();
    writeln!(out, "replicas={} events={events} manifest={}", trajs.len(), prov.manifest_hash)?;
    Ok(())
}

/// Records the barycenter at time zero.
#[derive(Default)]
struct StartBarycenter(Option<Point>);

impl Observer for StartBarycenter {
    fn on_instant(&mut self, time: f64, _kind: InstantKind, config: &Configuration) {
        if time == 0.0 && self.0.is_none() {
            self.0 = Some(config.barycenter());
        }
    }
}

#[derive(Serialize, Deserialize)]
pub struct DiffusivityResult {
    pub sigma2: stats::EstimatorReport,
    pub drift_isotropy: stats::EstimatorReport,
}

fn cmd_diffusivity(m: &RunManifest, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    if !(m.horizon > 0.0) {
        return Err(bbb_core::Error::Domain("diffusivity needs a positive horizon".into()).into());
    }
    // only the endpoints matter, so skip intermediate grid work
    let mut run_m = m.clone();
    run_m.dt_obs = m.horizon;
    let disp = with_threads(common.threads, || {
        map_replicas(m.seed, m.replicas, common.exec(), |_, mut rng| {
            let mut start = StartBarycenter::default();
            let end = run_with(&run_m, &mut rng, &mut start)?.barycenter();
            let s = start.0.expect("time zero is always observed");
            Ok(end.0.iter().zip(&s.0).map(|(a, b)| a - b).collect::<Vec<f64>>())
        })
    })?;
    let sigma2 = stats::estimate_sigma2(&disp, m.horizon)?.with_seed(m.seed);
    let drift_isotropy = stats::drift_and_isotropy(&disp)?.with_seed(m.seed);
    let prov = Provenance::of(m);

    let mut w = create(&common.out, "displacements.csv")?;
    w.write_all(prov.comment().as_bytes())?;
    let header: String = (0..m.d).map(|k| format!(",coord_{k}")).collect();
    writeln!(w, "replica{header}")?;
    for (r, v) in disp.iter().enumerate() {
        let row: String = v.iter().map(|x| format!(",{x}")).collect();
        writeln!(w, "{r}{row}")?;
    }
    finish(w)?;

    let est = sigma2.estimate("sigma2").expect("sigma2 always reported").clone();
    let result = DiffusivityResult { sigma2, drift_isotropy };
    let mut w = create(&common.out, "diffusivity.json")?;
    export::write_json(&mut w, &prov, Some(m), &result)?;
    finish(w)?;
    writeln!(out, "sigma2 = {} (95% CI {} .. {}, se {})", est.value, est.ci.0, est.ci.1, est.se)?;
    writeln!(out, "drift/isotropy checks passed: {}", result.drift_isotropy.passed())?;
    writeln!(out, "wrote {}", common.out.join("diffusivity.json").display())?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct TailResult {
    pub level: f64,
    pub from_one: bool,
    pub censored: usize,
    pub fit: stats::EstimatorReport,
    pub survival: Vec<(f64, f64)>,
    pub degenerate: bool,
}

fn cmd_extent_tails(m: &RunManifest, level: f64, from_one: bool, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let times = with_threads(common.threads, || {
        map_replicas(m.seed, m.replicas, common.exec(), |_, mut rng| {
            let mut hit = ExtentHit::new(level, from_one);
            run_with(m, &mut rng, &mut hit)?;
            Ok(hit.hit.unwrap_or(f64::INFINITY))
        })
    })?;
    let prov = Provenance::of(m);
    let mut w = create(&common.out, "extent_times.csv")?;
    w.write_all(prov.comment().as_bytes())?;
    writeln!(w, "replica,time")?;
    for (r, t) in times.iter().enumerate() {
        if t.is_finite() {
            writeln!(w, "{r},{t}")?;
        } else {
            writeln!(w, "{r},")?;
        }
    }
    finish(w)?;

    let fit = stats::fit_tail(&times, &[])?;
    let censored = times.iter().filter(|t| !t.is_finite()).count();
    let result = TailResult {
        level,
        from_one,
        censored,
        fit: fit.report.with_seed(m.seed),
        survival: fit.survival,
        degenerate: fit.degenerate,
    };
    let mut w = create(&common.out, "tail_fit.json")?;
    export::write_json(&mut w, &prov, Some(m), &result)?;
    finish(w)?;
    match result.fit.estimate("slope") {
        Some(s) => writeln!(out, "tail slope = {} (se {}), censored {censored}", s.value, s.se)?,
        None => writeln!(out, "degenerate sample, no slope; censored {censored}")?,
    }
    writeln!(out, "checks passed: {}", result.fit.passed())?;
    writeln!(out, "wrote {}", common.out.join("tail_fit.json").display())?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CollapseInput {
    positions: Vec<Vec<f64>>,
    #[serde(default)]
    weights: Option<Vec<u32>>,
}

fn configuration(points: &[Vec<f64>]) -> Result<Configuration> {
    let pts = points.iter().map(|p| Point::new(p.clone())).collect::<bbb_core::Result<Vec<_>>>()?;
    Ok(Configuration::new(&pts, pts.len())?)
}

#[derive(Serialize, Deserialize)]
pub struct CollapseResult {
    pub trace: CollapseTrace,
    pub margin: f64,
}

fn cmd_collapse(path: &Path, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let input: CollapseInput = serde_json::from_slice(&bytes).map_err(|e| bbb_core::Error::Domain(format!("bad config: {e}")))?;
    let x = configuration(&input.positions)?;
    let w = input.weights.unwrap_or_else(|| vec![1; x.len()]);
    let trace = collapse(&x, &w)?;
    let prov = Provenance::of_input(&bytes, None);
    let result = CollapseResult { margin: unambiguity_margin(&x), trace };
    let mut f = create(&common.out, "collapse.json")?;
    export::write_json(&mut f, &prov, None, &result)?;
    finish(f)?;
    writeln!(out, "sequence = {:?}", result.trace.sequence)?;
    writeln!(out, "kills = {:?}", result.trace.kills)?;
    writeln!(out, "final weights = {:?}", result.trace.final_weights())?;
    writeln!(out, "wrote {}", common.out.join("collapse.json").display())?;
    Ok(())
}

fn cmd_unambiguity(path: &Path, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let configs: Vec<Vec<Vec<f64>>> =
        serde_json::from_slice(&bytes).map_err(|e| bbb_core::Error::Domain(format!("bad config list: {e}")))?;
    let parsed = configs.iter().map(|c| configuration(c)).collect::<Result<Vec<_>>>()?;
    let rows = with_threads(common.threads, || {
        map_replicas(0, parsed.len() as u64, common.exec(), |i, _| Ok((i as usize, unambiguity_margin(&parsed[i as usize]))))
    })?;
    let prov = Provenance::of_input(&bytes, None);
    let mut f = create(&common.out, "margins.csv")?;
    export::write_margins_csv(&mut f, &prov, &rows)?;
    finish(f)?;
    let zero = rows.iter().filter(|(i, m)| *m < bbb_core::detcfg::ambiguity_threshold(&parsed[*i])).count();
    writeln!(out, "configs = {}, ambiguous = {zero}", rows.len())?;
    if let Some(first) = parsed.first() {
        let w = margin_witness(first);
        writeln!(out, "config 0: margin {} at pair {:?} with f = {:?}", w.margin, w.pair, w.f)?;
    }
    writeln!(out, "wrote {}", common.out.join("margins.csv").display())?;
    Ok(())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MinorizationInput {
    start: Vec<Vec<f64>>,
    l: f64,
    t: f64,
    boxes: Vec<BoxRegion>,
}

fn cmd_minorization(path: &Path, seed: u64, replicas: u64, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let input: MinorizationInput =
        serde_json::from_slice(&bytes).map_err(|e| bbb_core::Error::Domain(format!("bad config: {e}")))?;
    if replicas == 0 {
        return Err(bbb_core::Error::Domain("replicas must be at least 1".into()).into());
    }
    let setup = MinorizationSetup { start: configuration(&input.start)?, l: input.l, t: input.t, boxes: input.boxes, replicas, seed };
    let report = with_threads(common.threads, || stats::minorization_check(&setup, common.exec()))?;
    let prov = Provenance::of_input(&bytes, Some(seed));
    let mut f = create(&common.out, "minorization.json")?;
    export::write_json(&mut f, &prov, None, &report)?;
    finish(f)?;
    for (i, _) in setup.boxes.iter().enumerate() {
        let mu = report.estimate(&format!("mu_box{i}")).expect("reported per box");
        let phi = report.estimate(&format!("phi_box{i}")).expect("reported per box");
        let check = report.get_check(&format!("box{i}_lower_ci_ge_gamma_phi")).expect("reported per box");
        writeln!(out, "box {i}: mu = {} (lower {}), gamma*phi = {}, pass = {}", mu.value, mu.ci.0, check.threshold, check.passed)?;
        let _ = phi;
    }
    writeln!(out, "all checks passed: {}", report.passed())?;
    writeln!(out, "wrote {}", common.out.join("minorization.json").display())?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct MeasureSummary {
    pub split_half_l1: f64,
    pub out_of_range: u64,
    pub warnings: Vec<String>,
}

fn cmd_measure(m: &RunManifest, half_width: f64, bins: usize, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    if !(half_width > 0.0) || bins == 0 {
        return Err(bbb_core::Error::Domain("grid needs a positive half width and at least one bin".into()).into());
    }
    let mut run_m = m.clone();
    run_m.dt_obs = m.horizon.max(f64::MIN_POSITIVE);
    let configs =
        with_threads(common.threads, || map_replicas(m.seed, m.replicas, common.exec(), |_, mut rng| run_with(&run_m, &mut rng, &mut ())))?;
    let report = stats::empirical_measure(&configs, &HistogramGrid::centred(m.d, half_width, bins))?;
    let prov = Provenance::of(m);
    let mut f = create(&common.out, "histogram.csv")?;
    export::write_histogram_csv(&mut f, &prov, &report.histogram)?;
    finish(f)?;
    let summary = MeasureSummary {
        split_half_l1: report.split_half_l1,
        out_of_range: report.histogram.out_of_range,
        warnings: report.warnings.clone(),
    };
    let mut f = create(&common.out, "measure.json")?;
    export::write_json(&mut f, &prov, Some(m), &summary)?;
    finish(f)?;
    for w in &report.warnings {
        writeln!(out, "warning: {w}")?;
    }
    writeln!(out, "split-half L1 = {}", report.split_half_l1)?;
    writeln!(out, "wrote {}", common.out.join("histogram.csv").display())?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct ReplicaEvents {
    pub replica: u64,
    pub reports: Vec<EventReport>,
}

#[derive(Serialize, Deserialize)]
pub struct EventsResult {
    pub anchors_checked: usize,
    pub a_holds: usize,
    pub b_holds: usize,
    pub both_hold: usize,
    pub replicas: Vec<ReplicaEvents>,
}

impl EventsResult {
    fn from_replicas(replicas: Vec<ReplicaEvents>) -> Self {
        let all = || replicas.iter().flat_map(|r| &r.reports);
        EventsResult {
            anchors_checked: all().count(),
            a_holds: all().filter(|e| e.a.is_some_and(|a| a.holds)).count(),
            b_holds: all().filter(|e| e.b.is_some_and(|b| b.holds)).count(),
            both_hold: all().filter(|e| e.both_hold()).count(),
            replicas,
        }
    }
}

fn anchors(horizon: f64, step: f64, span: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) {
        return Err(bbb_core::Error::Domain("anchor step must be positive".into()).into());
    }
    let mut out = Vec::new();
    let mut k = 0u64;
    while k as f64 * step + span <= horizon + 1e-9 {
        out.push(k as f64 * step);
        k += 1;
    }
    Ok(out)
}

fn cmd_events(m: &RunManifest, step: f64, export_lineage: bool, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let opts = LineageOptions { window_cap: m.horizon.max(LineageOptions::default().window_cap), ..LineageOptions::default() };
    let ts = anchors(m.horizon, step, 2.0)?;
    let prov = Provenance::of(m);
    let per = with_threads(common.threads, || {
        map_replicas(m.seed, m.replicas, common.exec(), |r, mut rng| {
            let rec = simulate_bbm_embedded(m, &mut rng, m.horizon, opts)?;
            let traj = rec.project()?;
            let reports = ts.iter().map(|&t| detect_events(&rec, &traj, t)).collect();
            let lineage = export_lineage.then_some(rec);
            Ok((ReplicaEvents { replica: r, reports }, lineage))
        })
    })?;
    let mut replicas = Vec::with_capacity(per.len());
    for (ev, rec) in per {
        if let Some(rec) = rec {
            let mut f = create(&common.out, &format!("lineage_r{}_nodes.jsonl", ev.replica))?;
            export::write_lineage_nodes_jsonl(&mut f, &prov, &rec)?;
            finish(f)?;
            let mut f = create(&common.out, &format!("lineage_r{}_paths.csv", ev.replica))?;
            export::write_lineage_paths_csv(&mut f, &prov, &rec)?;
            finish(f)?;
        }
        replicas.push(ev);
    }
    write_events(EventsResult::from_replicas(replicas), &prov, Some(m), common, out)
}

fn cmd_events_supplied(path: &Path, step: f64, common: &CommonArgs, out: &mut dyn Write) -> Result<()> {
    let f = File::open(path).with_context(|| format!("reading {}", path.display()))?;
    let trajs = export::read_trajectory_jsonl(BufReader::new(f))?;
    let first = trajs.first().ok_or_else(|| anyhow!("no trajectories in {}", path.display()))?;
    let m = first.manifest.clone();
    let ts = anchors(m.horizon, step, 1.0)?;
    let replicas = trajs
        .iter()
        .map(|t| ReplicaEvents {
            replica: t.replica,
            reports: ts.iter().map(|&a| EventReport { t: a, a: detect_a(t, a).ok(), b: None }).collect(),
        })
        .collect();
    write_events(EventsResult::from_replicas(replicas), &Provenance::of(&m), Some(&m), common, out)
}

fn write_events(
    result: EventsResult,
    prov: &Provenance,
    m: Option<&RunManifest>,
    common: &CommonArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let mut f = create(&common.out, "events.json")?;
    export::write_json(&mut f, prov, m, &result)?;
    finish(f)?;
    writeln!(
        out,
        "anchors = {}, A = {}, B = {}, A and B = {}",
        result.anchors_checked, result.a_holds, result.b_holds, result.both_hold
    )?;
    writeln!(out, "wrote {}", common.out.join("events.json").display())?;
    Ok(())
}

use std::fs;
use std::path::Path;

use bbb_cli::run_with_io;

fn bbb(args: &[&str]) -> (i32, String, String) {
    let argv = std::iter::once("bbb").chain(args.iter().copied());
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with_io(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

#[test]
fn exit_codes() {
    assert_eq!(bbb(&["--help"]).0, 0);
    assert_eq!(bbb(&["simulate", "--help"]).0, 0);
    assert_eq!(bbb(&["no-such-command"]).0, 2);
    assert_eq!(bbb(&["simulate", "--N", "three", "--d", "1", "--horizon", "1"]).0, 2);

    let (code, _, err) = bbb(&["simulate", "--N", "3"]);
    assert_eq!(code, 2);
    assert!(err.contains("--horizon"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    assert_eq!(bbb(&["simulate", "--N", "0", "--d", "1", "--horizon", "1", "--out", &out]).0, 1);
    assert_eq!(bbb(&["simulate", "--N", "2", "--d", "1", "--horizon=-1", "--out", &out]).0, 1);
    assert_eq!(bbb(&["collapse", "--config", &p(&dir.path().join("missing.json")), "--out", &out]).0, 1);
}

#[test]
fn zero_horizon_simulation_is_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = bbb(&["simulate", "--N", "1", "--d", "1", "--horizon", "0", "--out", &p(dir.path())]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("# manifest="));
    assert_eq!(lines[1], "replica,time,particle_index,coord_0");
    assert_eq!(&lines[2..], ["0,0,0,0"]);
    let events = fs::read_to_string(dir.path().join("events.csv")).unwrap();
    assert_eq!(events.lines().count(), 2);
}

#[test]
fn collapse_of_three_points() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"positions": [[0], [1], [3]], "weights": [1, 1, 1]}"#).unwrap();
    let (code, out, _) = bbb(&["collapse", "--config", &p(&cfg), "--out", &p(dir.path())]);
    assert_eq!(code, 0);
    assert!(out.contains("sequence = [1, 1]"), "{out}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("collapse.json")).unwrap()).unwrap();
    assert_eq!(v["result"]["trace"]["sequence"], serde_json::json!([1, 1]));
    assert_eq!(v["result"]["trace"]["kills"], serde_json::json!([2, 0]));
    assert_eq!(v["manifest_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn ambiguous_collapse_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"positions": [[-1], [0], [1]]}"#).unwrap();
    let (code, _, err) = bbb(&["collapse", "--config", &p(&cfg), "--out", &p(dir.path())]);
    assert_eq!(code, 1);
    assert!(err.contains("ambiguous"), "{err}");
    assert!(!dir.path().join("collapse.json").exists());
}

#[test]
fn margins_for_a_batch() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cs.json");
    fs::write(&cfg, "[[[-1], [0], [1]], [[0], [1.3], [3.1], [7.7]]]").unwrap();
    assert_eq!(bbb(&["unambiguity", "--configs", &p(&cfg), "--out", &p(dir.path())]).0, 0);
    let csv = fs::read_to_string(dir.path().join("margins.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], "0,0");
    let m: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!(m > 0.0);
}

fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|path| (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&path).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn artifacts_do_not_depend_on_thread_count() {
    let runs: Vec<Vec<(String, Vec<u8>)>> = [&["--threads", "1"][..], &["--threads", "3"], &["--sequential"]]
        .iter()
        .map(|extra| {
            let dir = tempfile::tempdir().unwrap();
            let out = p(dir.path());
            for cmd in [
                &["simulate", "--N", "3", "--d", "2", "--horizon", "4", "--dt-obs", "0.5", "--replicas", "12"][..],
                &["diffusivity", "--N", "2", "--d", "1", "--horizon", "5", "--replicas", "50"],
                &["measure", "--N", "3", "--d", "1", "--horizon", "5", "--replicas", "40", "--bins", "8"],
            ] {
                let mut args = cmd.to_vec();
                args.extend_from_slice(extra);
                args.extend_from_slice(&["--seed", "17", "--out", &out]);
                assert_eq!(bbb(&args).0, 0, "{args:?}");
            }
            artifacts(dir.path())
        })
        .collect();
    assert_eq!(runs[0].len(), 6);
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}

#[test]
fn manifest_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("m.json");
    fs::write(
        &manifest,
        r#"{"N": 2, "d": 1, "horizon": 1.0, "initial": {"kind": "point_mass", "at": [0.0]}, "dt_obs": 0.5, "seed": 4, "replicas": 1}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, _, err) = bbb(&["simulate", "--manifest", &p(&manifest), "--N", "7", "--out", &p(&out)]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("warning"), "{err}");
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.lines().skip(2).all(|l| l.split(',').nth(2).unwrap().parse::<usize>().unwrap() < 2));
}

#[test]
fn events_from_simulation_and_from_a_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    let (code, stdout, _) = bbb(&[
        "events", "--N", "3", "--d", "1", "--horizon", "4", "--dt-obs", "0.5", "--replicas", "3", "--export-lineage",
        "--out", &out,
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("anchors = 9"), "{stdout}");
    assert!(dir.path().join("lineage_r2_nodes.jsonl").exists());

    assert_eq!(bbb(&["simulate", "--N", "3", "--d", "1", "--horizon", "4", "--dt-obs", "0.5", "--format", "jsonl", "--out", &out]).0, 0);
    let traj = p(&dir.path().join("trajectory.jsonl"));
    let (code, stdout, _) = bbb(&["events", "--trajectory", &traj, "--out", &out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("anchors = 4"), "{stdout}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("events.json")).unwrap()).unwrap();
    assert!(v["result"]["replicas"][0]["reports"][0]["b"].is_null());
}

#[test]
fn extent_tails_and_minorization_write_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    let (code, stdout, _) = bbb(&[
        "extent-tails", "--N", "3", "--d", "1", "--horizon", "50", "--level", "4", "--initial-extent", "40", "--replicas",
        "200", "--out", &out,
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("tail slope"), "{stdout}");
    let times = fs::read_to_string(dir.path().join("extent_times.csv")).unwrap();
    assert_eq!(times.lines().count(), 202);

    let cfg = dir.path().join("mz.json");
    fs::write(&cfg, r#"{"start": [[0], [1]], "l": 1, "t": 1.5, "boxes": [{"lower": [-1, -1], "upper": [1, 1]}]}"#).unwrap();
    let (code, stdout, _) = bbb(&["minorization", "--config", &p(&cfg), "--replicas", "2000", "--out", &out]);
    assert_eq!(code, 0);
    assert!(stdout.contains("all checks passed: true"), "{stdout}");
    // start extent above L is rejected
    fs::write(&cfg, r#"{"start": [[0], [3]], "l": 1, "t": 1.5, "boxes": []}"#).unwrap();
    assert_eq!(bbb(&["minorization", "--config", &p(&cfg), "--out", &out]).0, 1);
}

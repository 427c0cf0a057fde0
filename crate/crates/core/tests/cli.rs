mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::fixture;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctxcompress"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct N3m4 {
    dir: PathBuf,
    meta: Value,
}

impl N3m4 {
    fn new() -> Self {
        let dir = fixture("n3m4");
        let meta = serde_json::from_str(&std::fs::read_to_string(dir.join("instance.json")).unwrap()).unwrap();
        N3m4 { dir, meta }
    }

    /// Engine flags for the fixture instance, budgets from `instance.json`.
    fn args(&self) -> Vec<String> {
        let f = |k: &str| self.meta[k].as_f64().unwrap().to_string();
        let d = |n: &str| self.dir.join(n).to_str().unwrap().to_string();
        vec![
            "--backbone".into(), d("backbone.json"),
            "--device".into(), d("device.json"),
            "--profile".into(), d("profile.json"),
            "--catalog".into(), d("catalog.json"),
            "--a-threshold".into(), f("a_threshold"),
            "--t-budget".into(), f("t_budget"),
            "--s-budget".into(), f("s_budget"),
            "--battery".into(), f("battery"),
            "--seed".into(), self.meta["mutation_seed"].to_string(),
            "--no-timestamp".into(),
        ]
    }
}

fn sample_args(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = vec![
        "--backbone".into(),
        path(&fixture("backbone_5conv.json")).into(),
        "--device".into(),
        path(&fixture("devices/single_board.json")).into(),
        "--synthetic-seed".into(),
        "7".into(),
        "--no-timestamp".into(),
    ];
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

#[test]
fn describe_prints_layers_and_totals() {
    let out = run(&["describe", path(&fixture("backbone_5conv.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let conv_rows = text.lines().filter(|l| l.contains("Conv*")).count();
    assert_eq!(conv_rows, 5);
    let total = text.lines().find(|l| l.trim_start().starts_with("total")).unwrap();
    for n in ["95259136", "980320", "164106"] {
        assert!(total.contains(n), "{total}");
    }
}

#[test]
fn describe_rejects_broken_network() {
    let out = run(&["describe", path(&fixture("backbone_broken.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("boundary 2/3"));
    let out = run(&["describe", "/nonexistent/net.json"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn loose_budgets_keep_the_backbone() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("r.json");
    let mut args = vec!["compress".to_string()];
    args.extend(sample_args(&["--t-budget", "1s", "--s-budget", "64MiB", "--out", path(&out_path)]));
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(rec["encoding"], "0");
    assert_eq!(rec["evaluations"], 1);
}

#[test]
fn fixture_results_are_reproduced_byte_for_byte() {
    let fx = N3m4::new();
    let tmp = tempfile::tempdir().unwrap();
    for (opt, code) in [("exhaustive", 0), ("runtime3c", 0), ("greedy", 3)] {
        let out_path = tmp.path().join(format!("{opt}.json"));
        let out = bin()
            .arg("compress")
            .args(fx.args())
            .args(["--optimizer", opt, "--out", path(&out_path)])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(code), "{opt}");
        let expected = std::fs::read(fx.dir.join(format!("expected_{opt}.json"))).unwrap();
        assert_eq!(std::fs::read(&out_path).unwrap(), expected, "{opt}");
    }
    let ex: Value = serde_json::from_slice(&std::fs::read(fx.dir.join("expected_exhaustive.json")).unwrap()).unwrap();
    assert_eq!(ex["encoding"], fx.meta["exhaustive_optimum"]["encoding"]);
}

#[test]
fn infeasible_compression_still_writes_result() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("r.json");
    let mut args = vec!["compress".to_string()];
    args.extend(sample_args(&["--t-budget", "1ms", "--s-budget", "1MiB", "--out", path(&out_path)]));
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(rec["feasible"], false);
    assert!(rec["violated"].as_array().unwrap().contains(&Value::from("latency")));
}

#[test]
fn bad_inputs_exit_with_validation_code() {
    let tmp = tempfile::tempdir().unwrap();
    let out_path = tmp.path().join("r.json");
    let mut args = vec!["compress".to_string()];
    args.extend(sample_args(&["--t-budget", "1ms", "--s-budget", "1MiB", "--battery", "1.5", "--out", path(&out_path)]));
    assert_eq!(bin().args(&args).output().unwrap().status.code(), Some(2));
    // profile and synthetic seed are mutually exclusive
    let mut args = vec!["compress".to_string(), "--profile".to_string(), "x.json".to_string()];
    args.extend(sample_args(&["--t-budget", "1ms", "--s-budget", "1MiB", "--out", path(&out_path)]));
    assert_eq!(bin().args(&args).output().unwrap().status.code(), Some(2));
    assert!(!out_path.exists());
}

#[test]
fn simulate_writes_one_line_per_event() {
    let tmp = tempfile::tempdir().unwrap();
    let log = tmp.path().join("events.jsonl");
    let mut args = vec!["simulate".to_string()];
    args.extend(sample_args(&[
        "--t-budget", "30ms", "--trace", path(&fixture("case_study_trace.csv")), "--trigger", "periodic:3600", "--out", path(&log),
    ]));
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let first = std::fs::read(&log).unwrap();
    assert_eq!(String::from_utf8(first.clone()).unwrap().lines().count(), 4);
    bin().args(&args).output().unwrap();
    assert_eq!(std::fs::read(&log).unwrap(), first);

    let mut args = vec!["simulate".to_string()];
    args.extend(sample_args(&["--t-budget", "30ms", "--trace", path(&fixture("empty_trace.csv")), "--out", path(&log)]));
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read(&log).unwrap().is_empty());
}

#[test]
fn simulate_rejects_bad_trigger() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate".to_string()];
    args.extend(sample_args(&[
        "--t-budget", "30ms", "--trace", path(&fixture("case_study_trace.csv")), "--trigger", "hourly", "--out", path(&tmp.path().join("e")),
    ]));
    assert_eq!(bin().args(&args).output().unwrap().status.code(), Some(2));
}

fn read_csv(p: &Path) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(p).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["optimizer", "A", "A_loss", "T", "C/S_p", "C/S_a", "E", "evaluations", "wall_time"]);
    rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn compare_on_fixture() {
    let fx = N3m4::new();
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("cmp.csv");
    let out = bin().arg("compare").args(fx.args()).args(["--out", path(&table)]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(&table);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["runtime3c", "greedy", "exhaustive"]);
    let evals = |i: usize| rows[i][7].parse::<usize>().unwrap();
    assert!(evals(0) < evals(2));
    // runtime3c reaches the exhaustive optimum on this fixture
    assert_eq!(rows[0][1..7], rows[2][1..7]);
}

#[test]
fn compare_marks_capped_exhaustive_as_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let table = tmp.path().join("cmp.csv");
    let mut args = vec!["compare".to_string()];
    args.extend(sample_args(&["--t-budget", "30ms", "--s-budget", "1.5MiB", "--out", path(&table)]));
    assert_eq!(bin().args(&args).output().unwrap().status.code(), Some(0));
    let rows = read_csv(&table);
    assert_eq!(rows[2][0], "exhaustive");
    assert!(rows[2][1..].iter().all(|c| c == "skipped"));
    assert_ne!(rows[0][1], "skipped");
}

#[test]
fn identity_catalog_gives_identical_rows() {
    let fx = N3m4::new();
    let tmp = tempfile::tempdir().unwrap();
    let catalog = tmp.path().join("identity.json");
    std::fs::write(&catalog, "[]").unwrap();
    let table = tmp.path().join("cmp.csv");
    let mut args = fx.args();
    let i = args.iter().position(|a| a == "--catalog").unwrap();
    args[i + 1] = path(&catalog).to_string();
    let out = bin().arg("compare").args(args).args(["--out", path(&table)]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let rows = read_csv(&table);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1..] == rows[0][1..]));
}

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use camuv::eval::project_truth;
use camuv::synth::CausalStructure;
use camuv::CausalGraph;
use serde_json::Value;

fn camuv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_camuv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = camuv(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read_json(p: impl AsRef<Path>) -> Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

fn score_rows(p: &str) -> Vec<Vec<String>> {
    let mut rdr = csv::Reader::from_path(p).unwrap();
    rdr.records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn discover_recovers_a_chain() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "chain.csv");
    common::sample(&common::chain3(), 600, 1)
        .write_csv(&csv)
        .unwrap();
    let out = path(dir.path(), "g.json");
    let dot = path(dir.path(), "g.dot");
    ok(&["discover", "--input", &csv, "--out", &out, "--dot", &dot]);
    let g = read_json(&out);
    assert_eq!(g["parents"]["x2"], serde_json::json!(["x1"]));
    assert_eq!(g["parents"]["x3"], serde_json::json!(["x2"]));
    assert_eq!(g["dashed"], serde_json::json!([]));
    assert_eq!(g["manifest"], "g.json.manifest.json");
    assert!(fs::read_to_string(&dot).unwrap().contains("digraph"));
    let m = read_json(dir.path().join("g.json.manifest.json"));
    assert_eq!(m["command"], "discover");
    assert!(m["counters"]["regressions"].as_u64().unwrap() > 0);
    assert_eq!(m["inputs"].as_array().unwrap().len(), 1);
}

#[test]
fn single_column_gives_an_empty_graph() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "one.csv");
    let rows: String = (0..30)
        .map(|i| format!("{}\n", (i * 7 % 11) as f64))
        .collect();
    fs::write(&csv, format!("x1\n{rows}")).unwrap();
    let out = path(dir.path(), "g.json");
    ok(&["discover", "--input", &csv, "--out", &out]);
    let g = read_json(&out);
    assert_eq!(g["parents"], serde_json::json!({"x1": []}));
    assert_eq!(g["dashed"], serde_json::json!([]));
}

#[test]
fn missing_input_is_named_in_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "nope.csv");
    let out = camuv(&[
        "discover",
        "--input",
        &missing,
        "--out",
        &path(dir.path(), "g.json"),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.csv"));
    assert!(!dir.path().join("g.json").exists());
}

#[test]
fn invalid_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = path(dir.path(), "run");
    assert!(!camuv(&[
        "simulate",
        "--p",
        "3",
        "--intermediate",
        "9",
        "--out-prefix",
        &prefix
    ])
    .status
    .success());
    assert!(
        !camuv(&["simulate", "--er", "1.5", "--out-prefix", &prefix])
            .status
            .success()
    );
    assert!(!camuv(&["discover", "--alpha", "0.01"]).status.success());
}

#[test]
fn simulate_is_deterministic_and_matches_the_defaults() {
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = path(da.path(), "run");
    let b = path(db.path(), "run");
    ok(&["simulate", "--seed", "7", "--n", "200", "--out-prefix", &a]);
    ok(&["simulate", "--seed", "7", "--n", "200", "--out-prefix", &b]);
    for ext in [".csv", ".truth.json"] {
        assert_eq!(
            fs::read(format!("{a}{ext}")).unwrap(),
            fs::read(format!("{b}{ext}")).unwrap()
        );
    }
    let s = CausalStructure::from_json(&read_json(format!("{a}.truth.json"))).unwrap();
    assert_eq!(s.num_observed(), 10);
    assert_eq!(s.latent.len(), 4);
    let data = camuv::dataset::load_csv(format!("{a}.csv")).unwrap();
    assert_eq!((data.n(), data.p()), (200, 10));
}

#[test]
fn minimal_backdoor_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = path(dir.path(), "ubp");
    ok(&[
        "simulate",
        "--p",
        "2",
        "--er",
        "0",
        "--common",
        "1",
        "--intermediate",
        "0",
        "--out-prefix",
        &prefix,
    ]);
    let s = CausalStructure::from_json(&read_json(format!("{prefix}.truth.json"))).unwrap();
    let truth = project_truth(&s).unwrap();
    assert!(truth.directed_edges.is_empty());
    assert_eq!(
        truth.ucp_ubp_pairs.into_iter().collect::<Vec<_>>(),
        vec![(0, 1)]
    );
}

fn simulate_small(dir: &Path) -> (String, CausalStructure) {
    let prefix = path(dir, "run");
    ok(&[
        "simulate",
        "--p",
        "5",
        "--n",
        "100",
        "--seed",
        "3",
        "--common",
        "1",
        "--intermediate",
        "1",
        "--out-prefix",
        &prefix,
    ]);
    let s = CausalStructure::from_json(&read_json(format!("{prefix}.truth.json"))).unwrap();
    (prefix, s)
}

#[test]
fn evaluate_perfect_and_empty_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let (prefix, s) = simulate_small(dir.path());
    let truth = project_truth(&s).unwrap();
    let truth_path = format!("{prefix}.truth.json");
    let perfect = path(dir.path(), "perfect.json");
    fs::write(&perfect, truth.to_graph().to_json().to_string()).unwrap();
    let empty = path(dir.path(), "empty.json");
    fs::write(
        &empty,
        CausalGraph::empty(truth.names.clone())
            .to_json()
            .to_string(),
    )
    .unwrap();
    let scores = path(dir.path(), "scores.csv");
    ok(&[
        "evaluate",
        "--graph",
        &perfect,
        "--truth",
        &truth_path,
        "--out",
        &scores,
    ]);
    ok(&[
        "evaluate",
        "--graph",
        &empty,
        "--truth",
        &truth_path,
        "--out",
        &scores,
        "--trial",
        "1",
    ]);
    let rows = score_rows(&scores);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][4], "directed");
    assert_eq!(rows[0][7], "1");
    assert_eq!(rows[2][1..4], ["NA", "NA", "NA"]);
    assert_eq!(rows[2][4], "directed");
    assert_eq!(rows[2][6], "0");
    assert_eq!(rows[2][5], "NA");
    assert_eq!(
        fs::read_to_string(&scores)
            .unwrap()
            .matches("trial")
            .count(),
        1
    );
}

#[test]
fn evaluate_rejects_mismatched_variables() {
    let dir = tempfile::tempdir().unwrap();
    let (prefix, _) = simulate_small(dir.path());
    let other = path(dir.path(), "other.json");
    fs::write(
        &other,
        CausalGraph::empty(vec!["a".into(), "b".into()])
            .to_json()
            .to_string(),
    )
    .unwrap();
    let out = camuv(&[
        "evaluate",
        "--graph",
        &other,
        "--truth",
        &format!("{prefix}.truth.json"),
        "--out",
        &path(dir.path(), "s.csv"),
    ]);
    assert!(!out.status.success());
}

#[test]
fn omit_then_discover_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let (prefix, s) = simulate_small(dir.path());
    let reduced = path(dir.path(), "reduced");
    ok(&[
        "omit",
        "--data",
        &format!("{prefix}.csv"),
        "--truth",
        &format!("{prefix}.truth.json"),
        "--m",
        "2",
        "--seed",
        "4",
        "--out-prefix",
        &reduced,
    ]);
    let r = CausalStructure::from_json(&read_json(format!("{reduced}.truth.json"))).unwrap();
    assert_eq!(r.num_observed(), 3);
    assert_eq!(r.latent.len(), s.latent.len() + 2);
    let data = camuv::dataset::load_csv(format!("{reduced}.csv")).unwrap();
    assert_eq!(data.names(), r.observed.as_slice());

    let g = path(dir.path(), "g.json");
    ok(&[
        "discover",
        "--input",
        &format!("{reduced}.csv"),
        "--out",
        &g,
    ]);
    let direct = path(dir.path(), "direct.csv");
    let via_flag = path(dir.path(), "via_flag.csv");
    ok(&[
        "evaluate",
        "--graph",
        &g,
        "--truth",
        &format!("{reduced}.truth.json"),
        "--out",
        &direct,
    ]);
    ok(&[
        "evaluate",
        "--graph",
        &g,
        "--truth",
        &format!("{prefix}.truth.json"),
        "--omit",
        "2",
        "--seed",
        "4",
        "--out",
        &via_flag,
    ]);
    let (a, b) = (score_rows(&direct), score_rows(&via_flag));
    assert_eq!(a[0][1], "100");
    assert_eq!(a, b);
}

#[test]
fn bench_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "bench.csv");
    ok(&[
        "bench",
        "--trials",
        "1",
        "--sizes",
        "100",
        "--p",
        "5",
        "--common",
        "1",
        "--intermediate",
        "1",
        "--out",
        &out,
    ]);
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert!(header.contains(&"final_sweep_evaluations".to_string()));
    assert_eq!(rdr.records().count(), 2);
    let timing = fs::read_to_string(format!("{out}.timing.csv")).unwrap();
    assert_eq!(timing.lines().count(), 2);
    assert!(PathBuf::from(format!("{out}.manifest.json")).exists());
}

//! End-to-end runs of the `fjtl` binary.

use std::ffi::OsStr;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fjtl::{Graph, OpinionVector, TopicMatrixX, TopicMatrixY};
use serde_json::Value;
use tempfile::TempDir;

fn fjtl<S: AsRef<OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fjtl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json<S: AsRef<OsStr> + std::fmt::Debug>(args: &[S]) -> Value {
    let out = fjtl(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn num(v: &Value, path: &[&str]) -> f64 {
    path.iter()
        .fold(v, |acc, key| &acc[*key])
        .as_f64()
        .unwrap_or_else(|| panic!("missing {path:?}"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two users joined by one edge with opposite opinions and a single topic.
fn write_path2(dir: &Path) {
    fs::write(dir.join("g.txt"), "0 1 1\n").unwrap();
    fs::write(dir.join("s.txt"), "1\n-1\n").unwrap();
    fs::write(dir.join("x.tsv"), "1\n1\n").unwrap();
    fs::write(dir.join("y.tsv"), "0.5\t0.5\n").unwrap();
}

/// `--graph --opinions --x --y` pointing at `names` inside `dir`.
fn file_args(dir: &Path, names: [&str; 4]) -> Vec<String> {
    names
        .iter()
        .zip(["--graph", "--opinions", "--x", "--y"])
        .flat_map(|(f, flag)| [flag.to_string(), dir.join(f).display().to_string()])
        .collect()
}

#[test]
fn simulate_path_of_two_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    write_path2(tmp.path());
    let mut args = vec!["simulate".to_string(), "--c".into(), "0".into()];
    args.extend(file_args(tmp.path(), ["g.txt", "s.txt", "x.tsv", "y.tsv"]));
    let report = ok_json(&args);
    // (I + L)⁻¹ [1, −1] = [1/3, −1/3], so I = sᵀz = 2/3
    assert!((num(&report, &["graph_only", "index"]) - 2.0 / 3.0).abs() <= 1e-12);
    assert!((num(&report, &["graph_only", "polarization"]) - 2.0 / 9.0).abs() <= 1e-12);
    // no timeline edges when C = 0
    for key in ["polarization", "disagreement", "index"] {
        let a = num(&report, &["graph_only", key]);
        let b = num(&report, &["augmented", key]);
        assert!((a - b).abs() <= 1e-6, "{key}");
    }
    assert_eq!(report["schema_version"], 1);
}

#[test]
fn simulate_is_reproducible_and_reports_the_condition() {
    let args = [
        "simulate", "--n", "200", "--k", "5", "--c", "0.3", "--seed", "3",
    ];
    let a = fjtl(&args);
    let b = fjtl(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let report: Value = serde_json::from_slice(&a.stdout).unwrap();
    let cond = &report["spectral_condition"];
    assert!(cond["norm_estimate"].as_f64().unwrap() > 0.0);
    assert_eq!(
        cond["satisfied"].as_bool().unwrap(),
        cond["norm_estimate"].as_f64().unwrap() <= cond["threshold"].as_f64().unwrap()
    );
    let aug = num(&report, &["augmented", "index"]);
    let graph = num(&report, &["graph_only", "index"]);
    assert!(aug > 0.0 && graph > 0.0);
}

#[test]
fn synth_files_round_trip() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path().join("data");
    let manifest = ok_json(&[
        "synth",
        "--n",
        "250",
        "--k",
        "6",
        "--dist",
        "exponential",
        "--out",
        p(&dir),
    ]);
    assert_eq!(manifest["n"], 250);
    let g = Graph::read_edge_list(fs::read(dir.join("graph.txt")).unwrap().as_slice())
        .unwrap()
        .0;
    assert_eq!(g.n(), 250);
    assert!(g.is_connected());
    let s = OpinionVector::read(fs::read(dir.join("opinions.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(s.len(), 250);
    let x = TopicMatrixX::read(fs::read(dir.join("x.tsv")).unwrap().as_slice()).unwrap();
    assert!(x.is_row_stochastic());
    let y = TopicMatrixY::read(fs::read(dir.join("y.tsv")).unwrap().as_slice()).unwrap();
    assert_eq!((y.k(), y.n()), (6, 250));

    // the same seed reproduces every file byte for byte
    let again = tmp.path().join("again");
    ok_json(&[
        "synth",
        "--n",
        "250",
        "--k",
        "6",
        "--dist",
        "exponential",
        "--out",
        p(&again),
    ]);
    for f in [
        "graph.txt",
        "opinions.txt",
        "x.tsv",
        "y.tsv",
        "manifest.json",
    ] {
        assert_eq!(
            fs::read(dir.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }

    // files and on-the-fly synthesis describe the same instance
    let from_files = ok_json(&[
        "simulate",
        "--graph",
        p(&dir.join("graph.txt")),
        "--opinions",
        p(&dir.join("opinions.txt")),
        "--x",
        p(&dir.join("x.tsv")),
        "--y",
        p(&dir.join("y.tsv")),
    ]);
    let direct = ok_json(&[
        "simulate",
        "--n",
        "250",
        "--k",
        "6",
        "--dist",
        "exponential",
    ]);
    assert_eq!(from_files["augmented"], direct["augmented"]);
}

#[test]
fn zero_budget_leaves_objective_unchanged() {
    for algo in ["gdpm", "bl1", "bl2"] {
        let report = ok_json(&[
            "optimize", "--n", "150", "--k", "5", "--theta", "0", "--algo", algo,
        ]);
        assert_eq!(num(&report, &["reduction_ratio"]), 1.0, "{algo}");
    }
}

#[test]
fn optimize_outputs_are_reproducible() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        let out = fjtl(&[
            "optimize",
            "--n",
            "200",
            "--k",
            "6",
            "--c",
            "0.2",
            "--iters",
            "15",
            "--frozen-topics",
            "0,2",
            "--out",
            p(&dir),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        (out.stdout, dir)
    };
    let (a, da) = run("a");
    let (b, db) = run("b");
    assert_eq!(a, b);
    for f in ["report.json", "trace.csv", "x_best.tsv"] {
        assert_eq!(
            fs::read(da.join(f)).unwrap(),
            fs::read(db.join(f)).unwrap(),
            "{f}"
        );
    }
    let trace = fs::read_to_string(da.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,objective,grad_norm\n"));
    let timings: Value =
        serde_json::from_slice(&fs::read(da.join("timings.json")).unwrap()).unwrap();
    assert!(timings["total_seconds"].as_f64().unwrap() >= 0.0);

    // frozen columns are untouched
    let before = ok_json(&[
        "synth",
        "--n",
        "200",
        "--k",
        "6",
        "--out",
        p(&tmp.path().join("inst")),
    ]);
    assert_eq!(before["n"], 200);
    let x0 =
        TopicMatrixX::read(fs::read(tmp.path().join("inst/x.tsv")).unwrap().as_slice()).unwrap();
    let x1 = TopicMatrixX::read(fs::read(da.join("x_best.tsv")).unwrap().as_slice()).unwrap();
    for j in [0, 2] {
        assert_eq!(x0.matrix().column(j), x1.matrix().column(j));
    }
}

#[test]
fn seed_42_ordering_and_topic_analysis() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("data");
    ok_json(&[
        "synth",
        "--n",
        "1000",
        "--k",
        "20",
        "--dist",
        "polarized",
        "--seed",
        "42",
        "--out",
        p(&data),
    ]);
    let mut files = file_args(&data, ["graph.txt", "opinions.txt", "x.tsv", "y.tsv"]);
    files.extend(["--c".to_string(), "0.1".to_string()]);
    let with_files = |head: &[&str]| {
        let mut args: Vec<String> = head.iter().map(|s| s.to_string()).collect();
        args.extend(files.iter().cloned());
        ok_json(&args)
    };
    let ratio = |algo: &str, out: &Path| {
        let report = with_files(&[
            "optimize",
            "--theta",
            "0.1",
            "--algo",
            algo,
            "--out",
            p(out),
        ]);
        num(&report, &["reduction_ratio"])
    };
    let gd_dir = tmp.path().join("gdpm");
    let gdpm = ratio("gdpm", &gd_dir);
    let bl2 = ratio("bl2", &tmp.path().join("bl2"));
    let bl1 = ratio("bl1", &tmp.path().join("bl1"));
    assert!(gdpm < 1.0, "gdpm {gdpm}");
    assert!(
        gdpm <= bl2 && bl2 <= bl1 && bl1 <= 1.0,
        "{gdpm} {bl2} {bl1}"
    );

    let an_dir = tmp.path().join("analysis");
    let after = gd_dir.join("x_best.tsv");
    let report = with_files(&["analyze", "--after", p(&after), "--out", p(&an_dir)]);
    assert!(num(&report, &["delta_sum"]).abs() <= 1e-9 * 1000.0);
    assert!(num(&report, &["tau_delta_spearman"]) > 0.0);
    assert!(num(&report, &["tau_z_range_after"]) < num(&report, &["tau_z_range_before"]));
    let csv = fs::read_to_string(an_dir.join("topics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);

    // analysing the unchanged matrix reports no movement
    let unchanged = data.join("x.tsv");
    let report = with_files(&["analyze", "--after", p(&unchanged)]);
    for t in report["topics"].as_array().unwrap() {
        assert_eq!(t["delta"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn invalid_input_exits_with_status_two() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("missing.txt");
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--graph", p(&missing)],
        vec!["optimize", "--n", "50", "--theta", "1.5"],
        vec!["optimize", "--n", "50", "--c=-1"],
        vec!["optimize", "--n", "50", "--k", "4", "--frozen-topics", "9"],
        vec!["simulate"],
        vec!["bogus"],
    ];
    for args in cases {
        let out = fjtl(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    fs::write(tmp.path().join("bad.txt"), "0 1 1\n1 x 2\n").unwrap();
    let out = fjtl(&["simulate", "--graph", p(&tmp.path().join("bad.txt"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let args = ["simulate", "--n", "300", "--k", "5", "--c", "0.2"];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_fjtl"))
            .args(args)
            .env("FJTL_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert!(one.status.success() && four.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("zero").status.code(), Some(2));
}

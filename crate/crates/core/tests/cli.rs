//! Command-line behaviour: exit codes, artifacts, and flag validation.

use std::path::Path;
use std::process::{Command, Output};

fn swt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swt")).args(args).output().expect("failed to launch swt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().expect("temporary paths are UTF-8")
}

#[test]
fn problems_lists_every_builtin() {
    let o = swt(&["problems"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    for id in ["problem1", "problem2", "problem3", "problem4", "tanh_chirp"] {
        assert!(text.lines().any(|l| l.starts_with(id)), "{id} missing from:\n{text}");
    }
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(swt(&["propagate", "--bogus"]).status.code(), Some(1));
    assert_eq!(swt(&[]).status.code(), Some(1));
    assert_eq!(swt(&["transform", "--problem", "nope", "--epsilon", "1/8"]).status.code(), Some(1));
    assert_eq!(swt(&["transform", "--problem", "problem4"]).status.code(), Some(1), "ε is required");
    assert_eq!(swt(&["reference", "leapfrog", "--problem", "problem4", "--epsilon", "1/8"]).status.code(), Some(1));
    let o = swt(&["propagate", "--problem", "problem4", "--epsilon", "1/8", "--parallel-sweep"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(swt(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_rejects_threads() {
    let o = swt(&["bench", "--threads", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--threads"), "{}", stderr(&o));
}

#[test]
fn numeric_failures_exit_with_two_and_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    // The chirp does not decay at the edges of [0, 1], so no periodic reference exists.
    let o = swt(&["--out", path(dir.path()), "propagate", "--problem", "tanh_chirp", "--epsilon", "1/100"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "failed");
    assert_eq!(report["stage"], "reference");
    // An under-resolved explicit grid is a numeric failure too.
    let o = swt(&["transform", "--problem", "problem1", "--epsilon", "1/64", "--n-x", "256", "--n-k", "64"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn transform_writes_a_readable_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = swt(&["--out", path(dir.path()), "transform", "--problem", "problem4", "--epsilon", "1/8", "--csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let grid = swt::io::load_grid(&dir.path().join("swt.swtg")).unwrap();
    assert!(grid.is_smoothed());
    assert!(grid.min() >= -1e-9 * grid.max());
    let csv = std::fs::read_to_string(dir.path().join("swt.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), grid.values.len() + 1);

    let o = swt(&["--out", path(dir.path()), "transform", "--problem", "problem4", "--epsilon", "1/8", "--unsmoothed"]);
    assert_eq!(o.status.code(), Some(0));
    let wt = swt::io::load_grid(&dir.path().join("wt.swtg")).unwrap();
    assert!(!wt.is_smoothed() && wt.min() < -0.1 * wt.max());
}

#[test]
fn propagate_and_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = swt(&[
        "--out",
        path(dir.path()),
        "propagate",
        "--problem",
        "problem4",
        "--epsilon",
        "1/16",
        "--times",
        "0,0.05",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["reference"]["method"], "exact_free_gaussian");
    assert!(report["snapshots"][0]["error"]["l1_rel"].as_f64().unwrap() <= 1e-6);
    assert!(report["t_total_swt"].as_f64().unwrap() > 0.0);

    let (a, b) = (dir.path().join("density_swt_1.csv"), dir.path().join("density_ref_1.csv"));
    let o = swt(&["compare", path(&a), path(&a)]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    assert!(line.contains("l1_rel=0") && line.contains("mass_ratio=1"), "{line}");
    let o = swt(&["compare", path(&a), path(&b)]);
    assert_eq!(o.status.code(), Some(0));
    let l1: f64 =
        stdout(&o).split_whitespace().find_map(|t| t.strip_prefix("l1_rel=")).and_then(|v| v.parse().ok()).unwrap();
    assert!(l1 > 0.0 && l1 < 0.1, "{l1}");
}

#[test]
fn reference_subcommand_writes_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["splitstep", "cn", "exact"] {
        let out = dir.path().join(method);
        let o = swt(&[
            "--out",
            path(&out),
            "reference",
            method,
            "--problem",
            "problem4",
            "--epsilon",
            "1/8",
            "--times",
            "0,0.05",
        ]);
        assert_eq!(o.status.code(), Some(0), "{method}: {}", stderr(&o));
    }
    let name = |m: &str, file: &str| dir.path().join(m).join(file);
    let (u0, t0) = swt::io::load_snapshot(&name("splitstep", "splitstep_0.swtc")).unwrap();
    let (e0, _) = swt::io::load_snapshot(&name("exact", "exact_free_gaussian_0.swtc")).unwrap();
    assert_eq!(t0, 0.0);
    assert_eq!(u0.values, e0.values);
    let o = swt(&[
        "compare",
        path(&name("cn", "crank_nicolson_smoothed_density_1.csv")),
        path(&name("exact", "exact_free_gaussian_smoothed_density_1.csv")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn config_files_drive_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("packet.cfg");
    std::fs::write(
        &cfg,
        "[problem]\nic_type = gaussian_sum\nterms = 1,0,0\nV = 0\nepsilon = 1/32\nt_max = 0.05\n[grid]\nx_min = -4\nx_max = 4\n",
    )
    .unwrap();
    let o = swt(&["--config", path(&cfg), "--out", path(dir.path()), "propagate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    std::fs::write(&cfg, "[problem]\nic_type = gaussian_sum\nbogus = 1\n").unwrap();
    assert_eq!(swt(&["--config", path(&cfg), "propagate"]).status.code(), Some(1));
}

#[test]
fn bench_writes_table_with_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let o = swt(&[
        "--out",
        path(dir.path()),
        "--epsilons",
        "1/4,1/8,1/16,1/32",
        "bench",
        "--problem",
        "problem4",
        "--timing-reference",
        "splitstep",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    assert!(text.starts_with(&swt::harness::BENCH_COLUMNS.join(",")));
    let table = swt::harness::BenchTable::from_csv(&text).unwrap();
    assert_eq!(table.rows.len(), 4);
    assert!(text.contains("# slope_t_swt=") && text.contains("# slope_d="));
    assert_eq!(stdout(&o).lines().next(), text.lines().next());
}

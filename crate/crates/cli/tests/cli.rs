use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn superpac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_superpac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(path: &Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    path.display().to_string()
}

#[test]
fn synthetic_run_reaches_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = superpac(&[
        "active",
        "--preset",
        "synthetic-small",
        "--budget",
        "60",
        "--strategy",
        "superpac",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("queries,error,cost"));
    let last = lines.last().unwrap();
    assert_eq!(last.split(',').nth(1), Some("0.0"));
    for f in ["final_labels.csv", "report.json", "query_log.jsonl"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["final_error"], 0.0);
    assert!(report["queries_used"].as_u64().unwrap() <= 60 + 3);
}

#[test]
fn random_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut logs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = superpac(&[
            "active",
            "--preset",
            "synthetic-small",
            "--strategy",
            "random",
            "--budget",
            "30",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        logs.push(std::fs::read(out.join("query_log.jsonl")).unwrap());
    }
    assert_eq!(logs[0], logs[1]);
    assert_eq!(String::from_utf8_lossy(&logs[0]).lines().count(), 30);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("run.json"),
        r#"{"preset": "synthetic-small", "max_queries": 5, "strategy": "random", "seed": 1, "out": "from_config"}"#,
    );
    let o = superpac(&["active", "--config", &cfg, "--budget", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(dir.path().join("from_config/query_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 7);
}

#[test]
fn wrong_size_affinity_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let row = vec!["1.0"; 5].join(",");
    let aff = write(&dir.path().join("a.csv"), &format!("{}\n", vec![row; 5].join("\n")));
    let o = superpac(&[
        "active",
        "--preset",
        "synthetic-small",
        "--affinity",
        &aff,
        "--budget",
        "5",
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("150") && err.contains('5'), "{err}");
}

#[test]
fn config_errors_exit_two() {
    let o = superpac(&["active", "--preset", "synthetic-small", "--strategy", "greedy"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("greedy"));
    let o = superpac(&["active", "--preset", "nosuch"]);
    assert_eq!(o.status.code(), Some(2));
    let o = superpac(&["active"]);
    assert_eq!(o.status.code(), Some(2));
    let o = superpac(&["active", "--preset", "synthetic-small", "--strategy", "random", "--budget", "100000"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_prints_rates() {
    let dir = tempfile::tempdir().unwrap();
    let truth = write(&dir.path().join("t.csv"), "0\n0\n1\n1\n2\n2\n");
    let perm = write(&dir.path().join("p.csv"), "2\n2\n0\n0\n1\n1\n");
    let off = write(&dir.path().join("e.csv"), "1\n1\n0\n0\n0\n2\n");
    for (labels, expected) in [(&truth, "0.0"), (&perm, "0.0"), (&off, "0.166667")] {
        let o = superpac(&["eval", labels, &truth]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o).trim(), expected);
    }
    let short = write(&dir.path().join("s.csv"), "0\n1\n");
    assert_eq!(superpac(&["eval", &short, &truth]).status.code(), Some(3));
}

#[test]
fn thm1_summary_has_one_record_per_setting() {
    let dir = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = superpac(&["theory", "thm1", "--trials", "300", "--seed", "4", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        runs.push(std::fs::read_to_string(out.join("thm1.json")).unwrap());
        assert!(out.join("thm1.csv").exists());
    }
    assert_eq!(runs[0], runs[1]);
    let summary: Value = serde_json::from_str(&runs[0]).unwrap();
    let settings = summary["settings"].as_array().unwrap();
    assert_eq!(settings.len(), 4 * 3);
    let mut pairs: Vec<(u64, String)> = settings
        .iter()
        .map(|s| (s["ambient_dim"].as_u64().unwrap(), s["epsilon"].to_string()))
        .collect();
    pairs.sort();
    pairs.dedup();
    assert_eq!(pairs.len(), 12);
}

#[test]
fn cor1_runs_and_rejects_infeasible_angles() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c");
    let o = superpac(&["theory", "cor1", "--trials", "200", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("cor1.json")).unwrap()).unwrap();
    assert!(summary["frequency"].as_f64().unwrap() <= 1.0);
    // mean squared sine below the smallest angle's squared sine
    let o = superpac(&["theory", "cor1", "--phi1", "1.2", "--s", "0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("infeasible"));
}

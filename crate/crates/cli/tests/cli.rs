use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn copy_tree(from: &Path, to: &Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dst = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &dst);
        } else {
            std::fs::copy(entry.path(), dst).unwrap();
        }
    }
}

/// A private copy of the bundled data with its own working directory.
struct Sandbox {
    dir: tempfile::TempDir,
}

impl Sandbox {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        copy_tree(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"), &dir.path().join("data"));
        Self { dir }
    }

    fn work(&self) -> PathBuf {
        self.dir.path().join("work")
    }

    fn run(&self, args: &[&str]) -> Output {
        let config = self.dir.path().join("data/pipeline.toml");
        let work = self.work();
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cellmine"));
        cmd.args(args).env("RUST_LOG", "error");
        if args.first() != Some(&"predict") {
            cmd.arg("-c").arg(config).arg("--work").arg(work);
        }
        cmd.output().unwrap()
    }
}

fn reports(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn statuses(out: &Output) -> Vec<(String, String)> {
    reports(out)
        .iter()
        .map(|r| (r["stage"].as_str().unwrap().to_string(), r["status"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn pipeline_runs_then_skips_unchanged_stages() {
    let sb = Sandbox::new();
    let first = sb.run(&["pipeline"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(statuses(&first).len(), 7);
    assert!(statuses(&first).iter().all(|(_, s)| s == "ran"));

    let second = sb.run(&["pipeline"]);
    assert!(statuses(&second).iter().all(|(_, s)| s == "skipped"));

    // a new seed only touches the stages that read it
    let reseeded = sb.run(&["pipeline", "--seed", "7"]);
    let ran: Vec<String> = statuses(&reseeded).into_iter().filter(|(_, s)| s == "ran").map(|(n, _)| n).collect();
    assert_eq!(ran, ["train", "evaluate"]);
}

#[test]
fn predict_writes_one_row_per_feature_row() {
    let sb = Sandbox::new();
    assert!(sb.run(&["pipeline"]).status.success());
    let model = sb.work().join("models/initial_capacity_na_rf_42.json");
    let dataset = sb.work().join("features/initial_capacity_na.csv");
    let out = sb.run(&["predict", "--model", model.to_str().unwrap(), "--dataset", dataset.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rd = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(rd.headers().unwrap(), vec!["id", "pred"]);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    for r in &rows {
        assert!(r[0].contains('#'), "{r:?}");
        assert!(r[1].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn missing_stage_input_exits_three() {
    let sb = Sandbox::new();
    let out = sb.run(&["train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("initial_capacity_na.csv"));
}

#[test]
fn invalid_config_exits_two() {
    let sb = Sandbox::new();
    assert_eq!(sb.run(&["encode", "--target", "stability"]).status.code(), Some(2));
    assert_eq!(sb.run(&["encode", "--target", "stability", "--cycle", "150"]).status.code(), Some(2));
    assert_eq!(sb.run(&["pipeline", "--stages", "ingest,digest"]).status.code(), Some(2));
    assert_eq!(sb.run(&["train", "--model", "svm"]).status.code(), Some(2));
}

#[test]
fn stability_task_runs_end_to_end() {
    let sb = Sandbox::new();
    let out = sb.run(&["pipeline", "--target", "stability", "--cycle", "100", "--model", "gbm"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(sb.work().join("reports/stability_100_gbm_42.json")).unwrap())
            .unwrap();
    let confusion = report["confusion"].as_array().unwrap();
    let total: u64 = confusion.iter().flat_map(|r| r.as_array().unwrap()).map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, report["n"].as_u64().unwrap());
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn eicsr(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_eicsr"))
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "eicsr {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(args: &[&str]) -> String {
    String::from_utf8(eicsr(args).stdout).unwrap()
}

fn linear_csv(dir: &Path) -> PathBuf {
    let path = dir.join("linear.csv");
    let mut text = String::from("x1,x2,y\n");
    for i in 0..120 {
        let a = 1.0 + f64::from(i % 12) / 3.0;
        let b = 1.0 + f64::from(i / 12) / 2.5;
        text.push_str(&format!("{a},{b},{}\n", 2.0 * a + b));
    }
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn eval_text_and_json() {
    let dir = TempDir::new().unwrap();
    let csv = linear_csv(dir.path());
    let csv = csv.to_str().unwrap();
    let text = stdout(&["eval", "--formula", "(x1 + 1e100) - 1e100", "--data", csv, "--per-node"]);
    assert!(text.starts_with("eic 16.000000 (capped)"), "{text}");
    assert!(text.contains("/0"));

    let json: serde_json::Value =
        serde_json::from_str(&stdout(&["eval", "--formula", "x1 * x2 + x2", "--data", csv, "--json"])).unwrap();
    let eic = json["eic"].as_f64().unwrap();
    assert!((0.0..0.5).contains(&eic), "{eic}");
    assert!(json.get("per_node").is_none());

    let named: serde_json::Value =
        serde_json::from_str(&stdout(&["eval", "--formula", "x1 * x2", "--data", csv, "--json", "--per-node"]))
            .unwrap();
    assert_eq!(named["per_node"].as_array().unwrap().len(), 1);
}

#[test]
fn eval_reports_parse_errors() {
    let dir = TempDir::new().unwrap();
    let csv = linear_csv(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_eicsr"))
        .args(["eval", "--formula", "sin(", "--data", csv.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("byte 4"));
}

#[test]
fn search_writes_archive() {
    let dir = TempDir::new().unwrap();
    let csv = linear_csv(dir.path());
    let out = dir.path().join("gp.json");
    eicsr(&[
        "search",
        "--method",
        "gp",
        "--data",
        csv.to_str().unwrap(),
        "--budget",
        "10gen",
        "--population",
        "64",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(json["steps"], 10);
    let archive = json["archive"].as_array().unwrap();
    assert!(!archive.is_empty());
    for c in archive {
        for key in ["formula", "r2", "nmse", "complexity", "eic", "fitness"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
    }
    assert!(json["best"]["r2"].as_f64().unwrap() > 0.999);
}

#[test]
fn mcts_flags_are_accepted() {
    let dir = TempDir::new().unwrap();
    let csv = linear_csv(dir.path());
    let text = stdout(&[
        "search",
        "--method",
        "mcts",
        "--data",
        csv.to_str().unwrap(),
        "--budget",
        "200it",
        "--ucb-c",
        "0.5",
        "--max-children",
        "4",
        "--alpha",
        "0",
    ]);
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["alpha"], 0.0);
    assert_eq!(json["steps"], 200);
}

#[test]
fn gen_and_compare() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("raw.jsonl");
    let filtered = dir.path().join("filtered.jsonl");
    eicsr(&["gen", "--count", "60", "--vars", "2", "--seed", "3", "--out", raw.to_str().unwrap()]);
    eicsr(&[
        "gen",
        "--count",
        "60",
        "--vars",
        "2",
        "--seed",
        "3",
        "--filter-eic",
        "2.0",
        "--out",
        filtered.to_str().unwrap(),
    ]);
    let lines = std::fs::read_to_string(&filtered).unwrap();
    assert_eq!(lines.lines().count(), 60);
    for line in lines.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["eic"].as_f64().unwrap() <= 2.0);
        assert!(v["attempts"].as_u64().unwrap() >= 1);
        assert!(v["complexity"].as_u64().unwrap() >= 1);
        assert!(v["formula"].is_string());
    }
    let report: serde_json::Value = serde_json::from_str(&stdout(&[
        "compare",
        "--corpus",
        raw.to_str().unwrap(),
        "--corpus",
        filtered.to_str().unwrap(),
    ]))
    .unwrap();
    let corpora = report["corpora"].as_array().unwrap();
    assert_eq!(corpora.len(), 2);
    for c in corpora {
        for f in ["variables", "constants", "operators", "length"] {
            let js = c["js"][f].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&js));
        }
    }
    let csv = stdout(&["compare", "--corpus", raw.to_str().unwrap(), "--format", "csv", "--reference", raw.to_str().unwrap()]);
    let mut rows = csv.lines();
    assert_eq!(rows.next().unwrap(), "corpus,metric,variables,constants,operators,length");
    assert!(rows.next().unwrap().ends_with(",js,0,0,0,0"));
}

#[test]
fn bench_emits_json_and_csv() {
    let dir = TempDir::new().unwrap();
    let json_path = dir.path().join("report.json");
    let csv_path = dir.path().join("report.csv");
    eicsr(&[
        "bench",
        "--method",
        "mcts",
        "--alpha",
        "0.01",
        "--trials",
        "1",
        "--budget",
        "100it",
        "--seed",
        "2",
        "--out",
        json_path.to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert_eq!(report["runs"].as_array().unwrap().len(), 20);
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "problem,trial,method,alpha,noise_eta,r2,nmse,complexity,eic,runtime_s"
    );
    assert_eq!(csv.lines().count(), 21);
}

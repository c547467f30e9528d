use std::path::Path;
use std::process::{Command, Output};

fn alb(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_alb"));
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

const SMALL: &str = r#"
horizon = 200
seeds = [0, 1]
rank = 3

[environment]
kind = "gaussian"
n = 15
m = 20
k = 3

[policy]
name = "alb"
lambda = [0.01, 1.0]
sigma = 0.5
"#;

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn grid_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.toml", SMALL);
    let out = dir.path().join("out");
    let o = alb(&["grid", "--out", out.to_str().unwrap(), "--threads", "2"], Some(&cfg));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let steps = std::fs::read_to_string(out.join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 1 + 2 * 2 * 200);
    let grid = std::fs::read_to_string(out.join("grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 3);
    assert_eq!(grid.lines().filter(|l| l.ends_with(",true")).count(), 1);
    assert_eq!(std::fs::read_dir(out.join("meta")).unwrap().count(), 4);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("meta/alb-p0-k3-s0.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["horizon"], 200);
    assert_eq!(meta["library_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn seed_override_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", &SMALL.replace("lambda = [0.01, 1.0]", "lambda = 0.01"));
    let out = dir.path().join("out");
    let o = alb(&["run", "--seed", "7", "--out", out.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success());
    let steps = std::fs::read_to_string(out.join("steps.csv")).unwrap();
    assert_eq!(steps.lines().count(), 201);
    assert!(steps.lines().skip(1).all(|l| l.starts_with("alb-p0-k3-s7,alb,7,")));
}

#[test]
fn run_rejects_multi_point_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.toml", SMALL);
    let o = alb(&["run", "--out", dir.path().join("o").to_str().unwrap()], Some(&cfg));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn rank_sweep_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.toml", &SMALL.replace("lambda = [0.01, 1.0]", "lambda = 0.01"));
    let out = dir.path().join("out");
    let o = alb(&["rank-sweep", "--ranks", "2,3,4", "--out", out.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(out.join("rank_sweep.csv")).unwrap();
    let ranks: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ranks, ["2", "3", "4"]);
    assert_eq!(std::fs::read_dir(out.join("meta")).unwrap().count(), 6);
    let o = alb(&["rank-sweep", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn budget_refusal_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grid.toml", SMALL);
    let out = dir.path().join("never");
    let o = alb(&["grid", "--budget", "799", "--out", out.to_str().unwrap()], Some(&cfg));
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("800"));
    assert!(!out.exists());
    let o = alb(&["grid", "--budget", "800", "--out", out.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success());
}

#[test]
fn config_error_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &SMALL.replace("horizon = 200", "horizon = \"long\""));
    assert_eq!(alb(&["grid"], Some(&cfg)).status.code(), Some(2));
    assert_eq!(alb(&["grid"], Some(&dir.path().join("missing.toml"))).status.code(), Some(2));
}

#[test]
fn ingestion_error_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "u.data", "1\t2\tfive\t0\n");
    let o = alb(&["ingest-check", "--path", data.to_str().unwrap(), "--format", "movielens"], None);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("u.data:1:"));
    let empty = write(dir.path(), "empty.data", "");
    let o = alb(&["ingest-check", "--path", empty.to_str().unwrap(), "--format", "movielens"], None);
    assert_eq!(o.status.code(), Some(3));

    let replay = SMALL
        .replace("kind = \"gaussian\"\nn = 15\nm = 20\nk = 3", &format!("kind = \"replay\"\ndataset = \"movielens\"\npath = {:?}", data))
        .replace("lambda = [0.01, 1.0]", "lambda = 1.0");
    let cfg = write(dir.path(), "replay.toml", &replay);
    assert_eq!(alb(&["grid"], Some(&cfg)).status.code(), Some(3));
}

#[test]
fn ingest_check_summary() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "u.data", "1\t10\t4\t0\n1\t11\t2\t0\n2\t10\t5\t0\n");
    let o = alb(&["ingest-check", "--path", data.to_str().unwrap(), "--format", "movielens"], None);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("triples\t3"));
    assert!(text.contains("users\t2"));
    assert!(text.contains("items\t2"));
    assert!(text.contains("sha256\t"));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = alb_core::harness::ExperimentConfig::load(&path)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(cfg.horizon, 25_000);
            seen += 1;
        }
    }
    assert_eq!(seen, 7);
}

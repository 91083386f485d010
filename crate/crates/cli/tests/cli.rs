//! End-to-end runs of the `swanmech` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn swanmech(args: &[&str], config: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_swanmech"));
    cmd.arg(args[0])
        .arg("--config")
        .arg(config)
        .args(&args[1..]);
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

/// One type of two clients, `d = 10`, `γ² = 1`, `σ² = 0`, `U = 1/ε`:
/// `ε(1) = 0.1`, `ε(2) = 0.05`.
fn pair(cost: f64, eps_req: &str) -> String {
    format!(
        "feature_dim = 10\ndata_variance = 1.0\nclient_variance = 0.0\neps_req = {eps_req}\n\
         utility = {{ kind = \"power\", scale = 1.0, exponent = 1.0 }}\n\n\
         [[types]]\ndata_size = 100\ncost = {cost}\npopulation = 2\n"
    )
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn pair_solve_matches_hand_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    // W(1) = 2·10 − 6 = 14, W(2) = 2·20 − 12 = 28.
    let cheap = write_config(dir.path(), "cheap.toml", &pair(6.0, "inf"));
    let r = json(&swanmech(&["solve"], &cheap));
    assert_eq!(r["solve"]["k_star"], serde_json::json!([2]));
    assert_eq!(r["solve"]["b_star"], serde_json::json!([0]));
    assert_eq!(r["solve"]["w_star"].as_f64(), Some(28.0));
    assert_eq!(r["solve"]["eps_star"].as_f64(), Some(0.05));
    assert_eq!(r["eps_min"].as_f64(), Some(0.05));
    assert_eq!(r["bruteforce_agrees"], Value::Bool(true));

    // W(1) = 20 − 25 < 0 and W(2) = 40 − 50 < 0: nobody trains.
    let dear = write_config(dir.path(), "dear.toml", &pair(25.0, "inf"));
    let r = json(&swanmech(&["solve"], &dear));
    assert_eq!(r["solve"]["k_star"], serde_json::json!([0]));
    assert_eq!(r["solve"]["w_star"].as_f64(), Some(0.0));
    assert_eq!(r["solve"]["eps_star"], Value::String("inf".into()));
}

#[test]
fn oracle_lists_every_state() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.toml", &pair(6.0, "0.08"));
    let out = swanmech(&["oracle"], &cfg);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        [
            "k_1,eps,welfare_mots,feasible",
            "0,inf,0,false",
            "1,0.1,14,false",
            "2,0.05,28,true"
        ]
    );
}

#[test]
fn equilibrium_under_swan_reaches_the_pair_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "pair.toml", &pair(6.0, "inf"));
    let trace = dir.path().join("trace.csv");
    let out = swanmech(&["equilibrium", "--trace", trace.to_str().unwrap()], &cfg);
    let r = json(&out);
    assert_eq!(r["converged"], Value::Bool(true));
    assert_eq!(r["nash_verified"], Value::Bool(true));
    assert_eq!(r["reached_k_star"], Value::Bool(true));
    assert_eq!(r["welfare"]["platform_cost"].as_f64(), Some(0.0));
    let rows = std::fs::read_to_string(trace).unwrap();
    assert!(rows.starts_with("round,client_id,type,old_strategy,new_strategy,potential_value"));
    assert_eq!(rows.lines().count(), 3);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = tempfile::tempdir().unwrap();
    let broken = write_config(dir.path(), "broken.toml", "feature_dim = 10\n");
    assert_eq!(swanmech(&["solve"], &broken).status.code(), Some(1));
    let missing = dir.path().join("absent.toml");
    assert_eq!(swanmech(&["solve"], &missing).status.code(), Some(1));

    // ε_min = 0.05 for the pair.
    let strict = write_config(dir.path(), "strict.toml", &pair(6.0, "0.01"));
    let out = swanmech(&["solve"], &strict);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("swanmech:"));

    // One round cannot both move and confirm a quiet pass.
    let mut mnist = std::fs::read_to_string(repo_root().join("configs/mnist.toml")).unwrap();
    mnist = mnist.replacen("client_variance", "max_rounds = 1\nclient_variance", 1);
    let short = write_config(dir.path(), "short.toml", &mnist);
    assert_eq!(swanmech(&["equilibrium"], &short).status.code(), Some(3));
}

#[test]
fn sweep_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_root().join("configs/cifar10.toml");
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(swanmech(&["sweep", "--out", a.to_str().unwrap()], &cfg)
        .status
        .success());
    assert!(swanmech(&["sweep", "--out", b.to_str().unwrap()], &cfg)
        .status
        .success());
    let first = std::fs::read(&a).unwrap();
    assert_eq!(first, std::fs::read(&b).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("variable,value,mechanism,seed,status,"));
    assert!(text.lines().skip(1).all(|l| l.starts_with("eps_req,")));
}

#[test]
fn regions_default_to_the_optimum() {
    let cfg = repo_root().join("configs/mnist.toml");
    let r = json(&swanmech(&["regions", "--scan"], &cfg));
    assert_eq!(r["state"], serde_json::json!([0, 5, 5]));
    let types = r["types"].as_array().unwrap();
    assert_eq!(types.len(), 3);
    assert_eq!(types[0]["scan"].as_array().unwrap().len(), 11);
}

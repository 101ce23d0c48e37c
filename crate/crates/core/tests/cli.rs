use std::path::Path;
use std::process::{Command, Output};

use sgim_core::config::Config;

fn sgim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn small_config(dir: &Path) -> String {
    let config = Config {
        iterations: 40,
        eval_every: 20,
        testbench_per_subspace: 10,
        choice_window: 10,
        ..Config::default()
    };
    let path = dir.join("small.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_analyze_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("runs");
    let out_s = out.to_str().unwrap();
    let stdout = ok(&sgim(&[
        "run", "--config", &cfg, "--output", out_s, "--seeds", "1-2", "--variants", "SGIM-PB,RandomAction",
    ]));
    assert_eq!(stdout.lines().count(), 5, "{stdout}");
    assert!(out.join("RandomAction_seed2/summary.json").exists());

    let aggregate = std::fs::read(out.join("aggregate.csv")).unwrap();
    let finals = std::fs::read(out.join("final.csv")).unwrap();
    ok(&sgim(&["analyze", out_s]));
    assert_eq!(std::fs::read(out.join("aggregate.csv")).unwrap(), aggregate);
    assert_eq!(std::fs::read(out.join("final.csv")).unwrap(), finals);

    let eval = ok(&sgim(&["evaluate", out.join("SGIM-PB_seed1").to_str().unwrap()]));
    let snap: serde_json::Value = serde_json::from_str(&eval).unwrap();
    assert_eq!(snap["iteration"], 40);

    let lump = tmp.path().join("lump.jsonl");
    let msg = ok(&sgim(&[
        "gen-transfer-lump",
        "--from",
        out.join("SGIM-PB_seed1").to_str().unwrap(),
        "--out",
        lump.to_str().unwrap(),
    ]));
    assert!(msg.starts_with("wrote "));
    assert!(lump.exists());
}

#[test]
fn gen_teachers_writes_demonstrations() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("demos.jsonl");
    let msg = ok(&sgim(&["gen-teachers", "--profile", "simulation", "--out", path.to_str().unwrap()]));
    let lines = std::fs::read_to_string(&path).unwrap().lines().count();
    assert!(msg.contains(&format!("wrote {lines} demonstrations")));
}

#[test]
fn bad_arguments_fail_cleanly() {
    let out = sgim(&["run", "--variants", "SGIM-ZZ"]);
    assert!(!out.status.success());
    let out = sgim(&["run", "--seeds", "5-1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed range"));
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "eval_every = 0\n").unwrap();
    let out = sgim(&["run", "--config", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("eval_every"));
}

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_magrelax");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).expect("error JSON on stderr");
    serde_json::from_str(line).expect("valid error JSON")
}

const FORCED_2D: &str = r#"
[grid]
d = 2
n = 16
[physics]
kappa = 0.5
[time]
T = 0.1
dt = 0.01
[forcing]
preset = "power_law"
J = 2
seed = 4
[output]
stride = 2
"#;

#[test]
fn unknown_subcommand_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["frobnicate"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(stderr_json(&o)["error"], "usage");
}

#[test]
fn invalid_config_lists_every_violation() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("bad.toml"),
        "[grid]\nd = 2\nn = 16\n[physics]\ngamma = 1.0\nfoo = 1\n",
    )
    .unwrap();
    let o = run(tmp.path(), &["--config", "bad.toml", "simulate"]);
    assert_eq!(code(&o), 2);
    let j = stderr_json(&o);
    assert_eq!(j["error"], "config");
    let details = j["details"].as_array().unwrap();
    assert_eq!(details.len(), 2, "{details:?}");
}

#[test]
fn simulate_writes_ndjson_and_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), FORCED_2D).unwrap();
    let o = run(tmp.path(), &["--config", "c.toml", "--out", "r", "--quiet", "simulate"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(tmp.path().join("r/diagnostics.ndjson")).unwrap();
    let keys = ["t", "E", "gradE", "uHg", "H", "M", "curlBB", "mhs_res", "casimirs"];
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    for line in lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let obj = v.as_object().unwrap();
        assert_eq!(obj.len(), keys.len());
        for k in keys {
            assert!(obj.contains_key(k), "missing {k}");
        }
        assert!(obj["H"].is_null() && obj["curlBB"].is_null());
    }
    assert!(tmp.path().join("r/final.bin").exists());
    assert!(tmp.path().join("r/checkpoint/meta.json").exists());
}

#[test]
fn seed_override_changes_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("c.toml"), FORCED_2D).unwrap();
    for (out, seed) in [("a", "4"), ("b", "4"), ("c", "5")] {
        let o = run(tmp.path(), &["--config", "c.toml", "--seed", seed, "--out", out, "--quiet", "simulate"]);
        assert_eq!(code(&o), 0);
    }
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("final.bin")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn resumed_run_is_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("full.toml"), FORCED_2D).unwrap();
    std::fs::write(tmp.path().join("half.toml"), FORCED_2D.replace("T = 0.1", "T = 0.05")).unwrap();
    assert_eq!(code(&run(tmp.path(), &["--config", "full.toml", "--out", "full", "--quiet", "simulate"])), 0);
    assert_eq!(code(&run(tmp.path(), &["--config", "half.toml", "--out", "half", "--quiet", "simulate"])), 0);
    let o = run(
        tmp.path(),
        &["--config", "full.toml", "--out", "resumed", "--quiet", "checkpoint-resume", "--from", "half/checkpoint"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let a = std::fs::read(tmp.path().join("full/final.bin")).unwrap();
    let b = std::fs::read(tmp.path().join("resumed/final.bin")).unwrap();
    assert_eq!(a, b);

    // a checkpoint from different dynamics is refused
    std::fs::write(tmp.path().join("other.toml"), FORCED_2D.replace("kappa = 0.5", "kappa = 0.25")).unwrap();
    let o = run(
        tmp.path(),
        &["--config", "other.toml", "--out", "x", "--quiet", "checkpoint-resume", "--from", "half/checkpoint"],
    );
    assert_eq!(code(&o), 2);
}

#[test]
fn basis_lists_shells() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["basis", "--d", "2", "--lambda-max", "2"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8_lossy(&o.stdout).to_string();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,k,lambda,tau,branch,polarization"));
    assert_eq!(lines.count(), 8);
    let o = run(tmp.path(), &["--out", "m", "basis", "--d", "3", "--lambda-max", "1", "--snapshots"]);
    assert_eq!(code(&o), 0);
    let rows: Vec<Vec<String>> = String::from_utf8_lossy(&o.stdout)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows.iter().filter(|r| r[3].parse::<f64>().ok() == Some(1.0)).count(), 6);
    assert!(tmp.path().join("m/mode_0012.bin").exists());
    let o = run(tmp.path(), &["diagnose", "m/mode_0001.bin"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["E"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(code(&run(tmp.path(), &["basis"])), 2);
}

#[test]
fn diagnose_rejects_cross_dimension_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg3 = "[grid]\nd = 3\nn = 8\n[initial]\nkind = \"abc\"\n[time]\nT = 0.02\ndt = 0.01\n";
    std::fs::write(tmp.path().join("c3.toml"), cfg3).unwrap();
    std::fs::write(tmp.path().join("c2.toml"), FORCED_2D).unwrap();
    assert_eq!(code(&run(tmp.path(), &["--config", "c3.toml", "--out", "r3", "--quiet", "simulate"])), 0);
    let o = run(tmp.path(), &["diagnose", "r3/final.bin"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["M"].is_null() && v["H"].as_f64().unwrap() > 0.0);
    let o = run(tmp.path(), &["--config", "c2.toml", "diagnose", "r3/final.bin"]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_json(&o)["error"], "grid");
}

#[test]
fn deterministic_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[grid]
d = 2
n = 16
[initial]
kind = "kolmogorov"
modes = [{ k = [1, 1], branch = "cos", amplitude = 0.1 }]
[time]
T = 0.5
dt = 0.005
scheme = "if_rk4"
"#;
    std::fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = run(tmp.path(), &["--config", "c.toml", "--out", "r", "--quiet", "simulate", "--check"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn blow_up_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[grid]
d = 2
n = 16
[initial]
kind = "kolmogorov"
amplitude = 50.0
modes = [{ k = [1, 1], branch = "cos", amplitude = 50.0 }, { k = [2, 1], branch = "sin", amplitude = 50.0 }]
[time]
T = 20.0
dt = 0.5
"#;
    std::fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = run(tmp.path(), &["--config", "c.toml", "--out", "r", "--quiet", "simulate"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stderr_json(&o)["error"], "blow_up");
}

#[test]
fn sweep_check_reports_0_or_4() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = r#"
[grid]
d = 2
n = 16
[time]
dt = 0.02
[forcing]
preset = "power_law"
J = 2
seed = 1
[ensemble]
trajectories = 2
burn_in = 0.2
sample_stride = 2
[sweep]
kappas = [0.5, 0.25, 0.125]
sample_factor = 0.02
"#;
    std::fs::write(tmp.path().join("c.toml"), cfg).unwrap();
    let o = run(tmp.path(), &["--config", "c.toml", "--out", "s", "--quiet", "sweep", "--check"]);
    let c = code(&o);
    assert!(c == 0 || c == 4, "exit {c}: {}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(tmp.path().join("s/sweep.json").exists());
}

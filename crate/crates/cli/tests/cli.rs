use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemostat-rl"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = bin(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

const TINY: &str = r#"
schema_version = 1
case = 3

[simulation]
n_steps = 4

[training]
n_mc = 4
max_epochs = 3
"#;

#[test]
fn printed_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&["config", "--case", "2"], dir.path());
    fs::write(dir.path().join("c2.toml"), &text).unwrap();
    let out = ok(
        &["experiment", "--config", "c2.toml", "--dry-run", "--out", "d"],
        dir.path(),
    );
    assert!(out.contains("phi_0.5/1_sr_1_tr_beta_27"));
    assert!(out.contains("phi_0.7/qc"));
    assert!(dir.path().join("d/manifest.json").exists());
}

#[test]
fn experiment_rerun_verify_and_tools() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("tiny.toml"), TINY).unwrap();
    ok(
        &["experiment", "--config", "tiny.toml", "--workers", "1", "--out", "a"],
        p,
    );
    for f in [
        "a/rank_table.csv",
        "a/b1_3_b2_4/qc/returns.csv",
        "a/b1_3_b2_4/qc/disturbances.csv",
    ] {
        assert!(p.join(f).exists(), "{f}");
    }

    let out = ok(
        &[
            "experiment",
            "--manifest",
            "a/manifest.json",
            "--verify",
            "--workers",
            "2",
            "--out",
            "b",
        ],
        p,
    );
    assert!(out.contains("all CSV artifacts match"));

    // A different seed must not verify.
    let bad = bin(
        &[
            "experiment",
            "--manifest",
            "a/manifest.json",
            "--verify",
            "--seed",
            "9",
            "--out",
            "c",
        ],
        p,
    );
    assert!(!bad.status.success());

    let ev = ok(&["evaluate", "a/b1_3_b2_4/qc"], p);
    let v: serde_json::Value = serde_json::from_str(&ev).unwrap();
    assert_eq!(v["episodes"], 4);

    let rank = ok(&["rank", "a", "--out", "ranked.csv"], p);
    assert!(rank.contains("b1_3_b2_4/qc"));
    assert_eq!(
        fs::read_to_string(p.join("ranked.csv")).unwrap(),
        fs::read_to_string(p.join("a/rank_table.csv")).unwrap()
    );
}

#[test]
fn train_requires_a_scenario_when_ambiguous() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("tiny.toml"), TINY).unwrap();
    let out = bin(&["train", "--config", "tiny.toml", "--out", "t"], p);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--scenario"));
    ok(
        &[
            "train",
            "--config",
            "tiny.toml",
            "--scenario",
            "b1_3_b2_4/qc",
            "--out",
            "t",
        ],
        p,
    );
    assert!(p.join("t/b1_3_b2_4/qc/checkpoint_best.json").exists());
}

#[test]
fn simulate_open_loop() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("u.csv"), "I1,I2\n0,0\n5,5\n10.5,13.4\n").unwrap();
    ok(&["simulate", "--case", "1", "--actions", "u.csv", "--out", "x.csv"], p);
    let text = fs::read_to_string(p.join("x.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("t,g,b1,b2,a1,a2"));
}

#[test]
fn bad_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(
        p.join("bad.toml"),
        "schema_version = 1\ncase = 1\n[uncertainty]\nrelative_std = 0.07\n",
    )
    .unwrap();
    let out = bin(&["experiment", "--config", "bad.toml", "--dry-run"], p);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("uncertainty"));
}

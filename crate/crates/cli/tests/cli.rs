use std::path::Path;
use std::process::{Command, Output};

fn spectrum(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spectrum")).args(args).current_dir(cwd).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(path: impl AsRef<Path>) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn lists_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = spectrum(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["fig2-small-drm", "fig3-dynamic-drm", "fig5-small-nbrf", "fig6-dynamic-nbrf", "cycle-demo"] {
        assert!(text.lines().any(|l| l == name), "{name} missing");
    }
}

#[test]
fn run_is_deterministic_across_processes() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let status = spectrum(
            &["run", "--preset", "fig2-small-drm", "--trials", "5", "--max-iters", "40", "--seed", "9", "--out", out],
            dir.path(),
        );
        assert!(status.status.success(), "{}", stderr(&status));
    }
    for file in ["trajectories.csv", "aggregate.csv", "reference.json", "manifest.json"] {
        assert!(read(dir.path().join("a").join(file)) == read(dir.path().join("b").join(file)), "{file} differs");
    }
    let manifest: serde_json::Value = serde_json::from_slice(&read(dir.path().join("a/manifest.json"))).unwrap();
    assert_eq!(manifest["root_seed"], 9);
    assert_eq!(manifest["trials"].as_array().unwrap().len(), 5);
}

#[test]
fn different_seeds_give_different_runs() {
    let dir = tempfile::tempdir().unwrap();
    for (seed, out) in [("1", "a"), ("2", "b")] {
        let status = spectrum(
            &["run", "--preset", "fig5-small-nbrf", "--trials", "2", "--max-iters", "30", "--seed", seed, "--out", out],
            dir.path(),
        );
        assert!(status.status.success(), "{}", stderr(&status));
    }
    assert!(read(dir.path().join("a/trajectories.csv")) != read(dir.path().join("b/trajectories.csv")));
}

#[test]
fn invalid_configs_exit_with_status_2_and_a_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = spectrum(&["run", "--preset", "fig2-small-drm", "--trials", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("error: trials:"), "{}", stderr(&out));

    let config = dir.path().join("bad.json");
    let text = String::from_utf8(read(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets/fig2-small-drm.json")))
        .unwrap()
        .replace(r#""num_channels": 2"#, r#""num_channels": "two""#);
    std::fs::write(&config, text).unwrap();
    let out = spectrum(&["run", "--config", config.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("instance.num_channels"), "{}", stderr(&out));

    let out = spectrum(&["run", "--preset", "no-such-preset"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("preset"));
}

#[test]
fn runtime_failures_exit_with_status_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = spectrum(&["run", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn cycle_demo_closes_the_loop() {
    let dir = tempfile::tempdir().unwrap();
    let out = spectrum(&["cycle-demo", "--out", "cycle"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("rate 1 -> 1.25")).count(), 4);
    let transcript: serde_json::Value =
        serde_json::from_slice(&read(dir.path().join("cycle/cycle_demo.json"))).unwrap();
    assert_eq!(transcript["returns_to_start"], true);
    assert_eq!(transcript["moves"].as_array().unwrap().len(), 4);
}

#[test]
fn oracle_writes_the_exhaustive_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let out = spectrum(&["oracle", "--preset", "fig5-small-nbrf", "--out", "o"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&read(dir.path().join("o/oracle.json"))).unwrap();
    assert_eq!(report["search_size"], 1024);
    assert_eq!(report["kind"], "sum-log-rate");
}

#[test]
fn efficiency_sweep_reports_every_pair() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        spectrum(&["efficiency", "--channels", "2", "--degrees", "1,2,3", "--trials", "3", "--out", "e"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = String::from_utf8(read(dir.path().join("e/efficiency.csv"))).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "K,degree,eta,min_ratio,mean_ratio,note");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("2,1,2.0000000000000000e0,"));
    assert!(rows[2].contains("skipped"), "degree 2 with K=2 is outside the regime: {}", rows[2]);
}

#[test]
fn gibbs_check_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = spectrum(&["gibbs-check", "--steps", "200000", "--out", "g"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&read(dir.path().join("g/gibbs.json"))).unwrap();
    assert!(report["total_variation"].as_f64().unwrap() < 0.05);
    let total: f64 = report["profiles"].as_array().unwrap().iter().map(|r| r["stationary"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

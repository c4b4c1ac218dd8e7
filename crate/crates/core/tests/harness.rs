use std::collections::{BTreeMap, HashSet};

use spectrum_games::harness::{
    preset, run_experiment, write_outputs, ExperimentConfig, AGGREGATE_FILE, MANIFEST_FILE, TRAJECTORY_FILE,
};
use spectrum_games::network::sum_log_rate;
use spectrum_games::oracle::exhaustive_drm_nep_enumeration;
use spectrum_games::seed::trial_seed;
use spectrum_games::Error;

fn small_run(name: &str, trials: u64, max_iters: u64) -> ExperimentConfig {
    let mut config = preset(name).unwrap();
    config.trials = trials;
    config.max_iters = max_iters;
    config
}

fn parse(field: &str) -> f64 {
    field.parse().unwrap()
}

#[test]
fn aggregate_csv_equals_means_recomputed_from_trajectories() {
    for name in ["fig3-dynamic-drm", "fig5-small-nbrf"] {
        let config = small_run(name, 4, 150);
        let result = run_experiment(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&result, dir.path()).unwrap();

        // (trial, iter) -> per-user rates
        let mut steps: BTreeMap<(u64, usize), Vec<f64>> = BTreeMap::new();
        let text = std::fs::read_to_string(dir.path().join(TRAJECTORY_FILE)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("trial,iter,user,channel_set,attempt_prob,expected_rate"));
        for line in lines {
            let f: Vec<&str> = line.split(',').collect();
            steps.entry((f[0].parse().unwrap(), f[1].parse().unwrap())).or_default().push(parse(f[5]));
        }
        let last: BTreeMap<u64, usize> = steps.keys().fold(BTreeMap::new(), |mut acc, &(t, i)| {
            acc.insert(t, i.max(*acc.get(&t).unwrap_or(&0)));
            acc
        });

        let text = std::fs::read_to_string(dir.path().join(AGGREGATE_FILE)).unwrap();
        let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(parse).collect()).collect();
        let longest = *last.values().max().unwrap();
        assert_eq!(rows.len(), longest + 1);
        for row in &rows {
            let iter = row[0] as usize;
            let (mut rate, mut log) = (0.0, 0.0);
            for (&trial, &end) in &last {
                let rates = &steps[&(trial, iter.min(end))];
                rate += rates.iter().sum::<f64>() / rates.len() as f64;
                log += rates.iter().map(|r| r.ln()).sum::<f64>();
            }
            let trials = last.len() as f64;
            assert!((row[1] - rate / trials).abs() <= 1e-12 * row[1].abs(), "{name} iter {iter} mean rate");
            assert!((row[2] - log / trials).abs() <= 1e-12 * row[2].abs().max(1.0), "{name} iter {iter} sum log");
            assert!((0.0..=1.0).contains(&row[3]));
        }
    }
}

#[test]
fn small_drm_trials_end_at_enumerated_equilibria() {
    let config = preset("fig2-small-drm").unwrap();
    let result = run_experiment(&config).unwrap();
    let instance = &result.built.instance;
    let neps: HashSet<_> = exhaustive_drm_nep_enumeration(instance).unwrap().iter().map(|p| p.key()).collect();
    let optimum = result.reference.as_ref().unwrap().optimum_sum_log_rate;
    let mut at_optimum = 0;
    for t in &result.trials {
        let last = t.trajectory.final_profile();
        assert!(neps.contains(&last.key()), "trial {} ends off equilibrium", t.trial);
        if (sum_log_rate(last, instance) - optimum).abs() <= 1e-6 {
            at_optimum += 1;
        }
    }
    assert!(at_optimum > result.trials.len() / 2, "{at_optimum} of {} at the optimum", result.trials.len());
}

#[test]
fn manifest_records_seeds_and_files() {
    let mut config = small_run("fig2-small-drm", 3, 20);
    config.seed = 77;
    let result = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = write_outputs(&result, dir.path()).unwrap();
    assert_eq!(written.len(), 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["root_seed"], 77);
    for (i, t) in manifest["trials"].as_array().unwrap().iter().enumerate() {
        assert_eq!(t["seed"].as_u64().unwrap(), trial_seed(77, i as u64));
    }
    let again = ExperimentConfig::from_json(&manifest["config"].to_string()).unwrap();
    assert_eq!(again, config);
}

#[test]
fn dynamic_presets_grow_the_population_on_schedule() {
    let result = run_experiment(&small_run("fig6-dynamic-nbrf", 2, 450)).unwrap();
    for t in &result.trials {
        let size_at = |time: u64| t.trajectory.steps.iter().find(|s| s.time == time).unwrap().profile.len();
        assert_eq!(size_at(199), 40);
        assert_eq!(size_at(200), 43);
        assert_eq!(size_at(400), 50);
    }
}

#[test]
fn oracle_runs_refuse_population_events() {
    let mut config = small_run("fig3-dynamic-drm", 1, 10);
    config.oracle = true;
    assert!(run_experiment(&config).is_err());
}

#[test]
fn naive_baseline_never_settles() {
    let mut value: serde_json::Value = serde_json::from_str(&preset("fig2-small-drm").unwrap().to_json()).unwrap();
    value["algorithm"] = serde_json::json!({ "kind": "naive", "attempt": "fair" });
    value["oracle"] = serde_json::json!(false);
    value["trials"] = serde_json::json!(3);
    value["max_iters"] = serde_json::json!(25);
    let config = ExperimentConfig::from_json(&value.to_string()).unwrap();
    let result = run_experiment(&config).unwrap();
    assert!(result.trials.iter().all(|t| t.trajectory.len() == 26));
}

#[test]
fn config_errors_name_the_offending_field() {
    let base: serde_json::Value = serde_json::from_str(&preset("fig2-small-drm").unwrap().to_json()).unwrap();
    let cases = [
        ("/trials", serde_json::json!(0), "trials"),
        ("/instance/num_channels", serde_json::json!("two"), "instance.num_channels"),
        ("/instance/utility/value", serde_json::json!([1]), "instance.utility.value"),
        ("/algorithm/estimator/window", serde_json::json!(-3), "algorithm.estimator.window"),
    ];
    for (pointer, bad, want) in cases {
        let mut value = base.clone();
        *value.pointer_mut(pointer).unwrap() = bad;
        match ExperimentConfig::from_json(&value.to_string()) {
            Err(e @ Error::Config { .. }) => {
                assert!(e.is_validation());
                let Error::Config { path, .. } = e else { unreachable!() };
                assert_eq!(path, want);
            }
            other => panic!("{pointer}: {other:?}"),
        }
    }
}

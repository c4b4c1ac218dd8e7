//! Monte Carlo orchestration and result files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgorithmSpec, BuiltInstance, ExperimentConfig, NaiveAttempt};
use crate::dynamics::{
    drive, run_better_response_replay, run_br_drm_with, run_nbrf_with, BrDrmSettings, Learner, NbrfSettings, NewUser,
    Termination, Trajectory,
};
use crate::network::generate::random_channel_set;
use crate::network::{count_on_channel, Instance, Strategy, StrategyProfile};
use crate::oracle::{exhaustive_sum_log_rate, exhaustive_sum_log_rate_fixed_caps, OracleResult};
use crate::seed::{trial_rng, trial_seed};
use crate::{drm, fairness, Error, Result};

pub const TRAJECTORY_FILE: &str = "trajectories.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REFERENCE_FILE: &str = "reference.json";

/// One finished trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub trial: u64,
    pub seed: u64,
    pub trajectory: Trajectory,
}

/// Cross-trial means at one iteration. Trials that stopped early contribute
/// their final step (carried forward).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub iter: usize,
    pub mean_rate: f64,
    pub mean_sum_log_rate: f64,
    pub frac_at_nep: f64,
}

/// Exhaustive optimum of the starting instance, for the reference line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Reference {
    /// `sum-log-rate` (optimal attempt probabilities) or
    /// `sum-log-rate-fixed-caps` (every user at its cap).
    pub kind: String,
    pub optimum_sum_log_rate: f64,
    /// Mean per-user rate of the first optimizer.
    pub mean_rate_at_optimum: f64,
    pub optimizer: StrategyProfile,
    pub num_optimizers: usize,
    pub search_size: u128,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub built: BuiltInstance,
    pub trials: Vec<TrialOutcome>,
    pub aggregate: Vec<AggregateRow>,
    pub reference: Option<Reference>,
}

/// Runs every trial of `config` on the worker pool; results are ordered by
/// trial index so the output does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let built = config.build_instance()?;
    if config.oracle && !built.events.is_empty() {
        return Err(Error::config("oracle", "the reference line needs a fixed population"));
    }
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = trial_seed(config.seed, trial);
            let trajectory = run_trial(config, &built, trial)?;
            Ok(TrialOutcome { trial, seed, trajectory })
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&trials);
    let reference = if config.oracle { Some(reference(config, &built.instance)?) } else { None };
    Ok(ExperimentResult { config: config.clone(), built, trials, aggregate, reference })
}

/// A single trial on its own seeded generator.
pub fn run_trial(config: &ExperimentConfig, built: &BuiltInstance, trial: u64) -> Result<Trajectory> {
    let mut rng = trial_rng(config.seed, trial);
    let instance = &built.instance;
    match &config.algorithm {
        AlgorithmSpec::BrDrm { estimator } => run_br_drm_with(
            instance,
            &BrDrmSettings {
                mechanism: config.mechanism.clone(),
                estimator: estimator.clone(),
                max_iters: config.max_iters,
                events: built.events.clone(),
                initial: None,
            },
            &mut rng,
        ),
        AlgorithmSpec::Nbrf { schedule, freeze_beta } => run_nbrf_with(
            instance,
            &NbrfSettings {
                mechanism: config.mechanism.clone(),
                schedule: *schedule,
                max_iters: config.max_iters,
                freeze_beta: *freeze_beta,
                events: built.events.clone(),
                initial: None,
            },
            &mut rng,
        ),
        AlgorithmSpec::Naive { attempt } => {
            crate::dynamics::validate_events(&built.events, instance)?;
            let mut learner = NaiveLearner::new(instance, *attempt)?;
            drive(&mut learner, config.max_iters, &built.events, &mut rng)
        }
        AlgorithmSpec::BetterResponseReplay { moves, .. } => {
            let initial = config.replay_profile(instance)?;
            let moves: Vec<(usize, Vec<usize>)> = moves.iter().map(|m| (m.user, m.channels.clone())).collect();
            run_better_response_replay(instance, &initial, &moves)
        }
    }
}

fn reference(config: &ExperimentConfig, instance: &Instance) -> Result<Reference> {
    let (kind, result): (&str, OracleResult) = match config.algorithm {
        AlgorithmSpec::BrDrm { .. }
        | AlgorithmSpec::BetterResponseReplay { .. }
        | AlgorithmSpec::Naive { attempt: NaiveAttempt::Cap } => {
            ("sum-log-rate-fixed-caps", exhaustive_sum_log_rate_fixed_caps(instance)?)
        }
        AlgorithmSpec::Nbrf { .. } | AlgorithmSpec::Naive { attempt: NaiveAttempt::Fair } => {
            ("sum-log-rate", exhaustive_sum_log_rate(instance)?)
        }
    };
    let optimizer = result.optimizers[0].clone();
    let rates = crate::network::all_rates(&optimizer, instance);
    Ok(Reference {
        kind: kind.to_string(),
        optimum_sum_log_rate: result.optimum_value,
        mean_rate_at_optimum: mean(&rates),
        optimizer,
        num_optimizers: result.optimizers.len(),
        search_size: result.search_size,
    })
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn sum_log(rates: &[f64]) -> f64 {
    rates.iter().map(|r| r.ln()).sum()
}

/// Per-iteration means over trials, with carry-forward of the last step.
pub fn aggregate(trials: &[TrialOutcome]) -> Vec<AggregateRow> {
    let len = trials.iter().map(|t| t.trajectory.len()).max().unwrap_or(0);
    let count = trials.len() as f64;
    (0..len)
        .map(|i| {
            let mut rate = 0.0;
            let mut log = 0.0;
            let mut nep = 0.0;
            for t in trials {
                let steps = &t.trajectory.steps;
                let step = &steps[i.min(steps.len() - 1)];
                rate += mean(&step.rates);
                log += sum_log(&step.rates);
                nep += if step.at_nep { 1.0 } else { 0.0 };
            }
            AggregateRow { iter: i, mean_rate: rate / count, mean_sum_log_rate: log / count, frac_at_nep: nep / count }
        })
        .collect()
}

/// Float format used in every CSV: 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn channel_set(s: &Strategy) -> String {
    s.channels().iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";")
}

pub fn trajectories_csv(trials: &[TrialOutcome]) -> String {
    let mut out = String::from("trial,iter,user,channel_set,attempt_prob,expected_rate\n");
    for t in trials {
        for (i, step) in t.trajectory.steps.iter().enumerate() {
            for (n, s) in step.profile.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    t.trial,
                    i,
                    n,
                    channel_set(s),
                    format_float(s.attempt_prob()),
                    format_float(step.rates[n])
                )
                .expect("writing to a string");
            }
        }
    }
    out
}

pub fn aggregate_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from("iter,mean_rate,mean_sum_log_rate,frac_at_nep\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.iter,
            format_float(r.mean_rate),
            format_float(r.mean_sum_log_rate),
            format_float(r.frac_at_nep)
        )
        .expect("writing to a string");
    }
    out
}

#[derive(Serialize)]
struct TrialSummary {
    trial: u64,
    seed: u64,
    steps: usize,
    termination: Termination,
    converged_at: Option<usize>,
    final_mean_rate: f64,
    final_sum_log_rate: f64,
    final_at_nep: bool,
}

#[derive(Serialize)]
struct Manifest<'a> {
    name: &'a str,
    code_version: &'a str,
    root_seed: u64,
    trial_seed_rule: &'a str,
    files: Vec<&'a str>,
    config: &'a ExperimentConfig,
    trials: Vec<TrialSummary>,
}

pub fn manifest_json(result: &ExperimentResult) -> String {
    let mut files = vec![TRAJECTORY_FILE, AGGREGATE_FILE];
    if result.reference.is_some() {
        files.push(REFERENCE_FILE);
    }
    let trials = result
        .trials
        .iter()
        .map(|t| {
            let last = t.trajectory.final_step();
            TrialSummary {
                trial: t.trial,
                seed: t.seed,
                steps: t.trajectory.len(),
                termination: t.trajectory.termination,
                converged_at: t.trajectory.converged_at,
                final_mean_rate: mean(&last.rates),
                final_sum_log_rate: sum_log(&last.rates),
                final_at_nep: last.at_nep,
            }
        })
        .collect();
    // where the files went is not part of the experiment
    let config = ExperimentConfig { output_dir: None, ..result.config.clone() };
    let manifest = Manifest {
        name: &result.config.name,
        code_version: env!("CARGO_PKG_VERSION"),
        root_seed: result.config.seed,
        trial_seed_rule: "splitmix64(root ^ splitmix64(trial * 0x9e3779b97f4a7c15))",
        files,
        config: &config,
        trials,
    };
    json_string(&manifest)
}

/// Pretty JSON. Non-finite floats (which JSON cannot carry) become `null`.
pub fn json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io { path: path.clone(), source })?;
    Ok(path)
}

/// Writes trajectories, aggregate, manifest and (if computed) the reference.
pub fn write_outputs(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = vec![
        write_file(dir, TRAJECTORY_FILE, &trajectories_csv(&result.trials))?,
        write_file(dir, AGGREGATE_FILE, &aggregate_csv(&result.aggregate))?,
    ];
    if let Some(reference) = &result.reference {
        written.push(write_file(dir, REFERENCE_FILE, &json_string(reference))?);
    }
    written.push(write_file(dir, MANIFEST_FILE, &manifest_json(result))?);
    Ok(written)
}

/// Memoryless random allocation: every updating time each user draws a fresh
/// uniformly random channel set.
struct NaiveLearner {
    instance: Instance,
    profile: StrategyProfile,
    attempt: NaiveAttempt,
}

impl NaiveLearner {
    fn new(instance: &Instance, attempt: NaiveAttempt) -> Result<Self> {
        if attempt == NaiveAttempt::Fair {
            fairness::ensure_single_channel(instance)?;
        }
        let mut learner = Self { instance: instance.clone(), profile: drm::initial_profile(instance), attempt };
        learner.fix_attempts();
        Ok(learner)
    }

    fn fix_attempts(&mut self) {
        if self.attempt == NaiveAttempt::Fair {
            let graph = self.instance.graph();
            let probs: Vec<f64> = (0..self.instance.num_users())
                .map(|n| {
                    let load = count_on_channel(n, self.profile.get(n).channel(), &self.profile, graph);
                    fairness::optimal_attempt_probability(load)
                })
                .collect();
            for (n, p) in probs.into_iter().enumerate() {
                let channels = self.profile.get(n).channels().to_vec();
                self.profile.set(n, Strategy::new(channels, p).expect("valid probability"));
            }
        }
    }
}

impl Learner for NaiveLearner {
    fn instance(&self) -> &Instance {
        &self.instance
    }

    fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<usize>> {
        let users: Vec<usize> = (0..self.instance.num_users()).collect();
        for &n in &users {
            let channels = random_channel_set(rng, &self.instance, n);
            self.profile.set(n, Strategy::new(channels, self.instance.cap(n))?);
        }
        self.fix_attempts();
        Ok(users)
    }

    fn add_users(&mut self, users: &[NewUser]) -> Result<()> {
        for u in users {
            let n = self.instance.add_user(&u.neighbors, u.utilities.clone(), u.cap, u.allowed.clone())?;
            self.profile.push(drm::initial_strategy(&self.instance, n));
        }
        self.fix_attempts();
        Ok(())
    }

    fn potential(&self) -> f64 {
        match self.attempt {
            NaiveAttempt::Cap => drm::br_potential(&self.profile, &self.instance),
            NaiveAttempt::Fair => fairness::exact_potential(&self.profile, &self.instance),
        }
    }

    fn at_nep(&self) -> bool {
        match self.attempt {
            NaiveAttempt::Cap => drm::is_nep_drm(&self.profile, &self.instance).is_nep,
            NaiveAttempt::Fair => fairness::is_nep_fairness(&self.profile, &self.instance).is_nep,
        }
    }

    fn settled(&self, _at_nep: bool) -> bool {
        false
    }
}

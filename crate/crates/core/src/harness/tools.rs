//! The single-purpose commands: oracle, efficiency sweep, cycle demo and the
//! stationarity check.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{AlgorithmSpec, ExperimentConfig, NaiveAttempt};
use super::run::{format_float, run_trial};
use crate::drm::{efficiency_bound, naive_expected_rate};
use crate::dynamics::{
    run_br_drm, simulate_slot_into, EstimatorConfig, NbrfDynamics, SlotOutcome, Termination, UpdateMechanism,
};
use crate::fairness::{gibbs_stationary, CoolingSchedule};
use crate::network::generate::{build_regular_graph, random_profile};
use crate::network::{Instance, InterferenceGraph, StrategyProfile};
use crate::oracle::{exhaustive_sum_log_rate, exhaustive_sum_log_rate_fixed_caps, VisitCounter};
use crate::seed::{rng_from_seed, trial_rng};
use crate::{Error, Result};

/// What the `oracle` command writes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub kind: String,
    pub optimum_value: f64,
    pub optimizer: StrategyProfile,
    pub num_optimizers: usize,
    pub search_size: u128,
}

/// Exhaustive optimum of the configured starting instance. Rate-maximization
/// configs are solved with every user at its cap, fairness configs with the
/// optimal attempt probabilities.
pub fn oracle_report(config: &ExperimentConfig) -> Result<OracleReport> {
    let instance = config.build_instance()?.instance;
    let fixed =
        !matches!(config.algorithm, AlgorithmSpec::Nbrf { .. } | AlgorithmSpec::Naive { attempt: NaiveAttempt::Fair });
    let (kind, result) = if fixed {
        ("sum-log-rate-fixed-caps", exhaustive_sum_log_rate_fixed_caps(&instance)?)
    } else {
        ("sum-log-rate", exhaustive_sum_log_rate(&instance)?)
    };
    Ok(OracleReport {
        kind: kind.to_string(),
        optimum_value: result.optimum_value,
        optimizer: result.optimizers[0].clone(),
        num_optimizers: result.optimizers.len(),
        search_size: result.search_size,
    })
}

/// One step of the replay transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleMove {
    pub step: usize,
    pub user: usize,
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub rate_before: f64,
    pub rate_after: f64,
    pub profile: StrategyProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleTranscript {
    pub initial: StrategyProfile,
    pub moves: Vec<CycleMove>,
    pub termination: Termination,
    pub returns_to_start: bool,
}

/// Replays the scripted moves of a better-response config and records each
/// move with the mover's rate before and after.
pub fn cycle_transcript(config: &ExperimentConfig) -> Result<CycleTranscript> {
    let AlgorithmSpec::BetterResponseReplay { moves, .. } = &config.algorithm else {
        return Err(Error::config("algorithm", "the cycle demo needs a better-response-replay config"));
    };
    let built = config.build_instance()?;
    let trajectory = run_trial(config, &built, 0)?;
    let steps = &trajectory.steps;
    let transcript = moves
        .iter()
        .enumerate()
        .map(|(i, m)| CycleMove {
            step: i + 1,
            user: m.user,
            from: steps[i].profile.get(m.user).channels().to_vec(),
            to: steps[i + 1].profile.get(m.user).channels().to_vec(),
            rate_before: steps[i].rates[m.user],
            rate_after: steps[i + 1].rates[m.user],
            profile: steps[i + 1].profile.clone(),
        })
        .collect();
    Ok(CycleTranscript {
        initial: steps[0].profile.clone(),
        moves: transcript,
        termination: trajectory.termination,
        returns_to_start: trajectory.final_profile() == &steps[0].profile,
    })
}

/// Parameters of the efficiency sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencySettings {
    pub channels: Vec<usize>,
    pub degrees: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
    pub max_iters: u64,
}

impl Default for EfficiencySettings {
    fn default() -> Self {
        Self { channels: vec![2, 3], degrees: vec![1, 2, 3, 5], trials: 20, seed: 0, max_iters: 10_000 }
    }
}

/// A sweep row. Inadmissible pairs carry only a note.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyRow {
    pub num_channels: usize,
    pub degree: usize,
    pub eta: Option<f64>,
    pub min_ratio: Option<f64>,
    pub mean_ratio: Option<f64>,
    pub note: String,
}

/// Regular instance of the efficiency regime: `2(degree+1)` users, unit
/// utilities, caps `K/(degree+1)`.
pub fn efficiency_instance(num_channels: usize, degree: usize) -> Result<Instance> {
    let n = 2 * (degree + 1);
    let graph = build_regular_graph(n, degree)?;
    let cap = num_channels as f64 / (degree + 1) as f64;
    Instance::new(graph, num_channels, 1, vec![vec![1.0; num_channels]; n], vec![cap; n])
}

/// For each (K, degree) pair, runs best-response dynamics from the greedy
/// start and compares every user's equilibrium rate with the closed-form
/// rate of random channel selection.
pub fn efficiency_sweep(settings: &EfficiencySettings) -> Result<Vec<EfficiencyRow>> {
    if settings.trials == 0 {
        return Err(Error::config("trials", "at least one trial is required"));
    }
    let mut rows = Vec::new();
    for &k in &settings.channels {
        for &d in &settings.degrees {
            let eta = match efficiency_bound(k, d) {
                Ok(eta) => eta,
                Err(e) => {
                    rows.push(EfficiencyRow {
                        num_channels: k,
                        degree: d,
                        eta: None,
                        min_ratio: None,
                        mean_ratio: None,
                        note: format!("skipped: {e}"),
                    });
                    continue;
                }
            };
            let instance = efficiency_instance(k, d)?;
            let naive = naive_expected_rate(0, &instance, d)?;
            let ratios = (0..settings.trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = trial_rng(settings.seed, trial);
                    let traj = run_br_drm(
                        &instance,
                        &UpdateMechanism::backoff(),
                        &EstimatorConfig::Exact,
                        settings.max_iters,
                        &mut rng,
                    )?;
                    if traj.termination != Termination::Converged {
                        return Err(Error::Degenerate(format!("K={k}, degree={d}, trial {trial} did not converge")));
                    }
                    Ok(traj.final_step().rates.iter().map(|r| r / naive).collect::<Vec<_>>())
                })
                .collect::<Result<Vec<_>>>()?;
            let all: Vec<f64> = ratios.into_iter().flatten().collect();
            let min = all.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            rows.push(EfficiencyRow {
                num_channels: k,
                degree: d,
                eta: Some(eta),
                min_ratio: Some(min),
                mean_ratio: Some(mean),
                note: String::new(),
            });
        }
    }
    Ok(rows)
}

pub fn efficiency_csv(rows: &[EfficiencyRow]) -> String {
    let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
    let mut out = String::from("K,degree,eta,min_ratio,mean_ratio,note\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.num_channels,
            r.degree,
            opt(r.eta),
            opt(r.min_ratio),
            opt(r.mean_ratio),
            r.note.replace(',', ";")
        )
        .expect("writing to a string");
    }
    out
}

/// Average delivered utility of every user over `slots` slots when each user
/// draws a fresh uniformly random channel set every slot and transmits at its cap.
pub fn naive_monte_carlo_rates<R: Rng + ?Sized>(instance: &Instance, slots: u64, rng: &mut R) -> Vec<f64> {
    let mut out = SlotOutcome::default();
    let mut totals = vec![0.0; instance.num_users()];
    for _ in 0..slots {
        let profile = random_profile(rng, instance);
        simulate_slot_into(&profile, instance, rng, &mut out);
        for (n, total) in totals.iter_mut().enumerate() {
            *total += out.delivered(n, &profile, instance);
        }
    }
    totals.into_iter().map(|t| t / slots as f64).collect()
}

/// Parameters of the stationarity check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsSettings {
    pub beta: f64,
    /// Per-user update probability of the probabilistic mechanism.
    pub update_prob: f64,
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
}

impl Default for GibbsSettings {
    fn default() -> Self {
        Self { beta: 1.0, update_prob: 0.1, steps: 1_000_000, burn_in: 10_000, seed: 0 }
    }
}

/// Two adjacent users, two channels, distinct channel preferences.
pub fn gibbs_instance() -> Instance {
    Instance::new(InterferenceGraph::complete(2), 2, 1, vec![vec![2.0, 1.0], vec![1.5, 3.0]], vec![1.0, 1.0])
        .expect("valid instance")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsRow {
    pub channels: Vec<usize>,
    pub attempt_probs: Vec<f64>,
    pub empirical: f64,
    pub stationary: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsReport {
    pub settings: GibbsSettings,
    pub total_variation: f64,
    pub profiles: Vec<GibbsRow>,
}

/// Runs noisy best response at fixed `beta` with every user updating
/// independently, and compares post-burn-in visit frequencies with the
/// enumerated Gibbs distribution.
pub fn gibbs_check(instance: &Instance, settings: &GibbsSettings) -> Result<GibbsReport> {
    let mechanism = UpdateMechanism::uniform_probabilistic(settings.update_prob);
    let schedule = CoolingSchedule::fixed(settings.beta)?;
    let mut dynamics = NbrfDynamics::new(instance, mechanism, schedule, None, None)?;
    let mut rng = rng_from_seed(settings.seed);
    for _ in 0..settings.burn_in {
        dynamics.step(&mut rng);
    }
    let mut counter = VisitCounter::default();
    for _ in 0..settings.steps {
        dynamics.step(&mut rng);
        counter.observe(dynamics.profile());
    }
    let empirical = counter.distribution()?;
    let stationary = gibbs_stationary(instance, settings.beta)?;
    let mut keys: Vec<_> = stationary.entries.keys().chain(empirical.entries.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let profiles = keys
        .iter()
        .map(|key| GibbsRow {
            channels: key.0.iter().map(|(c, _)| c[0]).collect(),
            attempt_probs: key.0.iter().map(|(_, bits)| f64::from_bits(*bits)).collect(),
            empirical: empirical.prob(key),
            stationary: stationary.prob(key),
        })
        .collect();
    Ok(GibbsReport { settings: settings.clone(), total_variation: empirical.total_variation(&stationary), profiles })
}

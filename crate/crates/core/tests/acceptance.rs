//! Acceptance suite. Runs every criterion in order and prints one line each;
//! the process fails when any criterion fails.

#![allow(clippy::needless_range_loop)]

use std::time::{Duration, Instant};

use rand::Rng;
use spectrum_games::drm::{br_potential, efficiency_bound, is_nep_drm, naive_expected_rate};
use spectrum_games::dynamics::{
    run_br_drm, simulate_slot_into, EstimatorConfig, SlotOutcome, Termination, UpdateMechanism, WindowEstimator,
};
use spectrum_games::fairness::{
    cooperative_utility, exact_potential, optimal_attempt_probability, per_channel_sum_log_rate, FairnessAction,
};
use spectrum_games::harness::{
    cycle_transcript, efficiency_instance, efficiency_sweep, gibbs_check, gibbs_instance, naive_monte_carlo_rates,
    preset, preset_names, run_experiment, write_outputs, EfficiencySettings, GibbsSettings,
};
use spectrum_games::network::generate::{random_instance, random_profile, RandomInstanceParams};
use spectrum_games::network::{success_probability, sum_log_rate, total_expected_rate};
use spectrum_games::oracle::{brute_force_best_response, channel_subsets, exhaustive_drm_nep_enumeration};
use spectrum_games::seed::rng_from_seed;
use spectrum_games::{Instance, InterferenceGraph, Strategy, StrategyProfile};

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

type Check = fn() -> Verdict;

fn timed(limit: Option<Duration>, check: Check) -> (Verdict, Duration) {
    let start = Instant::now();
    let mut verdict = check();
    let elapsed = start.elapsed();
    if let Some(limit) = limit {
        if elapsed > limit {
            verdict.pass = false;
            verdict.detail.push_str(&format!("; over the {}s limit", limit.as_secs()));
        }
    }
    (verdict, elapsed)
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: [(&str, Option<Duration>, Check); 11] = [
        ("better-response cycle replays exactly", secs(1), cycle_replay),
        ("best responses increase the best-response potential", secs(60), potential_law),
        ("rate and potential share their argmax", None, argmax_identity),
        ("fairness deviations equal potential differences", None, exact_potential_identity),
        ("optimal attempt probability is 1/(count+1)", None, optimal_attempt),
        ("noisy best response visits the Gibbs distribution", secs(60), gibbs_stationarity),
        ("annealed NBRF reaches the small-network optimum", secs(120), nbrf_small_network),
        ("equilibria beat random selection by eta", secs(120), efficiency_bound_check),
        ("probabilistic updates reach an equilibrium", secs(60), probabilistic_convergence),
        ("slot simulator matches the closed-form rates", secs(60), slot_consistency),
        ("presets are deterministic", None, preset_determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, limit, check)) in criteria.into_iter().enumerate() {
        let (verdict, elapsed) = timed(limit, check);
        let status = if verdict.pass { "PASS" } else { "FAIL" };
        println!("criterion {:>2} {status}: {name} ({}) [{:.2}s]", i + 1, verdict.detail, elapsed.as_secs_f64());
        if !verdict.pass {
            failed.push(i + 1);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn strategy(channels: &[usize], p: f64) -> Strategy {
    Strategy::new(channels.to_vec(), p).unwrap()
}

fn cycle_replay() -> Verdict {
    let config = preset("cycle-demo").unwrap();
    let transcript = cycle_transcript(&config).unwrap();
    let profile = |a: &[usize], b: &[usize]| StrategyProfile::new(vec![strategy(a, 0.5), strategy(b, 0.5)]);
    let start = profile(&[0, 1], &[1, 2]);
    let expected = [
        (0, profile(&[2, 3], &[1, 2])),
        (1, profile(&[2, 3], &[0, 3])),
        (0, profile(&[0, 1], &[0, 3])),
        (1, profile(&[0, 1], &[1, 2])),
    ];
    let mut problems = Vec::new();
    if transcript.initial != start {
        problems.push("initial profile differs".to_string());
    }
    if transcript.moves.len() != expected.len() {
        problems.push(format!("{} moves", transcript.moves.len()));
    }
    for (m, (user, profile)) in transcript.moves.iter().zip(&expected) {
        if m.user != *user || m.profile != *profile {
            problems.push(format!("move {} lands elsewhere", m.step));
        }
        if m.rate_before != 1.0 || m.rate_after != 1.25 {
            problems.push(format!("move {} rate {} -> {}", m.step, m.rate_before, m.rate_after));
        }
    }
    if !transcript.returns_to_start {
        problems.push("does not close".into());
    }
    let detail = if problems.is_empty() {
        "4 moves, each 1.0 -> 1.25, back to the start".to_string()
    } else {
        problems.join("; ")
    };
    Verdict::new(problems.is_empty(), detail)
}

fn random_params<R: Rng>(rng: &mut R, max_users: usize, max_channels: usize, max_m: usize) -> RandomInstanceParams {
    let num_channels = rng.random_range(1..=max_channels);
    RandomInstanceParams {
        num_users: rng.random_range(1..=max_users),
        num_channels,
        channels_per_user: rng.random_range(1..=max_m.min(num_channels)),
        edge_prob: rng.random_range(0.0..1.0),
        ..RandomInstanceParams::default()
    }
}

fn potential_law() -> Verdict {
    let mut rng = rng_from_seed(2);
    let mut changes = 0usize;
    let mut violations = Vec::new();
    let mut min_gain = f64::INFINITY;
    for case in 0..1000 {
        let params = random_params(&mut rng, 12, 5, 3);
        let instance = random_instance(&mut rng, &params).unwrap();
        let traj = run_br_drm(&instance, &UpdateMechanism::SweepSequential, &EstimatorConfig::Exact, 100_000, &mut rng)
            .unwrap();
        for pair in traj.steps.windows(2) {
            let (before, after) = (&pair[0].profile, &pair[1].profile);
            for n in 0..instance.num_users() {
                if before.get(n) == after.get(n) {
                    continue;
                }
                changes += 1;
                let gain = br_potential(after, &instance) - br_potential(before, &instance);
                min_gain = min_gain.min(gain);
                if gain.is_nan() || gain <= 1e-12 {
                    violations.push(format!("case {case}: potential change {gain:e}"));
                }
                let best = brute_force_best_response(n, before, &instance).unwrap();
                let rate = |set: &[usize]| {
                    total_expected_rate(n, &before.with(n, strategy(set, instance.cap(n))), &instance).unwrap()
                };
                if rate(after.get(n).channels()) < rate(&best) * (1.0 - 1e-12) {
                    violations.push(format!("case {case}: user {n} moved to a non-best response"));
                }
            }
        }
        if traj.termination != Termination::Converged || !is_nep_drm(traj.final_profile(), &instance).is_nep {
            violations.push(format!("case {case}: ended {:?} off equilibrium", traj.termination));
        }
    }
    let detail = format!(
        "{changes} strategy changes, smallest potential gain {min_gain:.3e}, {} violations{}",
        violations.len(),
        violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
    );
    Verdict::new(violations.is_empty(), detail)
}

/// Indices within `tol` (relative) of the best value.
fn argmax_set(values: &[f64], tol: f64) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = best - tol * best.abs().max(1.0);
    (0..values.len()).filter(|&i| values[i] >= floor).collect()
}

fn argmax_identity() -> Verdict {
    let mut rng = rng_from_seed(3);
    let mut checks = 0usize;
    let mut violations = 0usize;
    for _ in 0..200 {
        let params = random_params(&mut rng, 6, 5, 3);
        let instance = random_instance(&mut rng, &params).unwrap();
        for _ in 0..100 {
            let profile = random_profile(&mut rng, &instance);
            for n in 0..instance.num_users() {
                let subsets = channel_subsets(&instance, n);
                let (rates, potentials): (Vec<f64>, Vec<f64>) = subsets
                    .iter()
                    .map(|set| {
                        let deviated = profile.with(n, strategy(set, instance.cap(n)));
                        (total_expected_rate(n, &deviated, &instance).unwrap(), br_potential(&deviated, &instance))
                    })
                    .unzip();
                checks += 1;
                if argmax_set(&rates, 1e-12) != argmax_set(&potentials, 1e-12) {
                    violations += 1;
                }
            }
        }
    }
    Verdict::new(violations == 0, format!("{checks} (user, profile) pairs, {violations} violations"))
}

fn random_fairness_instance<R: Rng>(rng: &mut R) -> Instance {
    let params = RandomInstanceParams {
        num_users: rng.random_range(1..=8),
        num_channels: rng.random_range(1..=4),
        channels_per_user: 1,
        edge_prob: rng.random_range(0.0..1.0),
        ..RandomInstanceParams::default()
    };
    random_instance(rng, &params).unwrap()
}

fn exact_potential_identity() -> Verdict {
    let mut rng = rng_from_seed(4);
    let mut worst = 0.0f64;
    let mut violations = 0usize;
    let mut deviations = 0usize;
    while deviations < 10_000 {
        let instance = random_fairness_instance(&mut rng);
        let k_total = instance.num_channels();
        let profile: StrategyProfile = (0..instance.num_users())
            .map(|_| Strategy::single(rng.random_range(0..k_total), rng.random_range(0.01..0.99)).unwrap())
            .collect();
        for _ in 0..10 {
            let n = rng.random_range(0..instance.num_users());
            let old = profile.get(n);
            let (channel, attempt_prob) = match rng.random_range(0..3) {
                0 => (rng.random_range(0..k_total), old.attempt_prob()),
                1 => (old.channel(), rng.random_range(0.01..0.99)),
                _ => (rng.random_range(0..k_total), rng.random_range(0.01..0.99)),
            };
            let new = FairnessAction { channel, attempt_prob };
            let current = FairnessAction { channel: old.channel(), attempt_prob: old.attempt_prob() };
            let d_utility =
                cooperative_utility(n, new, &profile, &instance) - cooperative_utility(n, current, &profile, &instance);
            let d_potential =
                exact_potential(&profile.with(n, new.to_strategy()), &instance) - exact_potential(&profile, &instance);
            let gap = (d_utility - d_potential).abs();
            worst = worst.max(gap);
            if gap.is_nan() || gap > 1e-9 {
                violations += 1;
            }
            deviations += 1;
        }
    }
    Verdict::new(
        violations == 0,
        format!("{deviations} deviations, largest |dF - dphi| {worst:.2e}, {violations} violations"),
    )
}

fn complete_graph(n: usize) -> InterferenceGraph {
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    InterferenceGraph::from_edges(n, &edges).unwrap()
}

fn optimal_attempt() -> Verdict {
    let mut rng = rng_from_seed(5);
    let mut violations = Vec::new();
    let mut worst = 0.0f64;
    for count in 0..=10usize {
        let target = 1.0 / (count as f64 + 1.0);
        if optimal_attempt_probability(count) != target {
            violations.push(format!("count {count}: library value"));
        }

        // star: the center shares the channel with `count` leaves
        let edges: Vec<(usize, usize)> = (1..=count).map(|leaf| (0, leaf)).collect();
        let star = InterferenceGraph::from_edges(count + 1, &edges).unwrap();
        let instance = Instance::new(star, 1, 1, vec![vec![1.0]; count + 1], vec![1.0; count + 1]).unwrap();
        let profile = StrategyProfile::new(vec![Strategy::single(0, 0.3).unwrap(); count + 1]);
        let (mut best_p, mut best_f) = (0.0, f64::NEG_INFINITY);
        for i in 1..=10_000 {
            let p = i as f64 * 1e-4;
            let f = cooperative_utility(0, FairnessAction { channel: 0, attempt_prob: p }, &profile, &instance);
            if f > best_f {
                (best_p, best_f) = (p, f);
            }
        }
        worst = worst.max((best_p - target).abs());
        if (best_p - target).abs() > 1e-3 {
            violations.push(format!("count {count}: grid argmax {best_p}"));
        }

        // every member of a clique of count+1 users has `count` neighbors on the channel
        let size = count + 1;
        let instance = Instance::new(complete_graph(size), 1, 1, vec![vec![1.0]; size], vec![1.0; size]).unwrap();
        let upper = if count == 0 { 1.0 } else { 1.0 - 1e-6 };
        let mut p: Vec<f64> = (0..size).map(|_| rng.random_range(0.05..0.95)).collect();
        let objective = |p: &[f64]| {
            let profile: StrategyProfile = p.iter().map(|&q| Strategy::single(0, q).unwrap()).collect();
            per_channel_sum_log_rate(0, &profile, &instance)
        };
        let h = 1e-7;
        for _ in 0..20_000 {
            let grad: Vec<f64> = (0..size)
                .map(|i| {
                    let mut up = p.clone();
                    let mut down = p.clone();
                    up[i] = (p[i] + h).min(upper);
                    down[i] = p[i] - h;
                    (objective(&up) - objective(&down)) / (up[i] - down[i])
                })
                .collect();
            for (q, g) in p.iter_mut().zip(&grad) {
                *q = (*q + (0.002 * g).clamp(-0.05, 0.05)).clamp(1e-6, upper);
            }
        }
        for (i, &q) in p.iter().enumerate() {
            worst = worst.max((q - target).abs());
            if (q - target).abs() > 1e-3 {
                violations.push(format!("count {count}: gradient ascent user {i} at {q}"));
            }
        }
    }
    let detail = format!(
        "counts 0..=10, largest distance {worst:.2e}, {} violations{}",
        violations.len(),
        violations.first().map(|v| format!(", first: {v}")).unwrap_or_default()
    );
    Verdict::new(violations.is_empty(), detail)
}

fn gibbs_stationarity() -> Verdict {
    let settings = GibbsSettings::default();
    let report = gibbs_check(&gibbs_instance(), &settings).unwrap();
    Verdict::new(
        report.total_variation <= 0.02,
        format!(
            "beta {}, q {}, {} steps after {} burn-in, total variation {:.4} (limit 0.02)",
            settings.beta, settings.update_prob, settings.steps, settings.burn_in, report.total_variation
        ),
    )
}

fn nbrf_small_network() -> Verdict {
    let config = preset("fig5-small-nbrf").unwrap();
    let result = run_experiment(&config).unwrap();
    let reference = result.reference.as_ref().expect("the preset asks for the oracle");
    let instance = &result.built.instance;
    let hits = result
        .trials
        .iter()
        .filter(|t| {
            let last = t.trajectory.final_step();
            last.time <= 500 && (sum_log_rate(&last.profile, instance) - reference.optimum_sum_log_rate).abs() <= 1e-6
        })
        .count();
    Verdict::new(
        result.trials.len() == 100 && hits >= 90,
        format!(
            "{hits}/{} trials at the optimum {:.6} of {} allocations (need 90)",
            result.trials.len(),
            reference.optimum_sum_log_rate,
            reference.search_size
        ),
    )
}

fn efficiency_bound_check() -> Verdict {
    let pairs = [(2usize, 1usize), (2, 3), (3, 5)];
    let mut rng = rng_from_seed(8);
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for &(k, d) in &pairs {
        let instance = efficiency_instance(k, d).unwrap();
        let eta = efficiency_bound(k, d).unwrap();
        let p = k as f64 / (d as f64 + 1.0);
        // user picks one of K channels at random, so a neighbor collides with probability p/K
        let closed_form = p * (1.0 - p / k as f64).powi(d as i32);
        let naive = naive_expected_rate(0, &instance, d).unwrap();
        if (naive - closed_form).abs() > 1e-12 * closed_form {
            problems.push(format!("({k},{d}): naive rate {naive} vs {closed_form}"));
        }
        let neps = exhaustive_drm_nep_enumeration(&instance).unwrap();
        let worst = neps
            .iter()
            .flat_map(|profile| (0..instance.num_users()).map(|n| total_expected_rate(n, profile, &instance).unwrap()))
            .fold(f64::INFINITY, f64::min);
        if neps.is_empty() || worst < eta * naive {
            problems.push(format!("({k},{d}): worst equilibrium rate {worst} below {}", eta * naive));
        }
        let sweep = efficiency_sweep(&EfficiencySettings {
            channels: vec![k],
            degrees: vec![d],
            ..EfficiencySettings::default()
        })
        .unwrap();
        if sweep[0].min_ratio.is_none_or(|m| m < eta) {
            problems.push(format!("({k},{d}): dynamics ratio {:?}", sweep[0].min_ratio));
        }
        let simulated = naive_monte_carlo_rates(&instance, 1_000_000, &mut rng);
        let err = simulated.iter().map(|r| (r - closed_form).abs() / closed_form).fold(0.0, f64::max);
        if err > 0.01 {
            problems.push(format!("({k},{d}): Monte Carlo off by {:.2}%", 100.0 * err));
        }
        summary.push(format!("({k},{d}) eta {eta:.4} over {} equilibria, MC err {:.2}%", neps.len(), 100.0 * err));
    }
    let eta_21 = efficiency_bound(2, 1).unwrap();
    if eta_21 != 2.0 {
        problems.push(format!("eta(2,1) = {eta_21}"));
    }
    let mut detail = summary.join("; ");
    if !problems.is_empty() {
        detail = format!("{detail}; {}", problems.join("; "));
    }
    Verdict::new(problems.is_empty(), detail)
}

fn probabilistic_convergence() -> Verdict {
    let mut rng = rng_from_seed(9);
    let mechanism = UpdateMechanism::uniform_probabilistic(0.3);
    let mut reached = 0usize;
    for _ in 0..200 {
        let params = random_params(&mut rng, 12, 5, 3);
        let instance = random_instance(&mut rng, &params).unwrap();
        let budget = 10 * instance.num_users() * instance.num_channels();
        let traj = run_br_drm(&instance, &mechanism, &EstimatorConfig::Exact, budget as u64, &mut rng).unwrap();
        let first = traj.first_nep();
        if first.is_some_and(|i| is_nep_drm(&traj.steps[i].profile, &instance).is_nep) {
            reached += 1;
        }
    }
    Verdict::new(reached >= 199, format!("{reached}/200 instances reached an equilibrium within 10*N*K (need 199)"))
}

/// A random profile in which every transmission succeeds with probability at
/// least 0.15, so that 10^6 slots resolve each rate to well under 1%.
fn well_conditioned_profile<R: Rng>(rng: &mut R) -> (Instance, StrategyProfile) {
    loop {
        let params = RandomInstanceParams {
            num_users: 5,
            num_channels: 3,
            channels_per_user: rng.random_range(1..=2),
            edge_prob: 0.4,
            cap_range: (0.3, 0.9),
            ..RandomInstanceParams::default()
        };
        let instance = random_instance(rng, &params).unwrap();
        for _ in 0..100 {
            let profile = random_profile(rng, &instance);
            let ok = (0..instance.num_users()).all(|n| {
                let s = profile.get(n);
                s.channels()
                    .iter()
                    .all(|&k| s.attempt_prob() * success_probability(n, k, &profile, instance.graph()).unwrap() >= 0.15)
            });
            if ok {
                return (instance, profile);
            }
        }
    }
}

fn slot_consistency() -> Verdict {
    const SLOTS: usize = 1_000_000;
    let mut rng = rng_from_seed(10);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (instance, profile) = well_conditioned_profile(&mut rng);
        let users = instance.num_users();
        let mut delivered = vec![0.0; users];
        let mut successes: Vec<Vec<u64>> = (0..users).map(|n| vec![0; profile.get(n).channels().len()]).collect();
        let mut slot = SlotOutcome::default();
        for _ in 0..SLOTS {
            simulate_slot_into(&profile, &instance, &mut rng, &mut slot);
            for n in 0..users {
                delivered[n] += slot.delivered(n, &profile, &instance);
                for (count, &ok) in successes[n].iter_mut().zip(&slot.success[n]) {
                    *count += ok as u64;
                }
            }
        }
        for n in 0..users {
            let s = profile.get(n);
            let rate = total_expected_rate(n, &profile, &instance).unwrap();
            worst = worst.max((delivered[n] / SLOTS as f64 - rate).abs() / rate);
            for (i, &k) in s.channels().iter().enumerate() {
                let expected = s.attempt_prob() * success_probability(n, k, &profile, instance.graph()).unwrap();
                worst = worst.max((successes[n][i] as f64 / SLOTS as f64 - expected).abs() / expected);
            }
        }
    }

    // windows of 100 slots under a fixed profile, sampled back to back
    let (instance, profile) = well_conditioned_profile(&mut rng);
    let (users, channels) = (instance.num_users(), instance.num_channels());
    let mut estimator = WindowEstimator::new(users, channels, 100).unwrap();
    let mut sums = vec![vec![0.0; channels]; users];
    let mut windows = 0usize;
    let mut slot = SlotOutcome::default();
    for t in 1..=SLOTS {
        simulate_slot_into(&profile, &instance, &mut rng, &mut slot);
        estimator.observe(&slot);
        if t % 100 == 0 {
            windows += 1;
            for n in 0..users {
                for k in 0..channels {
                    sums[n][k] += estimator.estimate(n, k).unwrap();
                }
            }
        }
    }
    let mut bias = 0.0f64;
    for n in 0..users {
        for k in 0..channels {
            let v = success_probability(n, k, &profile, instance.graph()).unwrap();
            bias = bias.max((sums[n][k] / windows as f64 - v).abs());
        }
    }
    Verdict::new(
        worst <= 0.01 && bias < 0.01,
        format!(
            "20 profiles, largest relative error {:.3}% (limit 1%); window bias {bias:.4} over {windows} windows (limit 0.01)",
            100.0 * worst
        ),
    )
}

fn preset_determinism() -> Verdict {
    let mut mismatches = Vec::new();
    let mut files = 0usize;
    for name in preset_names() {
        let config = preset(name).unwrap();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut written = Vec::new();
        for dir in &dirs {
            let result = run_experiment(&config).unwrap();
            written.push(write_outputs(&result, dir.path()).unwrap());
        }
        for (a, b) in written[0].iter().zip(&written[1]) {
            files += 1;
            if std::fs::read(a).unwrap() != std::fs::read(b).unwrap() {
                mismatches.push(format!("{name}/{}", a.file_name().unwrap().to_string_lossy()));
            }
        }
        if written[0].len() != written[1].len() {
            mismatches.push(format!("{name}: different file sets"));
        }
    }
    let detail = if mismatches.is_empty() {
        format!("{} presets run twice, {files} file pairs byte-identical", preset_names().count())
    } else {
        format!("differing: {}", mismatches.join(", "))
    };
    Verdict::new(mismatches.is_empty(), detail)
}

//! Cooperative single-channel fairness game.
//!
//! Each user picks one channel and an attempt probability and scores it with
//! the cooperative utility
//!
//! ```text
//! F_n(k, p) = log(u_n(k) p) - I_n(k) - |I_n(k)| * (-log(1 - p))
//! ```
//!
//! which charges the user for the interference it causes its neighbors on
//! `k`. Unilateral changes in `F_n` equal changes in the network sum-log rate,
//! so noisy best response on `F_n` samples the Gibbs distribution of the
//! sum-log rate.

mod schedule;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use schedule::{CoolingSchedule, DeltaAssessment};

use crate::network::{count_on_channel, interference_weight, log_interf, user_rate};
use crate::network::{Instance, ProfileKey, Strategy, StrategyProfile};
use crate::{Error, Result};

/// Largest joint action space [`gibbs_stationary`] will enumerate.
pub const GIBBS_ENUMERATION_CAP: u128 = 1_000_000;

/// A (channel, attempt probability) pair. Sampled actions use `p = 1/r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FairnessAction {
    pub channel: usize,
    pub attempt_prob: f64,
}

impl FairnessAction {
    /// The grid action `(channel, 1/r)`, `r >= 1`.
    pub fn on_grid(channel: usize, r: usize) -> Self {
        assert!(r >= 1, "grid index starts at 1");
        Self { channel, attempt_prob: 1.0 / r as f64 }
    }

    pub fn to_strategy(self) -> Strategy {
        Strategy::single(self.channel, self.attempt_prob).expect("grid probabilities lie in (0, 1]")
    }
}

/// The action grid of user `n`: every channel crossed with `p = 1, 1/2, …, 1/(|I_n|+1)`,
/// channel-major.
pub fn action_grid(n: usize, instance: &Instance) -> Vec<FairnessAction> {
    let depth = instance.graph().degree(n) + 1;
    (0..instance.num_channels()).flat_map(|k| (1..=depth).map(move |r| FairnessAction::on_grid(k, r))).collect()
}

pub(crate) fn ensure_single_channel(instance: &Instance) -> Result<()> {
    if instance.channels_per_user() != 1 {
        return Err(Error::invalid(format!(
            "the fairness game needs one channel per user, instance has {}",
            instance.channels_per_user()
        )));
    }
    Ok(())
}

/// `F_n` of `action` against the rest of `profile`. Returns `-inf` for
/// `p = 0`, zero utility, a certain interferer, or `p = 1` with neighbors on
/// the channel; an isolated user at `p = 1` gets `log u_n(k) - I_n(k)`.
pub fn cooperative_utility(n: usize, action: FairnessAction, profile: &StrategyProfile, instance: &Instance) -> f64 {
    let graph = instance.graph();
    let k = action.channel;
    let p = action.attempt_prob;
    let count = count_on_channel(n, k, profile, graph);
    coop_utility_parts(instance.utility(n, k), p, log_interf(n, k, profile, graph), count)
}

#[inline]
fn coop_utility_parts(utility: f64, p: f64, interference: f64, count: usize) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    // 0 * log 0 := 0 for an isolated transmitter at p = 1
    let caused = if count == 0 { 0.0 } else { count as f64 * interference_weight(p) };
    (utility * p).ln() - interference - caused
}

/// The exact potential `sum_n log R_n`; `-inf` when any user has zero rate.
pub fn exact_potential(profile: &StrategyProfile, instance: &Instance) -> f64 {
    crate::network::sum_log_rate(profile, instance)
}

/// `1 / (count + 1)`, the attempt probability maximizing `F_n` on a channel
/// shared with `count` neighbors.
pub fn optimal_attempt_probability(neighbor_count_on_channel: usize) -> f64 {
    1.0 / (neighbor_count_on_channel as f64 + 1.0)
}

/// `sum_{n : k_n = k} log R_n`.
pub fn per_channel_sum_log_rate(k: usize, profile: &StrategyProfile, instance: &Instance) -> f64 {
    (0..instance.num_users())
        .filter(|&n| profile.get(n).channel() == k)
        .map(|n| user_rate(n, profile, instance).ln())
        .sum()
}

/// Greedy initialization: every user first takes its highest-utility channel,
/// then all users set `p_n = 1/(|I_n(k_n)|+1)` from the resulting counts.
pub fn initial_profile(instance: &Instance) -> StrategyProfile {
    let mut profile: StrategyProfile = (0..instance.num_users())
        .map(|n| Strategy::single(best_utility_channel(instance, n), 1.0).expect("valid"))
        .collect();
    let probs: Vec<f64> = (0..instance.num_users())
        .map(|n| {
            let k = profile.get(n).channel();
            optimal_attempt_probability(count_on_channel(n, k, &profile, instance.graph()))
        })
        .collect();
    for (n, p) in probs.into_iter().enumerate() {
        let k = profile.get(n).channel();
        profile.set(n, Strategy::single(k, p).expect("valid"));
    }
    profile
}

/// Highest-utility allowed channel of `n`, lowest index on ties.
pub(crate) fn best_utility_channel(instance: &Instance, n: usize) -> usize {
    let row = &instance.utilities()[n];
    instance
        .allowed_channels(n)
        .fold(None::<usize>, |best, k| match best {
            Some(b) if row[b] >= row[k] => Some(b),
            _ => Some(k),
        })
        .expect("at least one allowed channel")
}

/// Initial strategy for a user joining an existing profile.
pub(crate) fn joining_strategy(instance: &Instance, n: usize, profile: &StrategyProfile) -> Strategy {
    let k = best_utility_channel(instance, n);
    let count = count_on_channel(n, k, profile, instance.graph());
    Strategy::single(k, optimal_attempt_probability(count)).expect("valid")
}

/// A probability mass function over one user's action grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionPmf {
    pub actions: Vec<FairnessAction>,
    pub probs: Vec<f64>,
}

impl ActionPmf {
    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> FairnessAction {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return self.actions[i];
            }
        }
        self.actions[last]
    }

    /// Index of the most likely action (lowest index on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Softmax with max subtraction; `-inf` scores get zero weight.
pub(crate) fn softmax(scores: &[f64], beta: f64) -> Option<Vec<f64>> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut weights: Vec<f64> =
        scores.iter().map(|&s| if s == f64::NEG_INFINITY { 0.0 } else { (beta * (s - max)).exp() }).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Some(weights)
}

/// Log-linear (noisy best response) distribution of user `n` over its action
/// grid: `Pr(k, p) ∝ exp(beta * F_n(k, p))`.
pub fn noisy_br_distribution(n: usize, profile: &StrategyProfile, instance: &Instance, beta: f64) -> Result<ActionPmf> {
    ensure_single_channel(instance)?;
    instance.check_user(n)?;
    if !(beta >= 0.0) {
        return Err(Error::invalid(format!("beta must be nonnegative, got {beta}")));
    }
    let actions = action_grid(n, instance);
    let scores = action_scores(n, &actions, profile, instance);
    let probs =
        softmax(&scores, beta).ok_or_else(|| Error::Degenerate(format!("every action of user {n} has zero rate")))?;
    Ok(ActionPmf { actions, probs })
}

/// `F_n` for each action, sharing the per-channel interference terms.
pub(crate) fn action_scores(
    n: usize,
    actions: &[FairnessAction],
    profile: &StrategyProfile,
    instance: &Instance,
) -> Vec<f64> {
    let graph = instance.graph();
    let per_channel: Vec<(f64, usize)> = (0..instance.num_channels())
        .map(|k| (log_interf(n, k, profile, graph), count_on_channel(n, k, profile, graph)))
        .collect();
    actions
        .iter()
        .map(|a| {
            let (interference, count) = per_channel[a.channel];
            coop_utility_parts(instance.utility(n, a.channel), a.attempt_prob, interference, count)
        })
        .collect()
}

/// One draw from [`noisy_br_distribution`].
pub fn sample_noisy_br<R: Rng + ?Sized>(
    n: usize,
    profile: &StrategyProfile,
    instance: &Instance,
    beta: f64,
    rng: &mut R,
) -> Result<FairnessAction> {
    Ok(noisy_br_distribution(n, profile, instance, beta)?.sample(rng))
}

/// Best response of `n`: for every channel the optimal `p = 1/(|I_n(k)|+1)`,
/// keeping the channel with the highest `F_n` (lowest index on ties).
pub fn best_response_fairness(n: usize, profile: &StrategyProfile, instance: &Instance) -> (FairnessAction, f64) {
    let graph = instance.graph();
    let mut best: Option<(FairnessAction, f64)> = None;
    for k in instance.allowed_channels(n) {
        let count = count_on_channel(n, k, profile, graph);
        let p = optimal_attempt_probability(count);
        let value = coop_utility_parts(instance.utility(n, k), p, log_interf(n, k, profile, graph), count);
        if best.is_none_or(|(_, v)| value > v) {
            best = Some((FairnessAction { channel: k, attempt_prob: p }, value));
        }
    }
    best.expect("at least one allowed channel")
}

/// Equilibrium test result for the fairness game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessNepReport {
    pub is_nep: bool,
    pub violating_user: Option<usize>,
    pub improving_action: Option<FairnessAction>,
    pub utility_gain: Option<f64>,
}

/// Relative tolerance on `F_n` improvements.
pub const FAIRNESS_NEP_TOLERANCE: f64 = 1e-9;

pub(crate) fn improves(candidate: f64, current: f64) -> bool {
    if current == f64::NEG_INFINITY {
        return candidate > f64::NEG_INFINITY;
    }
    candidate > current + FAIRNESS_NEP_TOLERANCE * current.abs().max(1.0)
}

/// Whether no user can raise `F_n` by any change of channel and attempt
/// probability, and every user has a positive rate. Only the per-channel optimum needs checking, since it
/// dominates every other probability on that channel.
pub fn is_nep_fairness(profile: &StrategyProfile, instance: &Instance) -> FairnessNepReport {
    for n in 0..instance.num_users() {
        let s = profile.get(n);
        let current = cooperative_utility(
            n,
            FairnessAction { channel: s.channel(), attempt_prob: s.attempt_prob() },
            profile,
            instance,
        );
        let (action, value) = best_response_fairness(n, profile, instance);
        // a user with zero rate is never settled, even when nothing it can do helps
        if current == f64::NEG_INFINITY || improves(value, current) {
            return FairnessNepReport {
                is_nep: false,
                violating_user: Some(n),
                improving_action: Some(action),
                utility_gain: (current > f64::NEG_INFINITY).then_some(value - current),
            };
        }
    }
    FairnessNepReport { is_nep: true, violating_user: None, improving_action: None, utility_gain: None }
}

/// A distribution over joint profiles, keyed by [`ProfileKey`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileDistribution {
    pub entries: BTreeMap<ProfileKey, f64>,
}

impl ProfileDistribution {
    pub fn prob(&self, key: &ProfileKey) -> f64 {
        self.entries.get(key).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Half the L1 distance over the union of supports.
    pub fn total_variation(&self, other: &ProfileDistribution) -> f64 {
        let mut sum = 0.0;
        for (key, &p) in &self.entries {
            sum += (p - other.prob(key)).abs();
        }
        for (key, &q) in &other.entries {
            if !self.entries.contains_key(key) {
                sum += q;
            }
        }
        0.5 * sum
    }

    /// The most likely profile.
    pub fn mode(&self) -> Option<(&ProfileKey, f64)> {
        self.entries.iter().fold(None, |best: Option<(&ProfileKey, f64)>, (k, &p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((k, p)),
        })
    }
}

/// Number of joint profiles on the action grids.
pub fn joint_action_space_size(instance: &Instance) -> u128 {
    (0..instance.num_users())
        .map(|n| (instance.num_channels() * (instance.graph().degree(n) + 1)) as u128)
        .try_fold(1u128, |acc, x| acc.checked_mul(x))
        .unwrap_or(u128::MAX)
}

/// Enumerates every joint grid profile.
pub fn enumerate_grid_profiles(instance: &Instance) -> Result<Vec<StrategyProfile>> {
    ensure_single_channel(instance)?;
    let size = joint_action_space_size(instance);
    if size > GIBBS_ENUMERATION_CAP {
        return Err(Error::Capacity { what: "joint action space", size, cap: GIBBS_ENUMERATION_CAP });
    }
    let grids: Vec<Vec<FairnessAction>> = (0..instance.num_users()).map(|n| action_grid(n, instance)).collect();
    let mut digits = vec![0usize; grids.len()];
    let mut out = Vec::with_capacity(size as usize);
    loop {
        out.push(digits.iter().zip(&grids).map(|(&d, g)| g[d].to_strategy()).collect());
        // odometer increment, user 0 fastest
        let mut i = 0;
        loop {
            if i == digits.len() {
                return Ok(out);
            }
            digits[i] += 1;
            if digits[i] < grids[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}

/// Stationary distribution of log-linear learning at fixed `beta`:
/// `Pr(sigma) ∝ exp(beta * phi(sigma))`, zero weight on `-inf`-potential profiles.
pub fn gibbs_stationary(instance: &Instance, beta: f64) -> Result<ProfileDistribution> {
    let profiles = enumerate_grid_profiles(instance)?;
    let potentials: Vec<f64> = profiles.iter().map(|p| exact_potential(p, instance)).collect();
    let probs = softmax(&potentials, beta)
        .ok_or_else(|| Error::Degenerate("every profile has zero potential weight".into()))?;
    let entries = profiles.iter().zip(probs).filter(|(_, p)| *p > 0.0).map(|(profile, p)| (profile.key(), p)).collect();
    Ok(ProfileDistribution { entries })
}

/// The sufficient annealing constant: `N (log max u - log(min u / (d_max + 1)) + d_max log 2)`.
pub fn delta_lower_bound(instance: &Instance) -> Result<f64> {
    let all = instance.utilities().iter().flatten().copied();
    let (min_u, max_u) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), u| (lo.min(u), hi.max(u)));
    if !(min_u > 0.0) {
        return Err(Error::invalid("annealing bound needs strictly positive utilities"));
    }
    let n = instance.num_users() as f64;
    let d = instance.graph().max_degree() as f64;
    Ok(n * (max_u.ln() - (min_u / (d + 1.0)).ln() + d * std::f64::consts::LN_2))
}

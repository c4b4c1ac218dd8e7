//! Non-cooperative distributed rate maximization.
//!
//! Every user transmits at its cap `P_n` and picks the `M` channels that
//! maximize its own expected rate. Best responses sort channels by
//! `u_n(k) * v_n(k)`; the game admits the best-response potential
//!
//! ```text
//! phi(sigma) = sum_n w_n * sum_{k in k_n} [ log u_n(k) - I_n(k) / 2 ],   w_n = -log(1 - P_n)
//! ```
//!
//! so sequential best-response dynamics cannot cycle, although plain
//! better-response dynamics can.

use serde::{Deserialize, Serialize};

use crate::network::{count_on_channel, interference_weight, log_interf, success_prob, user_rate};
use crate::network::{Instance, Strategy, StrategyProfile};
use crate::{Error, Result};

/// Relative tolerance on rate improvements when testing for equilibrium.
pub const NEP_RELATIVE_TOLERANCE: f64 = 1e-9;

/// Outcome of an equilibrium test for the rate-maximization game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrmNepReport {
    pub is_nep: bool,
    /// First user (lowest index) with a strictly better channel set.
    pub violating_user: Option<usize>,
    pub improving_channels: Option<Vec<usize>>,
    pub rate_gain: Option<f64>,
}

/// Per-channel best-response scores `u_n(k) * v_n(k, sigma_-n)`.
pub fn channel_scores(n: usize, profile: &StrategyProfile, instance: &Instance) -> Vec<f64> {
    (0..instance.num_channels())
        .map(|k| instance.utility(n, k) * success_prob(n, k, profile, instance.graph()))
        .collect()
}

/// Top-`M` allowed channels by score; ties go to the lower channel index.
/// The result is sorted ascending.
pub fn top_channels(scores: &[f64], m: usize, allowed: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut order: Vec<usize> = allowed.collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(m);
    order.sort_unstable();
    order
}

/// Best channel set for user `n` against the rest of the profile.
pub fn best_response_drm(n: usize, profile: &StrategyProfile, instance: &Instance) -> Result<Vec<usize>> {
    instance.check_user(n)?;
    profile.validate(instance)?;
    let m = instance.channels_per_user();
    let available = instance.allowed_channels(n).count();
    if available < m {
        return Err(Error::invalid(format!("user {n} has {available} allowed channels but needs {m}")));
    }
    Ok(best_response_unchecked(n, profile, instance))
}

pub(crate) fn best_response_unchecked(n: usize, profile: &StrategyProfile, instance: &Instance) -> Vec<usize> {
    let scores = channel_scores(n, profile, instance);
    top_channels(&scores, instance.channels_per_user(), instance.allowed_channels(n))
}

/// Rate of user `n` if it switched to `channels` at its current attempt probability.
pub(crate) fn rate_with_channels(n: usize, channels: &[usize], profile: &StrategyProfile, instance: &Instance) -> f64 {
    let p = profile.get(n).attempt_prob();
    channels.iter().map(|&k| p * instance.utility(n, k) * success_prob(n, k, profile, instance.graph())).sum()
}

/// Whether `candidate` beats `current` by more than the relative tolerance.
#[inline]
pub(crate) fn strictly_better(candidate: f64, current: f64) -> bool {
    candidate > current + NEP_RELATIVE_TOLERANCE * current.abs().max(f64::MIN_POSITIVE)
}

/// The best-response potential. Weights use the caps `P_n`; interference uses
/// the attempt probabilities in `profile` (which equal the caps in this game).
/// A zero utility on a selected channel yields `-inf`.
pub fn br_potential(profile: &StrategyProfile, instance: &Instance) -> f64 {
    let graph = instance.graph();
    (0..instance.num_users())
        .map(|n| {
            let weight = interference_weight(instance.cap(n));
            let inner: f64 = profile
                .get(n)
                .channels()
                .iter()
                .map(|&k| instance.utility(n, k).ln() - 0.5 * log_interf(n, k, profile, graph))
                .sum();
            weight * inner
        })
        .sum()
}

/// `M * sum_n w_n * max_k log u_n(k)`, an upper bound on [`br_potential`].
pub fn br_potential_upper_bound(instance: &Instance) -> f64 {
    let m = instance.channels_per_user() as f64;
    (0..instance.num_users())
        .map(|n| {
            let best = instance.utilities()[n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m * interference_weight(instance.cap(n)) * best.ln()
        })
        .sum()
}

/// Tests whether no user can strictly raise its rate by changing channel set.
pub fn is_nep_drm(profile: &StrategyProfile, instance: &Instance) -> DrmNepReport {
    for n in 0..instance.num_users() {
        let current = user_rate(n, profile, instance);
        let br = best_response_unchecked(n, profile, instance);
        let candidate = rate_with_channels(n, &br, profile, instance);
        if strictly_better(candidate, current) {
            return DrmNepReport {
                is_nep: false,
                violating_user: Some(n),
                improving_channels: Some(br),
                rate_gain: Some(candidate - current),
            };
        }
    }
    DrmNepReport { is_nep: true, violating_user: None, improving_channels: None, rate_gain: None }
}

fn check_efficiency_regime(num_channels: usize, degree: usize) -> Result<()> {
    if num_channels == 0 {
        return Err(Error::invalid("at least one channel is required"));
    }
    let group = degree + 1;
    if group < num_channels || group % num_channels != 0 {
        return Err(Error::invalid(format!(
            "(degree + 1) / K must be a positive integer at least 1; got degree {degree}, K {num_channels}"
        )));
    }
    Ok(())
}

/// Guaranteed ratio between a user's rate at any best-response equilibrium
/// and its expected rate under random channel selection, on a `degree`-regular
/// graph with equal utilities and caps `K / (degree + 1)`:
///
/// ```text
/// eta = (1 - K/(d+1))^((d+1)/K - 1) / (1 - 1/(d+1))^d
/// ```
///
/// Admissible when `(d + 1) / K` is a positive integer; at `d + 1 = K` the
/// numerator is `0^0 = 1` and `eta = (1 - 1/K)^(1 - K)`.
pub fn efficiency_bound(num_channels: usize, degree: usize) -> Result<f64> {
    check_efficiency_regime(num_channels, degree)?;
    let group = (degree + 1) as f64;
    let k = num_channels as f64;
    let exponent = ((degree + 1) / num_channels - 1) as i32;
    let numerator = (1.0 - k / group).powi(exponent);
    let denominator = (1.0 - 1.0 / group).powi(degree as i32);
    Ok(numerator / denominator)
}

/// Lower bound on a user's rate at a best-response equilibrium in the same
/// regime: `u * K/(d+1) * (1 - K/(d+1))^((d+1)/K - 1)`.
pub fn equilibrium_rate_lower_bound(utility: f64, num_channels: usize, degree: usize) -> Result<f64> {
    check_efficiency_regime(num_channels, degree)?;
    let cap = num_channels as f64 / (degree + 1) as f64;
    let exponent = ((degree + 1) / num_channels - 1) as i32;
    Ok(utility * cap * (1.0 - cap).powi(exponent))
}

/// Expected rate of user `n` when every user picks one channel uniformly at
/// random and transmits with probability `K / (degree + 1)`:
/// `u_n * K/(d+1) * (1 - 1/(d+1))^d`.
///
/// Checks the assumptions: one channel per user, a `degree`-regular graph,
/// equal utilities across channels and caps equal to `K / (degree + 1)`.
pub fn naive_expected_rate(n: usize, instance: &Instance, degree: usize) -> Result<f64> {
    instance.check_user(n)?;
    let k = instance.num_channels();
    check_efficiency_regime(k, degree)?;
    if instance.channels_per_user() != 1 {
        return Err(Error::invalid("random-selection baseline assumes one channel per user"));
    }
    let graph = instance.graph();
    if (0..instance.num_users()).any(|v| graph.degree(v) != degree) {
        return Err(Error::invalid(format!("graph is not {degree}-regular")));
    }
    let cap = k as f64 / (degree + 1) as f64;
    for v in 0..instance.num_users() {
        let row = &instance.utilities()[v];
        if row.iter().any(|&u| u != row[0]) {
            return Err(Error::invalid(format!("user {v} has unequal channel utilities")));
        }
        if (instance.cap(v) - cap).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "user {v} has cap {} but the baseline needs K/(degree+1) = {cap}",
                instance.cap(v)
            )));
        }
    }
    let u = instance.utility(n, 0);
    Ok(u * cap * (1.0 - 1.0 / (degree + 1) as f64).powi(degree as i32))
}

/// Greedy initialization: the `M` allowed channels with highest utility, at the cap.
pub fn initial_profile(instance: &Instance) -> StrategyProfile {
    (0..instance.num_users()).map(|n| initial_strategy(instance, n)).collect()
}

pub(crate) fn initial_strategy(instance: &Instance, n: usize) -> Strategy {
    let channels = top_channels(&instance.utilities()[n], instance.channels_per_user(), instance.allowed_channels(n));
    Strategy::new(channels, instance.cap(n)).expect("caps are valid probabilities")
}

/// Count of neighbors of `n` on its own (single) channel.
pub fn own_channel_load(n: usize, profile: &StrategyProfile, instance: &Instance) -> usize {
    count_on_channel(n, profile.get(n).channel(), profile, instance.graph())
}

//! Collision-channel success probabilities and expected rates.
//!
//! A transmission by user `n` on channel `k` succeeds when no neighbor that
//! selected `k` transmits in the same slot. With independent ALOHA attempts
//! the success probability is the product of `(1 - p_i)` over those neighbors,
//! and the log-interference is its negative logarithm.

use super::{Instance, InterferenceGraph, StrategyProfile};
use crate::{Error, Result};

fn check_indices(n: usize, profile: &StrategyProfile, graph: &InterferenceGraph) -> Result<()> {
    if n >= graph.num_users() || n >= profile.len() {
        return Err(Error::OutOfRange { what: "user", index: n, limit: graph.num_users().min(profile.len()) });
    }
    if profile.len() != graph.num_users() {
        return Err(Error::invalid(format!(
            "profile has {} strategies for {} users",
            profile.len(),
            graph.num_users()
        )));
    }
    Ok(())
}

fn check_channel_bound(k: usize, num_channels: usize) -> Result<()> {
    if k >= num_channels {
        return Err(Error::OutOfRange { what: "channel", index: k, limit: num_channels });
    }
    Ok(())
}

/// `v_n(k)`: probability that no neighbor of `n` transmits on `k`.
///
/// The graph alone does not know `K`, so only the user index is range-checked
/// here; [`expected_rate_on_channel`] checks the channel against the instance.
pub fn success_probability(n: usize, k: usize, profile: &StrategyProfile, graph: &InterferenceGraph) -> Result<f64> {
    check_indices(n, profile, graph)?;
    Ok(success_prob(n, k, profile, graph))
}

/// `I_n(k) = -log v_n(k)`; `+inf` when a neighbor on `k` transmits with probability 1.
pub fn log_interference(n: usize, k: usize, profile: &StrategyProfile, graph: &InterferenceGraph) -> Result<f64> {
    check_indices(n, profile, graph)?;
    Ok(log_interf(n, k, profile, graph))
}

/// `p_n * u_n(k) * v_n(k)`.
pub fn expected_rate_on_channel(n: usize, k: usize, profile: &StrategyProfile, instance: &Instance) -> Result<f64> {
    check_indices(n, profile, instance.graph())?;
    check_channel_bound(k, instance.num_channels())?;
    Ok(channel_rate(n, k, profile, instance))
}

/// `R_n`: the sum of per-channel expected rates over the user's channel set.
pub fn total_expected_rate(n: usize, profile: &StrategyProfile, instance: &Instance) -> Result<f64> {
    check_indices(n, profile, instance.graph())?;
    if let Some(&k) = profile.get(n).channels().iter().find(|&&k| k >= instance.num_channels()) {
        check_channel_bound(k, instance.num_channels())?;
    }
    Ok(user_rate(n, profile, instance))
}

/// `I_n(k)`: neighbors of `n` whose channel set contains `k`, regardless of
/// their attempt probability.
pub fn neighbors_on_channel(
    n: usize,
    k: usize,
    profile: &StrategyProfile,
    graph: &InterferenceGraph,
) -> Result<Vec<usize>> {
    check_indices(n, profile, graph)?;
    Ok(graph.neighbors(n).iter().copied().filter(|&i| profile.get(i).uses(k)).collect())
}

/// Expected rates of every user.
pub fn all_rates(profile: &StrategyProfile, instance: &Instance) -> Vec<f64> {
    (0..instance.num_users()).map(|n| user_rate(n, profile, instance)).collect()
}

/// `sum_n log R_n`, `-inf` if any user has zero rate.
pub fn sum_log_rate(profile: &StrategyProfile, instance: &Instance) -> f64 {
    (0..instance.num_users()).map(|n| user_rate(n, profile, instance).ln()).sum()
}

/// `-log(1 - p)`, the log-interference one transmitter at `p` contributes.
#[inline]
pub fn interference_weight(p: f64) -> f64 {
    -(-p).ln_1p()
}

#[inline]
pub(crate) fn success_prob(n: usize, k: usize, profile: &StrategyProfile, graph: &InterferenceGraph) -> f64 {
    graph.neighbors(n).iter().map(|&i| profile.get(i)).filter(|s| s.uses(k)).map(|s| 1.0 - s.attempt_prob()).product()
}

#[inline]
pub(crate) fn log_interf(n: usize, k: usize, profile: &StrategyProfile, graph: &InterferenceGraph) -> f64 {
    graph
        .neighbors(n)
        .iter()
        .map(|&i| profile.get(i))
        .filter(|s| s.uses(k))
        .map(|s| interference_weight(s.attempt_prob()))
        .sum()
}

#[inline]
pub(crate) fn count_on_channel(n: usize, k: usize, profile: &StrategyProfile, graph: &InterferenceGraph) -> usize {
    graph.neighbors(n).iter().filter(|&&i| profile.get(i).uses(k)).count()
}

#[inline]
pub(crate) fn channel_rate(n: usize, k: usize, profile: &StrategyProfile, instance: &Instance) -> f64 {
    profile.get(n).attempt_prob() * instance.utility(n, k) * success_prob(n, k, profile, instance.graph())
}

#[inline]
pub(crate) fn user_rate(n: usize, profile: &StrategyProfile, instance: &Instance) -> f64 {
    profile.get(n).channels().iter().map(|&k| channel_rate(n, k, profile, instance)).sum()
}

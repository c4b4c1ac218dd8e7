//! Brute-force references.
//!
//! Everything here enumerates. Rates are recomputed from the collision model
//! directly rather than through the game modules, so these functions can be
//! used to check them.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::fairness::{is_nep_fairness, ProfileDistribution};
use crate::network::{Instance, ProfileKey, Strategy, StrategyProfile};
use crate::{Error, Result};

/// Largest number of joint profiles any oracle will enumerate.
pub const ORACLE_CAP: u128 = 10_000_000;

/// Two values closer than this (relative, floor 1) count as tied optima.
pub const OPTIMUM_TOLERANCE: f64 = 1e-9;

/// Relative tolerance for deviations in the brute-force equilibrium test.
const DEVIATION_TOLERANCE: f64 = 1e-9;

/// Best value of an exhaustive search with every profile attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub optimum_value: f64,
    pub optimizers: Vec<StrategyProfile>,
    pub search_size: u128,
}

/// All allowed `M`-subsets of user `n`'s channels, lexicographic.
pub fn channel_subsets(instance: &Instance, n: usize) -> Vec<Vec<usize>> {
    let pool: Vec<usize> = instance.allowed_channels(n).collect();
    let m = instance.channels_per_user();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    if m > pool.len() {
        return out;
    }
    loop {
        out.push(idx.iter().map(|&i| pool[i]).collect());
        // advance the rightmost index that still has room
        let Some(i) = (0..m).rev().find(|&i| idx[i] < pool.len() - m + i) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..m {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn space_size(choices: &[Vec<Vec<usize>>]) -> u128 {
    choices.iter().map(|c| c.len() as u128).try_fold(1u128, |acc, x| acc.checked_mul(x)).unwrap_or(u128::MAX)
}

fn check_capacity(what: &'static str, size: u128) -> Result<()> {
    if size > ORACLE_CAP {
        return Err(Error::Capacity { what, size, cap: ORACLE_CAP });
    }
    Ok(())
}

fn all_choices(instance: &Instance) -> Vec<Vec<Vec<usize>>> {
    (0..instance.num_users()).map(|n| channel_subsets(instance, n)).collect()
}

/// Visits the mixed-radix index range `[start, end)` (user 0 fastest).
fn for_each_in_range(radices: &[usize], start: usize, end: usize, mut visit: impl FnMut(&[usize])) {
    let mut digits = vec![0usize; radices.len()];
    let mut rest = start;
    for (d, &r) in digits.iter_mut().zip(radices) {
        *d = rest % r;
        rest /= r;
    }
    for _ in start..end {
        visit(&digits);
        for (d, &r) in digits.iter_mut().zip(radices) {
            *d += 1;
            if *d < r {
                break;
            }
            *d = 0;
        }
    }
}

fn chunks(total: usize) -> Vec<(usize, usize)> {
    let pieces = 256.min(total.max(1));
    let step = total.div_ceil(pieces).max(1);
    (0..total).step_by(step).map(|s| (s, (s + step).min(total))).collect()
}

fn within_tolerance(value: f64, best: f64) -> bool {
    value == best || (best.is_finite() && (value - best).abs() <= OPTIMUM_TOLERANCE * best.abs().max(1.0))
}

/// A chunk's best value with its near-tied candidates (value, digits).
type ChunkBest = (f64, Vec<(f64, Vec<usize>)>);

/// Parallel arg-max over the whole space, keeping every near-tied maximizer
/// in index order.
fn enumerate_max(radices: &[usize], eval: impl Fn(&[usize]) -> f64 + Sync) -> (f64, Vec<Vec<usize>>) {
    let total: usize = radices.iter().product();
    let partial: Vec<ChunkBest> = chunks(total)
        .into_par_iter()
        .map(|(start, end)| {
            let mut best = f64::NEG_INFINITY;
            let mut keep: Vec<(f64, Vec<usize>)> = Vec::new();
            for_each_in_range(radices, start, end, |digits| {
                let v = eval(digits);
                if v > best && !within_tolerance(v, best) {
                    best = v;
                    keep.retain(|(x, _)| within_tolerance(*x, best));
                }
                if within_tolerance(v, best) && v > f64::NEG_INFINITY {
                    keep.push((v, digits.to_vec()));
                }
            });
            (best, keep)
        })
        .collect();
    let best = partial.iter().map(|(b, _)| *b).fold(f64::NEG_INFINITY, f64::max);
    let winners = partial
        .into_iter()
        .flat_map(|(_, keep)| keep)
        .filter(|(v, _)| within_tolerance(*v, best))
        .map(|(_, d)| d)
        .collect();
    (best, winners)
}

fn enumerate_filter(radices: &[usize], keep: impl Fn(&[usize]) -> bool + Sync) -> Vec<Vec<usize>> {
    let total: usize = radices.iter().product();
    chunks(total)
        .into_par_iter()
        .map(|(start, end)| {
            let mut out = Vec::new();
            for_each_in_range(radices, start, end, |digits| {
                if keep(digits) {
                    out.push(digits.to_vec());
                }
            });
            out
        })
        .flatten()
        .collect()
}

/// Log of user `n`'s expected rate when user `i` sits on `channels[i]` with
/// attempt probability `probs[i]`.
fn log_rate(instance: &Instance, n: usize, channels: &[&[usize]], probs: &[f64]) -> f64 {
    let mut rate = 0.0;
    for &k in channels[n] {
        let mut v = 1.0;
        for &r in instance.graph().neighbors(n) {
            if channels[r].contains(&k) {
                v *= 1.0 - probs[r];
            }
        }
        rate += probs[n] * instance.utility(n, k) * v;
    }
    rate.ln()
}

/// Number of neighbors of `n` sharing its (single) channel.
fn sharing_neighbors(instance: &Instance, n: usize, channels: &[&[usize]]) -> usize {
    instance.graph().neighbors(n).iter().filter(|&&r| channels[r] == channels[n]).count()
}

fn fair_probs(instance: &Instance, channels: &[&[usize]]) -> Vec<f64> {
    (0..instance.num_users()).map(|n| 1.0 / (sharing_neighbors(instance, n, channels) as f64 + 1.0)).collect()
}

fn decode<'a>(choices: &'a [Vec<Vec<usize>>], digits: &[usize]) -> Vec<&'a [usize]> {
    digits.iter().zip(choices).map(|(&d, c)| c[d].as_slice()).collect()
}

fn to_profile(channels: &[&[usize]], probs: &[f64]) -> StrategyProfile {
    channels
        .iter()
        .zip(probs)
        .map(|(c, &p)| Strategy::new(c.to_vec(), p).expect("enumerated strategies are valid"))
        .collect()
}

fn require_single_channel(instance: &Instance) -> Result<()> {
    if instance.channels_per_user() != 1 {
        return Err(Error::invalid("this oracle needs one channel per user"));
    }
    Ok(())
}

/// Maximum sum-log rate over all channel allocations, each user at
/// `1 / (neighbors sharing its channel + 1)`.
pub fn exhaustive_sum_log_rate(instance: &Instance) -> Result<OracleResult> {
    require_single_channel(instance)?;
    let choices = all_choices(instance);
    let search_size = space_size(&choices);
    check_capacity("channel allocations", search_size)?;
    let radices: Vec<usize> = choices.iter().map(Vec::len).collect();
    let (best, winners) = enumerate_max(&radices, |digits| {
        let channels = decode(&choices, digits);
        let probs = fair_probs(instance, &channels);
        (0..instance.num_users()).map(|n| log_rate(instance, n, &channels, &probs)).sum()
    });
    let optimizers = winners
        .iter()
        .map(|d| {
            let channels = decode(&choices, d);
            to_profile(&channels, &fair_probs(instance, &channels))
        })
        .collect();
    Ok(OracleResult { optimum_value: best, optimizers, search_size })
}

/// Maximum sum-log rate over all channel-set profiles with every user at its cap.
pub fn exhaustive_sum_log_rate_fixed_caps(instance: &Instance) -> Result<OracleResult> {
    let choices = all_choices(instance);
    let search_size = space_size(&choices);
    check_capacity("channel-set profiles", search_size)?;
    let radices: Vec<usize> = choices.iter().map(Vec::len).collect();
    let caps = instance.caps();
    let (best, winners) = enumerate_max(&radices, |digits| {
        let channels = decode(&choices, digits);
        (0..instance.num_users()).map(|n| log_rate(instance, n, &channels, caps)).sum()
    });
    let optimizers = winners.iter().map(|d| to_profile(&decode(&choices, d), caps)).collect();
    Ok(OracleResult { optimum_value: best, optimizers, search_size })
}

fn rate_on(instance: &Instance, n: usize, set: &[usize], channels: &[&[usize]], probs: &[f64]) -> f64 {
    set.iter()
        .map(|&k| {
            let v: f64 = instance
                .graph()
                .neighbors(n)
                .iter()
                .filter(|&&r| channels[r].contains(&k))
                .map(|&r| 1.0 - probs[r])
                .product();
            probs[n] * instance.utility(n, k) * v
        })
        .sum()
}

/// Every cap profile in which no user can strictly raise its rate (relative
/// tolerance 1e-9) by switching to another allowed channel set.
pub fn exhaustive_drm_nep_enumeration(instance: &Instance) -> Result<Vec<StrategyProfile>> {
    let choices = all_choices(instance);
    check_capacity("channel-set profiles", space_size(&choices))?;
    let radices: Vec<usize> = choices.iter().map(Vec::len).collect();
    let caps = instance.caps();
    let neps = enumerate_filter(&radices, |digits| {
        let channels = decode(&choices, digits);
        (0..instance.num_users()).all(|n| {
            let now = rate_on(instance, n, channels[n], &channels, caps);
            choices[n].iter().all(|alt| {
                let r = rate_on(instance, n, alt, &channels, caps);
                r <= now + DEVIATION_TOLERANCE * now.abs().max(f64::MIN_POSITIVE)
            })
        })
    });
    Ok(neps.iter().map(|d| to_profile(&decode(&choices, d), caps)).collect())
}

/// Best channel set for user `n` by scoring every allowed `M`-subset; the
/// lexicographically first maximizer wins ties.
pub fn brute_force_best_response(n: usize, profile: &StrategyProfile, instance: &Instance) -> Result<Vec<usize>> {
    if n >= instance.num_users() {
        return Err(Error::OutOfRange { what: "user", index: n, limit: instance.num_users() });
    }
    profile.validate(instance)?;
    let score = |set: &[usize]| -> f64 {
        set.iter()
            .map(|&k| {
                let v: f64 = instance
                    .graph()
                    .neighbors(n)
                    .iter()
                    .map(|&r| profile.get(r))
                    .filter(|s| s.channels().contains(&k))
                    .map(|s| 1.0 - s.attempt_prob())
                    .product();
                instance.utility(n, k) * v
            })
            .sum()
    };
    let mut best: Option<(Vec<usize>, f64)> = None;
    for set in channel_subsets(instance, n) {
        let s = score(&set);
        match &best {
            Some((_, b)) if s <= *b + 1e-12 * b.abs() => {}
            _ => best = Some((set, s)),
        }
    }
    best.map(|(set, _)| set).ok_or_else(|| Error::invalid(format!("user {n} has fewer allowed channels than it needs")))
}

/// Every channel allocation with the optimal attempt probabilities that passes the
/// fairness equilibrium test.
pub fn exhaustive_fairness_nep_enumeration(instance: &Instance) -> Result<Vec<StrategyProfile>> {
    require_single_channel(instance)?;
    let choices = all_choices(instance);
    check_capacity("channel allocations", space_size(&choices))?;
    let radices: Vec<usize> = choices.iter().map(Vec::len).collect();
    let neps = enumerate_filter(&radices, |digits| {
        let channels = decode(&choices, digits);
        let profile = to_profile(&channels, &fair_probs(instance, &channels));
        is_nep_fairness(&profile, instance).is_nep
    });
    Ok(neps
        .iter()
        .map(|d| {
            let channels = decode(&choices, d);
            to_profile(&channels, &fair_probs(instance, &channels))
        })
        .collect())
}

/// Visit frequencies of the profiles after the first `burn_in` steps.
pub fn empirical_visit_distribution(trajectory: &Trajectory, burn_in: usize) -> Result<ProfileDistribution> {
    let mut counter = VisitCounter::default();
    for step in trajectory.steps.iter().skip(burn_in) {
        counter.observe(&step.profile);
    }
    counter.distribution()
}

/// Streaming visit counts, for runs too long to keep as a trajectory.
#[derive(Debug, Clone, Default)]
pub struct VisitCounter {
    counts: HashMap<ProfileKey, u64>,
    total: u64,
}

impl VisitCounter {
    pub fn observe(&mut self, profile: &StrategyProfile) {
        *self.counts.entry(profile.key()).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distribution(&self) -> Result<ProfileDistribution> {
        if self.total == 0 {
            return Err(Error::invalid("no visits after burn-in"));
        }
        let total = self.total as f64;
        Ok(ProfileDistribution { entries: self.counts.iter().map(|(k, &c)| (k.clone(), c as f64 / total)).collect() })
    }
}

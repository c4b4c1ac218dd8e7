//! Slot-level collision channel and the moving-window success estimator.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::network::{Instance, StrategyProfile};
use crate::{Error, Result};

/// Default estimator window, in slots.
pub const DEFAULT_WINDOW: usize = 100;

/// What happened in one slot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotOutcome {
    /// Whether each user transmitted (on all of its channels at once).
    pub transmitted: Vec<bool>,
    /// Per user, aligned with its channel set: whether the packet got through.
    /// Empty for users that stayed silent.
    pub success: Vec<Vec<bool>>,
    /// Per user and channel: whether some neighbor transmitted on that channel.
    pub busy: Vec<Vec<bool>>,
}

impl SlotOutcome {
    /// Collision-free utility delivered to user `n` in this slot.
    pub fn delivered(&self, n: usize, profile: &StrategyProfile, instance: &Instance) -> f64 {
        profile
            .get(n)
            .channels()
            .iter()
            .zip(&self.success[n])
            .filter(|(_, &ok)| ok)
            .map(|(&k, _)| instance.utility(n, k))
            .sum()
    }
}

/// Draws one slot: user `n` transmits with probability `p_n` on every channel
/// of its set; a transmission on `k` succeeds iff no neighbor transmits on `k`.
pub fn simulate_slot<R: Rng + ?Sized>(profile: &StrategyProfile, instance: &Instance, rng: &mut R) -> SlotOutcome {
    let mut out = SlotOutcome::default();
    simulate_slot_into(profile, instance, rng, &mut out);
    out
}

/// [`simulate_slot`] reusing the buffers of `out`.
pub fn simulate_slot_into<R: Rng + ?Sized>(
    profile: &StrategyProfile,
    instance: &Instance,
    rng: &mut R,
    out: &mut SlotOutcome,
) {
    let n_users = instance.num_users();
    let k_total = instance.num_channels();
    let graph = instance.graph();

    out.transmitted.clear();
    out.transmitted.extend(profile.iter().map(|s| rng.random::<f64>() < s.attempt_prob()));

    out.busy.resize_with(n_users, Vec::new);
    for n in 0..n_users {
        let row = &mut out.busy[n];
        row.clear();
        row.resize(k_total, false);
        for &r in graph.neighbors(n) {
            if out.transmitted[r] {
                for &k in profile.get(r).channels() {
                    row[k] = true;
                }
            }
        }
    }

    out.success.resize_with(n_users, Vec::new);
    for n in 0..n_users {
        let row = &mut out.success[n];
        row.clear();
        if out.transmitted[n] {
            row.extend(profile.get(n).channels().iter().map(|&k| !out.busy[n][k]));
        }
    }
}

/// Fraction of `window` slots in which no neighbor of `n` used channel `k`.
pub fn estimate_success_probability(n: usize, k: usize, window: &[SlotOutcome]) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::Estimation("empty observation window".into()));
    }
    let mut idle = 0usize;
    for slot in window {
        let busy = slot.busy.get(n).and_then(|row| row.get(k)).ok_or(Error::OutOfRange {
            what: "user/channel",
            index: n,
            limit: slot.busy.len(),
        })?;
        if !busy {
            idle += 1;
        }
    }
    Ok(idle as f64 / window.len() as f64)
}

/// Running idle/busy windows for every (user, channel) pair.
#[derive(Debug, Clone)]
pub struct WindowEstimator {
    window: usize,
    idle: Vec<Vec<VecDeque<bool>>>,
    idle_counts: Vec<Vec<usize>>,
}

impl WindowEstimator {
    pub fn new(num_users: usize, num_channels: usize, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("estimator window must hold at least one slot"));
        }
        Ok(Self {
            window,
            idle: vec![vec![VecDeque::with_capacity(window); num_channels]; num_users],
            idle_counts: vec![vec![0; num_channels]; num_users],
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Makes room for a user appended to the instance.
    pub fn add_user(&mut self) {
        let k = self.idle.first().map_or(0, Vec::len);
        self.idle.push(vec![VecDeque::with_capacity(self.window); k]);
        self.idle_counts.push(vec![0; k]);
    }

    pub fn observe(&mut self, slot: &SlotOutcome) {
        for (n, row) in slot.busy.iter().enumerate() {
            for (k, &busy) in row.iter().enumerate() {
                let buf = &mut self.idle[n][k];
                if buf.len() == self.window && buf.pop_front() == Some(true) {
                    self.idle_counts[n][k] -= 1;
                }
                buf.push_back(!busy);
                if !busy {
                    self.idle_counts[n][k] += 1;
                }
            }
        }
    }

    /// Discards the observations of user `n` on channel `k`.
    pub fn flush(&mut self, n: usize, k: usize) {
        self.idle[n][k].clear();
        self.idle_counts[n][k] = 0;
    }

    pub fn len(&self, n: usize, k: usize) -> usize {
        self.idle[n][k].len()
    }

    pub fn estimate(&self, n: usize, k: usize) -> Result<f64> {
        let len = self.idle[n][k].len();
        if len == 0 {
            return Err(Error::Estimation(format!("no observations for user {n} on channel {k}")));
        }
        Ok(self.idle_counts[n][k] as f64 / len as f64)
    }
}

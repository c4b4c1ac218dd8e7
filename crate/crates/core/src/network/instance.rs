use serde::{Deserialize, Serialize};

use super::InterferenceGraph;
use crate::{Error, Result};

/// One user's strategy: the channels it transmits on and its attempt probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    channels: Vec<usize>,
    attempt_prob: f64,
}

impl Strategy {
    /// Channels are sorted; duplicates and probabilities outside `[0, 1]` are rejected.
    pub fn new(mut channels: Vec<usize>, attempt_prob: f64) -> Result<Self> {
        channels.sort_unstable();
        if channels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate channel in {channels:?}")));
        }
        if !(0.0..=1.0).contains(&attempt_prob) {
            return Err(Error::invalid(format!("attempt probability {attempt_prob} outside [0, 1]")));
        }
        Ok(Self { channels, attempt_prob })
    }

    pub fn single(channel: usize, attempt_prob: f64) -> Result<Self> {
        Self::new(vec![channel], attempt_prob)
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn attempt_prob(&self) -> f64 {
        self.attempt_prob
    }

    /// True when `k` is one of the selected channels.
    pub fn uses(&self, k: usize) -> bool {
        self.channels.binary_search(&k).is_ok()
    }

    /// The single channel of a one-channel strategy (first channel otherwise).
    pub fn channel(&self) -> usize {
        self.channels[0]
    }
}

/// Joint strategy of all users, indexed by user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile {
    strategies: Vec<Strategy>,
}

/// Hashable identity of a profile: channel sets plus exact probability bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProfileKey(pub Vec<(Vec<usize>, u64)>);

impl StrategyProfile {
    pub fn new(strategies: Vec<Strategy>) -> Self {
        Self { strategies }
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn get(&self, n: usize) -> &Strategy {
        &self.strategies[n]
    }

    pub fn set(&mut self, n: usize, strategy: Strategy) {
        self.strategies[n] = strategy;
    }

    pub fn push(&mut self, strategy: Strategy) {
        self.strategies.push(strategy);
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Strategy> {
        self.strategies.iter()
    }

    pub fn key(&self) -> ProfileKey {
        ProfileKey(self.strategies.iter().map(|s| (s.channels.clone(), s.attempt_prob.to_bits())).collect())
    }

    /// Copy of this profile with user `n` playing `strategy`.
    pub fn with(&self, n: usize, strategy: Strategy) -> Self {
        let mut next = self.clone();
        next.strategies[n] = strategy;
        next
    }

    /// Checks shape against an instance: one strategy per user, valid channel
    /// indices, and exactly `channels_per_user` channels each.
    pub fn validate(&self, instance: &Instance) -> Result<()> {
        if self.len() != instance.num_users() {
            return Err(Error::invalid(format!(
                "profile has {} strategies for {} users",
                self.len(),
                instance.num_users()
            )));
        }
        for (n, s) in self.strategies.iter().enumerate() {
            if s.channels.len() != instance.channels_per_user() {
                return Err(Error::invalid(format!(
                    "user {n} holds {} channels, expected {}",
                    s.channels.len(),
                    instance.channels_per_user()
                )));
            }
            if let Some(&k) = s.channels.iter().find(|&&k| k >= instance.num_channels()) {
                return Err(Error::OutOfRange { what: "channel", index: k, limit: instance.num_channels() });
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a StrategyProfile {
    type Item = &'a Strategy;
    type IntoIter = std::slice::Iter<'a, Strategy>;

    fn into_iter(self) -> Self::IntoIter {
        self.strategies.iter()
    }
}

impl FromIterator<Strategy> for StrategyProfile {
    fn from_iter<I: IntoIterator<Item = Strategy>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Full game description: graph, channel counts, collision-free utilities
/// `u_n(k)` (Mbps), attempt-probability caps and an optional channel mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    graph: InterferenceGraph,
    num_channels: usize,
    channels_per_user: usize,
    utilities: Vec<Vec<f64>>,
    caps: Vec<f64>,
    allowed: Option<Vec<Vec<bool>>>,
}

impl Instance {
    /// Caps must lie in `(0, 1]`; a cap of exactly 1 is only meaningful for the
    /// equal-utility regular-graph setting where `K / (degree + 1) = 1`.
    pub fn new(
        graph: InterferenceGraph,
        num_channels: usize,
        channels_per_user: usize,
        utilities: Vec<Vec<f64>>,
        caps: Vec<f64>,
    ) -> Result<Self> {
        let n = graph.num_users();
        if num_channels == 0 {
            return Err(Error::invalid("at least one channel is required"));
        }
        if channels_per_user == 0 || channels_per_user > num_channels {
            return Err(Error::invalid(format!(
                "channels per user {channels_per_user} must lie in [1, {num_channels}]"
            )));
        }
        if utilities.len() != n || caps.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} utility rows and caps, got {} and {}",
                utilities.len(),
                caps.len()
            )));
        }
        for (user, row) in utilities.iter().enumerate() {
            check_utility_row(user, row, num_channels)?;
        }
        for (user, &cap) in caps.iter().enumerate() {
            check_cap(user, cap)?;
        }
        Ok(Self { graph, num_channels, channels_per_user, utilities, caps, allowed: None })
    }

    /// Restricts each user to a subset of channels (a binary attempt mask).
    pub fn with_allowed(mut self, allowed: Vec<Vec<bool>>) -> Result<Self> {
        if allowed.len() != self.num_users() {
            return Err(Error::invalid("mask must have one row per user"));
        }
        for (user, row) in allowed.iter().enumerate() {
            self.check_mask_row(user, row)?;
        }
        self.allowed = Some(allowed);
        Ok(self)
    }

    fn check_mask_row(&self, user: usize, row: &[bool]) -> Result<()> {
        if row.len() != self.num_channels {
            return Err(Error::invalid(format!(
                "mask row {user} has {} entries, expected {}",
                row.len(),
                self.num_channels
            )));
        }
        let count = row.iter().filter(|&&a| a).count();
        if count < self.channels_per_user {
            return Err(Error::invalid(format!(
                "user {user} is allowed {count} channels but needs {}",
                self.channels_per_user
            )));
        }
        Ok(())
    }

    /// Appends a user and returns its index.
    pub fn add_user(
        &mut self,
        neighbors: &[usize],
        utilities: Vec<f64>,
        cap: f64,
        allowed: Option<Vec<bool>>,
    ) -> Result<usize> {
        let user = self.num_users();
        check_utility_row(user, &utilities, self.num_channels)?;
        check_cap(user, cap)?;
        match (&self.allowed, &allowed) {
            (Some(_), None) => return Err(Error::invalid("instance has a channel mask; new user needs one")),
            (_, Some(row)) => self.check_mask_row(user, row)?,
            _ => {}
        }
        self.graph.add_user(neighbors)?;
        self.utilities.push(utilities);
        self.caps.push(cap);
        if let Some(row) = allowed {
            self.allowed.get_or_insert_with(|| vec![vec![true; self.num_channels]; user]).push(row);
        }
        Ok(user)
    }

    pub fn graph(&self) -> &InterferenceGraph {
        &self.graph
    }

    pub fn num_users(&self) -> usize {
        self.graph.num_users()
    }

    pub fn num_channels(&self) -> usize {
        self.num_channels
    }

    pub fn channels_per_user(&self) -> usize {
        self.channels_per_user
    }

    pub fn utility(&self, n: usize, k: usize) -> f64 {
        self.utilities[n][k]
    }

    pub fn utilities(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub fn cap(&self, n: usize) -> f64 {
        self.caps[n]
    }

    pub fn caps(&self) -> &[f64] {
        &self.caps
    }

    pub fn allowed(&self) -> Option<&[Vec<bool>]> {
        self.allowed.as_deref()
    }

    pub fn is_allowed(&self, n: usize, k: usize) -> bool {
        self.allowed.as_ref().is_none_or(|mask| mask[n][k])
    }

    /// Channels user `n` may select, ascending.
    pub fn allowed_channels(&self, n: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_channels).filter(move |&k| self.is_allowed(n, k))
    }

    pub(crate) fn check_user(&self, n: usize) -> Result<()> {
        if n >= self.num_users() {
            return Err(Error::OutOfRange { what: "user", index: n, limit: self.num_users() });
        }
        Ok(())
    }

    /// Same game with users relabelled (`perm[old] = new`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let graph = self.graph.permuted(perm)?;
        let n = self.num_users();
        let mut utilities = vec![Vec::new(); n];
        let mut caps = vec![0.0; n];
        for old in 0..n {
            utilities[perm[old]] = self.utilities[old].clone();
            caps[perm[old]] = self.caps[old];
        }
        let mut inst = Instance::new(graph, self.num_channels, self.channels_per_user, utilities, caps)?;
        if let Some(mask) = &self.allowed {
            let mut rows = vec![Vec::new(); n];
            for old in 0..n {
                rows[perm[old]] = mask[old].clone();
            }
            inst = inst.with_allowed(rows)?;
        }
        Ok(inst)
    }
}

fn check_utility_row(user: usize, row: &[f64], num_channels: usize) -> Result<()> {
    if row.len() != num_channels {
        return Err(Error::invalid(format!("utility row {user} has {} entries, expected {num_channels}", row.len())));
    }
    if let Some(u) = row.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
        return Err(Error::invalid(format!("utility {u} of user {user} is not a nonnegative finite rate")));
    }
    Ok(())
}

fn check_cap(user: usize, cap: f64) -> Result<()> {
    if !(cap > 0.0 && cap <= 1.0) {
        return Err(Error::invalid(format!("cap {cap} of user {user} outside (0, 1]")));
    }
    Ok(())
}

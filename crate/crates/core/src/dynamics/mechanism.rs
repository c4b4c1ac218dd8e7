//! Who updates at each updating time.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::harness::tagged::tagged_enum;
use crate::network::InterferenceGraph;
use crate::{Error, Result};

tagged_enum! {
    /// Rule selecting the active users at an updating time.
    #[derive(Debug, Clone, PartialEq)]
    pub enum UpdateMechanism via MechanismRepr {
        /// Every user draws a backoff uniform on `[0, bound]`; a user is active
        /// when its draw beats all of its neighbors' draws. Active sets are
        /// independent in the interference graph.
        Backoff { bound: f64 },
        /// User `n` is active independently with probability `q_n`. A single
        /// entry applies to every user, including users added mid-run.
        Probabilistic { probs: Vec<f64> },
        /// One user per updating time, round robin starting from user 0.
        SweepSequential,
    }
}

impl UpdateMechanism {
    pub fn backoff() -> Self {
        Self::Backoff { bound: 1.0 }
    }

    /// The same `q` for every user.
    pub fn uniform_probabilistic(q: f64) -> Self {
        Self::Probabilistic { probs: vec![q] }
    }

    pub fn validate(&self, num_users: usize) -> Result<()> {
        match self {
            Self::Backoff { bound } => {
                if !(*bound > 0.0) || !bound.is_finite() {
                    return Err(Error::invalid(format!("backoff bound must be positive, got {bound}")));
                }
            }
            Self::Probabilistic { probs } => {
                if probs.is_empty() || (probs.len() != 1 && probs.len() != num_users) {
                    return Err(Error::invalid(format!(
                        "need one update probability or one per user ({num_users}), got {}",
                        probs.len()
                    )));
                }
                if let Some(q) = probs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
                    return Err(Error::invalid(format!("update probabilities must lie in (0, 1), got {q}")));
                }
            }
            Self::SweepSequential => {}
        }
        Ok(())
    }

    /// Update probability of user `n` under the probabilistic rule.
    pub fn update_prob(&self, n: usize) -> Option<f64> {
        match self {
            // users past the end of the list take the last entry
            Self::Probabilistic { probs } => probs.get(n).or(probs.last()).copied(),
            _ => None,
        }
    }

    /// Active users at updating time `t` (counted from 1), ascending.
    pub fn select_active<R: Rng + ?Sized>(&self, graph: &InterferenceGraph, t: u64, rng: &mut R) -> Vec<usize> {
        let n = graph.num_users();
        if n == 0 {
            return Vec::new();
        }
        match self {
            Self::Backoff { bound } => {
                let draws: Vec<f64> = (0..n).map(|_| bound * rng.random::<f64>()).collect();
                (0..n).filter(|&u| graph.neighbors(u).iter().all(|&r| (draws[u], u) < (draws[r], r))).collect()
            }
            Self::Probabilistic { .. } => {
                (0..n).filter(|&u| rng.random::<f64>() < self.update_prob(u).unwrap_or(0.0)).collect()
            }
            Self::SweepSequential => vec![((t.max(1) - 1) % n as u64) as usize],
        }
    }

    /// Whether updates under this rule never touch two neighbors at once.
    pub fn is_sequential(&self) -> bool {
        !matches!(self, Self::Probabilistic { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generate::build_random_graph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn backoff_on_edgeless_graph_activates_everyone() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = InterferenceGraph::empty(7);
        assert_eq!(UpdateMechanism::backoff().select_active(&g, 1, &mut rng), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn backoff_on_complete_graph_activates_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = InterferenceGraph::complete(9);
        for t in 1..200 {
            assert_eq!(UpdateMechanism::backoff().select_active(&g, t, &mut rng).len(), 1);
        }
    }

    #[test]
    fn backoff_sets_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mech = UpdateMechanism::Backoff { bound: 3.0 };
        for i in 0..100_000u64 {
            let g = build_random_graph(&mut rng, 1 + (i % 12) as usize, 0.4);
            let active = mech.select_active(&g, i + 1, &mut rng);
            assert!(!active.is_empty());
            assert!(g.is_independent_set(&active));
        }
    }

    #[test]
    fn sweep_is_round_robin() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = InterferenceGraph::complete(3);
        let seq: Vec<usize> =
            (1..=7).map(|t| UpdateMechanism::SweepSequential.select_active(&g, t, &mut rng)[0]).collect();
        assert_eq!(seq, vec![0, 1, 2, 0, 1, 2, 0]);
    }

    #[test]
    fn probabilistic_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = InterferenceGraph::complete(4);
        let mech = UpdateMechanism::Probabilistic { probs: vec![0.1, 0.3, 0.5, 0.9] };
        mech.validate(4).unwrap();
        let trials = 100_000;
        let mut hits = [0usize; 4];
        for t in 1..=trials {
            for u in mech.select_active(&g, t, &mut rng) {
                hits[u] += 1;
            }
        }
        for (u, &q) in [0.1, 0.3, 0.5, 0.9].iter().enumerate() {
            let sigma = (q * (1.0 - q) / trials as f64).sqrt();
            let freq = hits[u] as f64 / trials as f64;
            assert!((freq - q).abs() <= 3.0 * sigma, "user {u}: {freq} vs {q}");
        }
    }

    #[test]
    fn validation() {
        assert!(UpdateMechanism::Backoff { bound: 0.0 }.validate(3).is_err());
        assert!(UpdateMechanism::Probabilistic { probs: vec![0.3, 0.3] }.validate(3).is_err());
        assert!(UpdateMechanism::uniform_probabilistic(1.0).validate(3).is_err());
        assert!(UpdateMechanism::uniform_probabilistic(0.3).validate(3).is_ok());
    }
}

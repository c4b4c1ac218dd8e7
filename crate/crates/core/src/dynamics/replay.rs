//! Scripted better-response moves.

use std::collections::HashMap;

use super::{Termination, Trajectory, TrajectoryStep};
use crate::drm::{br_potential, is_nep_drm, rate_with_channels, strictly_better};
use crate::network::{all_rates, user_rate, Instance, Strategy, StrategyProfile};
use crate::{Error, Result};

/// Applies `moves` (user, new channel set) one at a time from `initial`.
/// Every move must strictly raise the mover's rate. The first revisit of an
/// earlier profile is reported as a cycle; remaining moves are still applied.
/// Without a revisit the termination is [`Termination::MaxIters`] (moves exhausted).
pub fn run_better_response_replay(
    instance: &Instance,
    initial: &StrategyProfile,
    moves: &[(usize, Vec<usize>)],
) -> Result<Trajectory> {
    initial.validate(instance)?;
    let snapshot = |time: u64, active: Vec<usize>, profile: &StrategyProfile| TrajectoryStep {
        time,
        active,
        profile: profile.clone(),
        potential: br_potential(profile, instance),
        rates: all_rates(profile, instance),
        at_nep: is_nep_drm(profile, instance).is_nep,
    };
    let mut profile = initial.clone();
    let mut steps = vec![snapshot(0, Vec::new(), &profile)];
    let mut seen = HashMap::from([(profile.key(), 0usize)]);
    let mut cycle = None;

    for (i, (n, channels)) in moves.iter().enumerate() {
        let step = i + 1;
        let n = *n;
        if n >= instance.num_users() {
            return Err(Error::MoveRejected { step, reason: format!("no user {n}") });
        }
        let current = profile.get(n);
        let strategy = Strategy::new(channels.clone(), current.attempt_prob())
            .map_err(|e| Error::MoveRejected { step, reason: e.to_string() })?;
        let candidate = profile.with(n, strategy.clone());
        candidate.validate(instance).map_err(|e| Error::MoveRejected { step, reason: e.to_string() })?;
        let before = user_rate(n, &profile, instance);
        let after = rate_with_channels(n, strategy.channels(), &profile, instance);
        if !strictly_better(after, before) {
            return Err(Error::MoveRejected {
                step,
                reason: format!("user {n} rate {before} -> {after} is not a strict improvement"),
            });
        }
        profile = candidate;
        steps.push(snapshot(step as u64, vec![n], &profile));
        match seen.get(&profile.key()) {
            Some(&first) if cycle.is_none() => cycle = Some(step - first),
            Some(_) => {}
            None => {
                seen.insert(profile.key(), step);
            }
        }
    }
    let termination = match cycle {
        Some(length) => Termination::CycleDetected { length },
        None => Termination::MaxIters,
    };
    Ok(Trajectory { steps, converged_at: None, termination })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::InterferenceGraph;

    fn setup() -> (Instance, StrategyProfile) {
        let inst = Instance::new(
            InterferenceGraph::complete(2),
            4,
            2,
            vec![vec![1.0, 2.0, 1.0, 2.0], vec![2.0, 1.0, 2.0, 1.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let sigma0 = StrategyProfile::new(vec![
            Strategy::new(vec![0, 1], 0.5).unwrap(),
            Strategy::new(vec![1, 2], 0.5).unwrap(),
        ]);
        (inst, sigma0)
    }

    #[test]
    fn four_move_cycle() {
        let (inst, sigma0) = setup();
        let moves = vec![(0, vec![2, 3]), (1, vec![0, 3]), (0, vec![0, 1]), (1, vec![1, 2])];
        let traj = run_better_response_replay(&inst, &sigma0, &moves).unwrap();
        assert_eq!(traj.termination, Termination::CycleDetected { length: 4 });
        assert_eq!(traj.final_profile(), &sigma0);
        for (i, w) in traj.steps.windows(2).enumerate() {
            let mover = moves[i].0;
            assert_eq!(w[0].rates[mover], 1.0);
            assert_eq!(w[1].rates[mover], 1.25);
        }
    }

    #[test]
    fn empty_sequence() {
        let (inst, sigma0) = setup();
        let traj = run_better_response_replay(&inst, &sigma0, &[]).unwrap();
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.termination, Termination::MaxIters);
    }

    #[test]
    fn non_improving_move_names_its_step() {
        let (inst, sigma0) = setup();
        let moves = vec![(0, vec![2, 3]), (0, vec![2, 3])];
        match run_better_response_replay(&inst, &sigma0, &moves) {
            Err(Error::MoveRejected { step, .. }) => assert_eq!(step, 2),
            other => panic!("expected rejection, got {other:?}"),
        }
        assert!(matches!(
            run_better_response_replay(&inst, &sigma0, &[(0, vec![0, 9])]),
            Err(Error::MoveRejected { step: 1, .. })
        ));
    }
}

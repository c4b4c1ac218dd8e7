//! Learning loops over updating times.
//!
//! [`run_br_drm`] is best-response dynamics for the rate-maximization game,
//! [`run_nbrf`] is noisy best response (log-linear learning) for the fairness
//! game and [`run_better_response_replay`] applies a scripted sequence of
//! improving moves. Each run records a [`Trajectory`].

mod br_drm;
mod mechanism;
mod nbrf;
mod replay;
mod slot;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use br_drm::{run_br_drm, run_br_drm_with, BrDrmDynamics, BrDrmSettings, EstimatorConfig};
pub use mechanism::UpdateMechanism;
pub use nbrf::{run_nbrf, run_nbrf_with, NbrfDynamics, NbrfSettings};
pub use replay::run_better_response_replay;
pub use slot::{
    estimate_success_probability, simulate_slot, simulate_slot_into, SlotOutcome, WindowEstimator, DEFAULT_WINDOW,
};

use crate::network::{all_rates, Instance, StrategyProfile};
use crate::{Error, Result};

/// A user joining mid-run. `neighbors` index existing users (or users added
/// earlier in the same event).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewUser {
    pub neighbors: Vec<usize>,
    pub utilities: Vec<f64>,
    pub cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowed: Option<Vec<bool>>,
}

/// Users added at the start of updating time `time` (counted from 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationEvent {
    pub time: u64,
    pub users: Vec<NewUser>,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    /// Iteration budget (or, for a replay, the move list) exhausted.
    MaxIters,
    CycleDetected {
        length: usize,
    },
}

/// One recorded updating time. Step 0 is the initial profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub time: u64,
    pub active: Vec<usize>,
    pub profile: StrategyProfile,
    pub potential: f64,
    pub rates: Vec<f64>,
    pub at_nep: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
    /// Index of the step at which the final profile was first reached, when
    /// the run converged.
    pub converged_at: Option<usize>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn final_step(&self) -> &TrajectoryStep {
        self.steps.last().expect("a trajectory always holds its initial step")
    }

    pub fn final_profile(&self) -> &StrategyProfile {
        &self.final_step().profile
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// First step index whose profile is a NEP, if any.
    pub fn first_nep(&self) -> Option<usize> {
        self.steps.iter().position(|s| s.at_nep)
    }
}

/// Common surface of the two learning loops, used by the run driver.
pub(crate) trait Learner {
    fn instance(&self) -> &Instance;
    fn profile(&self) -> &StrategyProfile;
    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<usize>>;
    fn add_users(&mut self, users: &[NewUser]) -> Result<()>;
    fn potential(&self) -> f64;
    fn at_nep(&self) -> bool;
    /// Whether the run may stop now, given the equilibrium status.
    fn settled(&self, at_nep: bool) -> bool;
}

pub(crate) fn validate_events(events: &[PopulationEvent], instance: &Instance) -> Result<()> {
    let mut last = 0;
    let mut users = instance.num_users();
    for (i, e) in events.iter().enumerate() {
        if e.time == 0 || e.time < last {
            return Err(Error::invalid(format!("population event {i}: times must start at 1 and be nondecreasing")));
        }
        last = e.time;
        for u in &e.users {
            if let Some(&bad) = u.neighbors.iter().find(|&&r| r >= users) {
                return Err(Error::invalid(format!(
                    "population event {i}: neighbor {bad} does not exist yet ({users} users)"
                )));
            }
            users += 1;
        }
    }
    Ok(())
}

fn record<L: Learner>(learner: &L, time: u64, active: Vec<usize>) -> (TrajectoryStep, bool) {
    let at_nep = learner.at_nep();
    let step = TrajectoryStep {
        time,
        active,
        profile: learner.profile().clone(),
        potential: learner.potential(),
        rates: all_rates(learner.profile(), learner.instance()),
        at_nep,
    };
    (step, at_nep)
}

/// Runs `learner` for up to `max_iters` updating times, applying population
/// events on schedule. A run never stops as converged while events are pending.
pub(crate) fn drive<L: Learner, R: Rng + ?Sized>(
    learner: &mut L,
    max_iters: u64,
    events: &[PopulationEvent],
    rng: &mut R,
) -> Result<Trajectory> {
    let mut steps = Vec::with_capacity(max_iters.min(100_000) as usize + 1);
    let (first, at_nep) = record(learner, 0, Vec::new());
    steps.push(first);
    let mut last_change = 0usize;
    let mut pending = events.iter().peekable();
    if pending.peek().is_none() && learner.settled(at_nep) {
        return Ok(Trajectory { steps, converged_at: Some(0), termination: Termination::Converged });
    }
    for t in 1..=max_iters {
        let mut joined = false;
        while let Some(e) = pending.next_if(|e| e.time == t) {
            learner.add_users(&e.users)?;
            joined = true;
        }
        let before = learner.profile().clone();
        let active = learner.step(rng)?;
        let (step, at_nep) = record(learner, t, active);
        if joined || step.profile != before {
            last_change = steps.len();
        }
        steps.push(step);
        if pending.peek().is_none() && learner.settled(at_nep) {
            return Ok(Trajectory { steps, converged_at: Some(last_change), termination: Termination::Converged });
        }
    }
    Ok(Trajectory { steps, converged_at: None, termination: Termination::MaxIters })
}

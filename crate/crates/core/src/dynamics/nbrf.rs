//! Noisy best response for the fairness game.

use rand::Rng;

use super::{drive, validate_events, Learner, NewUser, PopulationEvent, Trajectory, UpdateMechanism};
use crate::fairness::{
    self, best_response_fairness, cooperative_utility, improves, noisy_br_distribution, CoolingSchedule, FairnessAction,
};
use crate::network::{Instance, StrategyProfile};
use crate::{Error, Result};

/// Everything a noisy-best-response run needs besides the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct NbrfSettings {
    pub mechanism: UpdateMechanism,
    pub schedule: CoolingSchedule,
    pub max_iters: u64,
    /// Once `beta(t)` reaches this value active users stop sampling and play
    /// their best response, and the run ends at the first equilibrium.
    pub freeze_beta: Option<f64>,
    pub events: Vec<PopulationEvent>,
    /// Starting profile; defaults to the two-phase initialization of
    /// [`fairness::initial_profile`].
    pub initial: Option<StrategyProfile>,
}

impl Default for NbrfSettings {
    fn default() -> Self {
        Self {
            mechanism: UpdateMechanism::backoff(),
            schedule: CoolingSchedule::Logarithmic { delta: 1.0 },
            max_iters: 1000,
            freeze_beta: None,
            events: Vec::new(),
            initial: None,
        }
    }
}

/// Stepwise noisy best response.
#[derive(Debug, Clone)]
pub struct NbrfDynamics {
    instance: Instance,
    profile: StrategyProfile,
    mechanism: UpdateMechanism,
    schedule: CoolingSchedule,
    freeze_beta: Option<f64>,
    time: u64,
}

impl NbrfDynamics {
    pub fn new(
        instance: &Instance,
        mechanism: UpdateMechanism,
        schedule: CoolingSchedule,
        freeze_beta: Option<f64>,
        initial: Option<StrategyProfile>,
    ) -> Result<Self> {
        fairness::ensure_single_channel(instance)?;
        mechanism.validate(instance.num_users())?;
        schedule.validate()?;
        if let Some(f) = freeze_beta {
            if !(f >= 0.0) {
                return Err(Error::invalid(format!("freeze beta must be nonnegative, got {f}")));
            }
        }
        let profile = match initial {
            Some(p) => {
                p.validate(instance)?;
                p
            }
            None => fairness::initial_profile(instance),
        };
        Ok(Self { instance: instance.clone(), profile, mechanism, schedule, freeze_beta, time: 0 })
    }

    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    pub fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn beta(&self) -> f64 {
        self.schedule.beta(self.time.max(1))
    }

    pub fn is_frozen(&self) -> bool {
        self.freeze_beta.is_some_and(|f| self.beta() >= f)
    }

    fn decide<R: Rng + ?Sized>(&self, n: usize, beta: f64, frozen: bool, rng: &mut R) -> Option<FairnessAction> {
        if frozen {
            let s = self.profile.get(n);
            let current = FairnessAction { channel: s.channel(), attempt_prob: s.attempt_prob() };
            let now = cooperative_utility(n, current, &self.profile, &self.instance);
            let (best, value) = best_response_fairness(n, &self.profile, &self.instance);
            return improves(value, now).then_some(best);
        }
        // a user with no finite-utility action keeps what it has
        noisy_br_distribution(n, &self.profile, &self.instance, beta).ok().map(|pmf| pmf.sample(rng))
    }

    /// One updating time: active users sample (or, once frozen, best-respond)
    /// against the pre-step profile. Returns the active users.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        self.time += 1;
        let beta = self.schedule.beta(self.time);
        let frozen = self.freeze_beta.is_some_and(|f| beta >= f);
        let active = self.mechanism.select_active(self.instance.graph(), self.time, rng);
        let moves: Vec<(usize, FairnessAction)> =
            active.iter().filter_map(|&n| self.decide(n, beta, frozen, rng).map(|a| (n, a))).collect();
        for (n, action) in moves {
            self.profile.set(n, action.to_strategy());
        }
        active
    }

    pub fn add_users(&mut self, users: &[NewUser]) -> Result<()> {
        for u in users {
            let n = self.instance.add_user(&u.neighbors, u.utilities.clone(), u.cap, u.allowed.clone())?;
            let strategy = fairness::joining_strategy(&self.instance, n, &self.profile);
            self.profile.push(strategy);
        }
        Ok(())
    }
}

impl Learner for NbrfDynamics {
    fn instance(&self) -> &Instance {
        &self.instance
    }

    fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<usize>> {
        Ok(NbrfDynamics::step(self, rng))
    }

    fn add_users(&mut self, users: &[NewUser]) -> Result<()> {
        NbrfDynamics::add_users(self, users)
    }

    fn potential(&self) -> f64 {
        fairness::exact_potential(&self.profile, &self.instance)
    }

    fn at_nep(&self) -> bool {
        fairness::is_nep_fairness(&self.profile, &self.instance).is_nep
    }

    fn settled(&self, at_nep: bool) -> bool {
        self.time > 0 && self.is_frozen() && at_nep
    }
}

/// Noisy best response from the default initialization, for `max_iters`
/// updating times.
pub fn run_nbrf<R: Rng + ?Sized>(
    instance: &Instance,
    mechanism: &UpdateMechanism,
    schedule: &CoolingSchedule,
    max_iters: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    run_nbrf_with(
        instance,
        &NbrfSettings { mechanism: mechanism.clone(), schedule: *schedule, max_iters, ..Default::default() },
        rng,
    )
}

pub fn run_nbrf_with<R: Rng + ?Sized>(instance: &Instance, settings: &NbrfSettings, rng: &mut R) -> Result<Trajectory> {
    validate_events(&settings.events, instance)?;
    let mut dynamics = NbrfDynamics::new(
        instance,
        settings.mechanism.clone(),
        settings.schedule,
        settings.freeze_beta,
        settings.initial.clone(),
    )?;
    drive(&mut dynamics, settings.max_iters, &settings.events, rng)
}

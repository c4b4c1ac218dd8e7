//! Best-response dynamics for the rate-maximization game.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::slot::{simulate_slot_into, SlotOutcome, WindowEstimator, DEFAULT_WINDOW};
use super::{drive, validate_events, Learner, NewUser, PopulationEvent, Trajectory, UpdateMechanism};
use crate::drm::{self, best_response_unchecked, rate_with_channels, strictly_better};
use crate::harness::tagged::tagged_enum;
use crate::network::{user_rate, Instance, Strategy, StrategyProfile};
use crate::{Error, Result};

tagged_enum! {
    /// Where best responses get their success probabilities from.
    #[derive(Debug, Clone, PartialEq, Default)]
    pub enum EstimatorConfig via EstimatorRepr {
        /// Closed-form `v_n(k)` from the current profile.
        #[default]
        Exact,
        /// Moving-window idle fractions from simulated slots. Before each
        /// updating time `slots_per_update` slots are played. With
        /// `flush_on_neighbor_change`, a user's windows for the channels a
        /// neighbor just left or joined are cleared. A user only switches when its
        /// estimated rate improves by more than the relative `switch_margin`.
        Windowed {
            #[serde(default = "default_window")]
            window: usize,
            #[serde(default = "default_window")]
            slots_per_update: usize,
            #[serde(default = "default_true")]
            flush_on_neighbor_change: bool,
            #[serde(default)]
            switch_margin: f64,
        },
    }
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

fn default_true() -> bool {
    true
}

impl EstimatorConfig {
    pub fn windowed(window: usize) -> Self {
        Self::Windowed { window, slots_per_update: window, flush_on_neighbor_change: true, switch_margin: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if let Self::Windowed { window, slots_per_update, switch_margin, .. } = *self {
            if window == 0 || slots_per_update == 0 {
                return Err(Error::invalid("windowed estimation needs a nonzero window and slots per update"));
            }
            if !(switch_margin >= 0.0) {
                return Err(Error::invalid(format!("switch margin must be nonnegative, got {switch_margin}")));
            }
        }
        Ok(())
    }
}

/// Everything a best-response run needs besides the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BrDrmSettings {
    pub mechanism: UpdateMechanism,
    pub estimator: EstimatorConfig,
    pub max_iters: u64,
    pub events: Vec<PopulationEvent>,
    /// Starting profile; defaults to every user on its `M` best channels.
    pub initial: Option<StrategyProfile>,
}

impl Default for BrDrmSettings {
    fn default() -> Self {
        Self {
            mechanism: UpdateMechanism::backoff(),
            estimator: EstimatorConfig::Exact,
            max_iters: 1000,
            events: Vec::new(),
            initial: None,
        }
    }
}

/// Stepwise best-response dynamics. Every user transmits at its cap.
#[derive(Debug, Clone)]
pub struct BrDrmDynamics {
    instance: Instance,
    profile: StrategyProfile,
    mechanism: UpdateMechanism,
    estimator: EstimatorConfig,
    window: Option<WindowEstimator>,
    slot: SlotOutcome,
    time: u64,
    quiet: u64,
}

impl BrDrmDynamics {
    pub fn new(
        instance: &Instance,
        mechanism: UpdateMechanism,
        estimator: EstimatorConfig,
        initial: Option<StrategyProfile>,
    ) -> Result<Self> {
        mechanism.validate(instance.num_users())?;
        estimator.validate()?;
        let profile = match initial {
            Some(p) => {
                p.validate(instance)?;
                if let Some(n) = (0..instance.num_users()).find(|&n| p.get(n).attempt_prob() != instance.cap(n)) {
                    return Err(Error::invalid(format!("user {n} must start at its cap")));
                }
                p
            }
            None => drm::initial_profile(instance),
        };
        let window = match estimator {
            EstimatorConfig::Exact => None,
            EstimatorConfig::Windowed { window, .. } => {
                Some(WindowEstimator::new(instance.num_users(), instance.num_channels(), window)?)
            }
        };
        Ok(Self {
            instance: instance.clone(),
            profile,
            mechanism,
            estimator,
            window,
            slot: SlotOutcome::default(),
            time: 0,
            quiet: 0,
        })
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

    /// Consecutive updating times without a strategy change.
    pub fn quiet_steps(&self) -> u64 {
        self.quiet
    }

    fn decide(&self, n: usize) -> Option<Vec<usize>> {
        let current = self.profile.get(n);
        match (&self.estimator, &self.window) {
            (EstimatorConfig::Windowed { switch_margin, .. }, Some(window)) => {
                let scores: Vec<f64> = (0..self.instance.num_channels())
                    .map(|k| self.instance.utility(n, k) * window.estimate(n, k).unwrap_or(0.0))
                    .collect();
                let br =
                    drm::top_channels(&scores, self.instance.channels_per_user(), self.instance.allowed_channels(n));
                let now: f64 = current.channels().iter().map(|&k| scores[k]).sum();
                let next: f64 = br.iter().map(|&k| scores[k]).sum();
                (br != current.channels() && strictly_better(next, now * (1.0 + switch_margin))).then_some(br)
            }
            _ => {
                let br = best_response_unchecked(n, &self.profile, &self.instance);
                let now = user_rate(n, &self.profile, &self.instance);
                strictly_better(rate_with_channels(n, &br, &self.profile, &self.instance), now).then_some(br)
            }
        }
    }

    fn flush_around(&mut self, n: usize, channels: &[usize]) {
        let flush = matches!(self.estimator, EstimatorConfig::Windowed { flush_on_neighbor_change: true, .. });
        if let (true, Some(window)) = (flush, self.window.as_mut()) {
            for &r in self.instance.graph().neighbors(n) {
                for &k in channels {
                    window.flush(r, k);
                }
            }
        }
    }

    /// One updating time: play estimation slots if windowed, pick the active
    /// users, let each best-respond to the pre-step profile. Returns the
    /// active users.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Vec<usize> {
        self.time += 1;
        if let (EstimatorConfig::Windowed { slots_per_update, .. }, Some(window)) =
            (&self.estimator, self.window.as_mut())
        {
            for _ in 0..*slots_per_update {
                simulate_slot_into(&self.profile, &self.instance, rng, &mut self.slot);
                window.observe(&self.slot);
            }
        }
        let active = self.mechanism.select_active(self.instance.graph(), self.time, rng);
        let moves: Vec<(usize, Vec<usize>)> = active.iter().filter_map(|&n| self.decide(n).map(|br| (n, br))).collect();
        if moves.is_empty() {
            self.quiet += 1;
        } else {
            self.quiet = 0;
        }
        for (n, channels) in moves {
            let mut touched = self.profile.get(n).channels().to_vec();
            touched.extend_from_slice(&channels);
            let strategy =
                Strategy::new(channels, self.instance.cap(n)).expect("best responses are valid channel sets");
            self.profile.set(n, strategy);
            self.flush_around(n, &touched);
        }
        active
    }

    /// Appends users, each starting on its `M` best channels at its cap.
    pub fn add_users(&mut self, users: &[NewUser]) -> Result<()> {
        for u in users {
            let n = self.instance.add_user(&u.neighbors, u.utilities.clone(), u.cap, u.allowed.clone())?;
            let strategy = drm::initial_strategy(&self.instance, n);
            let channels = strategy.channels().to_vec();
            self.profile.push(strategy);
            if let Some(window) = self.window.as_mut() {
                window.add_user();
            }
            self.flush_around(n, &channels);
        }
        self.quiet = 0;
        Ok(())
    }
}

impl Learner for BrDrmDynamics {
    fn instance(&self) -> &Instance {
        &self.instance
    }

    fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<usize>> {
        Ok(BrDrmDynamics::step(self, rng))
    }

    fn add_users(&mut self, users: &[NewUser]) -> Result<()> {
        BrDrmDynamics::add_users(self, users)
    }

    fn potential(&self) -> f64 {
        drm::br_potential(&self.profile, &self.instance)
    }

    fn at_nep(&self) -> bool {
        drm::is_nep_drm(&self.profile, &self.instance).is_nep
    }

    fn settled(&self, at_nep: bool) -> bool {
        match self.estimator {
            EstimatorConfig::Exact => at_nep,
            // estimates never certify an equilibrium; wait out a quiet pass
            EstimatorConfig::Windowed { .. } => self.quiet >= self.instance.num_users() as u64,
        }
    }
}

/// Best-response dynamics from the default initialization.
pub fn run_br_drm<R: Rng + ?Sized>(
    instance: &Instance,
    mechanism: &UpdateMechanism,
    estimator: &EstimatorConfig,
    max_iters: u64,
    rng: &mut R,
) -> Result<Trajectory> {
    run_br_drm_with(
        instance,
        &BrDrmSettings { mechanism: mechanism.clone(), estimator: estimator.clone(), max_iters, ..Default::default() },
        rng,
    )
}

pub fn run_br_drm_with<R: Rng + ?Sized>(
    instance: &Instance,
    settings: &BrDrmSettings,
    rng: &mut R,
) -> Result<Trajectory> {
    validate_events(&settings.events, instance)?;
    let mut dynamics =
        BrDrmDynamics::new(instance, settings.mechanism.clone(), settings.estimator.clone(), settings.initial.clone())?;
    drive(&mut dynamics, settings.max_iters, &settings.events, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Termination;
    use crate::network::{generate, InterferenceGraph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cycle_instance() -> Instance {
        Instance::new(
            InterferenceGraph::complete(2),
            4,
            2,
            vec![vec![1.0, 2.0, 1.0, 2.0], vec![2.0, 1.0, 2.0, 1.0]],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn single_user_converges_immediately() {
        let inst = Instance::new(InterferenceGraph::empty(1), 3, 2, vec![vec![1.0, 3.0, 2.0]], vec![0.4]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = run_br_drm(&inst, &UpdateMechanism::backoff(), &EstimatorConfig::Exact, 100, &mut rng).unwrap();
        assert_eq!(traj.termination, Termination::Converged);
        assert_eq!(traj.converged_at, Some(0));
        assert_eq!(traj.len(), 1);
        assert_eq!(traj.final_profile().get(0).channels(), [1, 2]);
    }

    #[test]
    fn sweep_from_cycle_start_converges() {
        let inst = cycle_instance();
        let sigma0 = StrategyProfile::new(vec![
            Strategy::new(vec![0, 1], 0.5).unwrap(),
            Strategy::new(vec![1, 2], 0.5).unwrap(),
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = run_br_drm_with(
            &inst,
            &BrDrmSettings {
                mechanism: UpdateMechanism::SweepSequential,
                max_iters: 50,
                initial: Some(sigma0),
                ..Default::default()
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Converged);
        assert!(drm::is_nep_drm(traj.final_profile(), &inst).is_nep);
        assert_eq!(traj.steps[1].profile.get(0).channels(), [0, 3]);
    }

    #[test]
    fn potential_never_drops_under_sequential_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..200 {
            let inst = generate::random_instance(
                &mut rng,
                &generate::RandomInstanceParams {
                    num_users: 8,
                    num_channels: 4,
                    channels_per_user: 1 + trial % 3,
                    edge_prob: 0.5,
                    ..Default::default()
                },
            )
            .unwrap();
            let mech = if trial % 2 == 0 { UpdateMechanism::backoff() } else { UpdateMechanism::SweepSequential };
            let traj = run_br_drm(&inst, &mech, &EstimatorConfig::Exact, 10_000, &mut rng).unwrap();
            assert_eq!(traj.termination, Termination::Converged);
            for w in traj.steps.windows(2) {
                if w[0].profile != w[1].profile {
                    assert!(w[1].potential > w[0].potential);
                } else {
                    assert_eq!(w[1].potential, w[0].potential);
                }
            }
            assert!(traj.final_step().at_nep);
        }
    }

    #[test]
    fn rejects_initial_profile_below_cap() {
        let inst = cycle_instance();
        let low = StrategyProfile::new(vec![
            Strategy::new(vec![0, 1], 0.4).unwrap(),
            Strategy::new(vec![1, 2], 0.5).unwrap(),
        ]);
        assert!(BrDrmDynamics::new(&inst, UpdateMechanism::backoff(), EstimatorConfig::Exact, Some(low)).is_err());
    }

    #[test]
    fn population_events_grow_the_profile() {
        let inst = Instance::new(
            InterferenceGraph::complete(2),
            3,
            1,
            vec![vec![5.0, 4.5, 4.0], vec![5.0, 4.5, 4.0]],
            vec![0.5; 2],
        )
        .unwrap();
        let events = vec![PopulationEvent {
            time: 5,
            users: vec![NewUser { neighbors: vec![0, 1], utilities: vec![5.0, 4.5, 4.0], cap: 0.5, allowed: None }],
        }];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj =
            run_br_drm_with(&inst, &BrDrmSettings { events, max_iters: 200, ..Default::default() }, &mut rng).unwrap();
        assert_eq!(traj.termination, Termination::Converged);
        assert_eq!(traj.steps[4].profile.len(), 2);
        assert_eq!(traj.steps[5].profile.len(), 3);
        assert_eq!(traj.final_step().rates.len(), 3);
        let channels: Vec<usize> = traj.final_profile().iter().map(|s| s.channel()).collect();
        let mut sorted = channels.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2]);
    }

    #[test]
    fn bad_events_are_rejected() {
        let inst = cycle_instance();
        let events = vec![PopulationEvent {
            time: 1,
            users: vec![NewUser { neighbors: vec![7], utilities: vec![1.0; 4], cap: 0.5, allowed: None }],
        }];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(run_br_drm_with(&inst, &BrDrmSettings { events, ..Default::default() }, &mut rng).is_err());
    }

    #[test]
    fn windowed_decisions_match_exact_when_gaps_are_large() {
        // utilities far apart: any reasonable estimate picks the same channels
        let g = InterferenceGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let inst = Instance::new(
            g,
            3,
            1,
            vec![vec![100.0, 10.0, 1.0], vec![10.0, 100.0, 1.0], vec![100.0, 1.0, 10.0], vec![1.0, 100.0, 10.0]],
            vec![0.3; 4],
        )
        .unwrap();
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let exact =
                run_br_drm(&inst, &UpdateMechanism::SweepSequential, &EstimatorConfig::Exact, 100, &mut rng).unwrap();
            let windowed =
                run_br_drm(&inst, &UpdateMechanism::SweepSequential, &EstimatorConfig::windowed(100), 100, &mut rng)
                    .unwrap();
            assert_eq!(exact.final_profile(), windowed.final_profile());
            assert_eq!(windowed.termination, Termination::Converged);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = generate::random_instance(
            &mut rng,
            &generate::RandomInstanceParams {
                num_users: 10,
                num_channels: 3,
                channels_per_user: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let run = |seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            run_br_drm(&inst, &UpdateMechanism::uniform_probabilistic(0.3), &EstimatorConfig::windowed(50), 300, &mut r)
                .unwrap()
        };
        assert_eq!(run(4), run(4));
    }
}

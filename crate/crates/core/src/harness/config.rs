//! Experiment configuration.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tagged::tagged_enum;
use crate::dynamics::{EstimatorConfig, NewUser, PopulationEvent, UpdateMechanism};
use crate::fairness::CoolingSchedule;
use crate::network::generate::{build_regular_graph, graph_from_positions, uniform_in_disc, Position};
use crate::network::{Instance, InterferenceGraph, Strategy, StrategyProfile};
use crate::{Error, Result};

/// A full experiment description, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: String,
    /// Root seed; trial `i` runs on `seed::trial_seed(seed, i)`.
    #[serde(default)]
    pub seed: u64,
    pub instance: InstanceSpec,
    #[serde(default = "default_mechanism")]
    pub mechanism: UpdateMechanism,
    pub algorithm: AlgorithmSpec,
    pub trials: u64,
    pub max_iters: u64,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    /// Also solve the instance exhaustively and write the reference line.
    #[serde(default)]
    pub oracle: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_mechanism() -> UpdateMechanism {
    UpdateMechanism::backoff()
}

tagged_enum! {
    /// The learning rule to run in each trial.
    #[derive(Debug, Clone, PartialEq)]
    pub enum AlgorithmSpec via AlgorithmSpecTwin {
        BrDrm {
            #[serde(default)]
            estimator: EstimatorConfig,
        },
        Nbrf {
            schedule: CoolingSchedule,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            freeze_beta: Option<f64>,
        },
        /// Every updating time each user redraws a uniformly random channel set.
        Naive {
            #[serde(default)]
            attempt: NaiveAttempt,
        },
        /// Scripted better-response moves from an explicit starting profile.
        BetterResponseReplay {
            initial: Vec<StrategySpec>,
            moves: Vec<MoveSpec>,
        },
    }
}

/// Attempt probability used by the naive policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NaiveAttempt {
    /// Every user at its cap.
    #[default]
    Cap,
    /// `1 / (neighbors on the drawn channel + 1)`.
    Fair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub channels: Vec<usize>,
    pub attempt_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveSpec {
    pub user: usize,
    pub channels: Vec<usize>,
}

/// Users joining at updating time `time`: either `add_users` more users from
/// a generated instance's reserve, or explicit `users`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub time: u64,
    #[serde(default)]
    pub add_users: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub users: Vec<NewUser>,
}

tagged_enum! {
    /// How to obtain the instance. Generated instances are a pure function of
    /// their parameters and `seed`.
    #[derive(Debug, Clone, PartialEq)]
    pub enum InstanceSpec via InstanceSpecTwin {
        Explicit {
            num_users: usize,
            edges: Vec<(usize, usize)>,
            num_channels: usize,
            channels_per_user: usize,
            utilities: Vec<Vec<f64>>,
            caps: Vec<f64>,
            #[serde(default, skip_serializing_if = "Option::is_none")]
            allowed: Option<Vec<Vec<bool>>>,
        },
        /// Users uniform in a disc, edges within `interference_radius`.
        Geometric {
            num_users: usize,
            num_channels: usize,
            #[serde(default = "one")]
            channels_per_user: usize,
            region_radius: f64,
            interference_radius: f64,
            utility: ValueSpec,
            caps: CapSpec,
            #[serde(default)]
            seed: u64,
            /// Redraw positions until the initial graph is connected.
            #[serde(default)]
            require_connected: bool,
        },
        /// Circulant regular graph.
        Regular {
            num_users: usize,
            degree: usize,
            num_channels: usize,
            #[serde(default = "one")]
            channels_per_user: usize,
            utility: ValueSpec,
            caps: CapSpec,
            #[serde(default)]
            seed: u64,
        },
        /// Independent edges with probability `edge_prob`.
        Random {
            num_users: usize,
            edge_prob: f64,
            num_channels: usize,
            #[serde(default = "one")]
            channels_per_user: usize,
            utility: ValueSpec,
            caps: CapSpec,
            #[serde(default)]
            seed: u64,
        },
    }
}

fn one() -> usize {
    1
}

tagged_enum! {
    /// Collision-free utilities.
    #[derive(Debug, Clone, PartialEq)]
    pub enum ValueSpec via ValueSpecTwin {
        Constant { value: f64 },
        Uniform { low: f64, high: f64 },
    }
}

tagged_enum! {
    /// Attempt-probability caps.
    #[derive(Debug, Clone, PartialEq)]
    pub enum CapSpec via CapSpecTwin {
        Constant { value: f64 },
        Uniform { low: f64, high: f64 },
        /// Even-indexed users get `high`, odd-indexed users `low`, so that any
        /// prefix of the population is split evenly.
        Alternating { high: f64, low: f64 },
    }
}

impl ValueSpec {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Uniform { low, high } => rng.random_range(low..high),
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        match *self {
            Self::Constant { value } if !(value >= 0.0) || !value.is_finite() => {
                Err(Error::config(path, format!("utility must be finite and nonnegative, got {value}")))
            }
            Self::Uniform { low, high } if !(0.0 <= low && low < high && high.is_finite()) => {
                Err(Error::config(path, format!("need 0 <= low < high, got [{low}, {high})")))
            }
            _ => Ok(()),
        }
    }
}

impl CapSpec {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> f64 {
        match *self {
            Self::Constant { value } => value,
            Self::Uniform { low, high } => rng.random_range(low..high),
            Self::Alternating { high, low } => {
                if n % 2 == 0 {
                    high
                } else {
                    low
                }
            }
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let ok = |p: f64| p > 0.0 && p <= 1.0;
        let fine = match *self {
            Self::Constant { value } => ok(value),
            Self::Uniform { low, high } => ok(low) && ok(high) && low < high,
            Self::Alternating { high, low } => ok(high) && ok(low),
        };
        if fine {
            Ok(())
        } else {
            Err(Error::config(path, "caps must lie in (0, 1]"))
        }
    }
}

/// A concrete instance plus the population events, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltInstance {
    pub instance: Instance,
    pub events: Vec<PopulationEvent>,
    /// User positions for geometric instances (whole population, including
    /// users that join later).
    pub positions: Option<Vec<Position>>,
}

/// Attempts at drawing a connected geometric layout before giving up.
const CONNECT_ATTEMPTS: usize = 10_000;

impl ExperimentConfig {
    /// Parses JSON, reporting the field path of any type error.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let outer = e.path().to_string();
            let (inner, message) = super::tagged::split_marked(&e.into_inner().to_string());
            Error::config(super::tagged::join(&outer, &inner), message)
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that can be checked without running.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "at least one trial is required"));
        }
        if self.max_iters == 0 && !matches!(self.algorithm, AlgorithmSpec::BetterResponseReplay { .. }) {
            return Err(Error::config("max_iters", "at least one iteration is required"));
        }
        match &self.algorithm {
            AlgorithmSpec::BrDrm { estimator } => {
                estimator.validate().map_err(|e| Error::config("algorithm.estimator", e.to_string()))?
            }
            AlgorithmSpec::Nbrf { schedule, freeze_beta } => {
                schedule.validate().map_err(|e| Error::config("algorithm.schedule", e.to_string()))?;
                if freeze_beta.is_some_and(|f| !(f >= 0.0)) {
                    return Err(Error::config("algorithm.freeze_beta", "must be nonnegative"));
                }
            }
            AlgorithmSpec::Naive { .. } | AlgorithmSpec::BetterResponseReplay { .. } => {}
        }
        let mut last = 0;
        for (i, e) in self.events.iter().enumerate() {
            let path = format!("events[{i}]");
            if e.time == 0 || e.time < last {
                return Err(Error::config(format!("{path}.time"), "event times start at 1 and must not decrease"));
            }
            last = e.time;
            if e.add_users > 0 && !e.users.is_empty() {
                return Err(Error::config(path, "give either add_users or users, not both"));
            }
            if e.add_users > 0 && matches!(self.instance, InstanceSpec::Explicit { .. }) {
                return Err(Error::config(format!("{path}.add_users"), "explicit instances need explicit users"));
            }
        }
        self.validate_instance()?;
        let built = self.build_instance()?;
        self.mechanism.validate(final_population(&built)).map_err(|e| Error::config("mechanism", e.to_string()))?;
        match &self.algorithm {
            AlgorithmSpec::Nbrf { .. } if built.instance.channels_per_user() != 1 => {
                return Err(Error::config("instance.channels_per_user", "the fairness game needs one channel per user"))
            }
            AlgorithmSpec::BetterResponseReplay { .. } => {
                self.replay_profile(&built.instance)?;
            }
            _ => {}
        }
        if self.oracle
            && matches!(
                self.algorithm,
                AlgorithmSpec::Nbrf { .. } | AlgorithmSpec::Naive { attempt: NaiveAttempt::Fair }
            )
            && built.instance.channels_per_user() != 1
        {
            return Err(Error::config("oracle", "the fairness oracle needs one channel per user"));
        }
        Ok(())
    }

    fn validate_instance(&self) -> Result<()> {
        let check_counts = |n: usize, k: usize, m: usize| -> Result<()> {
            if n == 0 {
                return Err(Error::config("instance.num_users", "at least one user is required"));
            }
            if k == 0 || m == 0 || m > k {
                return Err(Error::config("instance.channels_per_user", format!("need 1 <= M <= K, got M={m}, K={k}")));
            }
            Ok(())
        };
        match &self.instance {
            InstanceSpec::Explicit { num_users, num_channels, channels_per_user, .. } => {
                check_counts(*num_users, *num_channels, *channels_per_user)
            }
            InstanceSpec::Geometric {
                num_users,
                num_channels,
                channels_per_user,
                region_radius,
                interference_radius,
                utility,
                caps,
                ..
            } => {
                check_counts(*num_users, *num_channels, *channels_per_user)?;
                if !(*region_radius > 0.0) {
                    return Err(Error::config("instance.region_radius", "must be positive"));
                }
                if !(*interference_radius >= 0.0) {
                    return Err(Error::config("instance.interference_radius", "must be nonnegative"));
                }
                utility.validate("instance.utility")?;
                caps.validate("instance.caps")
            }
            InstanceSpec::Regular { num_users, num_channels, channels_per_user, utility, caps, .. } => {
                check_counts(*num_users, *num_channels, *channels_per_user)?;
                if !self.events.is_empty() {
                    return Err(Error::config("events", "regular instances do not support population events"));
                }
                utility.validate("instance.utility")?;
                caps.validate("instance.caps")
            }
            InstanceSpec::Random { num_users, num_channels, channels_per_user, edge_prob, utility, caps, .. } => {
                check_counts(*num_users, *num_channels, *channels_per_user)?;
                if !(0.0..=1.0).contains(edge_prob) {
                    return Err(Error::config("instance.edge_prob", "must lie in [0, 1]"));
                }
                utility.validate("instance.utility")?;
                caps.validate("instance.caps")
            }
        }
    }

    fn reserve(&self) -> usize {
        self.events.iter().map(|e| e.add_users).sum()
    }

    /// Builds the instance and resolves population events into explicit users.
    pub fn build_instance(&self) -> Result<BuiltInstance> {
        let err = |e: Error| Error::config("instance", e.to_string());
        match &self.instance {
            InstanceSpec::Explicit { num_users, edges, num_channels, channels_per_user, utilities, caps, allowed } => {
                let graph = InterferenceGraph::from_edges(*num_users, edges).map_err(err)?;
                let mut instance =
                    Instance::new(graph, *num_channels, *channels_per_user, utilities.clone(), caps.clone())
                        .map_err(err)?;
                if let Some(mask) = allowed {
                    instance = instance.with_allowed(mask.clone()).map_err(err)?;
                }
                let events =
                    self.events.iter().map(|e| PopulationEvent { time: e.time, users: e.users.clone() }).collect();
                Ok(BuiltInstance { instance, events, positions: None })
            }
            InstanceSpec::Geometric {
                num_users,
                num_channels,
                channels_per_user,
                region_radius,
                interference_radius,
                utility,
                caps,
                seed,
                require_connected,
            } => {
                let total = num_users + self.reserve();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut positions;
                let mut attempts = 0;
                loop {
                    positions = (0..total).map(|_| uniform_in_disc(&mut rng, *region_radius)).collect::<Vec<_>>();
                    attempts += 1;
                    let initial = graph_from_positions(&positions[..*num_users], *interference_radius);
                    if !require_connected || is_connected(&initial) {
                        break;
                    }
                    if attempts == CONNECT_ATTEMPTS {
                        return Err(Error::config(
                            "instance.require_connected",
                            format!("no connected layout in {CONNECT_ATTEMPTS} draws"),
                        ));
                    }
                }
                let full = graph_from_positions(&positions, *interference_radius);
                let (utils, cap_values) = draw_parameters(&mut rng, total, *num_channels, utility, caps);
                let mut built = split_population(
                    &full,
                    *num_users,
                    *num_channels,
                    *channels_per_user,
                    utils,
                    cap_values,
                    &self.events,
                )
                .map_err(err)?;
                built.positions = Some(positions);
                Ok(built)
            }
            InstanceSpec::Regular { num_users, degree, num_channels, channels_per_user, utility, caps, seed } => {
                let graph = build_regular_graph(*num_users, *degree).map_err(err)?;
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let (utils, cap_values) = draw_parameters(&mut rng, *num_users, *num_channels, utility, caps);
                split_population(&graph, *num_users, *num_channels, *channels_per_user, utils, cap_values, &[])
                    .map_err(err)
            }
            InstanceSpec::Random { num_users, edge_prob, num_channels, channels_per_user, utility, caps, seed } => {
                let total = num_users + self.reserve();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let graph = crate::network::generate::build_random_graph(&mut rng, total, *edge_prob);
                let (utils, cap_values) = draw_parameters(&mut rng, total, *num_channels, utility, caps);
                split_population(&graph, *num_users, *num_channels, *channels_per_user, utils, cap_values, &self.events)
                    .map_err(err)
            }
        }
    }

    /// The replay's starting profile, checked against the instance.
    pub fn replay_profile(&self, instance: &Instance) -> Result<StrategyProfile> {
        let AlgorithmSpec::BetterResponseReplay { initial, .. } = &self.algorithm else {
            return Err(Error::config("algorithm", "not a replay"));
        };
        let profile: StrategyProfile = initial
            .iter()
            .enumerate()
            .map(|(i, s)| {
                Strategy::new(s.channels.clone(), s.attempt_prob)
                    .map_err(|e| Error::config(format!("algorithm.initial[{i}]"), e.to_string()))
            })
            .collect::<Result<_>>()?;
        profile.validate(instance).map_err(|e| Error::config("algorithm.initial", e.to_string()))?;
        Ok(profile)
    }
}

fn final_population(built: &BuiltInstance) -> usize {
    built.instance.num_users() + built.events.iter().map(|e| e.users.len()).sum::<usize>()
}

fn draw_parameters<R: Rng + ?Sized>(
    rng: &mut R,
    total: usize,
    num_channels: usize,
    utility: &ValueSpec,
    caps: &CapSpec,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let utils = (0..total).map(|_| (0..num_channels).map(|_| utility.draw(rng)).collect()).collect();
    let cap_values = (0..total).map(|n| caps.draw(rng, n)).collect();
    (utils, cap_values)
}

/// Keeps the first `initial` users of `full` in the instance and turns the
/// rest into population events, in index order.
fn split_population(
    full: &InterferenceGraph,
    initial: usize,
    num_channels: usize,
    channels_per_user: usize,
    mut utilities: Vec<Vec<f64>>,
    mut caps: Vec<f64>,
    events: &[EventSpec],
) -> Result<BuiltInstance> {
    let later_utils = utilities.split_off(initial);
    let later_caps = caps.split_off(initial);
    let edges: Vec<(usize, usize)> = full.edges().filter(|&(a, b)| a < initial && b < initial).collect();
    let graph = InterferenceGraph::from_edges(initial, &edges)?;
    let instance = Instance::new(graph, num_channels, channels_per_user, utilities, caps)?;
    let mut next = initial;
    let mut resolved = Vec::new();
    let mut reserve = later_utils.into_iter().zip(later_caps);
    for e in events {
        let mut users = e.users.clone();
        for _ in 0..e.add_users {
            let (utilities, cap) = reserve.next().expect("reserve sized from the events");
            let neighbors = full.neighbors(next).iter().copied().filter(|&r| r < next).collect();
            users.push(NewUser { neighbors, utilities, cap, allowed: None });
            next += 1;
        }
        resolved.push(PopulationEvent { time: e.time, users });
    }
    Ok(BuiltInstance { instance, events: resolved, positions: None })
}

/// Breadth-first connectivity check.
pub fn is_connected(graph: &InterferenceGraph) -> bool {
    let n = graph.num_users();
    if n == 0 {
        return true;
    }
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &r in graph.neighbors(u) {
            if !seen[r] {
                seen[r] = true;
                queue.push_back(r);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

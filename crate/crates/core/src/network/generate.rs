//! Graph and instance generators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Instance, InterferenceGraph, Strategy, StrategyProfile};
use crate::{Error, Result};

/// A point in the plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Uniform point in a disc of the given radius centred at the origin.
pub fn uniform_in_disc<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Position {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    Position { x: r * theta.cos(), y: r * theta.sin() }
}

/// Users with an edge whenever they are within `interference_radius` of each other.
pub fn graph_from_positions(positions: &[Position], interference_radius: f64) -> InterferenceGraph {
    let mut adjacency = vec![Vec::new(); positions.len()];
    for a in 0..positions.len() {
        for b in a + 1..positions.len() {
            if positions[a].distance(&positions[b]) <= interference_radius {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    // lists are built in ascending order, so this cannot fail
    InterferenceGraph::from_adjacency(adjacency).expect("distance relation is symmetric")
}

/// Drops `num_users` users uniformly in a disc and connects those within
/// `interference_radius`.
pub fn build_geometric_graph<R: Rng + ?Sized>(
    rng: &mut R,
    num_users: usize,
    region_radius: f64,
    interference_radius: f64,
) -> Result<(InterferenceGraph, Vec<Position>)> {
    if num_users == 0 {
        return Err(Error::invalid("geometric graph needs at least one user"));
    }
    if !(region_radius > 0.0) || !(interference_radius >= 0.0) {
        return Err(Error::invalid(format!(
            "radii must be positive (region {region_radius}, interference {interference_radius})"
        )));
    }
    let positions: Vec<Position> = (0..num_users).map(|_| uniform_in_disc(rng, region_radius)).collect();
    Ok((graph_from_positions(&positions, interference_radius), positions))
}

/// Circulant `degree`-regular graph: user `n` is adjacent to `n ± 1, …, n ± degree/2`
/// (mod N), plus the antipodal user `n + N/2` when `degree` is odd.
pub fn build_regular_graph(num_users: usize, degree: usize) -> Result<InterferenceGraph> {
    if num_users == 0 {
        return Err(Error::invalid("regular graph needs at least one user"));
    }
    if degree >= num_users {
        return Err(Error::invalid(format!("degree {degree} must be below the user count {num_users}")));
    }
    if degree % 2 == 1 && num_users % 2 == 1 {
        return Err(Error::invalid(format!("no {degree}-regular graph on {num_users} vertices (degree * N is odd)")));
    }
    let mut graph = InterferenceGraph::empty(num_users);
    for n in 0..num_users {
        for offset in 1..=degree / 2 {
            graph.add_edge(n, (n + offset) % num_users)?;
        }
        if degree % 2 == 1 {
            graph.add_edge(n, (n + num_users / 2) % num_users)?;
        }
    }
    Ok(graph)
}

/// Erdős–Rényi graph with independent edges of probability `edge_prob`.
pub fn build_random_graph<R: Rng + ?Sized>(rng: &mut R, num_users: usize, edge_prob: f64) -> InterferenceGraph {
    let mut adjacency = vec![Vec::new(); num_users];
    for a in 0..num_users {
        for b in a + 1..num_users {
            if rng.random::<f64>() < edge_prob {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    InterferenceGraph::from_adjacency(adjacency).expect("symmetric by construction")
}

/// Parameters for [`random_instance`]. Utilities are drawn uniformly from
/// `utility_range` (a continuous law, so ties have probability zero) and caps
/// uniformly from `cap_range`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomInstanceParams {
    pub num_users: usize,
    pub num_channels: usize,
    pub channels_per_user: usize,
    pub edge_prob: f64,
    pub utility_range: (f64, f64),
    pub cap_range: (f64, f64),
}

impl Default for RandomInstanceParams {
    fn default() -> Self {
        Self {
            num_users: 6,
            num_channels: 3,
            channels_per_user: 1,
            edge_prob: 0.5,
            utility_range: (1.0, 100.0),
            cap_range: (0.1, 0.9),
        }
    }
}

pub fn random_utilities<R: Rng + ?Sized>(
    rng: &mut R,
    num_users: usize,
    num_channels: usize,
    (lo, hi): (f64, f64),
) -> Vec<Vec<f64>> {
    (0..num_users).map(|_| (0..num_channels).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

/// Random graph, continuous utilities and caps.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, params: &RandomInstanceParams) -> Result<Instance> {
    let graph = build_random_graph(rng, params.num_users, params.edge_prob);
    let utilities = random_utilities(rng, params.num_users, params.num_channels, params.utility_range);
    let (lo, hi) = params.cap_range;
    let caps = (0..params.num_users).map(|_| rng.random_range(lo..hi)).collect();
    Instance::new(graph, params.num_channels, params.channels_per_user, utilities, caps)
}

/// Uniformly random `m`-subset of the allowed channels of user `n`, sorted.
pub fn random_channel_set<R: Rng + ?Sized>(rng: &mut R, instance: &Instance, n: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = instance.allowed_channels(n).collect();
    let m = instance.channels_per_user();
    // partial Fisher-Yates
    for i in 0..m {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(m);
    pool.sort_unstable();
    pool
}

/// Random channel sets with every user at its cap.
pub fn random_profile<R: Rng + ?Sized>(rng: &mut R, instance: &Instance) -> StrategyProfile {
    (0..instance.num_users())
        .map(|n| {
            let channels = random_channel_set(rng, instance, n);
            Strategy::new(channels, instance.cap(n)).expect("valid by construction")
        })
        .collect()
}

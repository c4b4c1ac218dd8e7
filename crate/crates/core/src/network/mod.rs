//! Users, channels, strategies and the collision-channel rate formulas.

pub mod generate;
mod graph;
mod instance;
mod rates;

pub use generate::{build_geometric_graph, build_regular_graph, Position};
pub use graph::InterferenceGraph;
pub use instance::{Instance, ProfileKey, Strategy, StrategyProfile};
pub use rates::{
    all_rates, expected_rate_on_channel, interference_weight, log_interference, neighbors_on_channel,
    success_probability, sum_log_rate, total_expected_rate,
};
pub(crate) use rates::{count_on_channel, log_interf, success_prob, user_rate};

//! Distributed spectrum sharing over multi-channel slotted ALOHA.
//!
//! Users sit on an interference graph and each picks a set of channels and an
//! attempt probability. Two games are modelled on top of the collision-channel
//! rate formulas in [`network`]:
//!
//! * [`drm`]: non-cooperative rate maximization, driven to equilibrium by
//!   best-response dynamics (a best-response potential game).
//! * [`fairness`]: a cooperative single-channel game whose exact potential is
//!   the network sum-log rate, driven towards the proportionally fair optimum
//!   by noisy best response (log-linear learning).
//!
//! [`dynamics`] runs both learning loops together with a slot-level channel
//! simulator, [`oracle`] holds brute-force references, and [`harness`] wires
//! everything into reproducible Monte Carlo experiments.

// `!(x >= 0.0)` style checks are there to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod drm;
pub mod dynamics;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod network;
pub mod oracle;
pub mod seed;

pub use error::{Error, Result};
pub use network::{Instance, InterferenceGraph, Strategy, StrategyProfile};

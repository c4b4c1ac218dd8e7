//! Experiment configuration, presets, Monte Carlo runs and result files.
//!
//! A run writes `trajectories.csv` (one row per trial, iteration and user),
//! `aggregate.csv` (cross-trial means per iteration), `manifest.json` (full
//! config, root seed, per-trial summary, crate version) and, when the config
//! asks for it, `reference.json` with the exhaustive optimum.

mod config;
pub mod presets;
mod run;
pub(crate) mod tagged;
mod tools;

pub use config::{
    is_connected, AlgorithmSpec, BuiltInstance, CapSpec, EventSpec, ExperimentConfig, InstanceSpec, MoveSpec,
    NaiveAttempt, StrategySpec, ValueSpec,
};
pub use presets::{preset, preset_json, preset_names};
pub use run::{
    aggregate, aggregate_csv, format_float, json_string, manifest_json, run_experiment, run_trial, trajectories_csv,
    write_file, write_outputs, AggregateRow, ExperimentResult, Reference, TrialOutcome, AGGREGATE_FILE, MANIFEST_FILE,
    REFERENCE_FILE, TRAJECTORY_FILE,
};
pub use tools::{
    cycle_transcript, efficiency_csv, efficiency_instance, efficiency_sweep, gibbs_check, gibbs_instance,
    naive_monte_carlo_rates, oracle_report, CycleMove, CycleTranscript, EfficiencyRow, EfficiencySettings, GibbsReport,
    GibbsRow, GibbsSettings, OracleReport,
};

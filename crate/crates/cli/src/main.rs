//! `spectrum`: run experiments, solve instances exhaustively, sweep the
//! efficiency bound, replay the better-response cycle and check stationarity.
//!
//! Exit status is 0 on success, 2 when the input fails validation and 1 on
//! any runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spectrum_games::harness::{
    self, cycle_transcript, efficiency_csv, efficiency_sweep, gibbs_check, gibbs_instance, json_string, oracle_report,
    run_experiment, write_file, write_outputs, EfficiencySettings, ExperimentConfig, GibbsSettings,
};
use spectrum_games::Error;

#[derive(Parser)]
#[command(name = "spectrum", version, about = "Channel-selection games on collision channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write trajectories, aggregate and manifest.
    Run(RunArgs),
    /// Solve the configured instance exhaustively.
    Oracle(RunArgs),
    /// Compare best-response equilibria with random channel selection on regular graphs.
    Efficiency(EfficiencyArgs),
    /// Replay the scripted better-response cycle and check that it closes.
    CycleDemo(RunArgs),
    /// Compare long-run noisy-best-response visit frequencies with the Gibbs distribution.
    GibbsCheck(GibbsArgs),
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset name (see `spectrum presets`).
    #[arg(long)]
    preset: Option<String>,
    /// Root seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    max_iters: Option<u64>,
}

#[derive(Args)]
struct EfficiencyArgs {
    /// Channel counts, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 3])]
    channels: Vec<usize>,
    /// Degrees, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1usize, 2, 3, 5])]
    degrees: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: u64,
    #[arg(long, default_value = "out/efficiency")]
    out: PathBuf,
}

#[derive(Args)]
struct GibbsArgs {
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Per-user update probability.
    #[arg(long, default_value_t = GibbsSettings::default().update_prob)]
    update_prob: f64,
    #[arg(long, default_value_t = 1_000_000)]
    steps: u64,
    #[arg(long, default_value_t = 10_000)]
    burn_in: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out/gibbs-check")]
    out: PathBuf,
}

impl RunArgs {
    fn load(&self, default_preset: Option<&str>) -> Result<ExperimentConfig, Error> {
        let mut config = match (&self.config, &self.preset, default_preset) {
            (Some(path), _, _) => ExperimentConfig::from_path(path)?,
            (None, Some(name), _) => harness::preset(name)?,
            (None, None, Some(name)) => harness::preset(name)?,
            (None, None, None) => {
                return Err(Error::Config {
                    path: "config".into(),
                    message: "give --config <path> or --preset <name>".into(),
                })
            }
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.trials = trials;
        }
        if let Some(max_iters) = self.max_iters {
            config.max_iters = max_iters;
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

fn output_dir(config: &ExperimentConfig) -> PathBuf {
    config.output_dir.clone().unwrap_or_else(|| {
        let name = if config.name.is_empty() { "run" } else { &config.name };
        Path::new("out").join(name)
    })
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Run(args) => {
            let config = args.load(None)?;
            let dir = output_dir(&config);
            let result = run_experiment(&config)?;
            for path in write_outputs(&result, &dir)? {
                println!("wrote {}", path.display());
            }
            let converged = result.trials.iter().filter(|t| t.trajectory.final_step().at_nep).count();
            println!("{} trials, {} ended at an equilibrium", result.trials.len(), converged);
        }
        Command::Oracle(args) => {
            let config = args.load(None)?;
            let report = oracle_report(&config)?;
            let path = write_file(&output_dir(&config), "oracle.json", &json_string(&report))?;
            println!("optimum {} over {} profiles", report.optimum_value, report.search_size);
            println!("wrote {}", path.display());
        }
        Command::Efficiency(args) => {
            let rows = efficiency_sweep(&EfficiencySettings {
                channels: args.channels,
                degrees: args.degrees,
                trials: args.trials,
                seed: args.seed,
                max_iters: args.max_iters,
            })?;
            let csv = efficiency_csv(&rows);
            print!("{csv}");
            let path = write_file(&args.out, "efficiency.csv", &csv)?;
            println!("wrote {}", path.display());
            if let Some(r) = rows.iter().find(|r| matches!((r.eta, r.min_ratio), (Some(e), Some(m)) if m < e)) {
                return Err(Error::Degenerate(format!(
                    "K={}, degree={}: minimum ratio below the bound",
                    r.num_channels, r.degree
                )));
            }
        }
        Command::CycleDemo(args) => {
            let config = args.load(Some("cycle-demo"))?;
            let transcript = cycle_transcript(&config)?;
            for m in &transcript.moves {
                println!(
                    "step {}: user {} {:?} -> {:?}, rate {} -> {}",
                    m.step, m.user, m.from, m.to, m.rate_before, m.rate_after
                );
            }
            let path = write_file(&output_dir(&config), "cycle_demo.json", &json_string(&transcript))?;
            println!("termination: {:?}", transcript.termination);
            println!("wrote {}", path.display());
            if !transcript.returns_to_start {
                return Err(Error::Degenerate("the move sequence does not return to the start".into()));
            }
        }
        Command::GibbsCheck(args) => {
            let settings = GibbsSettings {
                beta: args.beta,
                update_prob: args.update_prob,
                steps: args.steps,
                burn_in: args.burn_in,
                seed: args.seed,
            };
            let report = gibbs_check(&gibbs_instance(), &settings)?;
            let path = write_file(&args.out, "gibbs.json", &json_string(&report))?;
            println!("total variation {}", report.total_variation);
            println!("wrote {}", path.display());
        }
        Command::Presets => {
            for name in harness::preset_names() {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Config { path, message } => eprintln!("error: {path}: {message}"),
                other => eprintln!("error: {other}"),
            }
            ExitCode::from(if e.is_validation() { 2 } else { 1 })
        }
    }
}

//! `smoothrace`: train, evaluate, sweep, and analyze smoothness-conditioned
//! racing policies from the command line.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smoothrace_cli::commands::{self, DEFAULT_SWEEP_AXIS};
use smoothrace_cli::presets::Preset;
use smoothrace_cli::{is_usage_error, report::MatrixReport};
use smoothrace_core::config::SpeedPreset;
use smoothrace_core::runner;

#[derive(Parser)]
#[command(
    name = "smoothrace",
    version,
    about = "Action-smoothness experiments for vision-based miniature car racing"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Source {
    /// Named experiment preset.
    #[arg(long, value_enum, conflicts_with = "config")]
    preset: Option<Preset>,
    /// Experiment config file (JSON); unspecified fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override single config fields, e.g. --set sac.gamma=0.95.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Random seed; takes precedence over the config's run.seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Source {
    fn resolve(&self, default_preset: Option<Preset>) -> anyhow::Result<smoothrace_core::config::ExperimentConfig> {
        let preset = self.preset.or(if self.config.is_none() { default_preset } else { None });
        commands::resolve_config(preset, self.config.as_deref(), self.seed, &self.set)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a policy and leave logs plus checkpoints in the run directory.
    Train {
        #[command(flatten)]
        source: Source,
        /// Run directory for config snapshot, logs, and checkpoints.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint with the deterministic policy.
    Evaluate {
        #[command(flatten)]
        source: Source,
        /// Policy parameter file to evaluate.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of evaluation episodes (default: the config's run.eval_runs).
        #[arg(long)]
        runs: Option<usize>,
        /// Speed preset to evaluate under: c1, c2, or c3.
        #[arg(long)]
        speed: Option<SpeedPreset>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate across temporal-weight values and seeds.
    Sweep {
        #[command(flatten)]
        source: Source,
        /// Temporal weights to sweep.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SWEEP_AXIS)]
        axis: Vec<f64>,
        /// Seeds per axis value.
        #[arg(long, value_delimiter = ',', default_values_t = [0u64])]
        seeds: Vec<u64>,
        /// Print the expanded experiment matrix as JSON and exit.
        #[arg(long)]
        plan_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Leave-one-out ablation over the perturbation similarity set.
    AblatePhi {
        #[command(flatten)]
        source: Source,
        #[arg(long, value_delimiter = ',', default_values_t = [0u64])]
        seeds: Vec<u64>,
        /// Print the expanded experiment matrix as JSON and exit.
        #[arg(long)]
        plan_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute smoothness and completion statistics from recorded files.
    Analyze {
        /// Action trace CSVs (repeatable).
        #[arg(long = "trace", value_name = "CSV")]
        traces: Vec<PathBuf>,
        /// Episode log (JSONL) to aggregate.
        #[arg(long)]
        episodes: Option<PathBuf>,
        /// Steering limit used to convert normalized commands to degrees.
        #[arg(long, default_value_t = 25.8)]
        steering_limit_deg: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render a PNG contact sheet of the perturbation family.
    RenderAugmentSheet {
        #[command(flatten)]
        source: Source,
        /// Independent draws per perturbation kind.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        /// Output PNG path.
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_matrix_summary(report: &MatrixReport, out: &PathBuf, stem: &str) {
    println!("{}", report.to_markdown());
    println!("report: {}", out.join(format!("{stem}.md")).display());
    println!("data:   {}", out.join(format!("{stem}.json")).display());
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Train { source, out } => {
            let cfg = source.resolve(None)?;
            let outcome = runner::train(&cfg, &out)?;
            println!(
                "trained: {} steps, {} updates, {} episodes",
                outcome.steps, outcome.updates, outcome.episodes
            );
            println!("run dir: {}", outcome.out_dir.display());
        }
        Cmd::Evaluate { source, checkpoint, runs, speed, out } => {
            let cfg = source.resolve(None)?;
            let runs = runs.unwrap_or(cfg.run.eval_runs);
            let seed = source.seed.unwrap_or(cfg.run.seed);
            let artifacts = commands::evaluate(&cfg, &checkpoint, runs, speed, seed, &out)?;
            print!(
                "{}",
                smoothrace_cli::report::eval_markdown(
                    "Evaluation",
                    &artifacts.stats,
                    artifacts.smoothness.as_ref(),
                    artifacts.skipped_short
                )
            );
            println!("\nartifacts: {}", artifacts.out_dir.display());
        }
        Cmd::Sweep { source, axis, seeds, plan_only, out } => {
            let cfg = source.resolve(Some(Preset::LambdaSweep))?;
            if plan_only {
                let plan = commands::sweep_plan(&cfg, &axis, &seeds)?;
                println!("{}", serde_json::to_string_pretty(&plan)?);
                return Ok(());
            }
            let report = commands::sweep(&cfg, &axis, &seeds, &out)?;
            print_matrix_summary(&report, &out, "sweep");
        }
        Cmd::AblatePhi { source, seeds, plan_only, out } => {
            let cfg = source.resolve(Some(Preset::SpatialAblation))?;
            if plan_only {
                let plan = commands::ablation_plan(&cfg, &seeds)?;
                println!("{}", serde_json::to_string_pretty(&plan)?);
                return Ok(());
            }
            let report = commands::ablate(&cfg, &seeds, &out)?;
            print_matrix_summary(&report, &out, "ablation");
        }
        Cmd::Analyze { traces, episodes, steering_limit_deg, out } => {
            let artifacts =
                commands::analyze(&traces, episodes.as_deref(), steering_limit_deg, &out)?;
            print!(
                "{}",
                smoothrace_cli::report::analysis_markdown(
                    "Offline analysis",
                    artifacts.stats.as_ref(),
                    artifacts.smoothness.as_ref()
                )
            );
            println!("\nartifacts: {}", artifacts.out_dir.display());
        }
        Cmd::RenderAugmentSheet { source, samples, out } => {
            let cfg = source.resolve(Some(Preset::SacCaps))?;
            let seed = source.seed.unwrap_or(cfg.run.seed);
            let (sheet, labels) = commands::augment_sheet(&cfg, seed, samples)?;
            commands::write_png(&out, &sheet)?;
            println!("rows, top to bottom: {}", labels.join(", "));
            println!("sheet: {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_usage_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

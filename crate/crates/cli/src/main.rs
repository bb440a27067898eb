//! `rsgrowth`: solve, check and simulate the risk-sensitive growth model.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rsgrowth_core::model::PresetName;

use crate::commands::Context;
use crate::config::Source;
use crate::failure::{Failure, EXIT_CONFIG, EXIT_FAILED};

#[derive(Parser)]
#[command(name = "rsgrowth", version, about = "Risk-sensitive stochastic growth: solver and diagnostics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in preset: `multiplicative` or `additive` (default `multiplicative`).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override a configuration field, e.g. `--set model.gamma=2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Base seed for simulation chains and randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Value iteration; writes the value function and policy.
    Solve,
    /// Euler and envelope residuals of the solved policy.
    Euler,
    /// Drift conditions and the Foster-Lyapunov check.
    Drift,
    /// Simulates income chains and estimates the stationary law.
    Simulate,
    /// Runs every acceptance gate.
    Verify,
    /// Collates the JSON artifacts in the output directory.
    Report,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = cli.global;
    if g.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(g.threads)
            .build_global()
            .map_err(|e| Failure::config("invalid_threads", e.to_string()))?;
    }
    let source = match (&g.config, &g.preset) {
        (Some(path), _) => Source::File(path),
        (None, Some(name)) => Source::Preset(name.parse::<PresetName>().map_err(Failure::model)?),
        (None, None) => Source::Preset(PresetName::Multiplicative),
    };
    let cfg = config::load(source, &g.set, g.seed)?;
    let out = config::output_dir(g.out.as_deref(), &cfg);
    let ctx = Context { cfg, out, seed: g.seed };
    match cli.command {
        Command::Solve => commands::run_solve(&ctx),
        Command::Euler => commands::run_euler(&ctx),
        Command::Drift => commands::run_drift(&ctx),
        Command::Simulate => commands::run_simulate(&ctx),
        Command::Verify => commands::run_verify(&ctx),
        Command::Report => commands::run_report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let f = Failure::config("invalid_arguments", e.to_string().trim_end());
            eprintln!("{}", f.document());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let f = match err.downcast::<Failure>() {
                Ok(f) => f,
                Err(other) => Failure {
                    code: "internal".into(),
                    message: format!("{other:#}"),
                    exit_code: EXIT_FAILED,
                },
            };
            eprintln!("{}", f.document());
            ExitCode::from(f.exit_code)
        }
    }
}

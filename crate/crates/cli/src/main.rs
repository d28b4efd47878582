//! `wpisac`: generate scenarios, run solves and parameter sweeps.
//!
//! Exit status: 0 when every solve converged, 2 when a solve is infeasible,
//! 1 on solver failure, iteration cap, bad input or a failed sweep check.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Outcome;
use config::Settings;

#[derive(Parser)]
#[command(
    name = "wpisac",
    version,
    about = "Time and power allocation for wireless-powered sensing and communication"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random scenario as JSON.
    Generate(Args),
    /// Solve one scenario with one or all schemes.
    Solve(Args),
    /// Solve over a list of eta or p0 values.
    Sweep(Args),
    /// Print the precomputed sensing coefficients.
    DumpTables(Args),
    /// Brute-force grid search (at most 3 users).
    Oracle(Args),
}

#[derive(clap::Args, Debug)]
struct Args {
    /// Flat `key=value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `params.eta=0.1`. `--params.eta=0.1`
    /// is accepted as shorthand.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario JSON file instead of a seed.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// proposed | equal-time | max-power | all
    #[arg(long)]
    scheme: Option<String>,
    /// eta | p0
    #[arg(long)]
    sweep_axis: Option<String>,
    /// Comma-separated, strictly increasing.
    #[arg(long)]
    sweep_values: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (default: number of processors).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    max_outer_iters: Option<usize>,
    #[arg(long)]
    lambda_th: Option<f64>,
    /// Keep wall-clock timings in reports.
    #[arg(long)]
    timing: bool,
    /// Oracle grid points per power axis.
    #[arg(long)]
    grid_points: Option<usize>,
}

impl Args {
    fn settings(&self) -> Result<Settings> {
        let mut settings = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        let mut flags = Settings::default();
        let path = |p: &PathBuf| p.display().to_string();
        let given = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("scenario", self.scenario.as_ref().map(path)),
            ("scheme", self.scheme.clone()),
            ("sweep-axis", self.sweep_axis.clone()),
            ("sweep-values", self.sweep_values.clone()),
            ("out", self.out.as_ref().map(path)),
            ("format", self.format.clone()),
            ("jobs", self.jobs.map(|v| v.to_string())),
            (
                "max-outer-iters",
                self.max_outer_iters.map(|v| v.to_string()),
            ),
            ("lambda-th", self.lambda_th.map(|v| v.to_string())),
            ("timing", self.timing.then(|| "true".to_string())),
            ("grid-points", self.grid_points.map(|v| v.to_string())),
        ];
        for (k, v) in given {
            if let Some(v) = v {
                flags.set(k, &v)?;
            }
        }
        for kv in &self.set {
            let Some((k, v)) = kv.split_once('=') else {
                anyhow::bail!("--set expects KEY=VALUE, got {kv:?}");
            };
            flags.set(k.trim(), v.trim())?;
        }
        // a seed flag replaces a scenario file from the config and vice versa
        if flags.values.contains_key("seed") {
            settings.values.remove("scenario");
        }
        if flags.values.contains_key("scenario") {
            settings.values.remove("seed");
        }
        settings.merge(flags);
        Ok(settings)
    }
}

/// Rewrites `--params.x=v` and `--params.x v` into `--set params.x=v`.
fn expand_param_flags(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--params.") {
            Some(rest) if rest.contains('=') => {
                out.push("--set".into());
                out.push(format!("params.{rest}"));
            }
            Some(rest) => {
                out.push("--set".into());
                out.push(format!("params.{rest}={}", it.next().unwrap_or_default()));
            }
            None => out.push(arg),
        }
    }
    out
}

fn run(cli: Cli) -> Result<Outcome> {
    let (args, cmd): (&Args, fn(&config::ExperimentConfig) -> Result<Outcome>) = match &cli.command
    {
        Command::Generate(a) => (a, commands::generate),
        Command::Solve(a) => (a, commands::solve),
        Command::Sweep(a) => (a, commands::sweep),
        Command::DumpTables(a) => (a, commands::dump_tables),
        Command::Oracle(a) => (a, commands::oracle),
    };
    let cfg = args.settings()?.resolve()?;
    cmd(&cfg)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("WPT_ISAC_LOG", "warn")).init();
    let cli = Cli::parse_from(expand_param_flags(std::env::args()));
    match run(cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! `billiards`: command-line driver for open disc billiards.
//!
//! Exit codes: 0 success, 1 I/O or validation error, 2 geometric violation
//! (geometry-check), 3 numerical failure (orbits, resonances, resolvent).

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

#[derive(Parser, Debug)]
#[command(name = "billiards", version, about = "Classical dynamics and resonances of open disc billiards")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration (must carry "schema_version": 1).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,

    /// Override a configuration key, e.g. `--set zeta.max_len=5`. The value
    /// is parsed as JSON, falling back to a plain string. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Obstacle file (overrides `obstacles`).
    #[arg(long, global = true)]
    obstacles: Option<PathBuf>,

    /// Output directory (overrides `output_dir`).
    #[arg(long, short, global = true)]
    output_dir: Option<PathBuf>,

    /// RNG seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Bounce truncation of the orbit sums (overrides `zeta.max_len`).
    #[arg(long, global = true)]
    max_len: Option<usize>,

    /// Escape-domain radius (overrides `r_dom`).
    #[arg(long, global = true)]
    r_dom: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Check disjointness and the no-eclipse condition.
    GeometryCheck,
    /// Run the billiard flow from `simulate.x`, `simulate.v` (or `angle`).
    Simulate,
    /// Build the periodic-orbit database up to `zeta.max_len` bounces.
    Orbits,
    /// Locate zeros of the Fredholm determinant in `region`.
    Resonances,
    /// Evaluate the weighted zeta function at `zeta_eval.lambda`.
    ZetaEval,
    /// Resolvent matrix coefficient and identity-defect battery.
    Resolvent,
    /// Grid approximation of the trapped set in Birkhoff coordinates.
    TrappedSet,
}

fn collect_overrides(cli: &Cli) -> anyhow::Result<Vec<(String, Value)>> {
    let mut out = Vec::new();
    for text in &cli.overrides {
        out.push(config::parse_override(text)?);
    }
    let path = |p: &PathBuf| Value::String(p.to_string_lossy().into_owned());
    if let Some(p) = &cli.obstacles {
        out.push(("obstacles".into(), path(p)));
    }
    if let Some(p) = &cli.output_dir {
        out.push(("output_dir".into(), path(p)));
    }
    if let Some(s) = cli.seed {
        out.push(("seed".into(), s.into()));
    }
    if let Some(n) = cli.max_len {
        out.push(("zeta.max_len".into(), n.into()));
    }
    if let Some(r) = cli.r_dom {
        out.push(("r_dom".into(), r.into()));
    }
    Ok(out)
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let overrides = collect_overrides(cli)?;
    let cfg = config::load(cli.config.as_deref(), &overrides)?;
    match cli.command {
        Command::GeometryCheck => commands::geometry_check(&cfg),
        Command::Simulate => commands::simulate(&cfg),
        Command::Orbits => commands::orbits(&cfg),
        Command::Resonances => commands::resonances(&cfg),
        Command::ZetaEval => commands::zeta_eval(&cfg),
        Command::Resolvent => commands::resolvent(&cfg),
        Command::TrappedSet => commands::trapped_set(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

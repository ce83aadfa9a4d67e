use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tracewalk::experiments::config::{ExperimentConfig, Kind};
use tracewalk::experiments::{run, status_for, Status};

/// Nested biased random walks on traces: phase analysis, simulation and diagnostics.
#[derive(Parser)]
#[command(name = "tracewalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Phase criterion for bias pairs or built-in grids.
    Analyze(Common),
    /// Nested simulation of the configured bias sequence.
    Simulate(Common),
    /// Velocity sweep over r for the `figure2` family.
    SweepR(Common),
    /// Trap counts in regeneration blocks of the base walk.
    TrapCensus(Common),
    /// Partial sums of the simplicity series.
    Simplicity(Common),
    /// Exact-solver and kernel cross-checks.
    OracleTest(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: out/<subcommand>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the step budget of the deepest walk.
    #[arg(long)]
    budget: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

fn load(kind: Kind, c: &Common) -> tracewalk::Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            ExperimentConfig::from_toml(&text).map_err(|e| match e {
                tracewalk::Error::Config(m) => tracewalk::Error::Config(format!("{}: {m}", p.display())),
                other => other,
            })?
        }
        None => ExperimentConfig::defaults(kind),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(b) = c.budget {
        if let Some(last) = cfg.simulate.budgets.last_mut() {
            *last = b;
        }
        cfg.sweep.child_steps = b;
        cfg.sweep.checkpoints.retain(|&n| n <= b);
        if cfg.sweep.checkpoints.is_empty() {
            cfg.sweep.checkpoints.push(b);
        }
        cfg.trap.steps = b;
        cfg.oracle.kernel_steps = b;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Analyze(c) => (Kind::Analyze, c),
        Command::Simulate(c) => (Kind::Simulate, c),
        Command::SweepR(c) => (Kind::SweepR, c),
        Command::TrapCensus(c) => (Kind::TrapCensus, c),
        Command::Simplicity(c) => (Kind::Simplicity, c),
        Command::OracleTest(c) => (Kind::OracleTest, c),
    };
    if common.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(common.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(Status::Validation as u8);
        }
    }
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out").join(kind.name()));
    let result = load(kind, common).and_then(|cfg| run(kind, &cfg, &out));
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            println!("outputs written to {}", out.display());
            ExitCode::from(outcome.status as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(status_for(&e) as u8)
        }
    }
}

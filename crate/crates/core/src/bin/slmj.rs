use clap::{Parser, Subcommand};
use slmj::config::{RunConfig, SCHEMA};
use slmj::pipeline::{self, CommandReport};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "slmj", version, about = "Strict local martingales with jumps: simulation, projection and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample paths and passage events.
    Simulate,
    /// Project onto the passage filtration.
    Project,
    /// Empirical against analytic passage intensity.
    Intensity,
    /// Strictness verdicts for the diffusion coefficient.
    Classify,
    /// Projection onto transaction information.
    Market,
    /// Run the acceptance suite.
    Selftest,
}

fn run(cli: &Cli) -> slmj::Result<CommandReport> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if matches!(cli.command, Command::Selftest) => RunConfig::from_json(&format!("{{\"schema\": \"{SCHEMA}\"}}"))?,
        None => return Err(slmj::Error::config("--config", "required for this command")),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let go = || match cli.command {
        Command::Simulate => pipeline::cmd_simulate(&cfg, &out),
        Command::Project => pipeline::cmd_project(&cfg, &out),
        Command::Intensity => pipeline::cmd_intensity(&cfg, &out),
        Command::Classify => pipeline::cmd_classify(&cfg, &out),
        Command::Market => pipeline::cmd_market(&cfg, &out),
        Command::Selftest => pipeline::cmd_selftest(&cfg, &out),
    };
    match cli.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| slmj::Error::Io(e.to_string()))?
            .install(go),
        None => go(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(rep) if rep.success() => ExitCode::SUCCESS,
        Ok(rep) => {
            eprintln!("failed checks: {}", rep.failed().join(", "));
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

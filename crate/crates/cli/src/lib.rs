//! Library side of the `osr` binary: argument parsing, orchestration and
//! report output.

pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use crate::commands::CommandOutput;
use crate::config::RunConfig;
use crate::report::{write_outputs, ReportBundle};

/// Exit status when a command's pass condition fails.
pub const EXIT_FAILED: i32 = 1;
/// Exit status for usage, configuration and runtime errors.
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Expect,
    Axioms,
    Reconstruct,
    Universality,
    Converge,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Expect => "expect",
            Command::Axioms => "axioms",
            Command::Reconstruct => "reconstruct",
            Command::Universality => "universality",
            Command::Converge => "converge",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "osr", version, about = "Osterwalder-Schrader reconstruction for 2D gauge theories")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: PathBuf,
    /// Loop networks, one block per network (required by `expect`).
    #[arg(long)]
    pub networks: Option<PathBuf>,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `[run] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Runs the command in-process without touching the filesystem output.
pub fn execute(command: Command, cfg: &RunConfig, networks: Option<&str>) -> Result<CommandOutput> {
    match command {
        Command::Expect => {
            let Some(text) = networks else {
                bail!("expect needs --networks");
            };
            commands::cmd_expect(cfg, text)
        }
        Command::Axioms => commands::cmd_axioms(cfg),
        Command::Reconstruct => commands::cmd_reconstruct(cfg),
        Command::Universality => commands::cmd_universality(cfg, networks),
        Command::Converge => commands::cmd_converge(cfg),
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("OSR_THREADS") {
        let n: usize = v.trim().parse().with_context(|| format!("OSR_THREADS={v} is not a thread count"))?;
        if n == 0 {
            bail!("OSR_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

/// Full CLI run; returns the process exit status.
pub fn run(cli: &Cli) -> Result<i32> {
    configure_threads()?;
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    let networks = cli
        .networks
        .as_ref()
        .map(|p| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let out = execute(cli.command, &cfg, networks.as_deref())?;
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let bundle = ReportBundle::new(cli.command.name(), &cfg, out.payload);
    let written = write_outputs(&dir, &bundle, &out.csv, cfg.output.csv)?;
    for p in written {
        println!("{}", p.display());
    }
    Ok(if out.success { 0 } else { EXIT_FAILED })
}

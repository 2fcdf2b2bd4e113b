//! Command-line runner: `teleport | tomography | process | budget`.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Result;
use crate::protocol::TeleportMode;
pub use commands::CommandOutput;
pub use config::RunConfig;
pub use output::Format;

#[derive(Debug, Parser)]
#[command(name = "heralded-teleport", version, about = "Heralded teleportation between two remote matter qubits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run heralded teleportation events and write per-event records.
    Teleport(CommonArgs),
    /// Reconstruct the six output states and the process matrix.
    Tomography(TomographyArgs),
    /// Maximum-likelihood process matrix only.
    Process(TomographyArgs),
    /// Gate probability, waiting time and error budget.
    Budget(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Tomography shots per basis per input.
    #[arg(long)]
    pub shots: Option<u64>,
    /// Heralded events per input state.
    #[arg(long)]
    pub heralds: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<TeleportMode>,
    /// Output directory; created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Format of tabular outputs.
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TomographyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Analyze a counts file instead of simulating.
    #[arg(long)]
    pub counts: Option<PathBuf>,
}

fn parse_mode(s: &str) -> std::result::Result<TeleportMode, String> {
    s.parse().map_err(|e: crate::error::Error| e.to_string())
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_path(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(shots) = self.shots {
            config.shots_per_basis = shots;
        }
        if let Some(heralds) = self.heralds {
            config.heralds_per_state = heralds;
        }
        if let Some(mode) = self.mode {
            config.mode = mode;
        }
        config.validate()?;
        Ok(config)
    }
}

pub fn run(cli: &Cli) -> Result<CommandOutput> {
    let common = match &cli.command {
        Command::Teleport(c) | Command::Budget(c) => c,
        Command::Tomography(t) | Command::Process(t) => &t.common,
    };
    let config = common.resolve()?;
    std::fs::create_dir_all(&common.out)?;
    let out = common.out.as_path();
    match &cli.command {
        Command::Teleport(c) => commands::cmd_teleport(&config, out, c.format),
        Command::Tomography(t) => commands::cmd_tomography(&config, t.counts.as_deref(), out, t.common.format),
        Command::Process(t) => commands::cmd_process(&config, t.counts.as_deref(), out, t.common.format),
        Command::Budget(c) => commands::cmd_budget(&config, out, c.format),
    }
}

//! `mgmodes`: price, simulate, and cross-check the mode-indexed two-factor
//! pricing equation family from a JSON run configuration.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.
//! Errors are single lines on stderr, `error: config: <field>: <message>`
//! or `error: numerical: <message>`. `MGMODES_THREADS` caps worker
//! parallelism; unset means the hardware default.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::CommandIo;
use crate::config::{Overrides, RunConfig};

#[derive(Debug)]
pub enum CliError {
    Config { field: String, message: String },
    Numerical(String),
}

impl CliError {
    pub fn config(field: &str, message: String) -> Self {
        Self::Config { field: field.to_string(), message }
    }

    pub fn from_core(err: mgmodes_core::Error) -> Self {
        use mgmodes_core::Error as E;
        match err {
            E::InvalidParams(violations) => {
                let first = violations.first();
                Self::Config {
                    field: first.map(|v| v.field.to_string()).unwrap_or_else(|| "params".into()),
                    message: first.map(|v| v.message.clone()).unwrap_or_default(),
                }
            }
            E::Domain(msg) | E::Dimension(msg) | E::Range(msg) => {
                Self::Config { field: "params".to_string(), message: msg }
            }
            E::Singular(msg) => Self::Numerical(msg),
            E::NonFinite { step, context } => {
                Self::Numerical(format!("non-finite values at step {}: {}", step, context))
            }
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            Self::Config { .. } => 2,
            Self::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config { field, message } => write!(f, "error: config: {}: {}", field, message),
            Self::Numerical(message) => write!(f, "error: numerical: {}", message),
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (JSON); an emitted manifest also works.
    #[arg(long)]
    config: PathBuf,
    /// Override the security mode n.
    #[arg(long)]
    n: Option<u32>,
    /// Override the variance mode m.
    #[arg(long)]
    m: Option<u32>,
    /// Override the Monte Carlo seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the Monte Carlo path count.
    #[arg(long)]
    paths: Option<usize>,
    /// Refinement levels for the convergence study.
    #[arg(long)]
    levels: Option<usize>,
    /// Output directory (default: config `out_dir`, then `mgmodes_out`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the pricing equation and report the spot value.
    Price(Common),
    /// Monte Carlo price with its standard error.
    Mc(Common),
    /// Grid-refinement study with observed convergence orders.
    Converge(Common),
    /// Residual norms of the solved surface under the discrete generator.
    Residual(Common),
    /// Delta-hedging P&L statistics over the configured rebalance counts.
    Hedge(Common),
    /// Effective-mass table and mode-decomposition round-trip report.
    Modes(Common),
}

#[derive(Debug, Parser)]
#[command(name = "mgmodes", version, about = "Mode-indexed two-factor option pricing engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn init_thread_pool() -> Result<(), CliError> {
    match std::env::var("MGMODES_THREADS") {
        Err(_) => Ok(()),
        Ok(raw) => {
            let n: usize = raw.parse().map_err(|_| {
                CliError::config("MGMODES_THREADS", format!("must be a positive integer (got {:?})", raw))
            })?;
            if n == 0 {
                return Err(CliError::config(
                    "MGMODES_THREADS",
                    "must be a positive integer (got 0)".to_string(),
                ));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Numerical(format!("thread pool: {}", e)))
        }
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let (common, name) = match command {
        Command::Price(c) => (c, "price"),
        Command::Mc(c) => (c, "mc"),
        Command::Converge(c) => (c, "converge"),
        Command::Residual(c) => (c, "residual"),
        Command::Hedge(c) => (c, "hedge"),
        Command::Modes(c) => (c, "modes"),
    };
    let mut config = RunConfig::load(&common.config)?;
    config.apply_overrides(&Overrides {
        n: common.n,
        m: common.m,
        seed: common.seed,
        paths: common.paths,
    });
    let io = CommandIo::new(config.out_dir(common.out.as_deref()))?;
    match name {
        "price" => commands::cmd_price(&config, &io),
        "mc" => commands::cmd_mc(&config, &io),
        "converge" => commands::cmd_converge(&config, common.levels.unwrap_or(3), &io),
        "residual" => commands::cmd_residual(&config, &io),
        "hedge" => commands::cmd_hedge(&config, &io),
        "modes" => commands::cmd_modes(&config, &io),
        _ => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(err) = init_thread_pool().and_then(|()| run(&cli.command)) {
        eprintln!("{}", err);
        return ExitCode::from(err.exit_code());
    }
    ExitCode::SUCCESS
}

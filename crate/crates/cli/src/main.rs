//! `shiftlab`: weights, ladders, simulations and certificates from the command line.
//!
//! Every run writes into `<root>/<run-id>/` and finishes with `manifest.json`.
//! Exit status is 0 on success, 1 when a certificate fails or a run breaks,
//! 2 for usage and configuration errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{StartSpec, Target};
use config::{Overrides, RunConfig};

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "SHIFTLAB_OUT";

/// Bad flags, bad config values, unknown names.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "shiftlab", version, about = "Weighted-shift stability laboratory")]
struct Cli {
    /// TOML file with any of the global settings.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output root; run directories are created beneath it.
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// Run directory name; defaults to a digest of command and config.
    #[arg(long, global = true)]
    run_id: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Table of the level weights alpha_n.
    Weights {
        #[arg(long, default_value_t = 64)]
        n_max: u64,
    },
    /// Gelfand estimates of the spectral radius of W_eps.
    Spectrum {
        #[arg(long, default_value_t = 25)]
        p_max: u32,
    },
    /// The radius ladder as JSON.
    Ladder,
    /// Integrate one trajectory.
    Simulate {
        /// Explicit leading components of x0, zero-padded to dim.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "shell")]
        x0: Option<Vec<f64>>,
        /// Start at a random point of shell k, between r_{k+1} and r_k.
        #[arg(long)]
        shell: Option<usize>,
        /// Seed of the random direction; defaults to --seed.
        #[arg(long)]
        direction_seed: Option<u64>,
        /// Leading coordinates the random direction lives on; defaults to dim / 2.
        #[arg(long)]
        block: Option<usize>,
        /// Record every n-th accepted step.
        #[arg(long, default_value_t = 1)]
        stride: usize,
    },
    /// Norms of the truncated linear propagator over a t x N grid.
    Linearized {
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16,32,64")]
        ts: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "64,128,256,512,1024,2048,4096")]
        ns: Vec<usize>,
    },
    /// Run certificates; exits 1 if any fails.
    Certify {
        /// Claim ids, comma separated; all when omitted.
        #[arg(long, value_delimiter = ',')]
        claims: Vec<String>,
        /// Print the available claim ids and exit.
        #[arg(long)]
        list: bool,
    },
}

const DEFAULT_SHELL: usize = 4;

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = cli.config.as_deref().map(Overrides::from_file).transpose()?;
    let cfg = RunConfig::layered(file.as_ref(), &cli.overrides)?;
    let target = Target {
        root: commands::resolve_root(cli.out.as_deref(), file.as_ref().and_then(|f| f.out.as_deref())),
        run_id: cli.run_id,
    };

    let done = match cli.command {
        Command::Weights { n_max } => commands::weights(&cfg, &target, n_max)?,
        Command::Spectrum { p_max } => commands::spectrum(&cfg, &target, p_max)?,
        Command::Ladder => commands::ladder(&cfg, &target)?,
        Command::Simulate { x0, shell, direction_seed, block, stride } => {
            let start = match x0 {
                Some(x) => StartSpec::Components(x),
                None => StartSpec::Shell {
                    k: shell.unwrap_or(DEFAULT_SHELL),
                    direction_seed: direction_seed.unwrap_or(cfg.seed),
                    block: block.unwrap_or(cfg.dim / 2),
                },
            };
            commands::simulate(&cfg, &target, &start, stride)?
        }
        Command::Linearized { ts, ns } => commands::linearized(&cfg, &target, &ts, &ns)?,
        Command::Certify { list: true, .. } => {
            let reg = shiftlab::certify::ClaimRegistry::default();
            for id in reg.ids() {
                println!("{id:<12} {}", reg.get(id)?.summary());
            }
            return Ok(ExitCode::SUCCESS);
        }
        Command::Certify { claims, .. } => commands::certify(&cfg, &target, &claims)?,
    };

    println!("{}", done.dir.display());
    if done.all_passed {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failing claims: {}", done.failing.join(", "));
        Ok(ExitCode::from(1))
    }
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<shiftlab::Error>() {
        Some(
            shiftlab::Error::InvalidParameter(_)
            | shiftlab::Error::UnknownClaim(_)
            | shiftlab::Error::UnknownIntegrator(_)
            | shiftlab::Error::DimensionTooSmall(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

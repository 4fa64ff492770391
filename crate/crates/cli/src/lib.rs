//! The `rpl` command-line tool.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence, 3 invariant failure.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use pairwise_rkhs::robustness::ScTarget;

use crate::commands::Fault;
use crate::config::RunConfig;
use crate::error::{input, CliResult};

#[derive(Debug, Parser)]
#[command(name = "rpl", version, about = "Regularized pairwise learning in an RKHS")]
pub struct Cli {
    /// Run config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset CSV with header x1,...,xd,y.
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    /// Output directory. Reports go to standard output when omitted,
    /// except for `fit`, which falls back to the config's output_dir.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TargetArg {
    Risk,
    Estimator,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model; writes model.json and fit_report.json.
    Fit {
        /// Use the closed-form solution (squared loss only).
        #[arg(long)]
        oracle: bool,
    },
    /// Predict at the inputs of --data; writes predictions.csv.
    Predict {
        #[arg(long)]
        model: PathBuf,
    },
    /// Influence function of a fitted model at a point "x1,...,xd;y".
    Influence {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        point: String,
    },
    /// Sensitivity curve for adding a point "x1,...,xd;y" to --data.
    Sc {
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, value_enum, default_value = "risk")]
        target: TargetArg,
    },
    /// Maxbias probe for bounded losses.
    Maxbias {
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        eps: Vec<f64>,
        /// Contamination atoms, CSV with header x1,...,xd,y.
        #[arg(long)]
        grid: Option<PathBuf>,
    },
    /// Bootstrap distribution of the norm and of predictions at probe points.
    Bootstrap {
        #[arg(short = 'B', long = "B")]
        replicates: usize,
        /// Probe inputs, CSV with header x1,...,xd.
        #[arg(long)]
        probes: Option<PathBuf>,
        #[arg(long, hide = true)]
        identity_resample: bool,
    },
    /// Run the invariant suite on the configured problem.
    Check {
        #[arg(long, hide = true)]
        inject_fault: Option<Fault>,
    },
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    match value {
        Some(p) => Ok(p),
        None => input(format!("--{flag} is required for this command")),
    }
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = RunConfig::load(required(&cli.config, "config")?)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn dispatch(cli: &Cli) -> CliResult<u8> {
    let out = cli.out.as_deref();
    let data = || io::read_dataset(required(&cli.data, "data")?);
    match &cli.command {
        Command::Fit { oracle } => {
            let config = load_config(cli)?;
            let dir = out.map(Path::to_path_buf).unwrap_or_else(|| config.output_dir.clone());
            commands::cmd_fit(&config, &data()?, &dir, *oracle)
        }
        Command::Predict { model } => {
            let model = commands::load_model(model)?;
            commands::cmd_predict(&model, required(&cli.data, "data")?, out)
        }
        Command::Influence { model, point } => {
            let model = commands::load_model(model)?;
            commands::cmd_influence(&model, &data()?, point, out)
        }
        Command::Sc { point, target } => {
            let target = match target {
                TargetArg::Risk => ScTarget::Risk,
                TargetArg::Estimator => ScTarget::Estimator,
            };
            commands::cmd_sc(&load_config(cli)?, &data()?, point, target, out)
        }
        Command::Maxbias { eps, grid } => commands::cmd_maxbias(&load_config(cli)?, &data()?, eps, grid.as_deref(), out),
        Command::Bootstrap { replicates, probes, identity_resample } => {
            commands::cmd_bootstrap(&load_config(cli)?, &data()?, *replicates, probes.as_deref(), *identity_resample, out)
        }
        Command::Check { inject_fault } => commands::cmd_check(&load_config(cli)?, &data()?, *inject_fault, out),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

use std::path::{Path, PathBuf};

use pairwise_rkhs::{KernelSpec, PairwiseLoss, SolverOptions};
use serde::Deserialize;

use crate::error::{input, CliError, CliResult};
use crate::io::read_matrix;

/// Kernel block of a run config. A precomputed kernel is read from a CSV
/// file, resolved relative to the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelBlock {
    GaussianRbf { gamma: f64 },
    AbelRbf { gamma: f64 },
    Linear,
    Precomputed { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kernel: KernelBlock,
    loss: PairwiseLoss,
    lambda: f64,
    #[serde(default)]
    solver: SolverOptions,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub kernel: KernelSpec,
    pub loss: PairwiseLoss,
    pub lambda: f64,
    pub solver: SolverOptions,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Parses config JSON; relative paths are taken from `base`.
    pub fn parse(text: &str, base: &Path) -> CliResult<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
        if !(raw.lambda.is_finite() && raw.lambda > 0.0) {
            return input(format!("lambda must be positive, got {}", raw.lambda));
        }
        raw.loss.validate()?;
        raw.solver.validate()?;
        let kernel = match raw.kernel {
            KernelBlock::GaussianRbf { gamma } => KernelSpec::gaussian(gamma)?,
            KernelBlock::AbelRbf { gamma } => KernelSpec::abel(gamma)?,
            KernelBlock::Linear => KernelSpec::Linear,
            KernelBlock::Precomputed { path } => {
                let path = base.join(path);
                if !path.is_file() {
                    return input(format!("kernel matrix file {} does not exist", path.display()));
                }
                KernelSpec::precomputed(read_matrix(&path)?)?
            }
        };
        Ok(RunConfig {
            kernel,
            loss: raw.loss,
            lambda: raw.lambda,
            solver: raw.solver,
            seed: raw.seed,
            output_dir: raw.output_dir.map(|p| base.join(p)).unwrap_or_else(|| PathBuf::from(".")),
        })
    }
}

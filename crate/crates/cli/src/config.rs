//! JSON run configuration. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use qem_core::fields::{Interval, InvariantDescription, ProfileExpr};
use qem_core::fluid::LaplacianMetric;
use qem_core::geometry::{Region, Signature, DEFAULT_SEED};
use qem_core::reduction::DEFAULT_ODE_STEP;

use crate::CliError;

pub const DEFAULT_GRID_COUNT: usize = 200;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_ORACLE_TOL: f64 = 1e-5;
pub const DEFAULT_WITNESS_SAMPLES: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Generate,
    Verify,
    Ode,
    Fluid,
    Oracle,
    Witness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `φ = e^{αξ+β}` over `ξ = Σ ε_k x_k²`.
    ExpRadial,
    /// `φ = e^{aξ+b}` over `ξ = Σ b_k x_k`.
    ExpTranslation,
    /// `φ = √ξ` over `ξ = Σ x_k²`.
    SqrtRadial,
    /// Profiles and invariant given in the `candidate` block.
    Custom,
}

/// User-supplied candidate for the `custom` family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateBlock {
    pub invariant: InvariantDescription,
    pub phi: ProfileExpr,
    pub h: ProfileExpr,
    /// Derived from the λ formula when absent.
    #[serde(default)]
    pub lambda: Option<ProfileExpr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Chosen per family when absent.
    #[serde(default)]
    pub region: Option<Region>,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self {
            count: DEFAULT_GRID_COUNT,
            seed: DEFAULT_SEED,
            region: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default)]
    pub report: Option<String>,
    #[serde(default)]
    pub csv: Option<String>,
}

fn default_count() -> usize {
    DEFAULT_GRID_COUNT
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_step() -> f64 {
    DEFAULT_ODE_STEP
}

fn default_samples() -> usize {
    DEFAULT_WITNESS_SAMPLES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub family: Option<Family>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub m: Option<f64>,
    /// Entries ±1; Euclidean when absent.
    #[serde(default)]
    pub signature: Option<Vec<f64>>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub direction: Option<Vec<f64>>,
    /// ξ-interval: profile domain for the families, integration interval for
    /// `ode`, sample range for `witness`.
    #[serde(default)]
    pub interval: Option<Interval>,
    #[serde(default)]
    pub candidate: Option<CandidateBlock>,
    /// Conformal profile for `ode` and `witness`.
    #[serde(default)]
    pub phi: Option<ProfileExpr>,
    /// `[h(ξ₀), h'(ξ₀)]` for `ode`.
    #[serde(default)]
    pub initial: Option<[f64; 2]>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub lambda_offset: Option<f64>,
    #[serde(default)]
    pub laplacian: LaplacianMetric,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub output: OutputBlock,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn command(&self) -> Result<Command, CliError> {
        self.command.ok_or_else(|| invalid("no command given in the config or on the command line"))
    }

    pub fn tolerance(&self) -> f64 {
        match (self.tol, self.command) {
            (Some(t), _) => t,
            (None, Some(Command::Oracle)) => DEFAULT_ORACLE_TOL,
            (None, _) => DEFAULT_TOL,
        }
    }

    pub fn signature(&self) -> Result<Signature, CliError> {
        match (&self.signature, self.n) {
            (Some(s), _) => Ok(Signature::from_reals(s)?),
            (None, Some(n)) => Ok(Signature::euclidean(n)?),
            (None, None) => Err(invalid("either n or signature is required")),
        }
    }

    pub fn require_m(&self) -> Result<f64, CliError> {
        self.m.ok_or_else(|| invalid("m is required"))
    }

    pub fn family(&self) -> Result<Family, CliError> {
        match (self.family, &self.candidate) {
            (Some(f), _) => Ok(f),
            (None, Some(_)) => Ok(Family::Custom),
            (None, None) => Err(invalid("family is required for this command")),
        }
    }

    /// Checks everything that does not need the core library.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(m) = self.m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid(format!("m must lie in (0, ∞), got {m}")));
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(invalid(format!("tol must be positive, got {tol}")));
            }
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(invalid(format!("step must be positive, got {}", self.step)));
        }
        if self.grid.count < 1 {
            return Err(invalid("grid.count must be at least 1"));
        }
        if self.samples < 1 {
            return Err(invalid("samples must be at least 1"));
        }
        if let Some(s) = &self.signature {
            let sig = Signature::from_reals(s)?;
            if let Some(n) = self.n {
                if n != sig.dim() {
                    return Err(invalid(format!("n = {n} but the signature has {} entries", sig.dim())));
                }
            }
        } else if let Some(n) = self.n {
            Signature::euclidean(n)?;
        }
        if let Some(region) = &self.grid.region {
            region.validate()?;
        }
        if self.candidate.is_some() && !matches!(self.family, None | Some(Family::Custom)) {
            return Err(invalid("a candidate block requires family \"custom\""));
        }
        Ok(())
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

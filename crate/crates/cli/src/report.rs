//! JSON report and per-point CSV table.

use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use qem_core::conformal::{GridMeta, ResidualEntry, SolutionCandidate};
use qem_core::fields::{Interval, InvariantSpec};
use qem_core::fluid::LaplacianMetric;
use qem_core::reduction::TrivialityWitness;

use crate::config::{Command, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct CandidateEcho {
    pub label: String,
    pub m: f64,
    pub invariant: InvariantSpec,
    pub phi: String,
    pub h: String,
    pub lambda: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roots: Option<[f64; 2]>,
}

impl CandidateEcho {
    pub fn of(cand: &SolutionCandidate, roots: Option<(f64, f64)>) -> Self {
        Self {
            label: cand.label.clone(),
            m: cand.m,
            invariant: cand.spec.clone(),
            phi: cand.phi.describe(),
            h: cand.h.describe(),
            lambda: cand.lambda.describe(),
            roots: roots.map(|(a, b)| [a, b]),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub tolerance: f64,
    pub max_residual: f64,
    /// `max |λ_trace − λ(ξ)|`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_trace_gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<ResidualEntry>,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FluidRow {
    pub xi: f64,
    pub mu: f64,
    pub rho: f64,
    pub r1: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FluidBlock {
    pub laplacian: LaplacianMetric,
    pub max_abs_r1: f64,
    pub max_abs_r2: f64,
    pub within_tolerance: bool,
    pub points: Vec<FluidRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct OdeBlock {
    pub interval: Interval,
    pub steps: usize,
    pub richardson_agreement: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleBlock {
    pub fd_step: f64,
    pub max_abs_gap: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub timestamp: u64,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub candidate: Option<CandidateEcho>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridMeta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Vec<ResidualEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ode: Option<OdeBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluid: Option<FluidBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<TrivialityWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: Command, cfg: &RunConfig) -> Self {
        Self {
            tool: "qem",
            version: env!("CARGO_PKG_VERSION"),
            command,
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            config: cfg.clone(),
            candidate: None,
            grid: None,
            summary: None,
            residuals: None,
            ode: None,
            fluid: None,
            oracle: None,
            witness: None,
            error: None,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut f = File::create(path)?;
        f.write_all(self.to_json()?.as_bytes())?;
        Ok(())
    }
}

/// Flat per-point table for plotting.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

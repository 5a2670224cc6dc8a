//! Experiment manifests: one JSON file describing a sweep over `(N, T)` cells.

use std::path::{Path, PathBuf};

use adiaprep_core::mps::TruncationPolicy;
use adiaprep_core::schedule::Schedule;
use adiaprep_core::states::{pairs_for_qubits, StateFamily};
use adiaprep_core::tebd::{HamiltonianRefresh, TebdConfig, DEFAULT_SAMPLE_STRIDE, DEFAULT_TROTTER_STEP};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOLKIT: &str = "adiaprep";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

fn default_schedule() -> String {
    "sin2-1d".into()
}
fn default_step() -> f64 {
    DEFAULT_TROTTER_STEP
}
fn default_ed_step() -> f64 {
    adiaprep_core::ed::DEFAULT_ED_STEP
}
fn default_cutoff() -> f64 {
    TruncationPolicy::DEFAULT_CUTOFF
}
fn default_max_bond() -> usize {
    TruncationPolicy::DEFAULT_MAX_BOND
}
fn default_refresh() -> String {
    "every-step".into()
}
fn default_stride() -> usize {
    DEFAULT_SAMPLE_STRIDE
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_jobs() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub id: String,
    pub family: String,
    /// Qubit counts `N`.
    pub n_qubits: Vec<usize>,
    pub total_times: Vec<f64>,
    #[serde(default = "default_schedule")]
    pub schedule: String,
    #[serde(default = "default_step")]
    pub trotter_step: f64,
    #[serde(default = "default_ed_step")]
    pub ed_step: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: f64,
    #[serde(default = "default_max_bond")]
    pub max_bond: usize,
    /// `every-step` or `grid:<points>`.
    #[serde(default = "default_refresh")]
    pub refresh: String,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Wall-clock seconds between checkpoints; none disables checkpointing.
    #[serde(default)]
    pub checkpoint_secs: Option<f64>,
}

/// A manifest whose every field has been parsed and checked.
#[derive(Clone, Debug)]
pub struct ValidatedManifest {
    pub raw: ExperimentManifest,
    pub family: StateFamily,
    pub schedule: Schedule,
    pub refresh: HamiltonianRefresh,
    pub truncation: TruncationPolicy,
    pub hash: String,
}

pub fn parse_refresh(s: &str) -> CliResult<HamiltonianRefresh> {
    if s == "every-step" {
        return Ok(HamiltonianRefresh::EveryStep);
    }
    let n = s
        .strip_prefix("grid:")
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| CliError::Validation(format!("refresh must be every-step or grid:<n>, got {s:?}")))?;
    if n < 2 {
        return Err(CliError::Validation("refresh grid needs at least 2 points".into()));
    }
    Ok(HamiltonianRefresh::Grid(n))
}

impl ExperimentManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("manifest {}: {e}", path.display())))
    }

    /// SHA-256 over the fields that determine numerical results; output
    /// location and parallelism are excluded.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        canonical.jobs = 0;
        canonical.checkpoint_secs = None;
        let bytes = serde_json::to_vec(&canonical).expect("manifest serializes");
        sha256_hex(&bytes)
    }

    pub fn validate(self) -> CliResult<ValidatedManifest> {
        let v = |m: String| Err(CliError::Validation(m));
        if self.id.is_empty() || !self.id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c)) {
            return v(format!("experiment id {:?} must be nonempty [A-Za-z0-9._-]", self.id));
        }
        let family: StateFamily = self.family.parse().map_err(|e| CliError::Validation(format!("{e}")))?;
        family.validate_for_path()?;
        if self.n_qubits.is_empty() {
            return v("n_qubits list is empty".into());
        }
        for &n in &self.n_qubits {
            pairs_for_qubits(n)?;
        }
        if self.total_times.is_empty() {
            return v("total_times list is empty".into());
        }
        for &t in &self.total_times {
            if !(t > 0.0) || !t.is_finite() {
                return v(format!("total time {t} must be positive"));
            }
        }
        let schedule: Schedule = self.schedule.parse().map_err(|e| CliError::Validation(format!("{e}")))?;
        let refresh = parse_refresh(&self.refresh)?;
        let truncation = TruncationPolicy::new(self.cutoff, self.max_bond)?;
        if !(self.ed_step > 0.0) {
            return v("ed_step must be positive".into());
        }
        if self.jobs == 0 {
            return v("jobs must be at least 1".into());
        }
        if let Some(c) = self.checkpoint_secs {
            if !(c > 0.0) {
                return v("checkpoint_secs must be positive".into());
            }
        }
        let hash = self.hash();
        let validated = ValidatedManifest { family, schedule, refresh, truncation, hash, raw: self };
        for cell in validated.cells() {
            validated.tebd_config(cell).validate()?;
        }
        Ok(validated)
    }
}

/// One `(N, T)` pair of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub n_qubits: usize,
    pub total_time: f64,
}

impl Cell {
    /// File stem shared by the cell's outputs.
    pub fn stem(&self, id: &str) -> String {
        format!("{id}_N{}_T{}", self.n_qubits, self.total_time)
    }
}

impl ValidatedManifest {
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &n in &self.raw.n_qubits {
            for &t in &self.raw.total_times {
                out.push(Cell { n_qubits: n, total_time: t });
            }
        }
        out
    }

    pub fn tebd_config(&self, cell: Cell) -> TebdConfig {
        let mut c = TebdConfig::new(self.family, cell.n_qubits, cell.total_time);
        c.trotter_step = self.raw.trotter_step.min(cell.total_time);
        c.schedule = self.schedule;
        c.truncation = self.truncation;
        c.refresh = self.refresh;
        c.sample_stride = self.raw.sample_stride;
        c
    }
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

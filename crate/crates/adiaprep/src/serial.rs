//! JSON layouts for states, Hamiltonian terms and run records, and the CSV
//! tables emitted for plotting.
//!
//! Complex arrays are stored as two parallel real arrays `re` and `im` in
//! row-major order.

use std::io::Write;
use std::path::Path;

use adiaprep_core::ed::{EdSample, GapProfile};
use adiaprep_core::hamiltonian::ParentHamiltonian;
use adiaprep_core::linalg::{c64, DenseMatrix};
use adiaprep_core::mps::{MatrixProductState, SiteTensor};
use adiaprep_core::tebd::Sample;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::{TOOLKIT, VERSION};

pub const MPS_FORMAT: &str = "adiaprep-mps/1";
pub const TERMS_FORMAT: &str = "adiaprep-terms/1";
pub const RUN_FORMAT: &str = "adiaprep-run/1";

/// Column order of TEBD trajectory tables.
pub const TRAJECTORY_COLUMNS: [&str; 6] = ["step", "t", "s", "fidelity", "max_bond", "energy"];
/// Column order of ED trajectory tables.
pub const ED_TRAJECTORY_COLUMNS: [&str; 4] = ["step", "t", "s", "fidelity"];
pub const GAP_COLUMNS: [&str; 3] = ["s", "gap", "e0"];
pub const SCHEDULE_COLUMNS: [&str; 2] = ["lambda", "s"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorJson {
    pub shape: [usize; 3],
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpsJson {
    pub format: String,
    pub phys_dims: Vec<usize>,
    pub ortho_center: Option<usize>,
    pub log_norm: f64,
    pub sites: Vec<TensorJson>,
}

impl MpsJson {
    pub fn from_state(state: &MatrixProductState) -> Self {
        let sites = state
            .sites()
            .iter()
            .map(|t| TensorJson {
                shape: [t.left(), t.phys(), t.right()],
                re: t.data().iter().map(|z| z.re).collect(),
                im: t.data().iter().map(|z| z.im).collect(),
            })
            .collect();
        Self {
            format: MPS_FORMAT.into(),
            phys_dims: state.phys_dims(),
            ortho_center: state.ortho_center(),
            log_norm: state.log_norm(),
            sites,
        }
    }

    pub fn to_state(&self) -> CliResult<MatrixProductState> {
        if self.format != MPS_FORMAT {
            return Err(CliError::Validation(format!("unsupported state format {:?}", self.format)));
        }
        let sites = self
            .sites
            .iter()
            .map(|t| {
                if t.re.len() != t.im.len() {
                    return Err(CliError::Validation("re and im arrays differ in length".into()));
                }
                let data = t.re.iter().zip(&t.im).map(|(&r, &i)| c64(r, i)).collect();
                Ok(SiteTensor::new(t.shape[0], t.shape[1], t.shape[2], data)?)
            })
            .collect::<CliResult<Vec<_>>>()?;
        let state = MatrixProductState::from_parts(sites, self.ortho_center, self.log_norm)?;
        if state.phys_dims() != self.phys_dims {
            return Err(CliError::Validation("phys_dims disagree with the site shapes".into()));
        }
        Ok(state)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &DenseMatrix) -> Self {
        let entries = m.to_row_major();
        Self {
            rows: m.rows(),
            cols: m.cols(),
            re: entries.iter().map(|z| z.re).collect(),
            im: entries.iter().map(|z| z.im).collect(),
        }
    }

    pub fn to_matrix(&self) -> CliResult<DenseMatrix> {
        if self.re.len() != self.im.len() {
            return Err(CliError::Validation("re and im arrays differ in length".into()));
        }
        let entries = self.re.iter().zip(&self.im).map(|(&r, &i)| c64(r, i)).collect();
        Ok(DenseMatrix::from_row_major(self.rows, self.cols, entries)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub first_site: usize,
    pub support: usize,
    pub matrix: MatrixJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermsJson {
    pub format: String,
    pub phys_dims: Vec<usize>,
    pub terms: Vec<TermJson>,
}

impl TermsJson {
    pub fn from_hamiltonian(h: &ParentHamiltonian) -> Self {
        Self {
            format: TERMS_FORMAT.into(),
            phys_dims: h.phys_dims().to_vec(),
            terms: h
                .terms()
                .iter()
                .map(|t| TermJson {
                    first_site: t.first_site,
                    support: t.support,
                    matrix: MatrixJson::from_matrix(&t.matrix),
                })
                .collect(),
        }
    }
}

/// Summary of a finished cell. Everything except `timing` is a deterministic
/// function of the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format: String,
    pub toolkit: String,
    pub version: String,
    pub manifest_hash: String,
    pub experiment_id: String,
    /// `tebd` or `ed`.
    pub engine: String,
    pub family: String,
    pub n_qubits: usize,
    pub n_pairs: usize,
    pub total_time: f64,
    pub step: f64,
    pub n_steps: usize,
    pub schedule: String,
    pub cutoff: Option<f64>,
    pub max_bond: Option<usize>,
    pub refresh: Option<String>,
    pub summary: RunSummary,
    pub trajectory_csv: String,
    pub timing: Timing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub final_fidelity: f64,
    /// `−ln F`, the quantity the scaling fits use.
    pub neg_log_fidelity: f64,
    /// `1 − F`, taken from the final overlap where the engine provides it.
    pub infidelity: f64,
    pub max_bond_reached: Option<usize>,
    pub truncation_saturated: Option<bool>,
    pub max_discarded_weight: Option<f64>,
    pub norm_drift: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub finished_unix: u64,
}

impl RunRecord {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        let r: RunRecord = serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        if r.format != RUN_FORMAT {
            return Err(CliError::Validation(format!("{}: not a run record", path.display())));
        }
        Ok(r)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Comment line heading every run table.
pub fn csv_banner(manifest_hash: &str) -> String {
    tagged_banner("manifest", manifest_hash)
}

/// Comment line heading a CSV table. Tables produced without a manifest carry
/// the digest of their command parameters under `params`.
pub fn tagged_banner(key: &str, digest: &str) -> String {
    format!("# {TOOLKIT} {VERSION} {key}={digest}\n")
}

fn csv_bytes(banner: &str, header: &[&str], rows: Vec<Vec<String>>) -> CliResult<Vec<u8>> {
    let mut buf = banner.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn trajectory_csv(manifest_hash: &str, samples: &[Sample]) -> CliResult<Vec<u8>> {
    let rows = samples
        .iter()
        .map(|s| {
            vec![
                s.step.to_string(),
                format!("{:.12}", s.t),
                format!("{:.17e}", s.s),
                format!("{:.17e}", s.fidelity),
                s.max_bond.to_string(),
                format!("{:.17e}", s.energy),
            ]
        })
        .collect();
    csv_bytes(&csv_banner(manifest_hash), &TRAJECTORY_COLUMNS, rows)
}

pub fn ed_trajectory_csv(manifest_hash: &str, samples: &[EdSample]) -> CliResult<Vec<u8>> {
    let rows = samples
        .iter()
        .map(|s| {
            vec![
                s.step.to_string(),
                format!("{:.12}", s.t),
                format!("{:.17e}", s.s),
                format!("{:.17e}", s.fidelity),
            ]
        })
        .collect();
    csv_bytes(&csv_banner(manifest_hash), &ED_TRAJECTORY_COLUMNS, rows)
}

pub fn gap_csv(tag: &str, profile: &GapProfile) -> CliResult<Vec<u8>> {
    let rows = profile
        .s_grid
        .iter()
        .zip(&profile.gaps)
        .zip(&profile.ground_energies)
        .map(|((s, g), e)| vec![format!("{s:.12}"), format!("{g:.15e}"), format!("{e:.6e}")])
        .collect();
    csv_bytes(&tagged_banner("params", tag), &GAP_COLUMNS, rows)
}

pub fn schedule_csv(tag: &str, samples: &[(f64, f64)]) -> CliResult<Vec<u8>> {
    let rows = samples.iter().map(|(l, s)| vec![format!("{l:.12}"), format!("{s:.17e}")]).collect();
    csv_bytes(&tagged_banner("params", tag), &SCHEDULE_COLUMNS, rows)
}

/// Reads a table written by this module, skipping the banner.
pub fn read_csv(path: &Path) -> CliResult<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use adiaprep_core::mps::fidelity;
    use adiaprep_core::states::{path_state, StateFamily};

    #[test]
    fn mps_round_trip() {
        let s = path_state(&StateFamily::MpsFamily { g: -0.3 }, 0.4, 4).unwrap();
        let json = serde_json::to_string(&MpsJson::from_state(&s)).unwrap();
        let back: MpsJson = serde_json::from_str(&json).unwrap();
        let t = back.to_state().unwrap();
        assert_eq!(s, t);
        assert!((fidelity(&s, &t).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mps_rejects_corruption() {
        let s = path_state(&StateFamily::Aklt1d, 0.4, 3).unwrap();
        let mut j = MpsJson::from_state(&s);
        j.sites[1].re.pop();
        assert!(j.to_state().is_err());
        let mut j = MpsJson::from_state(&s);
        j.format = "other".into();
        assert!(j.to_state().is_err());
    }

    #[test]
    fn trajectory_columns_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let samples = [Sample { step: 0, t: 0.0, s: 0.0, fidelity: 0.5, max_bond: 2, energy: 0.0 }];
        std::fs::write(&p, trajectory_csv("abc", &samples).unwrap()).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# adiaprep "));
        let (h, rows) = read_csv(&p).unwrap();
        assert_eq!(h, TRAJECTORY_COLUMNS);
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn matrix_round_trip() {
        let m = DenseMatrix::from_fn(2, 3, |i, j| c64(i as f64, j as f64));
        let back = MatrixJson::from_matrix(&m).to_matrix().unwrap();
        assert_eq!(m.max_diff(&back), 0.0);
    }
}

//! Sweep orchestration: independent `(N, T)` cells on a bounded worker pool.
//!
//! Each cell writes its own files; the aggregate summary is written by the
//! calling thread after every cell has finished.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use adiaprep_core::ed::{ed_evolve, EdConfig};
use adiaprep_core::tebd::{AdiabaticRun, HamiltonianRefresh, Sample, SweepReport, Trajectory};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::manifest::{Cell, ValidatedManifest, TOOLKIT, VERSION};
use crate::serial::{
    ed_trajectory_csv, trajectory_csv, write_atomic, write_json, MpsJson, RunRecord, RunSummary,
    Timing, RUN_FORMAT,
};

pub const CHECKPOINT_FORMAT: &str = "adiaprep-checkpoint/1";

/// Propagation engine of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Engine {
    Tebd,
    Ed,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Tebd => "tebd",
            Engine::Ed => "ed",
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            Engine::Tebd => "",
            Engine::Ed => "_ed",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleJson {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub fidelity: f64,
    pub max_bond: usize,
    pub energy: f64,
}

impl From<&Sample> for SampleJson {
    fn from(s: &Sample) -> Self {
        Self { step: s.step, t: s.t, s: s.s, fidelity: s.fidelity, max_bond: s.max_bond, energy: s.energy }
    }
}

impl From<&SampleJson> for Sample {
    fn from(s: &SampleJson) -> Self {
        Sample { step: s.step, t: s.t, s: s.s, fidelity: s.fidelity, max_bond: s.max_bond, energy: s.energy }
    }
}

/// Mid-run snapshot of a TEBD cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub manifest_hash: String,
    pub n_qubits: usize,
    pub total_time: f64,
    pub step: usize,
    pub samples: Vec<SampleJson>,
    pub max_discarded_weight: f64,
    pub total_discarded_weight: f64,
    pub saturated: bool,
    pub state: MpsJson,
}

/// Outcome of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOutcome {
    pub n_qubits: usize,
    pub total_time: f64,
    pub record: Option<String>,
    pub final_fidelity: Option<f64>,
    pub error: Option<String>,
    pub resumed_from_step: Option<usize>,
}

/// Aggregate written once after the join barrier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub toolkit: String,
    pub version: String,
    pub manifest_hash: String,
    pub experiment_id: String,
    pub engine: String,
    pub cells: Vec<CellOutcome>,
}

pub struct SweepOptions {
    pub engine: Engine,
    pub out_dir: PathBuf,
    pub jobs: usize,
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn refresh_name(r: HamiltonianRefresh) -> String {
    match r {
        HamiltonianRefresh::EveryStep => "every-step".into(),
        HamiltonianRefresh::Grid(n) => format!("grid:{n}"),
    }
}

/// Runs every cell of the manifest. Failed cells are reported in the summary
/// and turn the overall result into a runtime error once all cells are done.
pub fn run_sweep(m: &ValidatedManifest, opts: &SweepOptions) -> CliResult<SweepSummary> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("worker pool: {e}")))?;
    let cells = m.cells();
    let outcomes: Vec<CellOutcome> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| {
                let started = Instant::now();
                let result = match opts.engine {
                    Engine::Tebd => run_tebd_cell(m, cell, &opts.out_dir),
                    Engine::Ed => run_ed_cell(m, cell, &opts.out_dir),
                };
                let mut outcome = CellOutcome {
                    n_qubits: cell.n_qubits,
                    total_time: cell.total_time,
                    record: None,
                    final_fidelity: None,
                    error: None,
                    resumed_from_step: None,
                };
                match result {
                    Ok((path, f, resumed)) => {
                        log::info!(
                            "cell N={} T={} F={f:.10} ({:.1}s)",
                            cell.n_qubits,
                            cell.total_time,
                            started.elapsed().as_secs_f64()
                        );
                        outcome.record = path.file_name().map(|n| n.to_string_lossy().into_owned());
                        outcome.final_fidelity = Some(f);
                        outcome.resumed_from_step = resumed;
                    }
                    Err(e) => {
                        log::error!("cell N={} T={} failed: {e}", cell.n_qubits, cell.total_time);
                        outcome.error = Some(e.to_string());
                    }
                }
                outcome
            })
            .collect()
    });
    let summary = SweepSummary {
        toolkit: TOOLKIT.into(),
        version: VERSION.into(),
        manifest_hash: m.hash.clone(),
        experiment_id: m.raw.id.clone(),
        engine: opts.engine.name().into(),
        cells: outcomes,
    };
    let name = format!("{}{}_summary.json", m.raw.id, opts.engine.suffix());
    write_json(&opts.out_dir.join(name), &summary)?;
    let failed = summary.cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} of {} cells failed", summary.cells.len())));
    }
    Ok(summary)
}

fn checkpoint_path(out: &Path, stem: &str) -> PathBuf {
    out.join(format!("{stem}.ckpt.json"))
}

fn load_checkpoint(path: &Path, m: &ValidatedManifest, cell: Cell) -> Option<Checkpoint> {
    let text = std::fs::read_to_string(path).ok()?;
    let ck: Checkpoint = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            log::warn!("ignoring unreadable checkpoint {}: {e}", path.display());
            return None;
        }
    };
    if ck.format != CHECKPOINT_FORMAT
        || ck.manifest_hash != m.hash
        || ck.n_qubits != cell.n_qubits
        || ck.total_time != cell.total_time
    {
        log::warn!("ignoring checkpoint {} from a different manifest", path.display());
        return None;
    }
    Some(ck)
}

fn save_checkpoint(path: &Path, m: &ValidatedManifest, cell: Cell, run: &AdiabaticRun) -> CliResult<()> {
    let stats = run.stats();
    let ck = Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        manifest_hash: m.hash.clone(),
        n_qubits: cell.n_qubits,
        total_time: cell.total_time,
        step: run.steps_done(),
        samples: run.samples().iter().map(SampleJson::from).collect(),
        max_discarded_weight: stats.max_discarded_weight,
        total_discarded_weight: stats.total_discarded_weight,
        saturated: stats.saturated,
        state: MpsJson::from_state(run.state()),
    };
    write_json(path, &ck)
}

fn start_run(m: &ValidatedManifest, cell: Cell, ckpt: &Path) -> CliResult<(AdiabaticRun, Option<usize>)> {
    let config = m.tebd_config(cell);
    if let Some(ck) = load_checkpoint(ckpt, m, cell) {
        let state = ck.state.to_state()?;
        let samples = ck.samples.iter().map(Sample::from).collect();
        let stats = SweepReport {
            max_discarded_weight: ck.max_discarded_weight,
            total_discarded_weight: ck.total_discarded_weight,
            saturated: ck.saturated,
        };
        let run = AdiabaticRun::resume(config, state, ck.step, samples, stats)?;
        log::info!("cell N={} T={} resumes at step {}", cell.n_qubits, cell.total_time, ck.step);
        return Ok((run, Some(ck.step)));
    }
    Ok((AdiabaticRun::new(config)?, None))
}

fn run_tebd_cell(m: &ValidatedManifest, cell: Cell, out: &Path) -> CliResult<(PathBuf, f64, Option<usize>)> {
    let started = Instant::now();
    let stem = cell.stem(&m.raw.id);
    let ckpt = checkpoint_path(out, &stem);
    let (mut run, resumed) = start_run(m, cell, &ckpt)?;
    let mut last_save = Instant::now();
    while !run.is_done() {
        run.step_once()?;
        if let Some(secs) = m.raw.checkpoint_secs {
            if last_save.elapsed().as_secs_f64() >= secs && !run.is_done() {
                save_checkpoint(&ckpt, m, cell, &run)?;
                last_save = Instant::now();
            }
        }
    }
    let config = run.config().clone();
    let traj: Trajectory = run.finish()?;
    let csv_name = format!("{stem}.csv");
    write_atomic(&out.join(&csv_name), &trajectory_csv(&m.hash, &traj.samples)?)?;
    let record = RunRecord {
        format: RUN_FORMAT.into(),
        toolkit: TOOLKIT.into(),
        version: VERSION.into(),
        manifest_hash: m.hash.clone(),
        experiment_id: m.raw.id.clone(),
        engine: Engine::Tebd.name().into(),
        family: m.family.to_string(),
        n_qubits: cell.n_qubits,
        n_pairs: config.n_pairs(),
        total_time: cell.total_time,
        step: config.effective_step(),
        n_steps: config.n_steps(),
        schedule: m.schedule.to_string(),
        cutoff: Some(config.truncation.cutoff),
        max_bond: Some(config.truncation.max_bond),
        refresh: Some(refresh_name(config.refresh)),
        summary: RunSummary {
            final_fidelity: traj.final_fidelity,
            neg_log_fidelity: -traj.final_fidelity.ln(),
            infidelity: 1.0 - traj.final_fidelity,
            max_bond_reached: traj.samples.iter().map(|s| s.max_bond).max(),
            truncation_saturated: Some(traj.truncation_saturated),
            max_discarded_weight: Some(traj.max_discarded_weight),
            norm_drift: Some(traj.norm_drift),
        },
        trajectory_csv: csv_name,
        timing: Timing { wall_seconds: started.elapsed().as_secs_f64(), finished_unix: now_unix() },
    };
    let path = out.join(format!("{stem}.json"));
    write_json(&path, &record)?;
    if ckpt.exists() {
        std::fs::remove_file(&ckpt)?;
    }
    Ok((path, traj.final_fidelity, resumed))
}

fn run_ed_cell(m: &ValidatedManifest, cell: Cell, out: &Path) -> CliResult<(PathBuf, f64, Option<usize>)> {
    let started = Instant::now();
    let stem = format!("{}{}", cell.stem(&m.raw.id), Engine::Ed.suffix());
    let mut config = EdConfig::new(m.family, cell.n_qubits, cell.total_time, m.schedule);
    config.step = m.raw.ed_step.min(cell.total_time);
    config.sample_stride = m.raw.sample_stride;
    let traj = ed_evolve(&config)?;
    let csv_name = format!("{stem}.csv");
    write_atomic(&out.join(&csv_name), &ed_trajectory_csv(&m.hash, &traj.samples)?)?;
    let n_steps = config.n_steps();
    let record = RunRecord {
        format: RUN_FORMAT.into(),
        toolkit: TOOLKIT.into(),
        version: VERSION.into(),
        manifest_hash: m.hash.clone(),
        experiment_id: m.raw.id.clone(),
        engine: Engine::Ed.name().into(),
        family: m.family.to_string(),
        n_qubits: cell.n_qubits,
        n_pairs: cell.n_qubits / 2,
        total_time: cell.total_time,
        step: cell.total_time / n_steps as f64,
        n_steps,
        schedule: m.schedule.to_string(),
        cutoff: None,
        max_bond: None,
        refresh: None,
        summary: RunSummary {
            final_fidelity: traj.final_fidelity,
            neg_log_fidelity: -traj.final_fidelity.ln(),
            infidelity: traj.final_infidelity,
            max_bond_reached: None,
            truncation_saturated: None,
            max_discarded_weight: None,
            norm_drift: None,
        },
        trajectory_csv: csv_name,
        timing: Timing { wall_seconds: started.elapsed().as_secs_f64(), finished_unix: now_unix() },
    };
    let path = out.join(format!("{stem}.json"));
    write_json(&path, &record)?;
    Ok((path, traj.final_fidelity, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::ExperimentManifest;

    fn manifest() -> ValidatedManifest {
        let raw: ExperimentManifest = serde_json::from_str(
            r#"{"id":"r","family":"mps-family:g=-0.6","n_qubits":[12],"total_times":[3.0],"sample_stride":5}"#,
        )
        .unwrap();
        raw.validate().unwrap()
    }

    #[test]
    fn resumed_cell_matches_uninterrupted_cell() {
        let m = manifest();
        let cell = m.cells()[0];
        let plain = tempfile::tempdir().unwrap();
        let (_, f_plain, resumed) = run_tebd_cell(&m, cell, plain.path()).unwrap();
        assert_eq!(resumed, None);

        let split = tempfile::tempdir().unwrap();
        let ckpt = checkpoint_path(split.path(), &cell.stem(&m.raw.id));
        let mut run = AdiabaticRun::new(m.tebd_config(cell)).unwrap();
        for _ in 0..run.config().n_steps() / 2 {
            run.step_once().unwrap();
        }
        save_checkpoint(&ckpt, &m, cell, &run).unwrap();
        let half = run.steps_done();
        let (path, f_split, resumed) = run_tebd_cell(&m, cell, split.path()).unwrap();
        assert_eq!(resumed, Some(half));
        assert!((f_plain - f_split).abs() < 1e-12, "{f_plain} vs {f_split}");
        assert!(!ckpt.exists());

        let a = RunRecord::load(&plain.path().join(path.file_name().unwrap())).unwrap();
        let b = RunRecord::load(&path).unwrap();
        assert_eq!(a.n_steps, b.n_steps);
        let rows = |dir: &Path| crate::serial::read_csv(&dir.join(&a.trajectory_csv)).unwrap().1;
        let (ra, rb) = (rows(plain.path()), rows(split.path()));
        assert_eq!(ra.len(), rb.len());
        assert_eq!(ra.iter().map(|r| &r[0]).collect::<Vec<_>>(), rb.iter().map(|r| &r[0]).collect::<Vec<_>>());
    }

    #[test]
    fn checkpoint_from_other_manifest_is_ignored() {
        let m = manifest();
        let cell = m.cells()[0];
        let dir = tempfile::tempdir().unwrap();
        let ckpt = checkpoint_path(dir.path(), &cell.stem(&m.raw.id));
        let mut other = m.raw.clone();
        other.cutoff = 1e-8;
        let other = other.validate().unwrap();
        let mut run = AdiabaticRun::new(other.tebd_config(cell)).unwrap();
        run.step_once().unwrap();
        save_checkpoint(&ckpt, &other, cell, &run).unwrap();
        assert!(load_checkpoint(&ckpt, &m, cell).is_none());
        assert!(load_checkpoint(&ckpt, &other, cell).is_some());
    }
}

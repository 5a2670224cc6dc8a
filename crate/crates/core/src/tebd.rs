//! Quasi-adiabatic TEBD along the path `Q(s) = sQ + (1 − s)1`.
//!
//! Step `n` uses the Hamiltonian at the window midpoint
//! `s_n = schedule((n + ½)τ / T)` and one symmetric second-order sweep
//! `e^{−ih_1τ/2} ⋯ e^{−ih_Mτ/2} · e^{−ih_Mτ/2} ⋯ e^{−ih_1τ/2}`.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{contract, domain, Result};
use crate::hamiltonian::{energy, path_hamiltonian, ParentHamiltonian};
use crate::linalg::{hermitian_expm, DenseMatrix, DEFAULT_KERNEL_TOL};
use crate::mps::{fidelity, MatrixProductState, Sweep, TruncationPolicy};
use crate::schedule::Schedule;
use crate::states::{pair_product_state, pairs_for_qubits, path_state, StateFamily};
#[allow(unused_imports)]
use num_traits::Float;

pub const DEFAULT_TROTTER_STEP: f64 = 0.04;
pub const DEFAULT_SAMPLE_STRIDE: usize = 50;

/// How often the parent Hamiltonian is rebuilt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HamiltonianRefresh {
    EveryStep,
    /// Terms precomputed at `n` evenly spaced `s` values; each step snaps to
    /// the nearest one.
    Grid(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TebdConfig {
    pub family: StateFamily,
    /// Qubit count `N = 2·N_p`.
    pub n_qubits: usize,
    pub total_time: f64,
    pub trotter_step: f64,
    pub schedule: Schedule,
    pub truncation: TruncationPolicy,
    pub refresh: HamiltonianRefresh,
    pub sample_stride: usize,
    pub kernel_tol: f64,
}

impl TebdConfig {
    /// Defaults: `τ = 0.04`, `δ = 1e-10`, `sin2-1d`.
    pub fn new(family: StateFamily, n_qubits: usize, total_time: f64) -> Self {
        Self {
            family,
            n_qubits,
            total_time,
            trotter_step: DEFAULT_TROTTER_STEP,
            schedule: Schedule::Sin2OneD,
            truncation: TruncationPolicy::default(),
            refresh: HamiltonianRefresh::EveryStep,
            sample_stride: DEFAULT_SAMPLE_STRIDE,
            kernel_tol: DEFAULT_KERNEL_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.family.validate_for_path()?;
        pairs_for_qubits(self.n_qubits)?;
        if !(self.total_time > 0.0) || !self.total_time.is_finite() {
            return Err(domain!("total time must be positive, got {}", self.total_time));
        }
        if !(self.trotter_step > 0.0) || !self.trotter_step.is_finite() {
            return Err(domain!("Trotter step must be positive, got {}", self.trotter_step));
        }
        if self.trotter_step > self.total_time * (1.0 + 1e-9) {
            return Err(domain!(
                "Trotter step {} exceeds total time {}",
                self.trotter_step,
                self.total_time
            ));
        }
        if self.sample_stride == 0 {
            return Err(domain!("sample stride must be at least 1"));
        }
        if let HamiltonianRefresh::Grid(n) = self.refresh {
            if n < 2 {
                return Err(domain!("refresh grid needs at least 2 points"));
            }
        }
        TruncationPolicy::new(self.truncation.cutoff, self.truncation.max_bond)?;
        Ok(())
    }

    pub fn n_pairs(&self) -> usize {
        self.n_qubits / 2
    }

    /// `T/τ` rounded to the nearest integer, at least one.
    pub fn n_steps(&self) -> usize {
        ((self.total_time / self.trotter_step).round() as usize).max(1)
    }

    /// Step length actually used, `T / n_steps`.
    pub fn effective_step(&self) -> f64 {
        self.total_time / self.n_steps() as f64
    }

    /// Midpoint path parameter of step `n`.
    pub fn s_at_step(&self, n: usize) -> f64 {
        let lambda = ((n as f64 + 0.5) / self.n_steps() as f64).clamp(0.0, 1.0);
        self.schedule.evaluate(lambda).expect("lambda clamped to [0, 1]")
    }
}

/// One recorded point of a run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    /// Steps completed.
    pub step: usize,
    pub t: f64,
    /// Path parameter of the last step taken (0 before any step).
    pub s: f64,
    pub fidelity: f64,
    pub max_bond: usize,
    /// Energy under the Hamiltonian of the last step.
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub final_fidelity: f64,
    /// Some update hit `max_bond` before reaching the cutoff.
    pub truncation_saturated: bool,
    pub max_discarded_weight: f64,
    pub total_discarded_weight: f64,
    /// `|ln‖ψ‖|` at the end of the run.
    pub norm_drift: f64,
}

/// Per-sweep truncation statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SweepReport {
    pub max_discarded_weight: f64,
    pub total_discarded_weight: f64,
    pub saturated: bool,
}

impl SweepReport {
    fn absorb(&mut self, r: crate::mps::TruncationReport) {
        self.max_discarded_weight = self.max_discarded_weight.max(r.discarded_weight);
        self.total_discarded_weight += r.discarded_weight;
        self.saturated |= r.saturated;
    }
}

/// Gates of one step: `half[k]` is `e^{−ih τ/2}` for edge class `k`, and
/// `last_full` is `e^{−ih_M τ}` for the last edge, whose two middle factors
/// act back to back.
#[derive(Clone, Debug)]
pub struct StepGates {
    classes: Vec<usize>,
    half: Vec<DenseMatrix>,
    last_full: DenseMatrix,
}

impl StepGates {
    pub fn new(h: &ParentHamiltonian, tau: f64) -> Result<Self> {
        let (classes, distinct) = h.edge_classes();
        if classes.is_empty() {
            return Err(domain!("Hamiltonian has no terms"));
        }
        let half = distinct
            .iter()
            .map(|m| hermitian_expm(m, tau / 2.0))
            .collect::<Result<Vec<_>>>()?;
        let last = &distinct[*classes.last().expect("nonempty")];
        let last_full = hermitian_expm(last, tau)?;
        Ok(Self { classes, half, last_full })
    }

    fn gate(&self, edge: usize) -> &DenseMatrix {
        &self.half[self.classes[edge]]
    }
}

/// One symmetric Trotter sweep with precomputed gates. The state must be
/// canonical at site 0 and is returned canonical at site 0.
pub fn trotter_sweep_with(
    state: &mut MatrixProductState,
    gates: &StepGates,
    policy: &TruncationPolicy,
) -> Result<SweepReport> {
    if state.ortho_center() != Some(0) {
        return Err(contract!("Trotter sweep needs the orthogonality center at site 0"));
    }
    let m = gates.classes.len();
    if m + 1 != state.len() {
        return Err(domain!("{m} terms for a chain of {} sites", state.len()));
    }
    let mut report = SweepReport::default();
    for e in 0..m - 1 {
        report.absorb(state.apply_two_site_gate(gates.gate(e), e, policy, Sweep::Right)?);
    }
    report.absorb(state.apply_two_site_gate(&gates.last_full, m - 1, policy, Sweep::Left)?);
    for e in (0..m - 1).rev() {
        report.absorb(state.apply_two_site_gate(gates.gate(e), e, policy, Sweep::Left)?);
    }
    Ok(report)
}

/// One symmetric Trotter sweep of the terms of `h` with step `tau`.
pub fn trotter_sweep(
    state: &mut MatrixProductState,
    h: &ParentHamiltonian,
    tau: f64,
    policy: &TruncationPolicy,
) -> Result<SweepReport> {
    for (k, t) in h.terms().iter().enumerate() {
        if t.first_site != k {
            return Err(contract!("terms must be ordered left to right, one per edge"));
        }
    }
    trotter_sweep_with(state, &StepGates::new(h, tau)?, policy)
}

/// Resumable state of an adiabatic run.
#[derive(Clone, Debug)]
pub struct AdiabaticRun {
    config: TebdConfig,
    target: MatrixProductState,
    state: MatrixProductState,
    step: usize,
    last_s: f64,
    last_h: Option<Arc<ParentHamiltonian>>,
    samples: Vec<Sample>,
    stats: SweepReport,
    grid_cache: BTreeMap<usize, (Arc<ParentHamiltonian>, Arc<StepGates>)>,
}

impl AdiabaticRun {
    pub fn new(config: TebdConfig) -> Result<Self> {
        config.validate()?;
        let n_pairs = config.n_pairs();
        let state = pair_product_state(n_pairs, config.family.bond_kind())?;
        let target = path_state(&config.family, 1.0, n_pairs)?;
        let mut run = Self {
            config,
            target,
            state,
            step: 0,
            last_s: 0.0,
            last_h: None,
            samples: Vec::new(),
            stats: SweepReport::default(),
            grid_cache: BTreeMap::new(),
        };
        let h0 = path_hamiltonian(&run.config.family, 0.0, n_pairs, run.config.kernel_tol)?;
        run.last_h = Some(Arc::new(h0));
        run.record()?;
        Ok(run)
    }

    /// Continues from a checkpoint taken after `step` steps.
    pub fn resume(
        config: TebdConfig,
        state: MatrixProductState,
        step: usize,
        samples: Vec<Sample>,
        stats: SweepReport,
    ) -> Result<Self> {
        config.validate()?;
        if step > config.n_steps() {
            return Err(domain!("checkpoint step {step} beyond {} steps", config.n_steps()));
        }
        let n_pairs = config.n_pairs();
        let target = path_state(&config.family, 1.0, n_pairs)?;
        if state.phys_dims() != target.phys_dims() {
            return Err(domain!("checkpoint state does not match the configured chain"));
        }
        let mut state = state;
        state.canonicalize(0);
        let last_s = if step == 0 { 0.0 } else { config.s_at_step(step - 1) };
        let h = path_hamiltonian(&config.family, last_s, n_pairs, config.kernel_tol)?;
        Ok(Self {
            config,
            target,
            state,
            step,
            last_s,
            last_h: Some(Arc::new(h)),
            samples,
            stats,
            grid_cache: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &TebdConfig {
        &self.config
    }
    pub fn state(&self) -> &MatrixProductState {
        &self.state
    }
    pub fn target(&self) -> &MatrixProductState {
        &self.target
    }
    pub fn steps_done(&self) -> usize {
        self.step
    }
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
    /// Truncation statistics accumulated so far.
    pub fn stats(&self) -> SweepReport {
        self.stats
    }
    pub fn is_done(&self) -> bool {
        self.step >= self.config.n_steps()
    }

    fn hamiltonian_and_gates(&mut self, s: f64) -> Result<(Arc<ParentHamiltonian>, Arc<StepGates>)> {
        let tau = self.config.effective_step();
        let n_pairs = self.config.n_pairs();
        match self.config.refresh {
            HamiltonianRefresh::EveryStep => {
                let h = path_hamiltonian(&self.config.family, s, n_pairs, self.config.kernel_tol)?;
                let g = StepGates::new(&h, tau)?;
                Ok((Arc::new(h), Arc::new(g)))
            }
            HamiltonianRefresh::Grid(points) => {
                let idx = (s * (points - 1) as f64).round() as usize;
                if let Some(hit) = self.grid_cache.get(&idx) {
                    return Ok(hit.clone());
                }
                let sg = idx as f64 / (points - 1) as f64;
                let h = path_hamiltonian(&self.config.family, sg, n_pairs, self.config.kernel_tol)?;
                let g = StepGates::new(&h, tau)?;
                let entry = (Arc::new(h), Arc::new(g));
                self.grid_cache.insert(idx, entry.clone());
                Ok(entry)
            }
        }
    }

    fn record(&mut self) -> Result<()> {
        let h = self.last_h.as_ref().expect("Hamiltonian set before recording");
        self.samples.push(Sample {
            step: self.step,
            t: self.step as f64 * self.config.effective_step(),
            s: self.last_s,
            fidelity: fidelity(&self.target, &self.state)?,
            max_bond: self.state.max_bond(),
            energy: energy(&self.state, h)?,
        });
        Ok(())
    }

    /// Takes one Trotter step; records a sample on the stride and at the end.
    pub fn step_once(&mut self) -> Result<()> {
        if self.is_done() {
            return Err(contract!("run already finished"));
        }
        let s = self.config.s_at_step(self.step);
        let (h, gates) = self.hamiltonian_and_gates(s)?;
        let report = trotter_sweep_with(&mut self.state, &gates, &self.config.truncation)?;
        self.stats.max_discarded_weight = self.stats.max_discarded_weight.max(report.max_discarded_weight);
        self.stats.total_discarded_weight += report.total_discarded_weight;
        self.stats.saturated |= report.saturated;
        self.step += 1;
        self.last_s = s;
        self.last_h = Some(h);
        if self.step % self.config.sample_stride == 0 || self.is_done() {
            self.record()?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<Trajectory> {
        while !self.is_done() {
            self.step_once()?;
        }
        let final_fidelity = self.samples.last().map(|s| s.fidelity).unwrap_or(0.0);
        Ok(Trajectory {
            samples: self.samples,
            final_fidelity,
            truncation_saturated: self.stats.saturated,
            max_discarded_weight: self.stats.max_discarded_weight,
            total_discarded_weight: self.stats.total_discarded_weight,
            norm_drift: self.state.log_norm_value().abs(),
        })
    }
}

/// Runs the full adiabatic evolution from the pair chain to `s = 1`.
pub fn run_adiabatic(config: &TebdConfig) -> Result<Trajectory> {
    AdiabaticRun::new(config.clone())?.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{parent_hamiltonian, LocalTerm};
    use crate::linalg::c64;

    #[test]
    fn config_validation() {
        let fam = StateFamily::MpsFamily { g: -0.6 };
        assert!(TebdConfig::new(fam, 8, 1.0).validate().is_ok());
        assert!(TebdConfig::new(fam, 7, 1.0).validate().is_err());
        assert!(TebdConfig::new(fam, 8, 0.0).validate().is_err());
        assert!(TebdConfig::new(StateFamily::MpsFamily { g: 0.0 }, 8, 1.0).validate().is_err());
        let mut c = TebdConfig::new(fam, 8, 0.01);
        assert!(c.validate().is_err());
        c.trotter_step = 0.01;
        assert!(c.validate().is_ok());
        assert_eq!(c.n_steps(), 1);
    }

    #[test]
    fn midpoint_schedule() {
        let c = TebdConfig::new(StateFamily::Aklt1d, 8, 0.4);
        assert_eq!(c.n_steps(), 10);
        let expect = Schedule::Sin2OneD.evaluate(0.05).unwrap();
        assert!((c.s_at_step(0) - expect).abs() < 1e-15);
    }

    #[test]
    fn zero_step_is_identity() {
        let s = MatrixProductState::product_state(&[2, 2, 2], &[0, 1, 0]).unwrap();
        let h = parent_hamiltonian(&s, DEFAULT_KERNEL_TOL).unwrap();
        let mut t = s.clone();
        trotter_sweep(&mut t, &h, 0.0, &TruncationPolicy::default()).unwrap();
        assert!((fidelity(&s, &t).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sweep_rejects_misplaced_center() {
        let mut s = MatrixProductState::product_state(&[2, 2, 2], &[0, 1, 0]).unwrap();
        let h = parent_hamiltonian(&s, DEFAULT_KERNEL_TOL).unwrap();
        s.canonicalize(2);
        assert!(trotter_sweep(&mut s, &h, 0.1, &TruncationPolicy::default()).is_err());
    }

    #[test]
    fn diagonal_terms_give_phases() {
        let z = Arc::new(DenseMatrix::from_real_diagonal(&[0.0, 1.0, 1.0, 0.0]));
        let terms = (0..2)
            .map(|i| LocalTerm { first_site: i, support: 2, matrix: z.clone() })
            .collect();
        let h = ParentHamiltonian::new(terms, alloc::vec![2, 2, 2]).unwrap();
        let mut s = MatrixProductState::product_state(&[2, 2, 2], &[0, 1, 1]).unwrap();
        trotter_sweep(&mut s, &h, 0.3, &TruncationPolicy::default()).unwrap();
        // one violated edge: amplitude e^{-i·0.3}
        let amp = s.to_dense()[0b011];
        assert!((amp - c64(0.3f64.cos(), -0.3f64.sin())).norm() < 1e-12);
    }

    #[test]
    fn single_step_is_diabatic() {
        let fam = StateFamily::MpsFamily { g: -0.6 };
        let mut c = TebdConfig::new(fam, 8, 1e-6);
        c.trotter_step = 1e-6;
        let traj = run_adiabatic(&c).unwrap();
        let f0 = fidelity(
            &path_state(&fam, 1.0, 4).unwrap(),
            &pair_product_state(4, fam.bond_kind()).unwrap(),
        )
        .unwrap();
        assert!((traj.final_fidelity - f0).abs() < 1e-9);
        assert_eq!(traj.samples.len(), 2);
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let mut c = TebdConfig::new(StateFamily::MpsFamily { g: -0.6 }, 8, 2.0);
        c.sample_stride = 10;
        let full = run_adiabatic(&c).unwrap();
        let mut run = AdiabaticRun::new(c.clone()).unwrap();
        for _ in 0..20 {
            run.step_once().unwrap();
        }
        let resumed = AdiabaticRun::resume(c, run.state().clone(), 20, run.samples().to_vec(), run.stats())
            .unwrap()
            .finish()
            .unwrap();
        assert!((full.final_fidelity - resumed.final_fidelity).abs() < 1e-12);
        assert_eq!(full.samples.len(), resumed.samples.len());
    }
}

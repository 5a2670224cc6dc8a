//! Exact diagonalization and exact evolution for small chains.
//!
//! Hamiltonians are applied term by term to full state vectors, so the memory
//! cost is a few vectors of the Hilbert-space dimension. Dense matrices are
//! only materialized when asked for or when the dimension is small.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

use crate::error::{domain, Error, Result};
use crate::hamiltonian::{path_hamiltonian, ParentHamiltonian};
use crate::linalg::{c64, eigvalsh, DenseMatrix, C64, DEFAULT_KERNEL_TOL};
use crate::schedule::Schedule;
use crate::states::{pair_product_state, pairs_for_qubits, path_state, StateFamily};
#[allow(unused_imports)]
use num_traits::Float;

/// Largest Hilbert-space dimension accepted by default.
pub const DEFAULT_DIM_GUARD: usize = 1 << 20;
/// Largest dimension for which a dense matrix is built.
pub const DENSE_MATRIX_LIMIT: usize = 4096;
/// Dimensions up to this use a dense eigensolve for the gap.
pub const DENSE_EIGEN_LIMIT: usize = 512;
/// `E₁ − E₀` below this marks a degenerate ground space.
pub const DEGENERACY_TOL: f64 = 1e-8;
pub const DEFAULT_ED_STEP: f64 = 0.02;

/// `Σ_e h_e` acting on dense vectors, site 0 most significant.
#[derive(Clone, Debug)]
pub struct TermOperator {
    terms: Vec<(usize, DMatrix<C64>)>,
    phys_dims: Vec<usize>,
    dim: usize,
}

impl TermOperator {
    pub fn new(h: &ParentHamiltonian, guard: usize) -> Result<Self> {
        let dims = h.phys_dims().to_vec();
        let mut dim: usize = 1;
        for &d in &dims {
            dim = dim.checked_mul(d).filter(|&x| x <= guard).ok_or(Error::Resource {
                dim: dims.iter().fold(1usize, |a, &b| a.saturating_mul(b)),
                limit: guard,
            })?;
        }
        let terms = h
            .terms()
            .iter()
            .map(|t| (t.first_site, t.matrix.inner().clone()))
            .collect();
        Ok(Self { terms, phys_dims: dims, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of terms; an upper bound on the operator norm of a projector sum.
    pub fn norm_bound(&self) -> f64 {
        self.terms.iter().map(|(_, m)| if m.iter().any(|z| !z.is_zero()) { 1.0 } else { 0.0 }).sum()
    }

    /// `out = H · v`.
    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = C64::zero());
        for (site, m) in &self.terms {
            let d = m.nrows();
            let right: usize = self.phys_dims[site + 2..].iter().product();
            let left = self.dim / (d * right);
            let mut buf = vec![C64::zero(); d];
            for l in 0..left {
                for r in 0..right {
                    let base = l * d * right + r;
                    for (p, b) in buf.iter_mut().enumerate() {
                        *b = v[base + p * right];
                    }
                    for p in 0..d {
                        let mut acc = C64::zero();
                        for q in 0..d {
                            acc += m[(p, q)] * buf[q];
                        }
                        out[base + p * right] += acc;
                    }
                }
            }
        }
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        if self.dim > DENSE_MATRIX_LIMIT {
            return Err(Error::Resource { dim: self.dim, limit: DENSE_MATRIX_LIMIT });
        }
        let mut m = DMatrix::<C64>::zeros(self.dim, self.dim);
        let mut e = vec![C64::zero(); self.dim];
        let mut col = vec![C64::zero(); self.dim];
        for j in 0..self.dim {
            e[j] = c64(1.0, 0.0);
            self.apply(&e, &mut col);
            for i in 0..self.dim {
                m[(i, j)] = col[i];
            }
            e[j] = C64::zero();
        }
        Ok(DenseMatrix::from_inner(m))
    }
}

/// A fully assembled Hamiltonian matrix.
#[derive(Clone, Debug)]
pub struct DenseHamiltonian {
    pub phys_dims: Vec<usize>,
    pub matrix: DenseMatrix,
}

impl DenseHamiltonian {
    pub fn total_dim(&self) -> usize {
        self.matrix.rows()
    }
}

/// `Σ_e 1 ⊗ … ⊗ h_e ⊗ … ⊗ 1` as a dense matrix.
pub fn dense_hamiltonian(h: &ParentHamiltonian, guard: usize) -> Result<DenseHamiltonian> {
    let op = TermOperator::new(h, guard)?;
    Ok(DenseHamiltonian { phys_dims: h.phys_dims().to_vec(), matrix: op.to_dense()? })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundAndGap {
    pub e0: f64,
    pub e1: f64,
    pub gap: f64,
    pub degenerate: bool,
}

impl GroundAndGap {
    fn from_pair(e0: f64, e1: f64) -> Self {
        let gap = e1 - e0;
        Self { e0, e1, gap, degenerate: gap < DEGENERACY_TOL }
    }
}

/// Two lowest eigenvalues of a dense Hamiltonian.
pub fn dense_ground_and_gap(h: &DenseHamiltonian) -> Result<GroundAndGap> {
    let vals = eigvalsh(&h.matrix)?;
    if vals.len() < 2 {
        return Err(domain!("need at least a two-dimensional space"));
    }
    Ok(GroundAndGap::from_pair(vals[0], vals[1]))
}

/// Two lowest eigenvalues, counting multiplicity; dense below
/// [`DENSE_EIGEN_LIMIT`], Lanczos with deflation above.
pub fn ground_and_gap(h: &ParentHamiltonian) -> Result<GroundAndGap> {
    let op = TermOperator::new(h, DEFAULT_DIM_GUARD)?;
    if op.dim() < 2 {
        return Err(domain!("need at least a two-dimensional space"));
    }
    if op.dim() <= DENSE_EIGEN_LIMIT {
        let vals = eigvalsh(&op.to_dense()?)?;
        return Ok(GroundAndGap::from_pair(vals[0], vals[1]));
    }
    let (e0, v0) = lanczos_lowest(&op, None)?;
    let (e1, _) = lanczos_lowest(&op, Some(&v0))?;
    Ok(GroundAndGap::from_pair(e0, e1))
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Lowest eigenpair of `H` (restricted to the orthogonal complement of
/// `deflate` when given) by restarted Lanczos with full reorthogonalization.
fn lanczos_lowest(op: &TermOperator, deflate: Option<&[C64]>) -> Result<(f64, Vec<C64>)> {
    const KRYLOV: usize = 80;
    const MAX_RESTARTS: usize = 200;
    const TOL: f64 = 1e-11;
    let n = op.dim();
    // Fixed pseudo-random start vector for reproducibility.
    let mut seed: u64 = 0x2545_f491_4f6c_dd1d;
    let mut start: Vec<C64> = (0..n)
        .map(|_| {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            c64((seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5, 0.0)
        })
        .collect();
    let project = |v: &mut [C64]| {
        if let Some(d) = deflate {
            let c = dot(d, v);
            for (x, y) in v.iter_mut().zip(d) {
                *x -= c * y;
            }
        }
    };
    project(&mut start);
    let mut w = vec![C64::zero(); n];
    for _ in 0..MAX_RESTARTS {
        let nrm = norm(&start);
        if nrm == 0.0 {
            return Err(Error::Decomposition { routine: "lanczos", rows: n, cols: n });
        }
        start.iter_mut().for_each(|z| *z /= nrm);
        let mut basis: Vec<Vec<C64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut best: Option<(f64, Vec<C64>, f64)> = None;
        for j in 0..KRYLOV.min(n) {
            op.apply(&basis[j], &mut w);
            project(&mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // Two passes of full reorthogonalization.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    for (x, y) in w.iter_mut().zip(b) {
                        *x -= c * y;
                    }
                }
                project(&mut w);
            }
            let bnext = norm(&w);
            let m = alpha.len();
            let t = DMatrix::<f64>::from_fn(m, m, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = t.symmetric_eigen();
            let (k, &theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(core::cmp::Ordering::Equal))
                .expect("nonempty tridiagonal");
            let y = eig.eigenvectors.column(k).into_owned();
            let resid = bnext * y[m - 1].abs();
            let converged = resid < TOL * theta.abs().max(1.0) || bnext < 1e-14;
            if converged || j + 1 == KRYLOV.min(n) {
                let ritz = ritz_vector(&basis, &y);
                best = Some((theta, ritz, resid));
                if converged {
                    break;
                }
            }
            beta.push(bnext);
            basis.push(w.iter().map(|z| z / bnext).collect());
        }
        let (theta, ritz, resid) = best.expect("Lanczos loop records a Ritz pair");
        if resid < TOL * theta.abs().max(1.0) || n <= KRYLOV {
            return Ok((theta, ritz));
        }
        start = ritz;
    }
    Err(Error::Decomposition { routine: "lanczos", rows: n, cols: n })
}

fn ritz_vector(basis: &[Vec<C64>], y: &DVector<f64>) -> Vec<C64> {
    let n = basis[0].len();
    let mut v = vec![C64::zero(); n];
    for (b, &c) in basis.iter().zip(y.iter()) {
        for (x, z) in v.iter_mut().zip(b) {
            *x += z * c;
        }
    }
    let nrm = norm(&v);
    v.iter_mut().for_each(|z| *z /= nrm);
    v
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapProfile {
    pub n_qubits: usize,
    pub s_grid: Vec<f64>,
    pub gaps: Vec<f64>,
    pub ground_energies: Vec<f64>,
    pub delta_min: f64,
    pub argmin_s: f64,
    pub any_degenerate: bool,
}

/// `Δ(s)` of the path Hamiltonian at each grid point.
pub fn gap_sweep(family: &StateFamily, s_grid: &[f64], n_qubits: usize) -> Result<GapProfile> {
    if s_grid.is_empty() {
        return Err(domain!("empty s grid"));
    }
    let n_pairs = pairs_for_qubits(n_qubits)?;
    let mut gaps = Vec::with_capacity(s_grid.len());
    let mut e0s = Vec::with_capacity(s_grid.len());
    let mut any_degenerate = false;
    for &s in s_grid {
        let h = path_hamiltonian(family, s, n_pairs, DEFAULT_KERNEL_TOL)?;
        let r = ground_and_gap(&h)?;
        gaps.push(r.gap);
        e0s.push(r.e0);
        any_degenerate |= r.degenerate;
    }
    let (k, &delta_min) = gaps
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap_or(core::cmp::Ordering::Equal))
        .expect("nonempty grid");
    Ok(GapProfile {
        n_qubits,
        s_grid: s_grid.to_vec(),
        gaps,
        ground_energies: e0s,
        delta_min,
        argmin_s: s_grid[k],
        any_degenerate,
    })
}

/// `count` evenly spaced points on `[0, 1]`.
pub fn uniform_grid(count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(domain!("a grid needs at least 2 points"));
    }
    Ok((0..count).map(|i| i as f64 / (count - 1) as f64).collect())
}

/// `ψ ← e^{−iHt} ψ` by a Taylor series, split into substeps with
/// `‖H‖·dt ≤ 1/2`; the series stops once a term falls below `1e-17‖ψ‖`.
pub fn propagate(op: &TermOperator, psi: &mut [C64], t: f64) {
    let bound = op.norm_bound() * t.abs();
    let substeps = ((bound / 0.5).ceil() as usize).max(1);
    let dt = t / substeps as f64;
    let n = psi.len();
    let mut term = vec![C64::zero(); n];
    let mut next = vec![C64::zero(); n];
    for _ in 0..substeps {
        term.copy_from_slice(psi);
        let scale = norm(psi);
        for k in 1..60 {
            op.apply(&term, &mut next);
            let f = c64(0.0, -dt / k as f64);
            for (x, y) in term.iter_mut().zip(&next) {
                *x = f * y;
            }
            for (p, x) in psi.iter_mut().zip(&term) {
                *p += x;
            }
            if norm(&term) < 1e-17 * scale {
                break;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdConfig {
    pub family: StateFamily,
    pub n_qubits: usize,
    pub total_time: f64,
    pub step: f64,
    pub schedule: Schedule,
    pub sample_stride: usize,
    pub dim_guard: usize,
}

impl EdConfig {
    pub fn new(family: StateFamily, n_qubits: usize, total_time: f64, schedule: Schedule) -> Self {
        Self {
            family,
            n_qubits,
            total_time,
            step: DEFAULT_ED_STEP,
            schedule,
            sample_stride: 50,
            dim_guard: DEFAULT_DIM_GUARD,
        }
    }

    pub fn n_steps(&self) -> usize {
        ((self.total_time / self.step).round() as usize).max(1)
    }

    fn validate(&self) -> Result<()> {
        self.family.validate_for_path()?;
        pairs_for_qubits(self.n_qubits)?;
        if !(self.total_time > 0.0) || !(self.step > 0.0) || self.step > self.total_time * (1.0 + 1e-9) {
            return Err(domain!("need 0 < step <= total time"));
        }
        if self.sample_stride == 0 {
            return Err(domain!("sample stride must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdSample {
    pub step: usize,
    pub t: f64,
    pub s: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EdTrajectory {
    pub samples: Vec<EdSample>,
    pub final_fidelity: f64,
    /// `1 − F(T)` from the final overlap.
    pub final_infidelity: f64,
    pub final_state: Vec<C64>,
}

/// Exact evolution with the same midpoint schedule as the TEBD driver.
pub fn ed_evolve(config: &EdConfig) -> Result<EdTrajectory> {
    config.validate()?;
    let n_pairs = config.n_qubits / 2;
    let mut psi = pair_product_state(n_pairs, config.family.bond_kind())?.to_dense();
    let target = path_state(&config.family, 1.0, n_pairs)?.to_dense();
    if psi.len() > config.dim_guard {
        return Err(Error::Resource { dim: psi.len(), limit: config.dim_guard });
    }
    let n_steps = config.n_steps();
    let tau = config.total_time / n_steps as f64;
    let fid = |psi: &[C64]| dot(&target, psi).norm_sqr() / (norm(psi).powi(2) * norm(&target).powi(2));
    let mut samples = vec![EdSample { step: 0, t: 0.0, s: 0.0, fidelity: fid(&psi) }];
    for n in 0..n_steps {
        let lambda = (n as f64 + 0.5) / n_steps as f64;
        let s = config.schedule.evaluate(lambda)?;
        let h = path_hamiltonian(&config.family, s, n_pairs, DEFAULT_KERNEL_TOL)?;
        let op = TermOperator::new(&h, config.dim_guard)?;
        propagate(&op, &mut psi, tau);
        let step = n + 1;
        if step % config.sample_stride == 0 || step == n_steps {
            samples.push(EdSample { step, t: step as f64 * tau, s, fidelity: fid(&psi) });
        }
    }
    let final_fidelity = samples.last().expect("final sample").fidelity;
    Ok(EdTrajectory {
        samples,
        final_fidelity,
        final_infidelity: 1.0 - final_fidelity,
        final_state: psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{parent_hamiltonian, LocalTerm};
    use crate::linalg::hermitian_expm;
    use crate::mps::MatrixProductState;
    use alloc::sync::Arc;

    fn projector_chain() -> ParentHamiltonian {
        let s = MatrixProductState::product_state(&[2, 2], &[0, 0]).unwrap();
        parent_hamiltonian(&s, DEFAULT_KERNEL_TOL).unwrap()
    }

    #[test]
    fn single_term_matches_matrix() {
        let h = projector_chain();
        let d = dense_hamiltonian(&h, DEFAULT_DIM_GUARD).unwrap();
        assert!(d.matrix.max_diff(&h.terms()[0].matrix) < 1e-15);
        let r = dense_ground_and_gap(&d).unwrap();
        assert!(r.e0.abs() < 1e-14 && (r.gap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn commuting_terms_add() {
        let a = Arc::new(DenseMatrix::from_real_diagonal(&[0.0, 1.0, 2.0, 3.0]));
        let terms = (0..2).map(|i| LocalTerm { first_site: i, support: 2, matrix: a.clone() }).collect();
        let h = ParentHamiltonian::new(terms, vec![2, 2, 2]).unwrap();
        let d = dense_hamiltonian(&h, DEFAULT_DIM_GUARD).unwrap();
        // basis |x0 x1 x2⟩: energy = 2·x0 + x1 + 2·x1 + x2
        for idx in 0..8usize {
            let (x0, x1, x2) = ((idx >> 2) & 1, (idx >> 1) & 1, idx & 1);
            let e = (2 * x0 + x1 + 2 * x1 + x2) as f64;
            assert!((d.matrix.get(idx, idx).re - e).abs() < 1e-14);
        }
    }

    #[test]
    fn guard_is_enforced() {
        let h = projector_chain();
        assert!(matches!(TermOperator::new(&h, 3), Err(Error::Resource { .. })));
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let fam = StateFamily::MpsFamily { g: -0.3 };
        let h = path_hamiltonian(&fam, 0.6, 5, DEFAULT_KERNEL_TOL).unwrap();
        let op = TermOperator::new(&h, DEFAULT_DIM_GUARD).unwrap();
        assert_eq!(op.dim(), 1024);
        let vals = eigvalsh(&op.to_dense().unwrap()).unwrap();
        let r = ground_and_gap(&h).unwrap();
        assert!((r.e0 - vals[0]).abs() < 1e-9);
        assert!((r.gap - (vals[1] - vals[0])).abs() < 1e-9);
    }

    #[test]
    fn taylor_matches_expm() {
        let fam = StateFamily::Aklt1d;
        let h = path_hamiltonian(&fam, 0.4, 3, DEFAULT_KERNEL_TOL).unwrap();
        let op = TermOperator::new(&h, DEFAULT_DIM_GUARD).unwrap();
        let dense = op.to_dense().unwrap();
        let u = hermitian_expm(&dense, 0.7).unwrap();
        let mut psi: Vec<C64> = (0..op.dim()).map(|i| c64((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let expect = u.apply(&psi);
        propagate(&op, &mut psi, 0.7);
        let err: f64 = psi.iter().zip(&expect).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }
}

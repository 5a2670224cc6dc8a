//! Frustration-free parent Hamiltonians `H = Σ_e Π_ker[ρ_e]`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{domain, shape, Result};
use crate::linalg::{kernel_projector, DenseMatrix};
use crate::mps::MatrixProductState;
use crate::states::{path_state, StateFamily};

/// Pairs in the reference chain used for path terms: one bulk edge with full
/// rank environments on both sides, plus the two boundary edges.
pub const REFERENCE_PAIRS: usize = 4;

/// A two-site projector on sites `first_site, first_site + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalTerm {
    pub first_site: usize,
    pub support: usize,
    /// Shared between all edges of one class, so equal terms are one value.
    pub matrix: Arc<DenseMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParentHamiltonian {
    terms: Vec<LocalTerm>,
    phys_dims: Vec<usize>,
}

impl ParentHamiltonian {
    pub fn new(terms: Vec<LocalTerm>, phys_dims: Vec<usize>) -> Result<Self> {
        for t in &terms {
            if t.support != 2 || t.first_site + 1 >= phys_dims.len() {
                return Err(domain!("term at site {} does not fit the chain", t.first_site));
            }
            let dim = phys_dims[t.first_site] * phys_dims[t.first_site + 1];
            if t.matrix.shape() != (dim, dim) {
                return Err(shape!(
                    "term at site {} is {:?}, edge space is {dim}",
                    t.first_site,
                    t.matrix.shape()
                ));
            }
        }
        Ok(Self { terms, phys_dims })
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn n_sites(&self) -> usize {
        self.phys_dims.len()
    }

    pub fn phys_dims(&self) -> &[usize] {
        &self.phys_dims
    }

    /// Index of the distinct matrix each term uses, in order of first
    /// appearance, together with the distinct matrices.
    pub fn edge_classes(&self) -> (Vec<usize>, Vec<Arc<DenseMatrix>>) {
        let mut distinct: Vec<Arc<DenseMatrix>> = Vec::new();
        let mut classes = Vec::with_capacity(self.terms.len());
        for t in &self.terms {
            match distinct.iter().position(|m| Arc::ptr_eq(m, &t.matrix)) {
                Some(k) => classes.push(k),
                None => {
                    classes.push(distinct.len());
                    distinct.push(t.matrix.clone());
                }
            }
        }
        (classes, distinct)
    }
}

/// One kernel-projector term per nearest-neighbor edge.
pub fn parent_hamiltonian(state: &MatrixProductState, rel_tol: f64) -> Result<ParentHamiltonian> {
    let terms = state
        .all_two_site_rdms()
        .iter()
        .enumerate()
        .map(|(i, rho)| {
            Ok(LocalTerm { first_site: i, support: 2, matrix: Arc::new(kernel_projector(rho, rel_tol)?) })
        })
        .collect::<Result<Vec<_>>>()?;
    ParentHamiltonian::new(terms, state.phys_dims())
}

/// Parent Hamiltonian of a translation-invariant chain: the two boundary edges
/// and the middle bulk edge are computed, every other bulk edge reuses the
/// middle one. The caller guarantees a uniform bulk.
pub fn uniform_parent_hamiltonian(
    state: &MatrixProductState,
    rel_tol: f64,
) -> Result<ParentHamiltonian> {
    let n_edges = state.len() - 1;
    if n_edges <= 3 {
        return parent_hamiltonian(state, rel_tol);
    }
    let mid = n_edges / 2;
    let left = Arc::new(kernel_projector(&state.two_site_rdm(0)?, rel_tol)?);
    let bulk = Arc::new(kernel_projector(&state.two_site_rdm(mid)?, rel_tol)?);
    let right = Arc::new(kernel_projector(&state.two_site_rdm(n_edges - 1)?, rel_tol)?);
    let terms = (0..n_edges)
        .map(|i| {
            let m = if i == 0 {
                left.clone()
            } else if i == n_edges - 1 {
                right.clone()
            } else {
                bulk.clone()
            };
            LocalTerm { first_site: i, support: 2, matrix: m }
        })
        .collect();
    ParentHamiltonian::new(terms, state.phys_dims())
}

/// Terms of `H(s)` for a chain of `n_pairs` pairs.
///
/// Edge kernels of an injective chain depend only on the edge class, so they
/// are read off a short reference chain of [`REFERENCE_PAIRS`] pairs and
/// replicated.
pub fn path_hamiltonian(
    family: &StateFamily,
    s: f64,
    n_pairs: usize,
    rel_tol: f64,
) -> Result<ParentHamiltonian> {
    let reference = path_state(family, s, n_pairs.min(REFERENCE_PAIRS))?;
    let small = uniform_parent_hamiltonian(&reference, rel_tol)?;
    if n_pairs <= REFERENCE_PAIRS {
        return Ok(small);
    }
    let src = small.terms();
    let (left, bulk, right) = (&src[0].matrix, &src[1].matrix, &src[src.len() - 1].matrix);
    let terms = (0..n_pairs)
        .map(|i| {
            let m = if i == 0 {
                left.clone()
            } else if i == n_pairs - 1 {
                right.clone()
            } else {
                bulk.clone()
            };
            LocalTerm { first_site: i, support: 2, matrix: m }
        })
        .collect();
    let ref_dims = small.phys_dims();
    let mut dims = alloc::vec![ref_dims[1]; n_pairs + 1];
    dims[0] = ref_dims[0];
    dims[n_pairs] = ref_dims[ref_dims.len() - 1];
    ParentHamiltonian::new(terms, dims)
}

/// `Σ_e ⟨ψ|h_e|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn energy(state: &MatrixProductState, h: &ParentHamiltonian) -> Result<f64> {
    Ok(edge_energies(state, h)?.iter().sum())
}

/// Per-term expectation values, in term order.
pub fn edge_energies(state: &MatrixProductState, h: &ParentHamiltonian) -> Result<Vec<f64>> {
    if state.phys_dims() != h.phys_dims() {
        return Err(shape!(
            "state dims {:?} do not match Hamiltonian dims {:?}",
            state.phys_dims(),
            h.phys_dims()
        ));
    }
    let rdms = state.all_two_site_rdms();
    Ok(h.terms
        .iter()
        .map(|t| (&*t.matrix * &rdms[t.first_site]).trace().re)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, DEFAULT_KERNEL_TOL};
    use crate::states::{pair_product_state, BondKind};

    #[test]
    fn product_state_terms() {
        let s = MatrixProductState::product_state(&[2, 2, 2], &[0, 0, 0]).unwrap();
        let h = parent_hamiltonian(&s, DEFAULT_KERNEL_TOL).unwrap();
        let mut expect = DenseMatrix::identity(4);
        expect.set(0, 0, c64(0.0, 0.0));
        for t in h.terms() {
            assert!(t.matrix.max_diff(&expect) < 1e-14);
        }
        assert!(energy(&s, &h).unwrap().abs() < 1e-14);
        let flipped = MatrixProductState::product_state(&[2, 2, 2], &[1, 0, 1]).unwrap();
        assert!((energy(&flipped, &h).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pair_chain_is_frustration_free() {
        let s = pair_product_state(5, BondKind::PlusPair).unwrap();
        let h = parent_hamiltonian(&s, DEFAULT_KERNEL_TOL).unwrap();
        assert!(energy(&s, &h).unwrap().abs() < 1e-12);
        for t in h.terms() {
            let m = &*t.matrix;
            assert!((m * m).max_diff(m) < 1e-10);
        }
    }

    #[test]
    fn uniform_matches_full() {
        let fam = StateFamily::MpsFamily { g: -0.6 };
        let s = path_state(&fam, 0.7, 7).unwrap();
        let full = parent_hamiltonian(&s, DEFAULT_KERNEL_TOL).unwrap();
        let uni = uniform_parent_hamiltonian(&s, DEFAULT_KERNEL_TOL).unwrap();
        let path = path_hamiltonian(&fam, 0.7, 7, DEFAULT_KERNEL_TOL).unwrap();
        for ((a, b), c) in full.terms().iter().zip(uni.terms()).zip(path.terms()) {
            assert!(a.matrix.max_diff(&b.matrix) < 1e-9);
            assert!(a.matrix.max_diff(&c.matrix) < 1e-9);
        }
        let (classes, distinct) = path.edge_classes();
        assert_eq!(distinct.len(), 3);
        assert_eq!(classes, [0, 1, 1, 1, 1, 1, 2]);
    }

    #[test]
    fn energy_rejects_mismatch() {
        let s = MatrixProductState::product_state(&[2, 2], &[0, 0]).unwrap();
        let h = parent_hamiltonian(&s, DEFAULT_KERNEL_TOL).unwrap();
        let t = MatrixProductState::product_state(&[2, 2, 2], &[0, 0, 0]).unwrap();
        assert!(energy(&t, &h).is_err());
    }
}

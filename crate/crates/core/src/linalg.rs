//! Dense complex-matrix kernels.
//!
//! Everything above this module works on explicit dense matrices: local
//! Hamiltonian terms, reduced density matrices, site operators and two-site
//! wavefunctions never exceed a few hundred rows, so dense decompositions are
//! sufficient. Factorizations are delegated to `nalgebra`; this module fixes
//! the conventions (ordering, tolerances, error reporting) the rest of the
//! crate relies on.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{domain, shape, Error, Result};
#[allow(unused_imports)]
use num_traits::Float;

pub type C64 = Complex64;

/// Default relative eigenvalue threshold separating the kernel of a density
/// matrix from its support.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;

/// Absolute tolerance for the Hermiticity check in [`eigh`], relative to the
/// largest entry.
pub const HERMITIAN_TOL: f64 = 1e-10;

const EIGEN_MAX_ITER: usize = 10_000;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix(DMatrix<C64>);

impl DenseMatrix {
    /// Builds a matrix from entries in row-major order.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(shape!(
                "{} entries cannot fill a {rows}x{cols} matrix",
                entries.len()
            ));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain!("matrix entries must be finite"));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    /// Builds a real matrix from nested rows. Panics on ragged input; intended
    /// for literals.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self(DMatrix::from_fn(r, c, |i, j| c64(rows[i][j], 0.0)))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { C64::zero() })
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { c64(diag[i], 0.0) } else { C64::zero() })
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    pub fn from_inner(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn inner(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.0[(i, j)] = z;
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn scale(&self, z: C64) -> Self {
        Self(&self.0 * z)
    }

    pub fn scale_real(&self, x: f64) -> Self {
        self.scale(c64(x, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.cols(), "vector length mismatch");
        (0..self.rows())
            .map(|i| (0..self.cols()).map(|j| self.0[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `(m + m†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * c64(0.5, 0.0))
    }

    /// Largest entry of `m − m†`.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        (&self.0 - self.0.adjoint()).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest entry of `m†m − 1`; zero for a column isometry.
    pub fn isometry_defect(&self) -> f64 {
        let g = self.0.adjoint() * &self.0;
        let n = g.nrows();
        (&g - DMatrix::<C64>::identity(n, n)).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest entry of `self - other`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.shape(), other.shape());
        (&self.0 - &other.0).iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;
    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols(), rhs.rows(), "inner dimensions differ");
        DenseMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;
    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        DenseMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;
    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        DenseMatrix(&self.0 - &rhs.0)
    }
}

/// Thin singular value decomposition `m = u · diag(s) · vt`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DenseMatrix,
    /// Nonnegative, descending.
    pub singular_values: Vec<f64>,
    pub vt: DenseMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> DenseMatrix {
        let k = self.singular_values.len();
        let us = DenseMatrix::from_fn(self.u.rows(), k, |i, j| {
            self.u.get(i, j) * self.singular_values[j]
        });
        &us * &self.vt
    }
}

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    let (rows, cols) = m.shape();
    if !m.is_finite() {
        return Err(domain!("svd input has non-finite entries"));
    }
    let k = rows.min(cols);
    if k == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(rows, 0),
            singular_values: Vec::new(),
            vt: DenseMatrix::zeros(0, cols),
        });
    }
    let a = faer::Mat::<C64>::from_fn(rows, cols, |i, j| m.0[(i, j)]);
    let dec = a.thin_svd().map_err(|_| Error::Decomposition { routine: "svd", rows, cols })?;
    let (fu, fs, fv) = (dec.U(), dec.S().column_vector(), dec.V());
    let sv: Vec<f64> = (0..k).map(|i| fs[i].re).collect();
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Decomposition { routine: "svd", rows, cols });
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(core::cmp::Ordering::Equal));
    let u = DenseMatrix::from_fn(rows, k, |i, j| fu[(i, order[j])]);
    let vt = DenseMatrix::from_fn(k, cols, |i, j| fv[(j, order[i])].conj());
    let singular_values = order.iter().map(|&i| sv[i].max(0.0)).collect();
    Ok(Svd { u, singular_values, vt })
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct HermitianEigs {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `i` is the eigenvector of `eigenvalues[i]`.
    pub eigenvectors: DenseMatrix,
}

impl HermitianEigs {
    pub fn eigenvector(&self, i: usize) -> Vec<C64> {
        (0..self.eigenvectors.rows()).map(|r| self.eigenvectors.get(r, i)).collect()
    }
}

fn check_hermitian(m: &DenseMatrix) -> Result<()> {
    if !m.is_square() {
        return Err(shape!("Hermitian input must be square, got {:?}", m.shape()));
    }
    if !m.is_finite() {
        return Err(domain!("Hermitian input has non-finite entries"));
    }
    let scale = m.max_abs().max(1.0);
    let defect = m.hermiticity_defect();
    if defect > HERMITIAN_TOL * scale {
        return Err(domain!("matrix is not Hermitian (defect {defect:.3e})"));
    }
    Ok(())
}

/// Hermitian eigendecomposition with ascending eigenvalues. The input is
/// symmetrized before decomposition.
pub fn eigh(m: &DenseMatrix) -> Result<HermitianEigs> {
    check_hermitian(m)?;
    let n = m.rows();
    let dec = m
        .hermitian_part()
        .0
        .try_symmetric_eigen(f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::Decomposition { routine: "eigh", rows: n, cols: n })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        dec.eigenvalues[a]
            .partial_cmp(&dec.eigenvalues[b])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let eigenvalues = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |i, j| dec.eigenvectors[(i, order[j])]);
    Ok(HermitianEigs { eigenvalues, eigenvectors })
}

/// Eigenvalues only, ascending. Cheaper than [`eigh`] for spectra.
pub fn eigvalsh(m: &DenseMatrix) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    let mut vals: Vec<f64> = m.hermitian_part().0.symmetric_eigenvalues().iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        let n = m.rows();
        return Err(Error::Decomposition { routine: "eigvalsh", rows: n, cols: n });
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    Ok(vals)
}

/// Polar decomposition `q = iso · psd` of a tall (or square) matrix: `iso` has
/// orthonormal columns and `psd = sqrt(q†q)`.
pub fn polar_decompose(q: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    if q.rows() < q.cols() {
        return Err(shape!(
            "polar decomposition needs rows >= cols, got {}x{}",
            q.rows(),
            q.cols()
        ));
    }
    let dec = svd(q)?;
    let iso = &dec.u * &dec.vt;
    let v = dec.vt.adjoint();
    let vs = DenseMatrix::from_fn(v.rows(), v.cols(), |i, j| v.get(i, j) * dec.singular_values[j]);
    let psd = (&vs * &dec.vt).hermitian_part();
    Ok((iso, psd))
}

/// Projector onto the kernel of a positive-semidefinite matrix.
///
/// Eigenvalues below `rel_tol · λ_max` count as kernel. The zero matrix has the
/// whole space as its kernel and yields the identity.
pub fn kernel_projector(rho: &DenseMatrix, rel_tol: f64) -> Result<DenseMatrix> {
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(domain!("kernel tolerance must lie in (0, 1), got {rel_tol}"));
    }
    let eig = eigh(rho)?;
    let n = rho.rows();
    let lmax = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if lmax <= 0.0 || n == 0 {
        if eig.eigenvalues.first().copied().unwrap_or(0.0) < -1e-12 {
            return Err(domain!("density matrix is not positive semidefinite"));
        }
        return Ok(DenseMatrix::identity(n));
    }
    let lmin = eig.eigenvalues[0];
    if lmin < -1e-12 * lmax.max(1.0) {
        return Err(domain!(
            "density matrix is not positive semidefinite (min eigenvalue {lmin:.3e})"
        ));
    }
    let cut = rel_tol * lmax;
    let mut p = DenseMatrix::zeros(n, n);
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam >= cut {
            break;
        }
        for i in 0..n {
            let vi = eig.eigenvectors.get(i, k);
            for j in 0..n {
                let z = p.get(i, j) + vi * eig.eigenvectors.get(j, k).conj();
                p.set(i, j, z);
            }
        }
    }
    Ok(p.hermitian_part())
}

/// Rank of a PSD matrix under the same threshold as [`kernel_projector`].
pub fn psd_rank(rho: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    let vals = eigvalsh(rho)?;
    let lmax = vals.last().copied().unwrap_or(0.0);
    if lmax <= 0.0 {
        return Ok(0);
    }
    Ok(vals.iter().filter(|&&v| v >= rel_tol * lmax).count())
}

/// `exp(−i·h·dt)` for Hermitian `h`, via its eigendecomposition.
pub fn hermitian_expm(h: &DenseMatrix, dt: f64) -> Result<DenseMatrix> {
    let eig = eigh(h)?;
    let n = h.rows();
    let v = &eig.eigenvectors;
    let phases: Vec<C64> = eig
        .eigenvalues
        .iter()
        .map(|&lam| C64::from_polar(1.0, -lam * dt))
        .collect();
    let vp = DenseMatrix::from_fn(n, n, |i, j| v.get(i, j) * phases[j]);
    Ok(&vp * &v.adjoint())
}

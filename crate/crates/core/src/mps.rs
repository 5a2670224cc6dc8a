//! Open-boundary matrix product states.
//!
//! A state is a chain of rank-3 tensors `A[l, p, r]` (left bond, physical,
//! right bond) with unit boundary bonds, times a scalar `exp(log_norm)`. The
//! scalar is kept separately so that chains of several thousand sites can be
//! normalized, overlapped and compared without under- or overflow.
//!
//! Site `0` is the most significant index when a state is flattened to a dense
//! vector, matching `kron(site_0, site_1, …)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Zero;

use crate::error::{contract, domain, shape, Error, Result};
use crate::linalg::{c64, svd, DenseMatrix, C64};
#[allow(unused_imports)]
use num_traits::Float;

/// A rank-3 site tensor stored as `data[(l * phys + p) * right + r]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteTensor {
    left: usize,
    phys: usize,
    right: usize,
    data: Vec<C64>,
}

impl SiteTensor {
    pub fn new(left: usize, phys: usize, right: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != left * phys * right {
            return Err(shape!(
                "{} entries for a {left}x{phys}x{right} tensor",
                data.len()
            ));
        }
        if left == 0 || phys == 0 || right == 0 {
            return Err(domain!("tensor dimensions must be positive"));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(domain!("tensor entries must be finite"));
        }
        Ok(Self { left, phys, right, data })
    }

    pub fn zeros(left: usize, phys: usize, right: usize) -> Self {
        Self { left, phys, right, data: vec![C64::zero(); left * phys * right] }
    }

    pub fn from_fn(
        left: usize,
        phys: usize,
        right: usize,
        mut f: impl FnMut(usize, usize, usize) -> C64,
    ) -> Self {
        let mut t = Self::zeros(left, phys, right);
        for l in 0..left {
            for p in 0..phys {
                for r in 0..right {
                    t.data[(l * phys + p) * right + r] = f(l, p, r);
                }
            }
        }
        t
    }

    /// Builds a tensor from physical-index slices `A^p` (each `left × right`).
    pub fn from_matrices(mats: &[DenseMatrix]) -> Result<Self> {
        let first = mats.first().ok_or_else(|| domain!("no matrices given"))?;
        let (left, right) = first.shape();
        if mats.iter().any(|m| m.shape() != (left, right)) {
            return Err(shape!("physical slices have differing shapes"));
        }
        Ok(Self::from_fn(left, mats.len(), right, |l, p, r| mats[p].get(l, r)))
    }

    pub fn left(&self) -> usize {
        self.left
    }
    pub fn phys(&self) -> usize {
        self.phys
    }
    pub fn right(&self) -> usize {
        self.right
    }
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, l: usize, p: usize, r: usize) -> C64 {
        self.data[(l * self.phys + p) * self.right + r]
    }

    /// The `left × right` slice for physical index `p`.
    pub fn matrix(&self, p: usize) -> DenseMatrix {
        DenseMatrix::from_fn(self.left, self.right, |l, r| self.get(l, p, r))
    }

    /// `(left·phys) × right` reshape.
    fn as_left_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.left * self.phys, self.right, &self.data)
    }

    /// `left × (phys·right)` reshape.
    fn as_right_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.left, self.phys * self.right, &self.data)
    }

    fn from_left_matrix(m: &DMatrix<C64>, phys: usize) -> Self {
        let left = m.nrows() / phys;
        let right = m.ncols();
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..right {
                data.push(m[(i, j)]);
            }
        }
        Self { left, phys, right, data }
    }

    fn from_right_matrix(m: &DMatrix<C64>, phys: usize) -> Self {
        let left = m.nrows();
        let right = m.ncols() / phys;
        let mut data = Vec::with_capacity(m.len());
        for i in 0..left {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        Self { left, phys, right, data }
    }

    fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    fn scale(&mut self, x: f64) {
        for z in &mut self.data {
            *z *= x;
        }
    }

    /// `Σ_p A^p† A^p`; the identity for a left-orthonormal tensor.
    pub fn left_gram(&self) -> DenseMatrix {
        let m = self.as_left_matrix();
        DenseMatrix::from_inner(m.adjoint() * m)
    }

    /// `Σ_p A^p A^p†`; the identity for a right-orthonormal tensor.
    pub fn right_gram(&self) -> DenseMatrix {
        let m = self.as_right_matrix();
        DenseMatrix::from_inner(&m * m.adjoint())
    }
}

/// Singular-value truncation applied after each two-site update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    /// Largest discarded fraction of the squared norm per update.
    pub cutoff: f64,
    pub max_bond: usize,
}

impl TruncationPolicy {
    pub const DEFAULT_CUTOFF: f64 = 1e-10;
    pub const DEFAULT_MAX_BOND: usize = 64;

    pub fn new(cutoff: f64, max_bond: usize) -> Result<Self> {
        if !(cutoff >= 0.0) || !cutoff.is_finite() {
            return Err(domain!("truncation cutoff must be a finite nonnegative number"));
        }
        if max_bond == 0 {
            return Err(domain!("max_bond must be at least 1"));
        }
        Ok(Self { cutoff, max_bond })
    }

    /// Keeps every nonzero singular value.
    pub fn exact() -> Self {
        Self { cutoff: 0.0, max_bond: usize::MAX }
    }

    /// Number of singular values to keep and the discarded squared weight
    /// (relative to the total). `values` must be descending.
    pub fn keep_count(&self, values: &[f64]) -> (usize, f64, bool) {
        let total: f64 = values.iter().map(|s| s * s).sum();
        if total == 0.0 || values.is_empty() {
            return (1.min(values.len()), 0.0, false);
        }
        let mut keep = values.len();
        let mut discarded = 0.0;
        while keep > 1 {
            let w = values[keep - 1] * values[keep - 1] / total;
            if discarded + w > self.cutoff {
                break;
            }
            discarded += w;
            keep -= 1;
        }
        let saturated = keep > self.max_bond;
        if saturated {
            keep = self.max_bond;
            discarded = values[keep..].iter().map(|s| s * s).sum::<f64>() / total;
        }
        (keep, discarded, saturated)
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { cutoff: Self::DEFAULT_CUTOFF, max_bond: Self::DEFAULT_MAX_BOND }
    }
}

/// Where the orthogonality center goes after a two-site update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    /// Center moves to the right site (left-to-right sweep).
    Right,
    /// Center stays on the left site (right-to-left sweep).
    Left,
}

/// Bookkeeping returned by a two-site update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TruncationReport {
    pub discarded_weight: f64,
    pub bond: usize,
    pub saturated: bool,
}

/// A complex number stored as `exp(log_abs + i·phase)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogComplex {
    pub log_abs: f64,
    pub phase: f64,
}

impl LogComplex {
    pub fn zero() -> Self {
        Self { log_abs: f64::NEG_INFINITY, phase: 0.0 }
    }

    pub fn to_complex(self) -> C64 {
        C64::from_polar(self.log_abs.exp(), self.phase)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatrixProductState {
    sites: Vec<SiteTensor>,
    ortho_center: Option<usize>,
    log_norm: f64,
}

impl MatrixProductState {
    pub fn new(sites: Vec<SiteTensor>) -> Result<Self> {
        if sites.is_empty() {
            return Err(domain!("an MPS needs at least one site"));
        }
        if sites[0].left != 1 || sites[sites.len() - 1].right != 1 {
            return Err(shape!("boundary bonds must have dimension 1"));
        }
        for (k, w) in sites.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(shape!(
                    "bond {k}: right dimension {} does not match left dimension {}",
                    w[0].right,
                    w[1].left
                ));
            }
        }
        Ok(Self { sites, ortho_center: None, log_norm: 0.0 })
    }

    /// Computational basis product state `|config⟩`.
    pub fn product_state(phys_dims: &[usize], config: &[usize]) -> Result<Self> {
        if phys_dims.len() != config.len() {
            return Err(shape!("configuration length differs from chain length"));
        }
        let mut sites = Vec::with_capacity(config.len());
        for (&d, &c) in phys_dims.iter().zip(config) {
            if c >= d {
                return Err(domain!("basis index {c} out of range for dimension {d}"));
            }
            sites.push(SiteTensor::from_fn(1, d, 1, |_, p, _| {
                if p == c { c64(1.0, 0.0) } else { C64::zero() }
            }));
        }
        let mut s = Self::new(sites)?;
        s.ortho_center = Some(0);
        Ok(s)
    }

    /// Builds the chain `B · Q · B · Q ⋯ Q · B` from a bulk site operator.
    ///
    /// `site_op` is a `d × D²` matrix whose column `α·D + β` maps the left
    /// virtual qudit `α` and right virtual qudit `β` of a bulk site onto the
    /// physical level. `pair` is the `D × D` coefficient matrix of the bond
    /// state `Σ pair[a,b] |a b⟩` placed on every edge. The two outermost
    /// virtual qudits are physical boundary sites of dimension `D` carrying
    /// identity operators, so `n_pairs` pairs give `n_pairs − 1` bulk sites and
    /// `n_pairs + 1` sites in total. The result is normalized.
    pub fn from_site_operator_chain(
        site_op: &DenseMatrix,
        pair: &DenseMatrix,
        n_pairs: usize,
    ) -> Result<Self> {
        let bond = pair.rows();
        if !pair.is_square() || bond == 0 {
            return Err(shape!("pair matrix must be square and nonempty"));
        }
        if site_op.cols() != bond * bond {
            return Err(shape!(
                "site operator has {} columns, expected {}",
                site_op.cols(),
                bond * bond
            ));
        }
        if n_pairs < 1 {
            return Err(domain!("need at least one pair, got {n_pairs}"));
        }
        let left = SiteTensor::from_fn(1, bond, bond, |_, a, x| pair.get(a, x));
        let bulk = bulk_tensor(site_op, pair)?;
        let right = SiteTensor::from_fn(bond, bond, 1, |y, b, _| {
            if y == b { c64(1.0, 0.0) } else { C64::zero() }
        });
        let mut sites = Vec::with_capacity(n_pairs + 1);
        sites.push(left);
        for _ in 1..n_pairs {
            sites.push(bulk.clone());
        }
        sites.push(right);
        let mut state = Self::new(sites)?;
        state.canonicalize(0);
        state.normalize();
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[SiteTensor] {
        &self.sites
    }

    pub fn site(&self, i: usize) -> &SiteTensor {
        &self.sites[i]
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.sites.iter().map(|t| t.phys).collect()
    }

    /// Internal bond dimensions, `len() − 1` entries.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1].iter().map(|t| t.right).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.ortho_center
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Reassembles a state from serialized parts. The orthogonality claim is
    /// verified.
    pub fn from_parts(
        sites: Vec<SiteTensor>,
        ortho_center: Option<usize>,
        log_norm: f64,
    ) -> Result<Self> {
        let mut s = Self::new(sites)?;
        if !log_norm.is_finite() {
            return Err(domain!("log_norm must be finite"));
        }
        s.log_norm = log_norm;
        if let Some(c) = ortho_center {
            if c >= s.len() {
                return Err(domain!("orthogonality center {c} out of range"));
            }
            s.ortho_center = Some(c);
            if s.canonical_defect() > 1e-8 {
                return Err(contract!("tensors are not canonical about site {c}"));
            }
        }
        Ok(s)
    }

    /// Largest deviation from the canonical-form identities about the current
    /// center; zero when no center is set.
    pub fn canonical_defect(&self) -> f64 {
        let Some(c) = self.ortho_center else { return 0.0 };
        let mut worst: f64 = 0.0;
        for (i, t) in self.sites.iter().enumerate() {
            let g = if i < c {
                t.left_gram()
            } else if i > c {
                t.right_gram()
            } else {
                continue;
            };
            worst = worst.max(g.max_diff(&DenseMatrix::identity(g.rows())));
        }
        worst
    }

    /// Brings site `i` into left-orthonormal form, pushing the remainder into
    /// site `i + 1`.
    fn left_orthonormalize(&mut self, i: usize) {
        let t = &self.sites[i];
        let phys = t.phys;
        let qr = t.as_left_matrix().qr();
        let (q, r) = qr.unpack();
        self.sites[i] = SiteTensor::from_left_matrix(&q, phys);
        let next = &self.sites[i + 1];
        let nphys = next.phys;
        let merged = r * next.as_right_matrix();
        self.sites[i + 1] = SiteTensor::from_right_matrix(&merged, nphys);
        self.absorb_scale(i + 1);
    }

    /// Brings site `i` into right-orthonormal form, pushing the remainder into
    /// site `i − 1`.
    fn right_orthonormalize(&mut self, i: usize) {
        let t = &self.sites[i];
        let phys = t.phys;
        // LQ via QR of the adjoint.
        let qr = t.as_right_matrix().adjoint().qr();
        let (q, r) = qr.unpack();
        self.sites[i] = SiteTensor::from_right_matrix(&q.adjoint(), phys);
        let prev = &self.sites[i - 1];
        let pphys = prev.phys;
        let merged = prev.as_left_matrix() * r.adjoint();
        self.sites[i - 1] = SiteTensor::from_left_matrix(&merged, pphys);
        self.absorb_scale(i - 1);
    }

    /// Moves the norm of site `i` into `log_norm`.
    fn absorb_scale(&mut self, i: usize) {
        let n = self.sites[i].norm_sqr().sqrt();
        if n > 0.0 && n.is_finite() {
            self.sites[i].scale(1.0 / n);
            self.log_norm += n.ln();
        }
    }

    /// Moves the orthogonality center to `center`. The represented vector is
    /// unchanged; the center tensor's norm is folded into `log_norm`.
    pub fn canonicalize(&mut self, center: usize) {
        assert!(center < self.len(), "center {center} out of range");
        let (lo, hi) = match self.ortho_center {
            Some(c) => (c.min(center), c.max(center)),
            None => (0, self.len() - 1),
        };
        let from_left = self.ortho_center.unwrap_or_default();
        if self.ortho_center.is_none() || from_left < center {
            for i in lo..center {
                self.left_orthonormalize(i);
            }
        }
        if self.ortho_center.is_none() || from_left > center {
            for i in ((center + 1)..=hi).rev() {
                self.right_orthonormalize(i);
            }
        }
        self.ortho_center = Some(center);
        self.absorb_scale(center);
    }

    /// Functional form of [`Self::canonicalize`].
    pub fn canonicalized(mut self, center: usize) -> Self {
        self.canonicalize(center);
        self
    }

    /// Rescales to unit norm, keeping the orthogonality center.
    pub fn normalize(&mut self) {
        let c = self.ortho_center.unwrap_or(0);
        self.canonicalize(c);
        self.log_norm = 0.0;
    }

    /// `ln ‖ψ‖`.
    pub fn log_norm_value(&self) -> f64 {
        if let Some(c) = self.ortho_center {
            // Center tensor has unit norm after canonicalize.
            return self.log_norm + 0.5 * self.sites[c].norm_sqr().ln();
        }
        0.5 * overlap(self, self).expect("self overlap").log_abs
    }

    /// Dense state vector; site 0 most significant.
    pub fn to_dense(&self) -> Vec<C64> {
        let mut psi: Vec<C64> = vec![c64(self.log_norm.exp(), 0.0)];
        let mut bond = 1;
        for t in &self.sites {
            let outer = psi.len() / bond;
            let mut next = vec![C64::zero(); outer * t.phys * t.right];
            for o in 0..outer {
                for l in 0..bond {
                    let a = psi[o * bond + l];
                    if a == C64::zero() {
                        continue;
                    }
                    for p in 0..t.phys {
                        for r in 0..t.right {
                            next[(o * t.phys + p) * t.right + r] += a * t.get(l, p, r);
                        }
                    }
                }
            }
            psi = next;
            bond = t.right;
        }
        psi
    }

    /// Applies a two-site gate (a `d_i d_{i+1}` square matrix, row index
    /// `p_i · d_{i+1} + p_{i+1}`) to sites `i, i + 1` and re-splits with
    /// truncation. The center must sit on `i` or `i + 1`.
    pub fn apply_two_site_gate(
        &mut self,
        gate: &DenseMatrix,
        i: usize,
        policy: &TruncationPolicy,
        sweep: Sweep,
    ) -> Result<TruncationReport> {
        if i + 1 >= self.len() {
            return Err(domain!("gate site {i} out of range for {} sites", self.len()));
        }
        match self.ortho_center {
            Some(c) if c == i || c == i + 1 => {}
            other => {
                return Err(contract!(
                    "orthogonality center must be at {i} or {}, found {other:?}",
                    i + 1
                ))
            }
        }
        let (a, b) = (&self.sites[i], &self.sites[i + 1]);
        let (l, d1, d2, r) = (a.left, a.phys, b.phys, b.right);
        if gate.shape() != (d1 * d2, d1 * d2) {
            return Err(shape!(
                "gate is {:?}, sites need {}x{}",
                gate.shape(),
                d1 * d2,
                d1 * d2
            ));
        }
        // theta[(l, p1), (p2, r)]
        let theta = a.as_left_matrix() * b.as_right_matrix();
        let g = gate.inner();
        let mut out = DMatrix::<C64>::zeros(l * d1, d2 * r);
        for li in 0..l {
            for ri in 0..r {
                for p1 in 0..d1 {
                    for p2 in 0..d2 {
                        let row = p1 * d2 + p2;
                        let mut acc = C64::zero();
                        for q1 in 0..d1 {
                            for q2 in 0..d2 {
                                let gz = g[(row, q1 * d2 + q2)];
                                if gz != C64::zero() {
                                    acc += gz * theta[(li * d1 + q1, q2 * r + ri)];
                                }
                            }
                        }
                        out[(li * d1 + p1, p2 * r + ri)] = acc;
                    }
                }
            }
        }
        let dec = svd(&DenseMatrix::from_inner(out))?;
        let (keep, discarded, saturated) = policy.keep_count(&dec.singular_values);
        let kept_norm: f64 = dec.singular_values[..keep].iter().map(|s| s * s).sum::<f64>().sqrt();
        let full_norm: f64 = dec.singular_values.iter().map(|s| s * s).sum::<f64>().sqrt();
        let rescale = if kept_norm > 0.0 { full_norm / kept_norm } else { 1.0 };
        let s: Vec<f64> = dec.singular_values[..keep].iter().map(|x| x * rescale).collect();
        let u = dec.u.inner().columns(0, keep).into_owned();
        let vt = dec.vt.inner().rows(0, keep).into_owned();
        let (left_m, right_m) = match sweep {
            Sweep::Right => {
                let mut svt = vt;
                for (k, sk) in s.iter().enumerate() {
                    svt.row_mut(k).scale_mut(*sk);
                }
                (u, svt)
            }
            Sweep::Left => {
                let mut us = u;
                for (k, sk) in s.iter().enumerate() {
                    us.column_mut(k).scale_mut(*sk);
                }
                (us, vt)
            }
        };
        self.sites[i] = SiteTensor::from_left_matrix(&left_m, d1);
        self.sites[i + 1] = SiteTensor::from_right_matrix(&right_m, d2);
        self.ortho_center = Some(match sweep {
            Sweep::Right => i + 1,
            Sweep::Left => i,
        });
        Ok(TruncationReport { discarded_weight: discarded, bond: keep, saturated })
    }

    /// Left environments `L[k]` (contraction of sites `0..k` with their
    /// conjugates), each normalized to unit max entry.
    fn left_envs(&self) -> Vec<DMatrix<C64>> {
        let mut envs = Vec::with_capacity(self.len() + 1);
        let mut e = DMatrix::<C64>::from_element(1, 1, c64(1.0, 0.0));
        envs.push(e.clone());
        for t in &self.sites {
            e = transfer_left(&e, t, t);
            let m = e.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if m > 0.0 {
                e /= c64(m, 0.0);
            }
            envs.push(e.clone());
        }
        envs
    }

    /// Right environments; `R[k]` contracts sites `k..len`.
    fn right_envs(&self) -> Vec<DMatrix<C64>> {
        let n = self.len();
        let mut envs = vec![DMatrix::<C64>::zeros(0, 0); n + 1];
        let mut e = DMatrix::<C64>::from_element(1, 1, c64(1.0, 0.0));
        envs[n] = e.clone();
        for k in (0..n).rev() {
            e = transfer_right(&e, &self.sites[k]);
            let m = e.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if m > 0.0 {
                e /= c64(m, 0.0);
            }
            envs[k] = e.clone();
        }
        envs
    }

    /// Reduced density matrix of sites `i, i + 1`, trace one.
    pub fn two_site_rdm(&self, i: usize) -> Result<DenseMatrix> {
        if i + 1 >= self.len() {
            return Err(domain!("edge {i} out of range for {} sites", self.len()));
        }
        let (lenv, renv) = match self.ortho_center {
            Some(c) if c == i || c == i + 1 => (
                DMatrix::<C64>::identity(self.sites[i].left, self.sites[i].left),
                DMatrix::<C64>::identity(self.sites[i + 1].right, self.sites[i + 1].right),
            ),
            _ => {
                let l = self.left_envs();
                let r = self.right_envs();
                (l[i].clone(), r[i + 2].clone())
            }
        };
        Ok(rdm_from_envs(&lenv, &self.sites[i], &self.sites[i + 1], &renv))
    }

    /// Reduced density matrices of every nearest-neighbor edge in one pass.
    pub fn all_two_site_rdms(&self) -> Vec<DenseMatrix> {
        let l = self.left_envs();
        let r = self.right_envs();
        (0..self.len() - 1)
            .map(|i| rdm_from_envs(&l[i], &self.sites[i], &self.sites[i + 1], &r[i + 2]))
            .collect()
    }

    /// `⟨ψ|O_{i,i+1}|ψ⟩ / ⟨ψ|ψ⟩` for a two-site operator.
    pub fn two_site_expectation(&self, op: &DenseMatrix, i: usize) -> Result<C64> {
        let rho = self.two_site_rdm(i)?;
        if op.shape() != rho.shape() {
            return Err(shape!("operator {:?} vs edge space {:?}", op.shape(), rho.shape()));
        }
        Ok((op * &rho).trace())
    }
}

/// `E' = Σ_p A^p† E B^p` where `E` is indexed `(bra, ket)`.
fn transfer_left(e: &DMatrix<C64>, bra: &SiteTensor, ket: &SiteTensor) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(bra.right, ket.right);
    for p in 0..bra.phys {
        let a = DMatrix::from_fn(bra.left, bra.right, |l, r| bra.get(l, p, r));
        let b = DMatrix::from_fn(ket.left, ket.right, |l, r| ket.get(l, p, r));
        out += a.adjoint() * e * b;
    }
    out
}

/// `E' = Σ_p A^p E A^p†` indexed `(ket, bra)`.
fn transfer_right(e: &DMatrix<C64>, t: &SiteTensor) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(t.left, t.left);
    for p in 0..t.phys {
        let a = DMatrix::from_fn(t.left, t.right, |l, r| t.get(l, p, r));
        out += &a * e * a.adjoint();
    }
    out
}

fn rdm_from_envs(
    lenv: &DMatrix<C64>,
    a: &SiteTensor,
    b: &SiteTensor,
    renv: &DMatrix<C64>,
) -> DenseMatrix {
    let (d1, d2) = (a.phys, b.phys);
    let dim = d1 * d2;
    // ket slices K[p1 p2] = A^{p1} B^{p2}  (left × right)
    let mut kets = Vec::with_capacity(dim);
    for p1 in 0..d1 {
        let ap = DMatrix::from_fn(a.left, a.right, |l, r| a.get(l, p1, r));
        for p2 in 0..d2 {
            let bp = DMatrix::from_fn(b.left, b.right, |l, r| b.get(l, p2, r));
            kets.push(&ap * bp);
        }
    }
    // ρ[x, y] = Σ L[a', a] K_x[a, c] R[c, c'] conj(K_y[a', c'])
    // with L indexed (bra, ket) and R indexed (ket, bra).
    let lk: Vec<DMatrix<C64>> = kets.iter().map(|k| lenv * k * renv).collect();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for x in 0..dim {
        for y in 0..dim {
            let mut acc = C64::zero();
            for (u, v) in lk[x].iter().zip(kets[y].iter()) {
                acc += u * v.conj();
            }
            rho[(x, y)] = acc;
        }
    }
    let tr = rho.trace().re;
    if tr > 0.0 {
        rho /= c64(tr, 0.0);
    }
    DenseMatrix::from_inner(rho).hermitian_part()
}

fn check_compatible(a: &MatrixProductState, b: &MatrixProductState) -> Result<()> {
    if a.phys_dims() != b.phys_dims() {
        return Err(shape!(
            "states have different physical dimensions: {:?} vs {:?}",
            a.phys_dims(),
            b.phys_dims()
        ));
    }
    Ok(())
}

/// Bulk tensor `M[x, i, y] = Σ_β Q[i, x·D + β] B[β, y]` of a chain built from
/// site operator `Q` and pair matrix `B`.
pub fn bulk_tensor(site_op: &DenseMatrix, pair: &DenseMatrix) -> Result<SiteTensor> {
    let bond = pair.rows();
    if !pair.is_square() || bond == 0 || site_op.cols() != bond * bond {
        return Err(shape!(
            "site operator {:?} does not match pair matrix {:?}",
            site_op.shape(),
            pair.shape()
        ));
    }
    Ok(SiteTensor::from_fn(bond, site_op.rows(), bond, |x, i, y| {
        (0..bond).map(|b| site_op.get(i, x * bond + b) * pair.get(b, y)).sum()
    }))
}

/// `⟨a|b⟩` in log-magnitude form.
pub fn overlap(a: &MatrixProductState, b: &MatrixProductState) -> Result<LogComplex> {
    check_compatible(a, b)?;
    let mut e = DMatrix::<C64>::from_element(1, 1, c64(1.0, 0.0));
    let mut log_scale = a.log_norm + b.log_norm;
    for (ta, tb) in a.sites.iter().zip(&b.sites) {
        e = transfer_left(&e, ta, tb);
        let m = e.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        if m == 0.0 {
            return Ok(LogComplex::zero());
        }
        e /= c64(m, 0.0);
        log_scale += m.ln();
    }
    let z = e[(0, 0)];
    if z == C64::zero() {
        return Ok(LogComplex::zero());
    }
    Ok(LogComplex { log_abs: log_scale + z.norm().ln(), phase: z.arg() })
}

/// `|⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩)`.
pub fn fidelity(a: &MatrixProductState, b: &MatrixProductState) -> Result<f64> {
    let ab = overlap(a, b)?;
    if ab.log_abs == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let aa = overlap(a, a)?.log_abs;
    let bb = overlap(b, b)?.log_abs;
    Ok((2.0 * ab.log_abs - aa - bb).exp())
}

/// `−ln F`, accurate when `F` is close to zero or one.
pub fn log_infidelity_free(a: &MatrixProductState, b: &MatrixProductState) -> Result<f64> {
    let ab = overlap(a, b)?;
    let aa = overlap(a, a)?.log_abs;
    let bb = overlap(b, b)?.log_abs;
    Ok(aa + bb - 2.0 * ab.log_abs)
}

/// Correlation length of a translation-invariant MPS with bulk tensor `t`, in
/// units of that tensor's sites: `−1 / ln|λ₂/λ₁|` from the two largest
/// transfer-matrix eigenvalues. Zero when `λ₂ = 0`; `+∞` when `|λ₂| = |λ₁|`.
pub fn correlation_length(t: &SiteTensor) -> Result<f64> {
    if t.left != t.right {
        return Err(shape!("bulk tensor must have equal bond dimensions"));
    }
    let d = t.left;
    let mut e = DMatrix::<C64>::zeros(d * d, d * d);
    for p in 0..t.phys {
        let a = DMatrix::from_fn(d, d, |l, r| t.get(l, p, r));
        e += a.kronecker(&a.map(|z| z.conj()));
    }
    let n = e.nrows();
    let eig = e
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(Error::Decomposition { routine: "schur", rows: n, cols: n })?
        .eigenvalues()
        .ok_or(Error::Decomposition { routine: "schur", rows: n, cols: n })?;
    let mut mags: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let l1 = mags[0];
    if l1 == 0.0 {
        return Err(domain!("transfer matrix is nilpotent"));
    }
    let l2 = mags.get(1).copied().unwrap_or(0.0);
    if l2 <= 1e-14 * l1 {
        return Ok(0.0);
    }
    if l2 >= l1 * (1.0 - 1e-12) {
        return Ok(f64::INFINITY);
    }
    Ok(-1.0 / (l2 / l1).ln())
}

/// Formats a chain's bond dimensions compactly, e.g. `"1-2-2-1"`.
pub fn describe_bonds(state: &MatrixProductState) -> alloc::string::String {
    let mut s = alloc::string::String::from("1");
    for b in state.bond_dims() {
        s.push_str(&format!("-{b}"));
    }
    s.push_str("-1");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ghz_like(n: usize) -> MatrixProductState {
        let mut sites = Vec::new();
        for k in 0..n {
            let l = if k == 0 { 1 } else { 2 };
            let r = if k == n - 1 { 1 } else { 2 };
            sites.push(SiteTensor::from_fn(l, 2, r, |a, p, b| {
                let la = if l == 1 { p } else { a };
                let rb = if r == 1 { p } else { b };
                if la == p && rb == p { c64(1.0, 0.0) } else { C64::zero() }
            }));
        }
        MatrixProductState::new(sites).unwrap()
    }

    #[test]
    fn rejects_mismatched_bonds() {
        let a = SiteTensor::zeros(1, 2, 2);
        let b = SiteTensor::zeros(3, 2, 1);
        assert!(MatrixProductState::new(vec![a, b]).is_err());
        assert!(MatrixProductState::new(vec![]).is_err());
    }

    #[test]
    fn product_states_are_orthogonal() {
        let a = MatrixProductState::product_state(&[2, 2, 2], &[0, 0, 0]).unwrap();
        let b = MatrixProductState::product_state(&[2, 2, 2], &[1, 1, 1]).unwrap();
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
        assert!((fidelity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_rejects_shape_mismatch() {
        let a = MatrixProductState::product_state(&[2, 2], &[0, 0]).unwrap();
        let b = MatrixProductState::product_state(&[2, 3], &[0, 0]).unwrap();
        assert!(matches!(fidelity(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn canonicalize_sets_orthonormal_tensors() {
        let mut s = ghz_like(5);
        s.canonicalize(2);
        assert_eq!(s.ortho_center(), Some(2));
        assert!(s.canonical_defect() < 1e-12);
        let before = s.clone();
        s.canonicalize(2);
        assert!((fidelity(&before, &s).unwrap() - 1.0).abs() < 1e-12);
        s.canonicalize(4);
        assert!(s.canonical_defect() < 1e-12);
        s.canonicalize(0);
        assert!(s.canonical_defect() < 1e-12);
        assert!((fidelity(&before, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_site_product_state_tensors_isometric() {
        let mut s = MatrixProductState::product_state(&[2, 2], &[0, 1]).unwrap();
        s.canonicalize(1);
        assert!(s.site(0).left_gram().max_diff(&DenseMatrix::identity(1)) < 1e-14);
        s.canonicalize(0);
        assert!(s.site(1).right_gram().max_diff(&DenseMatrix::identity(1)) < 1e-14);
    }

    #[test]
    fn swap_gate_exchanges_product_state() {
        let swap = DenseMatrix::from_real_rows(&[
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        let mut s = MatrixProductState::product_state(&[2, 2], &[0, 1]).unwrap();
        s.apply_two_site_gate(&swap, 0, &TruncationPolicy::default(), Sweep::Right).unwrap();
        let expect = MatrixProductState::product_state(&[2, 2], &[1, 0]).unwrap();
        assert!((fidelity(&s, &expect).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.ortho_center(), Some(1));
    }

    #[test]
    fn identity_gate_preserves_state() {
        let mut s = ghz_like(4);
        s.canonicalize(1);
        let before = s.clone();
        s.apply_two_site_gate(&DenseMatrix::identity(4), 1, &TruncationPolicy::default(), Sweep::Left)
            .unwrap();
        assert!((fidelity(&before, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gate_requires_center() {
        let mut s = ghz_like(4);
        s.canonicalize(0);
        let r = s.apply_two_site_gate(&DenseMatrix::identity(4), 2, &TruncationPolicy::default(), Sweep::Right);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn truncation_keep_count() {
        let p = TruncationPolicy::new(0.01, 64).unwrap();
        // weights 0.81, 0.1, 0.09·… normalized: s² = [0.9, 0.095, 0.005]
        let s = [0.9f64.sqrt(), 0.095f64.sqrt(), 0.005f64.sqrt()];
        assert_eq!(p.keep_count(&s).0, 2);
        let p = TruncationPolicy::new(0.0, 1).unwrap();
        let (k, w, sat) = p.keep_count(&s);
        assert_eq!(k, 1);
        assert!(sat);
        assert!((w - 0.1).abs() < 1e-12);
        assert!(TruncationPolicy::new(-1.0, 3).is_err());
        assert!(TruncationPolicy::new(0.0, 0).is_err());
    }

    #[test]
    fn rdm_of_product_state() {
        let s = MatrixProductState::product_state(&[2, 2, 2], &[0, 0, 1]).unwrap();
        let rho = s.two_site_rdm(0).unwrap();
        let expect = DenseMatrix::from_real_diagonal(&[1.0, 0.0, 0.0, 0.0]);
        assert!(rho.max_diff(&expect) < 1e-14);
        assert!((s.two_site_rdm(1).unwrap().trace().re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn log_norm_survives_long_chains() {
        // 4000 sites each carrying a factor 3 in the norm.
        let n = 4000;
        let sites = (0..n)
            .map(|_| SiteTensor::from_fn(1, 2, 1, |_, p, _| c64(if p == 0 { 3.0 } else { 0.0 }, 0.0)))
            .collect();
        let mut s = MatrixProductState::new(sites).unwrap();
        let f = fidelity(&s, &s).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        s.canonicalize(n / 2);
        assert!((s.log_norm_value() - n as f64 * 3f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn correlation_length_limits() {
        // product state: single nonzero transfer eigenvalue
        let t = SiteTensor::from_fn(1, 2, 1, |_, p, _| c64(if p == 0 { 1.0 } else { 0.0 }, 0.0));
        assert_eq!(correlation_length(&t).unwrap(), 0.0);
        // GHZ bulk tensor: degenerate leading eigenvalues
        let ghz = SiteTensor::from_fn(2, 2, 2, |a, p, b| {
            if a == p && b == p { c64(1.0, 0.0) } else { C64::zero() }
        });
        assert_eq!(correlation_length(&ghz).unwrap(), f64::INFINITY);
    }

    #[test]
    fn describe_bonds_formats() {
        assert_eq!(describe_bonds(&ghz_like(3)), "1-2-2-1");
    }
}

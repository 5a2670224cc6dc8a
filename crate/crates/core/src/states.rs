//! Concrete state families and their site operators.
//!
//! A site operator `Q` is a `d × D^{n_v}` matrix whose column index enumerates
//! the virtual qudits of a vertex with the first leg most significant. Chains
//! are built by [`chain_state`]: entangled pairs on every edge, `Q` on every
//! bulk vertex and identity on the two dangling boundary qudits.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{contract, domain, shape, Error, Result};
use crate::linalg::{c64, eigvalsh, polar_decompose, DenseMatrix, HERMITIAN_TOL};
use crate::mps::{bulk_tensor, MatrixProductState, SiteTensor};

/// Smallest eigenvalue admitted for a PSD certificate.
pub const PSD_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SiteOperator {
    matrix: DenseMatrix,
    bond_dim: usize,
    valence: usize,
    psd_certified: bool,
}

impl SiteOperator {
    pub fn new(matrix: DenseMatrix, bond_dim: usize, valence: usize) -> Result<Self> {
        if bond_dim == 0 || valence == 0 {
            return Err(domain!("bond dimension and valence must be positive"));
        }
        let cols = bond_dim.checked_pow(valence as u32).ok_or_else(|| domain!("D^n_v overflows"))?;
        if matrix.cols() != cols {
            return Err(shape!(
                "site operator has {} columns, D^n_v = {cols}",
                matrix.cols()
            ));
        }
        Ok(Self { matrix, bond_dim, valence, psd_certified: false })
    }

    /// Checks Hermiticity and eigenvalues `≥ −PSD_TOL`, then sets the flag.
    pub fn certify_psd(mut self) -> Result<Self> {
        if !self.matrix.is_square() {
            return Err(contract!("a rectangular site operator cannot be PSD"));
        }
        if self.matrix.hermiticity_defect() > HERMITIAN_TOL {
            return Err(contract!("site operator is not Hermitian"));
        }
        let lo = eigvalsh(&self.matrix)?[0];
        if lo < -PSD_TOL {
            return Err(contract!("site operator has eigenvalue {lo:e} < 0"));
        }
        self.psd_certified = true;
        Ok(self)
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
    pub fn bond_dim(&self) -> usize {
        self.bond_dim
    }
    pub fn valence(&self) -> usize {
        self.valence
    }
    pub fn phys_dim(&self) -> usize {
        self.matrix.rows()
    }
    pub fn is_psd_certified(&self) -> bool {
        self.psd_certified
    }
}

/// Entangled-pair pattern placed on each edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BondKind {
    /// `(|00⟩ + |11⟩)/√2`.
    PlusPair,
    /// `(|01⟩ − |10⟩)/√2 = (1⊗Y)|Φ⁺⟩`.
    Singlet,
}

impl BondKind {
    /// Coefficients `B[a, b]` of the unnormalized pair `Σ B[a,b] |a b⟩`.
    pub fn pair_matrix(self) -> DenseMatrix {
        match self {
            BondKind::PlusPair => DenseMatrix::identity(2),
            BondKind::Singlet => singlet_matrix().transpose(),
        }
    }
}

/// `Y = [[0, −1], [1, 0]]`.
pub fn singlet_matrix() -> DenseMatrix {
    DenseMatrix::from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]])
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateFamily {
    MpsFamily { g: f64 },
    Aklt1d,
    Aklt2dHex,
}

impl StateFamily {
    pub fn bond_kind(&self) -> BondKind {
        match self {
            StateFamily::MpsFamily { .. } => BondKind::PlusPair,
            StateFamily::Aklt1d | StateFamily::Aklt2dHex => BondKind::Singlet,
        }
    }

    /// The PSD site operator used on the path.
    pub fn target_operator(&self) -> Result<SiteOperator> {
        match *self {
            StateFamily::MpsFamily { g } => {
                let q = site_operator_from_tensors(&mps_family_tensors(g)?)?;
                Ok(psd_normal_form(&q)?.1)
            }
            StateFamily::Aklt1d => aklt1d_site_operator(),
            StateFamily::Aklt2dHex => aklt2d_hex_site_operator(),
        }
    }

    /// Rejects families that cannot drive a 1D adiabatic run.
    pub fn validate_for_path(&self) -> Result<()> {
        match *self {
            StateFamily::MpsFamily { g } if !(g > -1.0 && g < 0.0) => Err(domain!(
                "mps-family runs need g in (-1, 0), got {g}"
            )),
            StateFamily::Aklt2dHex => Err(domain!("aklt-2d-hex supports construction only")),
            _ => Ok(()),
        }
    }

    /// Qubits per bulk site of the chain: 2 for both 1D families.
    pub fn qubits_per_site(&self) -> usize {
        match self {
            StateFamily::Aklt2dHex => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFamily::MpsFamily { g } => write!(f, "mps-family:g={g}"),
            StateFamily::Aklt1d => f.write_str("aklt-1d"),
            StateFamily::Aklt2dHex => f.write_str("aklt-2d-hex"),
        }
    }
}

impl FromStr for StateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "aklt-1d" => return Ok(StateFamily::Aklt1d),
            "aklt-2d-hex" => return Ok(StateFamily::Aklt2dHex),
            _ => {}
        }
        let rest = s
            .strip_prefix("mps-family:")
            .ok_or_else(|| domain!("unknown state family {s:?}"))?;
        let val = rest
            .strip_prefix("g=")
            .ok_or_else(|| domain!("expected g=<value> in {s:?}"))?;
        let g: f64 = val.parse().map_err(|_| domain!("bad g value {val:?}"))?;
        if !(-1.0..=0.0).contains(&g) {
            return Err(domain!("g must lie in [-1, 0], got {g}"));
        }
        Ok(StateFamily::MpsFamily { g })
    }
}

/// The blocked two-qubit tensors `A⁰..A³` of the g-family; `A^{2j+k}` is the
/// product `A_j A_k` of the single-qubit tensors `A_0 = [[0,0],[1,1]]`,
/// `A_1 = [[1,g],[0,0]]`.
pub fn mps_family_tensors(g: f64) -> Result<[DenseMatrix; 4]> {
    if !(-1.0..=0.0).contains(&g) {
        return Err(domain!("g must lie in [-1, 0], got {g}"));
    }
    Ok([
        DenseMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, 1.0]]),
        DenseMatrix::from_real_rows(&[&[0.0, 0.0], &[1.0, g]]),
        DenseMatrix::from_real_rows(&[&[g, g], &[0.0, 0.0]]),
        DenseMatrix::from_real_rows(&[&[1.0, g], &[0.0, 0.0]]),
    ])
}

/// `Q = Σ_{i,α,β} A^i_{αβ} |i⟩⟨αβ|` for square `D × D` tensors.
pub fn site_operator_from_tensors(tensors: &[DenseMatrix]) -> Result<SiteOperator> {
    let first = tensors.first().ok_or_else(|| domain!("no tensors given"))?;
    let d_bond = first.rows();
    if tensors.iter().any(|a| a.shape() != (d_bond, d_bond)) {
        return Err(shape!("tensors must all be {d_bond}x{d_bond}"));
    }
    let q = DenseMatrix::from_fn(tensors.len(), d_bond * d_bond, |i, col| {
        tensors[i].get(col / d_bond, col % d_bond)
    });
    SiteOperator::new(q, d_bond, 2)
}

/// Inverse of [`site_operator_from_tensors`] for valence-2 operators.
pub fn tensors_from_site_operator(q: &SiteOperator) -> Result<Vec<DenseMatrix>> {
    if q.valence != 2 {
        return Err(domain!("only valence-2 operators split into matrices"));
    }
    let d = q.bond_dim;
    Ok((0..q.phys_dim())
        .map(|i| DenseMatrix::from_fn(d, d, |a, b| q.matrix.get(i, a * d + b)))
        .collect())
}

/// Splits `q = iso · q_psd` with `q_psd = sqrt(q†q)` certified PSD.
pub fn psd_normal_form(q: &SiteOperator) -> Result<(DenseMatrix, SiteOperator)> {
    let (iso, psd) = polar_decompose(&q.matrix)?;
    let psd = SiteOperator::new(psd, q.bond_dim, q.valence)?.certify_psd()?;
    Ok((iso, psd))
}

/// Projector onto the symmetric subspace of `n` qubits:
/// `P[x, y] = 1 / C(n, w)` when `x` and `y` both have Hamming weight `w`.
pub fn symmetric_projector(n: usize) -> DenseMatrix {
    let dim = 1usize << n;
    let binom = |k: u32| -> f64 {
        let mut c = 1.0;
        for j in 0..k {
            c = c * (n as f64 - j as f64) / (j as f64 + 1.0);
        }
        c
    };
    DenseMatrix::from_fn(dim, dim, |x, y| {
        let (wx, wy) = ((x as u32).count_ones(), (y as u32).count_ones());
        if wx == wy { c64(1.0 / binom(wx), 0.0) } else { c64(0.0, 0.0) }
    })
}

/// `P_1` on two promoted virtual qubits; the singlet `Y` lives on the bonds.
pub fn aklt1d_site_operator() -> Result<SiteOperator> {
    SiteOperator::new(symmetric_projector(2), 2, 2)?.certify_psd()
}

/// `P_{3/2}` on three virtual qubits of a hexagonal-lattice vertex.
pub fn aklt2d_hex_site_operator() -> Result<SiteOperator> {
    SiteOperator::new(symmetric_projector(3), 2, 3)?.certify_psd()
}

/// `Q(s) = s Q + (1 − s) 1`.
pub fn path_operator(q: &SiteOperator, s: f64) -> Result<SiteOperator> {
    if !q.psd_certified {
        return Err(contract!("path operator requires a PSD-certified site operator"));
    }
    if !q.matrix.is_square() {
        return Err(shape!("path operator requires d = D^n_v"));
    }
    if !(0.0..=1.0).contains(&s) {
        return Err(domain!("path parameter s = {s} outside [0, 1]"));
    }
    let id = DenseMatrix::identity(q.matrix.rows());
    let m = &q.matrix.scale_real(s) + &id.scale_real(1.0 - s);
    Ok(SiteOperator { matrix: m, ..q.clone() })
}

/// Normalized chain of `n_pairs` pairs with `q` on every bulk vertex.
pub fn chain_state(q: &SiteOperator, bond: BondKind, n_pairs: usize) -> Result<MatrixProductState> {
    if q.valence != 2 || q.bond_dim != 2 {
        return Err(domain!("chains need valence-2, D = 2 site operators"));
    }
    MatrixProductState::from_site_operator_chain(q.matrix(), &bond.pair_matrix(), n_pairs)
}

/// `⊗_e |pair⟩_e`, laid out as the `s = 0` path chain: for `n_pairs ≥ 2` the
/// sites are `[2, 4, …, 4, 2]`, for one pair two qubits.
pub fn pair_product_state(n_pairs: usize, bond: BondKind) -> Result<MatrixProductState> {
    if n_pairs < 1 {
        return Err(domain!("need at least one pair"));
    }
    let id = SiteOperator::new(DenseMatrix::identity(4), 2, 2)?;
    chain_state(&id, bond, n_pairs)
}

/// `|ψ(s)⟩` for a family on a chain of `n_pairs` pairs (`2·n_pairs` qubits).
pub fn path_state(family: &StateFamily, s: f64, n_pairs: usize) -> Result<MatrixProductState> {
    if n_pairs < 2 {
        return Err(domain!("path chains need at least 2 pairs, got {n_pairs}"));
    }
    let q = family.target_operator()?;
    chain_state(&path_operator(&q, s)?, family.bond_kind(), n_pairs)
}

/// Bulk tensor of `|ψ(s)⟩`, whose transfer matrix sets the correlation length.
pub fn path_bulk_tensor(family: &StateFamily, s: f64) -> Result<SiteTensor> {
    let q = path_operator(&family.target_operator()?, s)?;
    if q.valence != 2 {
        return Err(domain!("bulk tensors exist for chain families only"));
    }
    bulk_tensor(q.matrix(), &family.bond_kind().pair_matrix())
}

/// Number of pairs in a chain of `n_qubits` qubits.
pub fn pairs_for_qubits(n_qubits: usize) -> Result<usize> {
    if n_qubits < 4 || n_qubits % 2 != 0 {
        return Err(domain!("qubit count must be even and at least 4, got {n_qubits}"));
    }
    Ok(n_qubits / 2)
}

/// Human-readable family list for usage messages.
pub fn family_help() -> String {
    ["mps-family:g=<g>", "aklt-1d", "aklt-2d-hex"].join(", ").to_string()
}

//! Truncated Hilbert spaces, elementary operators and Liouville-space maps.
//!
//! Density matrices are vectorized column-major: `vec(rho)[i + d * j] = rho[(i, j)]`.
//! With this convention `vec(A rho B) = (B^T ⊗ A) vec(rho)`, which is how every
//! superoperator in the crate is assembled.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const DEFAULT_MAX_DIM: usize = 4096;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-9;
const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Phonon,
    Spin,
}

/// Enumerated basis of a truncated many-site Hilbert space.
///
/// Phonon bases keep every occupation tuple whose total excitation number is
/// at most `excitation_cap`. Spin bases hold all `2^n` register states, stored
/// as 0/1 occupation tuples so both kinds share the same indexing code.
///
/// States are sorted by total excitation number, and within a sector in
/// descending lexicographic order, so `|0...0>` is index 0 and the single
/// excitation on site `i` is index `1 + i`.
#[derive(Clone, Debug)]
pub struct StateBasis {
    kind: BasisKind,
    n_sites: usize,
    excitation_cap: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl StateBasis {
    pub fn phonon(n_sites: usize, excitation_cap: usize) -> Result<Self> {
        enumerate_basis(BasisKind::Phonon, n_sites, excitation_cap)
    }

    pub fn spin(n_sites: usize) -> Result<Self> {
        enumerate_basis(BasisKind::Spin, n_sites, 0)
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Maximum total excitation number; equals `n_sites` for spin registers.
    pub fn excitation_cap(&self) -> usize {
        self.excitation_cap
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u8>] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> &[u8] {
        &self.states[idx]
    }

    pub fn index_of(&self, occupations: &[u8]) -> Option<usize> {
        self.index.get(occupations).copied()
    }

    pub fn total_excitations(&self, idx: usize) -> usize {
        self.states[idx].iter().map(|&n| n as usize).sum()
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.n_sites {
            return Err(Error::SiteOutOfRange {
                site,
                n_sites: self.n_sites,
            });
        }
        Ok(())
    }

    pub(crate) fn require_kind(&self, kind: BasisKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::WrongBasisKind {
                expected: kind,
                found: self.kind,
            });
        }
        Ok(())
    }

    /// Diagonal operator of the total excitation number.
    pub fn number_operator(&self) -> OperatorMatrix {
        let d = self.dim();
        let diag = CVector::from_iterator(
            d,
            (0..d).map(|s| C64::new(self.total_excitations(s) as f64, 0.0)),
        );
        OperatorMatrix(CMatrix::from_diagonal(&diag))
    }

    pub fn identity(&self) -> OperatorMatrix {
        OperatorMatrix::identity(self.dim())
    }
}

pub fn enumerate_basis(kind: BasisKind, n_sites: usize, excitation_cap: usize) -> Result<StateBasis> {
    enumerate_basis_with_limit(kind, n_sites, excitation_cap, DEFAULT_MAX_DIM)
}

pub fn enumerate_basis_with_limit(
    kind: BasisKind,
    n_sites: usize,
    excitation_cap: usize,
    max_dim: usize,
) -> Result<StateBasis> {
    if n_sites == 0 {
        return Err(Error::invalid("n_sites", "must be at least 1"));
    }
    let (cap, per_site_max) = match kind {
        BasisKind::Phonon => (excitation_cap, excitation_cap),
        BasisKind::Spin => (n_sites, 1),
    };
    let dim = match kind {
        BasisKind::Phonon => multiset_count(n_sites, cap),
        BasisKind::Spin => {
            if n_sites >= usize::BITS as usize - 1 {
                usize::MAX
            } else {
                1usize << n_sites
            }
        }
    };
    if dim > max_dim {
        return Err(Error::DimensionOverflow { dim, limit: max_dim });
    }
    if per_site_max > u8::MAX as usize {
        return Err(Error::invalid("excitation_cap", "must fit in a u8"));
    }

    let mut states = Vec::with_capacity(dim);
    for total in 0..=cap {
        let mut current = vec![0u8; n_sites];
        push_compositions(&mut states, &mut current, 0, total, per_site_max);
    }
    debug_assert_eq!(states.len(), dim);
    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(StateBasis {
        kind,
        n_sites,
        excitation_cap: cap,
        states,
        index,
    })
}

/// Number of occupation tuples over `n` sites with total at most `cap`: C(n + cap, cap).
fn multiset_count(n: usize, cap: usize) -> usize {
    let mut acc: u128 = 1;
    for k in 1..=cap as u128 {
        acc = acc * (n as u128 + k) / k;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

// Descending lexicographic order: the first site takes the largest share first.
fn push_compositions(out: &mut Vec<Vec<u8>>, current: &mut [u8], site: usize, remaining: usize, per_site_max: usize) {
    if site + 1 == current.len() {
        if remaining <= per_site_max {
            current[site] = remaining as u8;
            out.push(current.to_vec());
        }
        return;
    }
    for n in (0..=remaining.min(per_site_max)).rev() {
        current[site] = n as u8;
        push_compositions(out, current, site + 1, remaining - n, per_site_max);
    }
    current[site] = 0;
}

/// Dense complex square matrix over an enumerated basis.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix(CMatrix);

impl OperatorMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("operator has non-finite entries".into()));
        }
        Ok(OperatorMatrix(matrix))
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        OperatorMatrix(matrix)
    }

    pub fn zeros(dim: usize) -> Self {
        OperatorMatrix(CMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        OperatorMatrix(CMatrix::identity(dim, dim))
    }

    /// `|ket><bra|` in a basis of dimension `dim`.
    pub fn outer(dim: usize, ket: usize, bra: usize) -> Self {
        let mut m = CMatrix::zeros(dim, dim);
        m[(ket, bra)] = C64::new(1.0, 0.0);
        OperatorMatrix(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        OperatorMatrix(&self.0 * factor)
    }

    pub fn mul(&self, other: &OperatorMatrix) -> Self {
        OperatorMatrix(&self.0 * &other.0)
    }

    pub fn add(&self, other: &OperatorMatrix) -> Self {
        OperatorMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &OperatorMatrix) -> Self {
        OperatorMatrix(&self.0 - &other.0)
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> Self {
        OperatorMatrix(&self.0 * &other.0 - &other.0 * &self.0)
    }

    /// `Tr{self * other}` without forming the product.
    pub fn trace_product(&self, other: &OperatorMatrix) -> C64 {
        let d = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..d {
            for i in 0..d {
                acc += self.0[(i, j)] * other.0[(j, i)];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// Column-major vectorization.
    pub fn to_vec(&self) -> CVector {
        CVector::from_column_slice(self.0.as_slice())
    }

    pub fn from_vec(v: &CVector, dim: usize) -> Result<Self> {
        if v.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: v.len(),
            });
        }
        Ok(OperatorMatrix(CMatrix::from_column_slice(dim, dim, v.as_slice())))
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let h = (&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }
}

/// A physical state: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(OperatorMatrix);

impl DensityMatrix {
    pub fn new(op: OperatorMatrix) -> Result<Self> {
        let defect = op.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::Numerical(format!(
                "density matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Numerical(format!("density matrix trace is {tr}")));
        }
        if let Some(&min) = op.hermitian_eigenvalues().first() {
            if min < -POSITIVITY_TOL {
                return Err(Error::Numerical(format!(
                    "density matrix has negative eigenvalue {min:.3e}"
                )));
            }
        }
        Ok(DensityMatrix(op))
    }

    /// `|0><0|`, the basis ground state.
    pub fn ground(basis: &StateBasis) -> Self {
        DensityMatrix(OperatorMatrix::outer(basis.dim(), 0, 0))
    }

    pub fn pure(basis: &StateBasis, state: usize) -> Result<Self> {
        if state >= basis.dim() {
            return Err(Error::invalid("state", format!("index {state} outside basis of dim {}", basis.dim())));
        }
        Ok(DensityMatrix(OperatorMatrix::outer(basis.dim(), state, state)))
    }

    pub fn operator(&self) -> &OperatorMatrix {
        &self.0
    }

    pub fn into_operator(self) -> OperatorMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

/// Creation (`raising = true`) or annihilation operator for one phonon site.
///
/// Matrix elements that would leave the truncated basis are dropped.
pub fn ladder_operator(basis: &StateBasis, site: usize, raising: bool) -> Result<OperatorMatrix> {
    basis.require_kind(BasisKind::Phonon)?;
    basis.check_site(site)?;
    let d = basis.dim();
    let mut m = CMatrix::zeros(d, d);
    let mut target = vec![0u8; basis.n_sites()];
    for (s, occ) in basis.states().iter().enumerate() {
        target.copy_from_slice(occ);
        let n = occ[site];
        if n == u8::MAX {
            continue;
        }
        target[site] = n + 1;
        if let Some(t) = basis.index_of(&target) {
            m[(t, s)] = C64::new(((n as f64) + 1.0).sqrt(), 0.0);
        }
    }
    let raise = OperatorMatrix(m);
    Ok(if raising { raise } else { raise.adjoint() })
}

/// Number operator `a_i^† a_i` of one site.
pub fn site_number_operator(basis: &StateBasis, site: usize) -> Result<OperatorMatrix> {
    basis.check_site(site)?;
    let d = basis.dim();
    let diag = CVector::from_iterator(d, basis.states().iter().map(|occ| C64::new(occ[site] as f64, 0.0)));
    Ok(OperatorMatrix(CMatrix::from_diagonal(&diag)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpinComponent {
    X,
    Y,
    Z,
    Plus,
    Minus,
}

/// Single-site Pauli or ladder operator embedded in a spin register.
///
/// Convention: `sigma_z |0> = -|0>`, `sigma_z |1> = +|1>`, `sigma_+ |0> = |1>`,
/// and `sigma_± = (sigma_x ± i sigma_y) / 2`.
pub fn spin_operator(basis: &StateBasis, site: usize, which: SpinComponent) -> Result<OperatorMatrix> {
    basis.require_kind(BasisKind::Spin)?;
    basis.check_site(site)?;
    let d = basis.dim();
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let mut m = CMatrix::zeros(d, d);
    let mut flipped = vec![0u8; basis.n_sites()];
    for (s, occ) in basis.states().iter().enumerate() {
        let up = occ[site] == 1;
        flipped.copy_from_slice(occ);
        flipped[site] = 1 - occ[site];
        let t = basis
            .index_of(&flipped)
            .expect("spin basis is closed under single flips");
        match which {
            SpinComponent::Z => m[(s, s)] = if up { one } else { -one },
            SpinComponent::X => m[(t, s)] = one,
            // sigma_y = -i (sigma_+ - sigma_-)
            SpinComponent::Y => m[(t, s)] = if up { i } else { -i },
            SpinComponent::Plus => {
                if !up {
                    m[(t, s)] = one;
                }
            }
            SpinComponent::Minus => {
                if up {
                    m[(t, s)] = one;
                }
            }
        }
    }
    Ok(OperatorMatrix(m))
}

/// Dense Liouville-space matrix of size `dim^2 x dim^2` over column-major vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    matrix: CMatrix,
}

impl SuperOperator {
    pub fn new(dim: usize, matrix: CMatrix) -> Result<Self> {
        let n = dim * dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: matrix.nrows(),
            });
        }
        Ok(SuperOperator { dim, matrix })
    }

    pub fn identity(dim: usize) -> Self {
        SuperOperator {
            dim,
            matrix: CMatrix::identity(dim * dim, dim * dim),
        }
    }

    /// `rho -> left * rho * right`.
    pub fn sandwich(left: &OperatorMatrix, right: &OperatorMatrix) -> Result<Self> {
        if left.dim() != right.dim() {
            return Err(Error::DimensionMismatch {
                expected: left.dim(),
                found: right.dim(),
            });
        }
        Ok(SuperOperator {
            dim: left.dim(),
            matrix: right.matrix().transpose().kronecker(left.matrix()),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn compose(&self, first: &SuperOperator) -> Result<SuperOperator> {
        if self.dim != first.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: first.dim,
            });
        }
        Ok(SuperOperator {
            dim: self.dim,
            matrix: &self.matrix * &first.matrix,
        })
    }

    pub fn max_abs_diff(&self, other: &SuperOperator) -> f64 {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Row vector `vec(I)^T * S`; all zeros for a trace-preserving generator.
    pub fn trace_functional_row(&self) -> Vec<C64> {
        let d = self.dim;
        (0..d * d)
            .map(|col| (0..d).map(|i| self.matrix[(i + d * i, col)]).sum())
            .collect()
    }
}

pub fn apply_superoperator(op: &SuperOperator, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
    if op.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            found: rho.dim(),
        });
    }
    let v = op.matrix() * rho.to_vec();
    OperatorMatrix::from_vec(&v, op.dim())
}

/// `L[rho] = -i[H, rho] + sum_k rate_k (O_k rho O_k^† - {O_k^† O_k, rho} / 2)`.
///
/// Each Lindblad operator is passed bare together with its rate, so the
/// effective jump operator is `sqrt(rate) * O_k`.
pub fn build_liouvillian(hamiltonian: &OperatorMatrix, lindblads: &[(OperatorMatrix, f64)]) -> Result<SuperOperator> {
    let d = hamiltonian.dim();
    for (op, rate) in lindblads {
        if op.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: op.dim(),
            });
        }
        if !(*rate >= 0.0) || !rate.is_finite() {
            return Err(Error::invalid("rate", format!("must be finite and non-negative, got {rate}")));
        }
    }
    let id = CMatrix::identity(d, d);
    let minus_i = C64::new(0.0, -1.0);
    let h = hamiltonian.matrix();
    let mut gen = (id.kronecker(h) - h.transpose().kronecker(&id)) * minus_i;
    for (op, rate) in lindblads {
        if *rate == 0.0 {
            continue;
        }
        let l = op.matrix();
        let ldl = l.adjoint() * l;
        let jump = l.conjugate().kronecker(l);
        let anti = id.kronecker(&ldl) + ldl.transpose().kronecker(&id);
        gen += (jump - anti * C64::new(0.5, 0.0)) * C64::new(*rate, 0.0);
    }
    Ok(SuperOperator { dim: d, matrix: gen })
}

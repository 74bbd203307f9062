//! Transverse phonons of a linear ion crystal.
//!
//! Lengths are in units of `l0` (`l0^3 = e^2 / (m nu_z^2)`), frequencies in units
//! of the transverse trap frequency `nu_x` and times in `1 / nu_x`.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{BasisKind, CMatrix, OperatorMatrix, StateBasis, C64};

#[derive(Clone, Copy, Debug)]
pub struct EquilibriumSolver {
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for EquilibriumSolver {
    fn default() -> Self {
        EquilibriumSolver {
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainGeometry {
    pub n_ions: usize,
    pub positions: Vec<f64>,
}

impl ChainGeometry {
    /// Largest violation of the axial force balance over all ions.
    pub fn force_residual(&self) -> f64 {
        force_residuals(&self.positions)
            .iter()
            .fold(0.0, |m, r| m.max(r.abs()))
    }
}

fn force_residuals(u: &[f64]) -> Vec<f64> {
    let n = u.len();
    (0..n)
        .map(|m| {
            let mut f = u[m];
            for k in 0..n {
                if k == m {
                    continue;
                }
                let d = u[m] - u[k];
                let inv2 = 1.0 / (d * d);
                if k < m {
                    f -= inv2;
                } else {
                    f += inv2;
                }
            }
            f
        })
        .collect()
}

fn force_jacobian(u: &[f64]) -> DMatrix<f64> {
    let n = u.len();
    let mut j = DMatrix::<f64>::identity(n, n);
    for m in 0..n {
        for k in 0..n {
            if k == m {
                continue;
            }
            let c = 2.0 / (u[m] - u[k]).abs().powi(3);
            j[(m, m)] += c;
            j[(m, k)] -= c;
        }
    }
    j
}

fn residual_norm(u: &[f64]) -> f64 {
    force_residuals(u).iter().fold(0.0, |m, r| m.max(r.abs()))
}

pub fn solve_equilibrium(n_ions: usize) -> Result<ChainGeometry> {
    solve_equilibrium_with(n_ions, EquilibriumSolver::default())
}

/// Damped Newton iteration from a uniform, centred initial guess.
pub fn solve_equilibrium_with(n_ions: usize, solver: EquilibriumSolver) -> Result<ChainGeometry> {
    if n_ions == 0 {
        return Err(Error::invalid("n_ions", "must be at least 1"));
    }
    if n_ions == 1 {
        return Ok(ChainGeometry {
            n_ions,
            positions: vec![0.0],
        });
    }
    let spacing = 1.5 / (n_ions as f64).sqrt();
    let centre = (n_ions as f64 - 1.0) / 2.0;
    let mut u: Vec<f64> = (0..n_ions).map(|i| (i as f64 - centre) * spacing).collect();
    let mut res = residual_norm(&u);

    for _ in 0..solver.max_iterations {
        if res < solver.tolerance {
            break;
        }
        let f = DVector::from_vec(force_residuals(&u));
        let step = force_jacobian(&u)
            .lu()
            .solve(&f)
            .ok_or_else(|| Error::Numerical("singular Jacobian in equilibrium solver".into()))?;
        let mut damping = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(x, s)| x - damping * s).collect();
            let ordered = trial.windows(2).all(|w| w[1] > w[0]);
            let trial_res = if ordered { residual_norm(&trial) } else { f64::INFINITY };
            if trial_res < res || damping < 1e-8 {
                if trial_res.is_finite() {
                    u = trial;
                    res = trial_res;
                }
                break;
            }
            damping *= 0.5;
        }
    }
    if res >= solver.tolerance {
        return Err(Error::NoConvergence {
            iterations: solver.max_iterations,
            residual: res,
        });
    }
    // Exact mirror symmetry; Newton leaves it intact up to roundoff.
    let sym: Vec<f64> = (0..n_ions).map(|i| 0.5 * (u[i] - u[n_ions - 1 - i])).collect();
    Ok(ChainGeometry {
        n_ions,
        positions: sym,
    })
}

/// Tight-binding model of local transverse phonons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainModel {
    pub n_ions: usize,
    pub beta: f64,
    #[serde(rename = "U")]
    pub anharmonicity: f64,
    pub positions: Vec<f64>,
    pub site_energies: Vec<f64>,
    pub couplings: Vec<Vec<f64>>,
}

pub fn build_chain_model(geometry: &ChainGeometry, beta: f64, anharmonicity: f64) -> Result<ChainModel> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::invalid("beta", format!("must be finite and non-negative, got {beta}")));
    }
    if !anharmonicity.is_finite() {
        return Err(Error::invalid("U", "must be finite"));
    }
    if beta > 0.3 {
        warn!("beta = {beta} is outside the strongly anisotropic regime (beta << 1)");
    }
    let n = geometry.n_ions;
    if geometry.positions.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: geometry.positions.len(),
        });
    }
    let u = &geometry.positions;
    let mut couplings = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (u[i] - u[j]).abs();
            if d == 0.0 || !d.is_finite() {
                return Err(Error::invalid(
                    "positions",
                    format!("ions {i} and {j} coincide"),
                ));
            }
            let t = 0.5 * beta / d.powi(3);
            couplings[i][j] = t;
            couplings[j][i] = t;
        }
    }
    let site_energies = (0..n).map(|i| 1.0 - couplings[i].iter().sum::<f64>()).collect();
    Ok(ChainModel {
        n_ions: n,
        beta,
        anharmonicity,
        positions: u.clone(),
        site_energies,
        couplings,
    })
}

impl ChainModel {
    /// Equilibrium positions for `n_ions` followed by the coupling construction.
    pub fn for_chain(n_ions: usize, beta: f64, anharmonicity: f64) -> Result<Self> {
        build_chain_model(&solve_equilibrium(n_ions)?, beta, anharmonicity)
    }

    /// `H_ij = omega0_i delta_ij + t_ij`.
    pub fn single_sector_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_ions, self.n_ions, |i, j| {
            if i == j {
                self.site_energies[i]
            } else {
                self.couplings[i][j]
            }
        })
    }
}

/// Single-exciton eigenmodes; column `j` of `modes` holds `c_{ij}` over sites `i`.
#[derive(Clone, Debug)]
pub struct ExcitonBasis {
    pub frequencies: Vec<f64>,
    pub modes: DMatrix<f64>,
}

impl ExcitonBasis {
    pub fn amplitude(&self, site: usize, mode: usize) -> f64 {
        self.modes[(site, mode)]
    }
}

/// Eigendecomposition of the single-excitation block, ascending, with the
/// first largest-magnitude component of each eigenvector made positive.
pub fn diagonalize_single_sector(model: &ChainModel) -> ExcitonBasis {
    let (frequencies, modes) = sorted_symmetric_eigen(model.single_sector_matrix());
    ExcitonBasis { frequencies, modes }
}

pub(crate) fn sorted_symmetric_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::<f64>::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let pivot = v.iter().position(|x| x.abs() >= max - 1e-10).unwrap_or(0);
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(v * sign));
    }
    (values, vectors)
}

/// Bose-Hubbard chain Hamiltonian on a truncated phonon basis:
/// `sum omega0_i n_i + sum_{i<j} t_ij (a_i^† a_j + h.c.) + U sum_i a_i^†2 a_i^2`.
pub fn build_hamiltonian(model: &ChainModel, basis: &StateBasis) -> Result<OperatorMatrix> {
    basis.require_kind(BasisKind::Phonon)?;
    if basis.n_sites() != model.n_ions {
        return Err(Error::DimensionMismatch {
            expected: model.n_ions,
            found: basis.n_sites(),
        });
    }
    let d = basis.dim();
    let n = model.n_ions;
    let mut h = CMatrix::zeros(d, d);
    let mut target = vec![0u8; n];
    for (s, occ) in basis.states().iter().enumerate() {
        let mut diag = 0.0;
        for i in 0..n {
            let ni = occ[i] as f64;
            diag += model.site_energies[i] * ni + model.anharmonicity * ni * (ni - 1.0);
        }
        h[(s, s)] = C64::new(diag, 0.0);
        for j in 0..n {
            if occ[j] == 0 {
                continue;
            }
            for i in 0..n {
                if i == j {
                    continue;
                }
                target.copy_from_slice(occ);
                target[j] -= 1;
                target[i] += 1;
                if let Some(t) = basis.index_of(&target) {
                    let amp = model.couplings[i][j] * ((occ[i] as f64 + 1.0) * occ[j] as f64).sqrt();
                    h[(t, s)] += C64::new(amp, 0.0);
                }
            }
        }
    }
    Ok(OperatorMatrix::from_matrix_unchecked(h))
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian operator restricted
/// to the states with `excitations` quanta. Eigenvectors are embedded back into
/// the full basis as columns.
pub fn sector_spectrum(h: &OperatorMatrix, basis: &StateBasis, excitations: usize) -> (Vec<f64>, CMatrix) {
    let idx: Vec<usize> = (0..basis.dim())
        .filter(|&s| basis.total_excitations(s) == excitations)
        .collect();
    let block = CMatrix::from_fn(idx.len(), idx.len(), |i, j| h.matrix()[(idx[i], idx[j])]);
    let eig = SymmetricEigen::new(block);
    let mut order: Vec<usize> = (0..idx.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vecs = CMatrix::zeros(basis.dim(), idx.len());
    for (col, &k) in order.iter().enumerate() {
        for (r, &s) in idx.iter().enumerate() {
            vecs[(s, col)] = eig.eigenvectors[(r, k)];
        }
    }
    (order.iter().map(|&k| eig.eigenvalues[k]).collect(), vecs)
}

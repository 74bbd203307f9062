//! Open-system time evolution `G(t) = exp(L t)` for time-independent Liouvillians.
//!
//! The generator is split into the connected blocks of its sparsity pattern
//! (for number-conserving models these are the ket/bra excitation sectors) and
//! each block is exponentiated on its own, via its eigendecomposition when the
//! eigenvector basis is well conditioned and by Padé scaling and squaring
//! otherwise.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block_partition, expm_pade, submatrix, EigenDecomposition};
use crate::operators::{
    build_liouvillian, site_number_operator, spin_operator, BasisKind, CMatrix, CVector, OperatorMatrix,
    SpinComponent, StateBasis, SuperOperator, C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// One channel `sqrt(rate) a_i^† a_i` per listed site.
    PhononLocalDephasing,
    /// One channel `sqrt(rate) sigma_z^(i)` per listed site.
    SpinLocalDephasing,
    /// A single channel `sqrt(rate) prod_i sigma_z^(i)` over the listed sites.
    SpinCollectiveDephasing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseChannel {
    pub kind: ChannelKind,
    pub sites: Vec<usize>,
    pub rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseSpec {
    pub channels: Vec<NoiseChannel>,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec::default()
    }

    pub fn single(kind: ChannelKind, sites: Vec<usize>, rate: f64) -> Self {
        NoiseSpec {
            channels: vec![NoiseChannel { kind, sites, rate }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.channels.iter().all(|c| c.rate == 0.0 || c.sites.is_empty())
    }

    /// Bare Lindblad operators paired with their rates.
    pub fn lindblads(&self, basis: &StateBasis) -> Result<Vec<(OperatorMatrix, f64)>> {
        let mut out = Vec::new();
        for ch in &self.channels {
            if !(ch.rate >= 0.0) || !ch.rate.is_finite() {
                return Err(Error::invalid("rate", format!("must be finite and non-negative, got {}", ch.rate)));
            }
            for &s in &ch.sites {
                basis.check_site(s)?;
            }
            match ch.kind {
                ChannelKind::PhononLocalDephasing => {
                    basis.require_kind(BasisKind::Phonon)?;
                    for &s in &ch.sites {
                        out.push((site_number_operator(basis, s)?, ch.rate));
                    }
                }
                ChannelKind::SpinLocalDephasing => {
                    basis.require_kind(BasisKind::Spin)?;
                    for &s in &ch.sites {
                        out.push((spin_operator(basis, s, SpinComponent::Z)?, ch.rate));
                    }
                }
                ChannelKind::SpinCollectiveDephasing => {
                    basis.require_kind(BasisKind::Spin)?;
                    if ch.sites.is_empty() {
                        continue;
                    }
                    let mut prod = basis.identity();
                    for &s in &ch.sites {
                        prod = prod.mul(&spin_operator(basis, s, SpinComponent::Z)?);
                    }
                    out.push((prod, ch.rate));
                }
            }
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExpMethod {
    /// Eigendecomposition with Padé fallback for ill-conditioned blocks.
    #[default]
    Auto,
    Pade,
}

#[derive(Clone, Debug)]
struct GeneratorBlock {
    indices: Vec<usize>,
    local: CMatrix,
    eigen: Option<EigenDecomposition>,
}

impl GeneratorBlock {
    fn exp(&self, t: f64) -> CMatrix {
        match &self.eigen {
            Some(e) => e.exp(t),
            None => expm_pade(&(&self.local * C64::new(t, 0.0))),
        }
    }
}

/// `G(t)` for one fixed `t`, stored block by block.
#[derive(Clone, Debug)]
pub struct StepMap {
    dim: usize,
    blocks: Vec<(Vec<usize>, CMatrix)>,
}

impl StepMap {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply_vec(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        for (idx, m) in &self.blocks {
            if idx.len() == 1 {
                out[idx[0]] = m[(0, 0)] * v[idx[0]];
                continue;
            }
            let local = CVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]));
            let r = m * local;
            for (k, &i) in idx.iter().enumerate() {
                out[i] = r[k];
            }
        }
        out
    }

    /// `G^T v`: propagates dual vectors `vec(A^T)` of observables.
    pub fn apply_transpose_vec(&self, v: &CVector) -> CVector {
        let mut out = CVector::zeros(v.len());
        for (idx, m) in &self.blocks {
            let local = CVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]));
            let r = m.tr_mul(&local);
            for (k, &i) in idx.iter().enumerate() {
                out[i] = r[k];
            }
        }
        out
    }

    pub fn apply(&self, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_dim(self.dim, rho.dim())?;
        OperatorMatrix::from_vec(&self.apply_vec(&rho.to_vec()), self.dim)
    }

    /// Heisenberg-picture action: `Tr{A G[rho]} = Tr{G^‡[A] rho}`.
    pub fn apply_adjoint(&self, observable: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_dim(self.dim, observable.dim())?;
        let dual = OperatorMatrix::from_matrix_unchecked(observable.matrix().transpose()).to_vec();
        let out = OperatorMatrix::from_vec(&self.apply_transpose_vec(&dual), self.dim)?;
        Ok(OperatorMatrix::from_matrix_unchecked(out.into_matrix().transpose()))
    }

    pub fn to_superoperator(&self) -> SuperOperator {
        let n = self.dim * self.dim;
        let mut m = CMatrix::zeros(n, n);
        for (idx, b) in &self.blocks {
            for (c, &j) in idx.iter().enumerate() {
                for (r, &i) in idx.iter().enumerate() {
                    m[(i, j)] = b[(r, c)];
                }
            }
        }
        SuperOperator::new(self.dim, m).expect("square by construction")
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Propagator family `G(t) = exp(L t)` of a fixed generator.
///
/// Immutable apart from [`Propagator::cache_steps`], which is meant to be
/// called before the propagator is shared across workers.
#[derive(Clone, Debug)]
pub struct Propagator {
    generator: SuperOperator,
    blocks: Vec<GeneratorBlock>,
    cache: BTreeMap<u64, StepMap>,
}

impl Propagator {
    pub fn new(generator: SuperOperator) -> Self {
        Self::with_method(generator, ExpMethod::Auto)
    }

    pub fn with_method(generator: SuperOperator, method: ExpMethod) -> Self {
        let blocks = block_partition(generator.matrix())
            .into_iter()
            .map(|indices| {
                let local = submatrix(generator.matrix(), &indices);
                let eigen = match method {
                    ExpMethod::Auto if indices.len() > 1 => EigenDecomposition::try_new(&local),
                    _ => None,
                };
                GeneratorBlock { indices, local, eigen }
            })
            .collect();
        Propagator {
            generator,
            blocks,
            cache: BTreeMap::new(),
        }
    }

    pub fn generator(&self) -> &SuperOperator {
        &self.generator
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.indices.len()).collect()
    }

    /// Number of blocks that fell back to Padé exponentiation.
    pub fn pade_block_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.indices.len() > 1 && b.eigen.is_none())
            .count()
    }

    fn compute_step(&self, t: f64) -> StepMap {
        StepMap {
            dim: self.dim(),
            blocks: self
                .blocks
                .iter()
                .map(|b| (b.indices.clone(), b.exp(t)))
                .collect(),
        }
    }

    /// `G(t)`, from the cache when present.
    pub fn step(&self, t: f64) -> Result<StepMap> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::invalid("t", format!("evolution time must be finite and non-negative, got {t}")));
        }
        if let Some(s) = self.cache.get(&t.to_bits()) {
            return Ok(s.clone());
        }
        Ok(self.compute_step(t))
    }

    pub fn cache_steps(&mut self, times: &[f64]) -> Result<()> {
        for &t in times {
            if !self.cache.contains_key(&t.to_bits()) {
                let s = self.step(t)?;
                self.cache.insert(t.to_bits(), s);
            }
        }
        Ok(())
    }

    pub fn cached_times(&self) -> Vec<f64> {
        self.cache.keys().map(|&b| f64::from_bits(b)).collect()
    }

    pub fn evolve(&self, t: f64, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_dim(self.dim(), rho.dim())?;
        if t == 0.0 {
            return Ok(rho.clone());
        }
        self.step(t)?.apply(rho)
    }

    /// States at `t_k = k * dt` for `k = 0..n_steps`; element 0 is the input.
    pub fn evolve_grid(&self, dt: f64, n_steps: usize, rho: &OperatorMatrix) -> Result<Vec<OperatorMatrix>> {
        check_dim(self.dim(), rho.dim())?;
        let d = self.dim();
        self.grid_vectors(dt, n_steps, rho.to_vec(), false)?
            .iter()
            .map(|v| OperatorMatrix::from_vec(v, d))
            .collect()
    }

    /// Repeated application of a single `G(dt)` to a Liouville-space vector.
    /// With `transpose` the dual action `G^T` is used instead.
    pub fn grid_vectors(&self, dt: f64, n_steps: usize, start: CVector, transpose: bool) -> Result<Vec<CVector>> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::invalid("dt", format!("must be positive, got {dt}")));
        }
        let step = self.step(dt)?;
        let mut out = Vec::with_capacity(n_steps);
        let mut v = start;
        for k in 0..n_steps {
            if k > 0 {
                v = if transpose { step.apply_transpose_vec(&v) } else { step.apply_vec(&v) };
            }
            out.push(v.clone());
        }
        Ok(out)
    }
}

pub fn make_propagator(hamiltonian: &OperatorMatrix, noise: &NoiseSpec, basis: &StateBasis) -> Result<Propagator> {
    check_dim(basis.dim(), hamiltonian.dim())?;
    let lindblads = noise.lindblads(basis)?;
    Ok(Propagator::new(build_liouvillian(hamiltonian, &lindblads)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_hamiltonian, diagonalize_single_sector, ChainModel};
    use crate::operators::{apply_superoperator, DensityMatrix};
    use approx::assert_abs_diff_eq;

    fn single_mode(omega: f64, gamma: f64) -> (StateBasis, Propagator) {
        let b = StateBasis::phonon(1, 3).unwrap();
        let h = site_number_operator(&b, 0).unwrap().scale(C64::new(omega, 0.0));
        let noise = NoiseSpec::single(ChannelKind::PhononLocalDephasing, vec![0], gamma);
        let p = make_propagator(&h, &noise, &b).unwrap();
        (b, p)
    }

    /// Unitary closed form `exp(-iHt)` via the Hermitian eigenbasis.
    fn unitary(h: &OperatorMatrix, t: f64) -> CMatrix {
        let eig = h.matrix().clone().symmetric_eigen();
        let phases = CVector::from_iterator(
            eig.eigenvalues.len(),
            eig.eigenvalues.iter().map(|&e| C64::new(0.0, -e * t).exp()),
        );
        &eig.eigenvectors * CMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint()
    }

    #[test]
    fn coherence_decay_matches_analytic_form() {
        let (omega, gamma) = (0.93, 0.07);
        let (_, p) = single_mode(omega, gamma);
        let coh = OperatorMatrix::outer(4, 1, 0);
        for &t in &[0.5, 3.0, 17.0, 40.0] {
            let out = p.evolve(t, &coh).unwrap();
            let expected = (C64::new(-gamma / 2.0, -omega) * t).exp();
            let got = out.matrix()[(1, 0)];
            assert!(((got - expected) / expected).norm() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn full_dephasing_kills_coherences() {
        let (_, p) = single_mode(1.0, 0.5);
        let mut rho = OperatorMatrix::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                rho = rho.add(&OperatorMatrix::outer(4, i, j).scale(C64::new(0.5, 0.0)));
            }
        }
        let out = p.evolve(60.0, &rho).unwrap();
        assert!(out.matrix()[(1, 0)].norm() < 1e-6);
        assert_abs_diff_eq!(out.matrix()[(1, 1)].re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let (_, p) = single_mode(0.8, 0.1);
        let rho = OperatorMatrix::outer(4, 2, 1);
        assert_eq!(p.evolve(0.0, &rho).unwrap(), rho);
        let g0 = p.step(0.0).unwrap().to_superoperator();
        assert!(g0.max_abs_diff(&SuperOperator::identity(4)) < 1e-14);
        assert!(p.evolve(-1.0, &rho).is_err());
    }

    #[test]
    fn noiseless_evolution_is_unitary_conjugation() {
        let m = ChainModel::for_chain(3, 0.1, -0.01).unwrap();
        let b = StateBasis::phonon(3, 2).unwrap();
        let h = build_hamiltonian(&m, &b).unwrap();
        let p = make_propagator(&h, &NoiseSpec::none(), &b).unwrap();
        let rho = DensityMatrix::pure(&b, 1).unwrap().into_operator();
        let t = 23.7;
        let u = unitary(&h, t);
        let expected = OperatorMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap();
        assert!(p.evolve(t, &rho).unwrap().max_abs_diff(&expected) < 1e-9);
    }

    #[test]
    fn two_site_tunnelling_matches_mode_expansion() {
        let m = ChainModel::for_chain(2, 0.1, 0.0).unwrap();
        let ex = diagonalize_single_sector(&m);
        let b = StateBasis::phonon(2, 2).unwrap();
        let h = build_hamiltonian(&m, &b).unwrap();
        let p = make_propagator(&h, &NoiseSpec::none(), &b).unwrap();
        let rho = DensityMatrix::pure(&b, 1).unwrap().into_operator();
        let site2 = b.index_of(&[0, 1]).unwrap();
        for &t in &[1.0, 20.0, 62.8, 100.0] {
            let amp: C64 = (0..2)
                .map(|j| C64::new(0.0, -ex.frequencies[j] * t).exp() * ex.amplitude(1, j) * ex.amplitude(0, j))
                .sum();
            let got = p.evolve(t, &rho).unwrap().matrix()[(site2, site2)].re;
            assert_abs_diff_eq!(got, amp.norm_sqr(), epsilon = 1e-10);
        }
    }

    #[test]
    fn grid_matches_single_shot() {
        let m = ChainModel::for_chain(3, 0.1, 0.0).unwrap();
        let b = StateBasis::phonon(3, 2).unwrap();
        let h = build_hamiltonian(&m, &b).unwrap();
        let noise = NoiseSpec::single(ChannelKind::PhononLocalDephasing, vec![0, 1, 2], 0.02);
        let p = make_propagator(&h, &noise, &b).unwrap();
        let rho = DensityMatrix::pure(&b, 2).unwrap().into_operator();
        let grid = p.evolve_grid(0.7, 40, &rho).unwrap();
        assert_eq!(grid.len(), 40);
        assert_eq!(grid[0], rho);
        for k in [1, 13, 39] {
            let single = p.evolve(0.7 * k as f64, &rho).unwrap();
            assert!(grid[k].max_abs_diff(&single) < 1e-8, "k={k}");
        }
        for g in &grid {
            assert_abs_diff_eq!(g.trace().re, 1.0, epsilon = 1e-9);
        }
        let one = p.evolve_grid(0.7, 1, &rho).unwrap();
        assert_eq!(one, vec![rho.clone()]);
        assert!(p.evolve_grid(0.0, 3, &rho).is_err());
    }

    #[test]
    fn cached_steps_are_reused() {
        let (_, mut p) = single_mode(1.0, 0.1);
        p.cache_steps(&[0.5, 1.5]).unwrap();
        assert_eq!(p.cached_times(), vec![0.5, 1.5]);
        let rho = OperatorMatrix::outer(4, 1, 0);
        let fresh = single_mode(1.0, 0.1).1.evolve(1.5, &rho).unwrap();
        assert_eq!(p.evolve(1.5, &rho).unwrap(), fresh);
    }

    #[test]
    fn block_route_matches_dense_pade() {
        let m = ChainModel::for_chain(3, 0.1, -0.03).unwrap();
        let b = StateBasis::phonon(3, 2).unwrap();
        let h = build_hamiltonian(&m, &b).unwrap();
        let noise = NoiseSpec::single(ChannelKind::PhononLocalDephasing, vec![0, 2], 0.05);
        let p = make_propagator(&h, &noise, &b).unwrap();
        assert!(p.block_sizes().len() > 1);
        let t = 8.3;
        let dense = expm_pade(&(p.generator().matrix() * C64::new(t, 0.0)));
        let dense = SuperOperator::new(b.dim(), dense).unwrap();
        assert!(p.step(t).unwrap().to_superoperator().max_abs_diff(&dense) < 1e-10);
        let pade = Propagator::with_method(p.generator().clone(), ExpMethod::Pade);
        assert!(pade.step(t).unwrap().to_superoperator().max_abs_diff(&dense) < 1e-10);
    }

    #[test]
    fn adjoint_action_is_consistent() {
        let (b, p) = single_mode(0.9, 0.2);
        let step = p.step(2.0).unwrap();
        let a = site_number_operator(&b, 0).unwrap();
        let rho = OperatorMatrix::outer(4, 1, 1)
            .add(&OperatorMatrix::outer(4, 2, 1).scale(C64::new(0.3, 0.1)));
        let lhs = a.trace_product(&step.apply(&rho).unwrap());
        let rhs = step.apply_adjoint(&a).unwrap().trace_product(&rho);
        assert!((lhs - rhs).norm() < 1e-13);
        let direct = apply_superoperator(&step.to_superoperator(), &rho).unwrap();
        assert!(direct.max_abs_diff(&step.apply(&rho).unwrap()) < 1e-14);
    }

    #[test]
    fn spin_noise_channels() {
        let b = StateBasis::spin(2).unwrap();
        let local = NoiseSpec::single(ChannelKind::SpinLocalDephasing, vec![0, 1], 0.1);
        assert_eq!(local.lindblads(&b).unwrap().len(), 2);
        let coll = NoiseSpec::single(ChannelKind::SpinCollectiveDephasing, vec![0, 1], 0.1);
        let ls = coll.lindblads(&b).unwrap();
        assert_eq!(ls.len(), 1);
        let zz = ls[0].0.matrix();
        assert_eq!(zz[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(zz[(1, 1)], C64::new(-1.0, 0.0));
        let wrong = NoiseSpec::single(ChannelKind::PhononLocalDephasing, vec![0], 0.1);
        assert!(wrong.lindblads(&b).is_err());
        let bad_site = NoiseSpec::single(ChannelKind::SpinLocalDephasing, vec![2], 0.1);
        assert!(bad_site.lindblads(&b).is_err());
    }
}

//! Impulsive pulse maps `V[rho] = D rho D^†` and their phase harmonics.
//!
//! Every supported pulse unitary has the form `D(phi) = P(phi) D(0) P(phi)^†`
//! with `P(phi) = exp(i phi n_site)`, so its matrix elements between states
//! whose site occupations differ by `q` carry the factor `e^{i q phi}`.
//! Splitting `D(0) = sum_q D_q` by that charge gives
//! `V(phi) = sum_k e^{i k phi} sum_{n - m = k} D_n rho D_m^†`, which is how
//! the harmonic components are built for all pulse models.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::expm_pade;
use crate::operators::{
    ladder_operator, spin_operator, BasisKind, CMatrix, OperatorMatrix, SpinComponent, StateBasis, SuperOperator, C64,
};

/// Linearized phonon pulses above this amplitude are outside the perturbative regime.
pub const LINEARIZED_ALPHA_WARN: f64 = 0.3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseModel {
    /// `D = I + alpha e^{i phi} a^† - alpha e^{-i phi} a`.
    #[default]
    Linearized,
    /// Truncated `exp(alpha e^{i phi} a^† - alpha e^{-i phi} a)`.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum PulseAmplitude {
    Phonon { alpha: f64, model: PulseModel },
    /// `U = alpha I + beta (e^{i phi} sigma_+ - e^{-i phi} sigma_-)`.
    Spin { alpha: f64, beta: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub site: usize,
    pub phase: f64,
    pub amplitude: PulseAmplitude,
}

impl PulseEvent {
    pub fn phonon(site: usize, alpha: f64, model: PulseModel) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::invalid("alpha", format!("must be finite and non-negative, got {alpha}")));
        }
        if model == PulseModel::Linearized && alpha > LINEARIZED_ALPHA_WARN {
            warn!("linearized pulse amplitude alpha = {alpha} exceeds {LINEARIZED_ALPHA_WARN}");
        }
        Ok(PulseEvent {
            site,
            phase: 0.0,
            amplitude: PulseAmplitude::Phonon { alpha, model },
        })
    }

    /// Spin pulse with flip amplitude `beta` and `alpha = sqrt(1 - beta^2)`.
    pub fn spin(site: usize, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid("beta", format!("must lie in [0, 1], got {beta}")));
        }
        Self::spin_with(site, (1.0 - beta * beta).sqrt(), beta)
    }

    pub fn spin_with(site: usize, alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() || (alpha * alpha + beta * beta - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(
                "alpha, beta",
                format!("spin pulse requires alpha^2 + beta^2 = 1, got {alpha}, {beta}"),
            ));
        }
        Ok(PulseEvent {
            site,
            phase: 0.0,
            amplitude: PulseAmplitude::Spin { alpha, beta },
        })
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn basis_kind(&self) -> BasisKind {
        match self.amplitude {
            PulseAmplitude::Phonon { .. } => BasisKind::Phonon,
            PulseAmplitude::Spin { .. } => BasisKind::Spin,
        }
    }

    /// Harmonic range assumed by phase cycling (band limit of the pulse model).
    /// Spin pulses are exact unitaries whose `k = ±2` terms survive arbitrary
    /// intermediate states, so they are cycled like exact phonon pulses.
    pub fn cycling_band(&self) -> usize {
        match self.amplitude {
            PulseAmplitude::Phonon {
                model: PulseModel::Linearized,
                ..
            } => 1,
            _ => 2,
        }
    }

    /// Amplitude carried by each `k = ±1` interaction: `alpha` for phonons,
    /// `alpha beta` for spins.
    pub fn pathway_scale(&self) -> f64 {
        match self.amplitude {
            PulseAmplitude::Phonon { alpha, .. } => alpha,
            PulseAmplitude::Spin { alpha, beta } => alpha * beta,
        }
    }

    /// Largest harmonic `|k|` with a nonzero component on `basis`.
    pub fn harmonic_range(&self, basis: &StateBasis) -> usize {
        match self.amplitude {
            PulseAmplitude::Phonon {
                model: PulseModel::Exact, ..
            } => 2 * basis.excitation_cap(),
            _ => 2,
        }
    }

    /// `D(0)`, the pulse unitary at zero phase.
    fn unitary_at_zero(&self, basis: &StateBasis) -> Result<CMatrix> {
        basis.require_kind(self.basis_kind())?;
        basis.check_site(self.site)?;
        let d = basis.dim();
        match self.amplitude {
            PulseAmplitude::Phonon { alpha, model } => {
                let up = ladder_operator(basis, self.site, true)?.into_matrix();
                let gen = (&up - up.adjoint()) * C64::new(alpha, 0.0);
                Ok(match model {
                    PulseModel::Linearized => CMatrix::identity(d, d) + gen,
                    PulseModel::Exact => expm_pade(&gen),
                })
            }
            PulseAmplitude::Spin { alpha, beta } => {
                let plus = spin_operator(basis, self.site, SpinComponent::Plus)?.into_matrix();
                let minus = spin_operator(basis, self.site, SpinComponent::Minus)?.into_matrix();
                Ok(CMatrix::identity(d, d) * C64::new(alpha, 0.0) + (plus - minus) * C64::new(beta, 0.0))
            }
        }
    }

    /// `D(0)` split by site charge: entry `(q, D_q)` for every nonzero `D_q`.
    fn charge_blocks(&self, basis: &StateBasis) -> Result<Vec<(i32, CMatrix)>> {
        let u = self.unitary_at_zero(basis)?;
        let d = basis.dim();
        let occ: Vec<i32> = basis.states().iter().map(|s| s[self.site] as i32).collect();
        let mut blocks: Vec<(i32, CMatrix)> = Vec::new();
        for j in 0..d {
            for i in 0..d {
                let z = u[(i, j)];
                if z.re == 0.0 && z.im == 0.0 {
                    continue;
                }
                let q = occ[i] - occ[j];
                let slot = match blocks.iter().position(|(c, _)| *c == q) {
                    Some(p) => p,
                    None => {
                        blocks.push((q, CMatrix::zeros(d, d)));
                        blocks.len() - 1
                    }
                };
                blocks[slot].1[(i, j)] = z;
            }
        }
        blocks.sort_by_key(|(q, _)| *q);
        Ok(blocks)
    }

    /// `D(phi)` at the event's phase.
    pub fn unitary(&self, basis: &StateBasis) -> Result<OperatorMatrix> {
        let mut out = CMatrix::zeros(basis.dim(), basis.dim());
        for (q, m) in self.charge_blocks(basis)? {
            out += m * C64::from_polar(1.0, q as f64 * self.phase);
        }
        Ok(OperatorMatrix::from_matrix_unchecked(out))
    }
}

/// One term `left * rho * right` of a pulse map. `charges` records the
/// site charge `(n, m)` of the ket and bra factors when the term comes from a
/// harmonic decomposition.
#[derive(Clone, Debug)]
struct MapTerm {
    left: CMatrix,
    right: CMatrix,
    charges: Option<(i32, i32)>,
}

/// Linear map `rho -> sum_t left_t rho right_t` on operators.
#[derive(Clone, Debug)]
pub struct PulseMap {
    dim: usize,
    terms: Vec<MapTerm>,
}

/// Which side of the density matrix a single-sided term acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Ket,
    Bra,
}

impl PulseMap {
    pub fn identity(dim: usize) -> Self {
        PulseMap {
            dim,
            terms: vec![MapTerm {
                left: CMatrix::identity(dim, dim),
                right: CMatrix::identity(dim, dim),
                charges: Some((0, 0)),
            }],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub(crate) fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            out += &t.left * rho * &t.right;
        }
        out
    }

    /// Dual map: `Tr{A V[rho]} = Tr{V^‡[A] rho}` with `V^‡[A] = sum right A left`.
    pub(crate) fn apply_dual_matrix(&self, a: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            out += &t.right * a * &t.left;
        }
        out
    }

    pub fn apply(&self, rho: &OperatorMatrix) -> Result<OperatorMatrix> {
        if rho.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.dim(),
            });
        }
        Ok(OperatorMatrix::from_matrix_unchecked(self.apply_matrix(rho.matrix())))
    }

    pub fn apply_dual(&self, observable: &OperatorMatrix) -> Result<OperatorMatrix> {
        if observable.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: observable.dim(),
            });
        }
        Ok(OperatorMatrix::from_matrix_unchecked(self.apply_dual_matrix(observable.matrix())))
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        for t in &mut self.terms {
            t.left *= C64::new(factor, 0.0);
        }
        self
    }

    /// Keeps only the terms that leave the other side untouched (charge 0
    /// there) and act with nonzero charge on `side`.
    pub fn select_side(&self, side: Side) -> Result<Self> {
        let mut terms = Vec::new();
        for t in &self.terms {
            let (n, m) = t
                .charges
                .ok_or_else(|| Error::invalid("pulse map", "side selection requires a harmonic component"))?;
            let keep = match side {
                Side::Ket => m == 0 && n != 0,
                Side::Bra => n == 0 && m != 0,
            };
            if keep {
                terms.push(t.clone());
            }
        }
        Ok(PulseMap { dim: self.dim, terms })
    }

    pub fn to_superoperator(&self) -> SuperOperator {
        let mut m = CMatrix::zeros(self.dim * self.dim, self.dim * self.dim);
        for t in &self.terms {
            m += t.right.transpose().kronecker(&t.left);
        }
        SuperOperator::new(self.dim, m).expect("square by construction")
    }
}

/// Full pulse map `rho -> D(phi) rho D(phi)^†` at the event's phase.
pub fn pulse_map(event: &PulseEvent, basis: &StateBasis) -> Result<PulseMap> {
    let u = event.unitary(basis)?.into_matrix();
    Ok(PulseMap {
        dim: basis.dim(),
        terms: vec![MapTerm {
            right: u.adjoint(),
            left: u,
            charges: None,
        }],
    })
}

pub fn apply_pulse(rho: &OperatorMatrix, event: &PulseEvent, basis: &StateBasis) -> Result<OperatorMatrix> {
    pulse_map(event, basis)?.apply(rho)
}

/// Coefficient map of `e^{i k phi}` in the pulse map, independent of the event's phase.
///
/// Linearized phonon pulses give `alpha (a^† rho - rho a^†)` at `k = +1`,
/// `alpha (rho a - a rho)` at `k = -1`, `rho + alpha^2 (a^† rho a + a rho a^†)`
/// at `k = 0` and `-alpha^2 a^† rho a^†`, `-alpha^2 a rho a` at `k = ±2`;
/// spin pulses follow with `(1, alpha, alpha^2) -> (alpha^2, alpha beta, beta^2)`.
pub fn pulse_harmonic_component(event: &PulseEvent, k: i32, basis: &StateBasis) -> Result<PulseMap> {
    let range = event.harmonic_range(basis) as i32;
    if k.abs() > range {
        return Err(Error::invalid("k", format!("harmonic {k} outside the pulse model range ±{range}")));
    }
    let blocks = event.charge_blocks(basis)?;
    let mut terms = Vec::new();
    for (n, dn) in &blocks {
        for (m, dm) in &blocks {
            if n - m == k {
                terms.push(MapTerm {
                    left: dn.clone(),
                    right: dm.adjoint(),
                    charges: Some((*n, *m)),
                });
            }
        }
    }
    Ok(PulseMap { dim: basis.dim(), terms })
}

/// Harmonic component divided by `pathway_scale^{|k|}` (leading-order pathway amplitude).
pub fn normalized_component(event: &PulseEvent, k: i32, basis: &StateBasis) -> Result<PulseMap> {
    let scale = event.pathway_scale();
    if scale == 0.0 {
        return Err(Error::invalid("alpha", "normalized components need a nonzero amplitude"));
    }
    Ok(pulse_harmonic_component(event, k, basis)?.scaled(scale.powi(-k.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phonon_basis() -> StateBasis {
        StateBasis::phonon(2, 3).unwrap()
    }

    fn random_operator(d: usize, seed: u64) -> OperatorMatrix {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        OperatorMatrix::new(CMatrix::from_fn(d, d, |_, _| C64::new(next(), next()))).unwrap()
    }

    fn sandwich(l: &OperatorMatrix, r: &OperatorMatrix, rho: &OperatorMatrix) -> OperatorMatrix {
        l.mul(rho).mul(r)
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let b = phonon_basis();
        let rho = random_operator(b.dim(), 1);
        for model in [PulseModel::Linearized, PulseModel::Exact] {
            let ev = PulseEvent::phonon(0, 0.0, model).unwrap().with_phase(0.7);
            assert!(apply_pulse(&rho, &ev, &b).unwrap().max_abs_diff(&rho) < 1e-15);
        }
    }

    #[test]
    fn linearized_components_match_closed_forms() {
        let b = phonon_basis();
        let alpha = 0.13;
        let ev = PulseEvent::phonon(1, alpha, PulseModel::Linearized).unwrap();
        let up = ladder_operator(&b, 1, true).unwrap();
        let dn = ladder_operator(&b, 1, false).unwrap();
        let rho = random_operator(b.dim(), 7);
        let a = C64::new(alpha, 0.0);
        let a2 = C64::new(alpha * alpha, 0.0);
        let expected = [
            (-2, sandwich(&dn, &dn, &rho).scale(-a2)),
            (-1, rho.mul(&dn).sub(&dn.mul(&rho)).scale(a)),
            (0, rho.add(&sandwich(&up, &dn, &rho).add(&sandwich(&dn, &up, &rho)).scale(a2))),
            (1, up.mul(&rho).sub(&rho.mul(&up)).scale(a)),
            (2, sandwich(&up, &up, &rho).scale(-a2)),
        ];
        for (k, want) in expected {
            let got = pulse_harmonic_component(&ev, k, &b).unwrap().apply(&rho).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-14, "k={k}");
        }
        assert!(pulse_harmonic_component(&ev, 3, &b).is_err());
    }

    #[test]
    fn components_reassemble_the_pulse() {
        let phonon = phonon_basis();
        let spin = StateBasis::spin(2).unwrap();
        let cases = [
            (PulseEvent::phonon(0, 0.2, PulseModel::Linearized).unwrap(), &phonon),
            (PulseEvent::phonon(1, 0.35, PulseModel::Exact).unwrap(), &phonon),
            (PulseEvent::spin(1, 0.3).unwrap(), &spin),
        ];
        for (ev, basis) in cases {
            let rho = random_operator(basis.dim(), 3);
            let phi = 1.234;
            let direct = apply_pulse(&rho, &ev.with_phase(phi), basis).unwrap();
            let range = ev.harmonic_range(basis) as i32;
            let mut sum = OperatorMatrix::zeros(basis.dim());
            for k in -range..=range {
                let c = pulse_harmonic_component(&ev, k, basis).unwrap().apply(&rho).unwrap();
                sum = sum.add(&c.scale(C64::from_polar(1.0, k as f64 * phi)));
            }
            assert!(sum.max_abs_diff(&direct) < 1e-13);
        }
    }

    #[test]
    fn ground_state_pulse_expansion() {
        let b = phonon_basis();
        let alpha = 0.1;
        let phi = 0.4;
        let ev = PulseEvent::phonon(0, alpha, PulseModel::Linearized).unwrap().with_phase(phi);
        let rho = OperatorMatrix::outer(b.dim(), 0, 0);
        let up = ladder_operator(&b, 0, true).unwrap();
        let dn = ladder_operator(&b, 0, false).unwrap();
        let e = C64::from_polar(alpha, phi);
        let want = rho
            .add(&up.mul(&rho).scale(e))
            .add(&rho.mul(&dn).scale(e.conj()))
            .add(&sandwich(&up, &dn, &rho).scale(C64::new(alpha * alpha, 0.0)));
        let got = apply_pulse(&rho, &ev, &b).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-15);
        // trace defect is second order and not renormalized
        assert!((got.trace().re - (1.0 + alpha * alpha)).abs() < 1e-15);
    }

    #[test]
    fn k_plus_on_ground_creates_single_excitation() {
        let b = phonon_basis();
        let ev = PulseEvent::phonon(0, 0.2, PulseModel::Linearized).unwrap();
        let rho = OperatorMatrix::outer(b.dim(), 0, 0);
        let up = ladder_operator(&b, 0, true).unwrap();
        let got = pulse_harmonic_component(&ev, 1, &b).unwrap().apply(&rho).unwrap();
        assert!(got.max_abs_diff(&up.mul(&rho).scale(C64::new(0.2, 0.0))) < 1e-15);
        // and k = -1 on that: alpha (X a - a X) with X = a^† rho
        let x = up.mul(&rho);
        let dn = ladder_operator(&b, 0, false).unwrap();
        let got = pulse_harmonic_component(&ev, -1, &b).unwrap().apply(&x).unwrap();
        let want = x.mul(&dn).sub(&dn.mul(&x)).scale(C64::new(0.2, 0.0));
        assert!(got.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn spin_pi_pulse_flips() {
        let b = StateBasis::spin(1).unwrap();
        let ev = PulseEvent::spin(0, 1.0).unwrap();
        let out = apply_pulse(&OperatorMatrix::outer(2, 0, 0), &ev, &b).unwrap();
        let one = b.index_of(&[1]).unwrap();
        assert!(out.max_abs_diff(&OperatorMatrix::outer(2, one, one)) < 1e-15);
    }

    #[test]
    fn spin_pulse_is_unitary_and_validated() {
        let b = StateBasis::spin(2).unwrap();
        let u = PulseEvent::spin(0, 0.6).unwrap().with_phase(2.1).unitary(&b).unwrap();
        assert!(u.adjoint().mul(&u).max_abs_diff(&b.identity()) < 1e-15);
        assert!(PulseEvent::spin_with(0, 0.5, 0.5).is_err());
        assert!(PulseEvent::spin(0, 1.5).is_err());
    }

    #[test]
    fn dual_map_is_the_adjoint() {
        let b = phonon_basis();
        let ev = PulseEvent::phonon(1, 0.2, PulseModel::Exact).unwrap().with_phase(0.3);
        let map = pulse_map(&ev, &b).unwrap();
        let comp = pulse_harmonic_component(&ev, -1, &b).unwrap();
        let rho = random_operator(b.dim(), 11);
        let a = random_operator(b.dim(), 12);
        for m in [map, comp] {
            let lhs = a.trace_product(&m.apply(&rho).unwrap());
            let rhs = m.apply_dual(&a).unwrap().trace_product(&rho);
            assert!((lhs - rhs).norm() < 1e-13);
            let sup = m.to_superoperator();
            let via = crate::operators::apply_superoperator(&sup, &rho).unwrap();
            assert!(via.max_abs_diff(&m.apply(&rho).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn side_selection_partitions_single_sided_terms() {
        let b = phonon_basis();
        let ev = PulseEvent::phonon(0, 0.1, PulseModel::Linearized).unwrap();
        let rho = random_operator(b.dim(), 5);
        for k in [-1, 1] {
            let full = pulse_harmonic_component(&ev, k, &b).unwrap();
            let ket = full.select_side(Side::Ket).unwrap().apply(&rho).unwrap();
            let bra = full.select_side(Side::Bra).unwrap().apply(&rho).unwrap();
            assert!(ket.add(&bra).max_abs_diff(&full.apply(&rho).unwrap()) < 1e-15);
        }
        assert!(pulse_map(&ev, &b).unwrap().select_side(Side::Ket).is_err());
    }

    #[test]
    fn wrong_basis_kind_is_rejected() {
        let spin = StateBasis::spin(2).unwrap();
        let ev = PulseEvent::phonon(0, 0.1, PulseModel::Linearized).unwrap();
        assert!(pulse_map(&ev, &spin).is_err());
        let ev = PulseEvent::phonon(5, 0.1, PulseModel::Linearized).unwrap();
        assert!(pulse_map(&ev, &phonon_basis()).is_err());
    }
}

//! Direct evaluation of selected pathways as chains of normalized harmonic components.

use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::error::{Error, Result};
use crate::operators::{OperatorMatrix, StateBasis, C64};

use super::pulse::{normalized_component, PulseAmplitude, PulseEvent, PulseMap, PulseModel, Side};
use super::sequence::{evaluate_chain, readout_observable, ReadoutKind};

pub const SQC_SIGNATURE: [i32; 2] = [1, -1];
pub const DQC_SIGNATURE: [i32; 4] = [1, 1, -1, -1];

/// The three double-quantum diagrams, told apart by the side each interaction acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DqcVariant {
    /// `|f><0| -> |e><0| -> |e><e|`
    Dqc1,
    /// `|f><0| -> |f><e| -> |f><f|`
    Dqc2,
    /// `|f><0| -> |f><e| -> |e><e|`
    Dqc3,
    Sum,
}

impl DqcVariant {
    pub fn from_index(v: u8) -> Result<Self> {
        match v {
            1 => Ok(DqcVariant::Dqc1),
            2 => Ok(DqcVariant::Dqc2),
            3 => Ok(DqcVariant::Dqc3),
            _ => Err(Error::invalid("variant", format!("expected 1, 2 or 3, got {v}"))),
        }
    }

    pub fn sides(self) -> Option<[Side; 4]> {
        use Side::{Bra, Ket};
        match self {
            DqcVariant::Dqc1 => Some([Ket, Ket, Ket, Bra]),
            DqcVariant::Dqc2 => Some([Ket, Ket, Bra, Bra]),
            DqcVariant::Dqc3 => Some([Ket, Ket, Bra, Ket]),
            DqcVariant::Sum => None,
        }
    }
}

/// Linearized phonon event with unit amplitude; its `±1` components are the
/// normalized pathway interactions.
pub(crate) fn unit_phonon_event(site: usize) -> PulseEvent {
    PulseEvent {
        site,
        phase: 0.0,
        amplitude: PulseAmplitude::Phonon {
            alpha: 1.0,
            model: PulseModel::Linearized,
        },
    }
}

/// Normalized component chain for `signature`, optionally restricted to one side per pulse.
pub fn pathway_maps(
    events: &[PulseEvent],
    signature: &[i32],
    sides: Option<&[Side]>,
    basis: &StateBasis,
) -> Result<Vec<PulseMap>> {
    if events.len() != signature.len() {
        return Err(Error::DimensionMismatch {
            expected: events.len(),
            found: signature.len(),
        });
    }
    if let Some(s) = sides {
        if s.len() != events.len() {
            return Err(Error::DimensionMismatch {
                expected: events.len(),
                found: s.len(),
            });
        }
    }
    events
        .iter()
        .zip(signature)
        .enumerate()
        .map(|(p, (ev, &k))| {
            let map = normalized_component(ev, k, basis)?;
            match sides {
                Some(s) => map.select_side(s[p]),
                None => Ok(map),
            }
        })
        .collect()
}

fn require_ground(rho0: &OperatorMatrix) -> Result<()> {
    if rho0.max_abs_diff(&OperatorMatrix::outer(rho0.dim(), 0, 0)) > 1e-12 {
        return Err(Error::invalid("rho0", "direct pathways assume the ground state"));
    }
    Ok(())
}

/// `Tr{A_j G(t2)[G(t1)[a_{i1}^† rho0] a_{i2}]}`.
#[allow(clippy::too_many_arguments)]
pub fn direct_sqc(
    i1: usize,
    i2: usize,
    j: usize,
    t1: f64,
    t2: f64,
    prop: &Propagator,
    rho0: &OperatorMatrix,
    basis: &StateBasis,
) -> Result<C64> {
    require_ground(rho0)?;
    let events = [unit_phonon_event(i1), unit_phonon_event(i2)];
    let maps = pathway_maps(&events, &SQC_SIGNATURE, None, basis)?;
    let a = readout_observable(basis, j, ReadoutKind::PhononA)?;
    evaluate_chain(&maps, &[t1, t2], prop, rho0, &a)
}

/// Double-quantum pathway signal; `times` are the delays after each of the four pulses.
pub fn direct_dqc(
    variant: DqcVariant,
    sites: [usize; 4],
    readout_site: usize,
    times: [f64; 4],
    prop: &Propagator,
    rho0: &OperatorMatrix,
    basis: &StateBasis,
) -> Result<C64> {
    require_ground(rho0)?;
    let events = sites.map(unit_phonon_event);
    let sides = variant.sides();
    let maps = pathway_maps(&events, &DQC_SIGNATURE, sides.as_ref().map(|s| &s[..]), basis)?;
    let a = readout_observable(basis, readout_site, ReadoutKind::PhononA)?;
    evaluate_chain(&maps, &times, prop, rho0, &a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{build_hamiltonian, ChainModel};
    use crate::dynamics::{make_propagator, ChannelKind, NoiseSpec};

    fn setup(n: usize, cap: usize, u: f64, noise: NoiseSpec) -> (StateBasis, Propagator) {
        let model = ChainModel::for_chain(n, 0.1, u).unwrap();
        let basis = StateBasis::phonon(n, cap).unwrap();
        let h = build_hamiltonian(&model, &basis).unwrap();
        let prop = make_propagator(&h, &noise, &basis).unwrap();
        (basis, prop)
    }

    #[test]
    fn sqc_at_zero_delay_is_one() {
        let (b, prop) = setup(5, 2, 0.0, NoiseSpec::none());
        let rho0 = OperatorMatrix::outer(b.dim(), 0, 0);
        let s = direct_sqc(2, 2, 2, 0.0, 0.0, &prop, &rho0, &b).unwrap();
        assert!((s - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn unitary_sqc_is_bounded() {
        let (b, prop) = setup(5, 2, 0.0, NoiseSpec::none());
        let rho0 = OperatorMatrix::outer(b.dim(), 0, 0);
        for i in 0..8 {
            for k in 0..8 {
                let s = direct_sqc(0, 0, 2, 13.0 * i as f64, 29.0 * k as f64, &prop, &rho0, &b).unwrap();
                assert!(s.norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn sqc_requires_ground_state() {
        let (b, prop) = setup(2, 2, 0.0, NoiseSpec::none());
        let rho = OperatorMatrix::outer(b.dim(), 1, 1);
        assert!(direct_sqc(0, 0, 0, 0.0, 0.0, &prop, &rho, &b).is_err());
    }

    #[test]
    fn dqc_variants_sum_to_full_chain() {
        let noise = NoiseSpec::single(ChannelKind::PhononLocalDephasing, vec![0, 1], 0.01);
        let (b, prop) = setup(2, 2, -0.025, noise);
        let rho0 = OperatorMatrix::outer(b.dim(), 0, 0);
        let times = [7.0, 1.5, 12.0, 0.5];
        let parts: Vec<C64> = [DqcVariant::Dqc1, DqcVariant::Dqc2, DqcVariant::Dqc3]
            .iter()
            .map(|&v| direct_dqc(v, [0; 4], 0, times, &prop, &rho0, &b).unwrap())
            .collect();
        let total = direct_dqc(DqcVariant::Sum, [0; 4], 0, times, &prop, &rho0, &b).unwrap();
        let sum: C64 = parts.iter().sum();
        assert!((sum - total).norm() < 1e-14 * total.norm().max(1.0));
        assert!(parts.iter().all(|p| p.norm() > 1e-3));
    }

    #[test]
    fn dqc2_at_zero_delays_reads_double_occupancy() {
        // a^† a^† |0><0| a a = 2 |2><2| on one site
        let (b, prop) = setup(2, 2, 0.0, NoiseSpec::none());
        let rho0 = OperatorMatrix::outer(b.dim(), 0, 0);
        let s = direct_dqc(DqcVariant::Dqc2, [0; 4], 0, [0.0; 4], &prop, &rho0, &b).unwrap();
        let w2 = super::super::sequence::fluorescence_weight(2);
        assert!((s - C64::new(2.0 * w2, 0.0)).norm() < 1e-13, "{s}");
    }

    #[test]
    fn variant_index_validation() {
        assert_eq!(DqcVariant::from_index(2).unwrap(), DqcVariant::Dqc2);
        assert!(DqcVariant::from_index(4).is_err());
    }
}

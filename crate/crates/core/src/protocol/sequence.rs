use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::dynamics::Propagator;
use crate::error::{Error, Result};
use crate::operators::{spin_operator, BasisKind, CMatrix, CVector, OperatorMatrix, SpinComponent, StateBasis, C64};

use super::pulse::{pulse_map, PulseEvent, PulseMap};

/// Imaginary parts of measured signals above this indicate a non-Hermitian chain.
pub const IMAGINARY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReadoutKind {
    /// `A = sum_n sin^2(sqrt(n) pi / 2) |n><n|` on the readout site.
    #[serde(rename = "phonon_A")]
    PhononA,
    #[serde(rename = "spin_z")]
    SpinZ,
}

impl ReadoutKind {
    pub fn basis_kind(self) -> BasisKind {
        match self {
            ReadoutKind::PhononA => BasisKind::Phonon,
            ReadoutKind::SpinZ => BasisKind::Spin,
        }
    }
}

/// `sin^2(sqrt(n) pi / 2)`.
pub fn fluorescence_weight(n: u8) -> f64 {
    let s = ((n as f64).sqrt() * FRAC_PI_2).sin();
    s * s
}

pub fn readout_observable(basis: &StateBasis, site: usize, kind: ReadoutKind) -> Result<OperatorMatrix> {
    basis.require_kind(kind.basis_kind())?;
    basis.check_site(site)?;
    match kind {
        ReadoutKind::PhononA => {
            let diag = CVector::from_iterator(
                basis.dim(),
                basis.states().iter().map(|occ| C64::new(fluorescence_weight(occ[site]), 0.0)),
            );
            OperatorMatrix::new(CMatrix::from_diagonal(&diag))
        }
        ReadoutKind::SpinZ => spin_operator(basis, site, SpinComponent::Z),
    }
}

/// Pulses with the delay that follows each of them, and the final readout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub events: Vec<PulseEvent>,
    pub delays: Vec<f64>,
    pub readout_site: usize,
    pub readout_kind: ReadoutKind,
}

impl PulseSequence {
    pub fn new(events: Vec<PulseEvent>, delays: Vec<f64>, readout_site: usize, readout_kind: ReadoutKind) -> Result<Self> {
        let seq = PulseSequence {
            events,
            delays,
            readout_site,
            readout_kind,
        };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.events.len() != self.delays.len() {
            return Err(Error::DimensionMismatch {
                expected: self.events.len(),
                found: self.delays.len(),
            });
        }
        if let Some(t) = self.delays.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
            return Err(Error::invalid("delays", format!("must be finite and non-negative, got {t}")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn observable(&self, basis: &StateBasis) -> Result<OperatorMatrix> {
        readout_observable(basis, self.readout_site, self.readout_kind)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequenceSignal {
    pub value: f64,
    /// Imaginary part of `Tr{A rho}`; zero up to rounding.
    pub imaginary: f64,
}

/// `Tr{A G(t_m) M_m ... G(t_1) M_1 [rho0]}` for an arbitrary chain of maps.
pub(crate) fn evaluate_chain(
    maps: &[PulseMap],
    delays: &[f64],
    prop: &Propagator,
    rho0: &OperatorMatrix,
    observable: &OperatorMatrix,
) -> Result<C64> {
    let mut rho = rho0.clone();
    for (map, &t) in maps.iter().zip(delays) {
        rho = map.apply(&rho)?;
        rho = prop.evolve(t, &rho)?;
    }
    if observable.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: observable.dim(),
        });
    }
    Ok(observable.trace_product(&rho))
}

/// Full signal of a pulse sequence. Pulse `p` acts with phase
/// `events[p].phase + phases[p]`.
pub fn run_sequence(
    rho0: &OperatorMatrix,
    seq: &PulseSequence,
    prop: &Propagator,
    phases: &[f64],
    basis: &StateBasis,
) -> Result<SequenceSignal> {
    seq.validate()?;
    if phases.len() != seq.len() {
        return Err(Error::DimensionMismatch {
            expected: seq.len(),
            found: phases.len(),
        });
    }
    if rho0.dim() != basis.dim() || prop.dim() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: if rho0.dim() != basis.dim() { rho0.dim() } else { prop.dim() },
        });
    }
    let maps = seq
        .events
        .iter()
        .zip(phases)
        .map(|(ev, &phi)| pulse_map(&ev.with_phase(ev.phase + phi), basis))
        .collect::<Result<Vec<_>>>()?;
    let s = evaluate_chain(&maps, &seq.delays, prop, rho0, &seq.observable(basis)?)?;
    Ok(SequenceSignal {
        value: s.re,
        imaginary: s.im,
    })
}

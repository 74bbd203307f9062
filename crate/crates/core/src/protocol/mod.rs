//! Impulsive pulse sequences, readout, phase cycling and pathway extraction.

pub mod pathways;
pub mod phase_cycle;
pub mod pulse;
pub mod scan;
pub mod sequence;

pub use pathways::{direct_dqc, direct_sqc, pathway_maps, DqcVariant, DQC_SIGNATURE, SQC_SIGNATURE};
pub use phase_cycle::{phase_cycle_extract, PhaseCycleScheme};
pub use pulse::{
    apply_pulse, normalized_component, pulse_harmonic_component, pulse_map, PulseAmplitude, PulseEvent, PulseMap,
    PulseModel, Side,
};
pub use scan::{scan_2d, Evaluation, Experiment, GridSpec, PathwaySignal};
pub use sequence::{readout_observable, run_sequence, PulseSequence, ReadoutKind, SequenceSignal};

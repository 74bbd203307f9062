//! Simulation and analysis of nonlinear, phase-cycled spectroscopy on
//! trapped-ion chains: phonon and spin models, Lindblad dynamics, impulsive
//! pulse sequences, pathway extraction and 2D spectra.

pub mod chain;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod operators;
pub mod protocol;
pub mod spectra;
pub mod spins;

pub use error::{Error, Result};

//! Two-dimensional delay scans.
//!
//! For scanned delays `a < b`, states are propagated forward through pulses
//! `0..=b` on the `t_a` grid and observables backward (Heisenberg picture)
//! through pulses `b+1..` on the `t_b` grid; the signal grid is the matrix of
//! pairwise traces `Tr{A_j rho_i}`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Propagator, StepMap};
use crate::error::{Error, Result};
use crate::operators::{CMatrix, CVector, OperatorMatrix, StateBasis, C64};
use crate::spectra::{SignalGrid2D, TimeAxis};

use super::phase_cycle::PhaseCycleScheme;
use super::pathways::pathway_maps;
use super::pulse::{pulse_map, PulseAmplitude, PulseMap, PulseModel, Side};
use super::sequence::{PulseSequence, IMAGINARY_TOLERANCE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_a: usize,
    pub dt_a: f64,
    pub n_b: usize,
    pub dt_b: f64,
}

impl GridSpec {
    pub fn square(n: usize, dt: f64) -> Self {
        GridSpec {
            n_a: n,
            dt_a: dt,
            n_b: n,
            dt_b: dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (n, dt, name) in [(self.n_a, self.dt_a, "a"), (self.n_b, self.dt_b, "b")] {
            if n == 0 {
                return Err(Error::invalid(format!("grid.n_{name}"), "must be at least 1"));
            }
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::invalid(format!("grid.dt_{name}"), format!("must be positive, got {dt}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", deny_unknown_fields)]
pub enum Evaluation {
    /// Chain of normalized harmonic components; `sides` restricts each
    /// interaction to the ket or bra.
    Direct { sides: Option<Vec<Side>> },
    /// Full pulse maps on a phase grid, followed by inverse-DFT extraction.
    PhaseCycled { steps: usize, fixed_last_phase: bool },
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub basis: StateBasis,
    pub initial: OperatorMatrix,
    /// Delays at the scanned positions are ignored.
    pub sequence: PulseSequence,
    pub scanned: (usize, usize),
    pub signature: Vec<i32>,
    pub evaluation: Evaluation,
}

#[derive(Clone, Debug)]
pub struct PathwaySignal {
    pub grid: SignalGrid2D,
    pub signature: Vec<i32>,
    /// Extracted values were divided by this leading-order amplitude
    /// (`prod_p scale_p^{|s_p|}`; 1 for direct evaluation).
    pub normalization: f64,
    pub phase_points: usize,
    /// Largest imaginary part of any raw phase-cycled sample.
    pub max_raw_imaginary: f64,
}

struct Steps {
    fixed: Vec<Option<StepMap>>,
    a: StepMap,
    b: StepMap,
}

fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

fn step_forward(s: &StepMap, m: &CMatrix) -> CMatrix {
    let d = m.nrows();
    CMatrix::from_column_slice(d, d, s.apply_vec(&vec_of(m)).as_slice())
}

/// `G^‡[Y]`, via `vec(G^‡[Y]^T) = G^T vec(Y^T)`.
fn step_dual(s: &StepMap, y: &CMatrix) -> CMatrix {
    let d = y.nrows();
    let w = s.apply_transpose_vec(&vec_of(&y.transpose()));
    CMatrix::from_column_slice(d, d, w.as_slice()).transpose()
}

/// Complex grid `Tr{A ...}` for one chain of maps.
fn chain_grid(
    maps: &[PulseMap],
    steps: &Steps,
    (a, b): (usize, usize),
    grid: &GridSpec,
    rho0: &CMatrix,
    observable: &CMatrix,
) -> DMatrix<C64> {
    let m = maps.len();
    let d = rho0.nrows();

    let mut x = rho0.clone();
    for k in 0..=a {
        x = maps[k].apply_matrix(&x);
        if k < a {
            if let Some(s) = &steps.fixed[k] {
                x = step_forward(s, &x);
            }
        }
    }
    let mut starts = Vec::with_capacity(grid.n_a);
    for i in 0..grid.n_a {
        if i > 0 {
            x = step_forward(&steps.a, &x);
        }
        starts.push(x.clone());
    }
    let rows: Vec<CVector> = starts
        .into_par_iter()
        .map(|mut x| {
            for k in (a + 1)..=b {
                x = maps[k].apply_matrix(&x);
                if k < b {
                    if let Some(s) = &steps.fixed[k] {
                        x = step_forward(s, &x);
                    }
                }
            }
            vec_of(&x)
        })
        .collect();
    let forward = DMatrix::from_fn(grid.n_a, d * d, |i, r| rows[i][r]);

    let mut y = observable.clone();
    for k in ((b + 1)..m).rev() {
        if let Some(s) = &steps.fixed[k] {
            y = step_dual(s, &y);
        }
        y = maps[k].apply_dual_matrix(&y);
    }
    let mut w = vec_of(&y.transpose());
    let mut dual = DMatrix::<C64>::zeros(d * d, grid.n_b);
    for j in 0..grid.n_b {
        if j > 0 {
            w = steps.b.apply_transpose_vec(&w);
        }
        dual.set_column(j, &w);
    }
    forward * dual
}

fn check_experiment(exp: &Experiment, prop: &Propagator) -> Result<()> {
    exp.sequence.validate()?;
    let m = exp.sequence.len();
    let (a, b) = exp.scanned;
    if !(a < b && b < m) {
        return Err(Error::invalid(
            "scanned",
            format!("need two scanned delays a < b < {m}, got ({a}, {b})"),
        ));
    }
    if exp.signature.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: exp.signature.len(),
        });
    }
    let d = exp.basis.dim();
    for found in [exp.initial.dim(), prop.dim()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    for ev in &exp.sequence.events {
        if let PulseAmplitude::Phonon {
            model: PulseModel::Exact, ..
        } = ev.amplitude
        {
            let weight = exp.signature.iter().filter(|&&s| s > 0).count();
            if exp.basis.excitation_cap() < weight + 2 {
                return Err(Error::invalid(
                    "excitation_cap",
                    format!("exact pulses need a cap of at least {} for this signature", weight + 2),
                ));
            }
        }
    }
    Ok(())
}

/// Fills the `(t_a, t_b)` grid of the experiment's pathway signal.
/// Values are deterministic regardless of the worker count.
pub fn scan_2d(exp: &Experiment, prop: &Propagator, grid: &GridSpec) -> Result<PathwaySignal> {
    check_experiment(exp, prop)?;
    grid.validate()?;
    let (a, b) = exp.scanned;
    let seq = &exp.sequence;
    let fixed = seq
        .delays
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            if k == a || k == b || t == 0.0 {
                Ok(None)
            } else {
                prop.step(t).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = Steps {
        fixed,
        a: prop.step(grid.dt_a)?,
        b: prop.step(grid.dt_b)?,
    };
    let observable = seq.observable(&exp.basis)?.into_matrix();
    let rho0 = exp.initial.matrix();

    let (values, normalization, phase_points, max_raw_imaginary) = match &exp.evaluation {
        Evaluation::Direct { sides } => {
            let maps = pathway_maps(&seq.events, &exp.signature, sides.as_deref(), &exp.basis)?;
            (chain_grid(&maps, &steps, (a, b), grid, rho0, &observable), 1.0, 1, 0.0)
        }
        Evaluation::PhaseCycled { steps: l, fixed_last_phase } => {
            let band = seq.events.iter().map(|e| e.cycling_band()).max().unwrap_or(1);
            let scheme = PhaseCycleScheme::new(exp.signature.clone(), *l, *fixed_last_phase, band)?;
            let points = scheme.grid_points();
            let raw: Vec<DMatrix<C64>> = points
                .par_iter()
                .map(|p| {
                    let phases = scheme.phases(p);
                    let maps = seq
                        .events
                        .iter()
                        .zip(&phases)
                        .map(|(ev, &phi)| pulse_map(&ev.with_phase(ev.phase + phi), &exp.basis))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(chain_grid(&maps, &steps, (a, b), grid, rho0, &observable))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut acc = DMatrix::<C64>::zeros(grid.n_a, grid.n_b);
            let mut max_im = 0.0f64;
            for (p, s) in points.iter().zip(&raw) {
                let w = scheme.weight(p);
                for (z, r) in acc.iter_mut().zip(s.iter()) {
                    max_im = max_im.max(r.im.abs());
                    *z += w * r.re;
                }
            }
            if max_im > IMAGINARY_TOLERANCE {
                log::warn!("raw phase-cycled samples carry imaginary parts up to {max_im:.3e}");
            }
            let norm: f64 = seq
                .events
                .iter()
                .zip(&exp.signature)
                .map(|(ev, &s)| ev.pathway_scale().powi(s.abs()))
                .product();
            if norm == 0.0 {
                return Err(Error::invalid("alpha", "pathway normalization vanishes"));
            }
            acc.iter_mut().for_each(|z| *z /= norm);
            (acc, norm, points.len(), max_im)
        }
    };
    let grid2d = SignalGrid2D::new(
        TimeAxis::new(grid.n_a, grid.dt_a, format!("t{}", a + 1)),
        TimeAxis::new(grid.n_b, grid.dt_b, format!("t{}", b + 1)),
        values,
    )?;
    Ok(PathwaySignal {
        grid: grid2d,
        signature: exp.signature.clone(),
        normalization,
        phase_points,
        max_raw_imaginary,
    })
}

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::C64;

/// Phase grid and target signature for pathway extraction by inverse DFT.
///
/// Cycled pulse `p` takes phases `2 pi j / L`, `j = 0..L`. With
/// `fixed_last_phase` the last pulse stays at phase 0 and is not cycled, which
/// is exact when only zero-net-signature pathways survive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCycleScheme {
    signature: Vec<i32>,
    steps: usize,
    fixed_last_phase: bool,
}

impl PhaseCycleScheme {
    /// `k_max` is the harmonic band limit of the pulse model; `steps` must be odd
    /// and at least `2 k_max + 1`.
    pub fn new(signature: Vec<i32>, steps: usize, fixed_last_phase: bool, k_max: usize) -> Result<Self> {
        if signature.is_empty() {
            return Err(Error::invalid("signature", "must have one entry per pulse"));
        }
        if steps % 2 == 0 || steps < 2 * k_max + 1 {
            return Err(Error::invalid(
                "steps_per_pulse",
                format!("must be odd and at least {} for band limit {k_max}, got {steps}", 2 * k_max + 1),
            ));
        }
        if let Some(s) = signature.iter().find(|s| s.unsigned_abs() as usize > k_max) {
            return Err(Error::invalid("signature", format!("entry {s} exceeds band limit {k_max}")));
        }
        if fixed_last_phase && signature.iter().sum::<i32>() != 0 {
            return Err(Error::invalid(
                "fixed_last_phase",
                "a fixed last phase requires a zero-net signature",
            ));
        }
        Ok(PhaseCycleScheme {
            signature,
            steps,
            fixed_last_phase,
        })
    }

    pub fn signature(&self) -> &[i32] {
        &self.signature
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn fixed_last_phase(&self) -> bool {
        self.fixed_last_phase
    }

    pub fn n_pulses(&self) -> usize {
        self.signature.len()
    }

    pub fn n_cycled(&self) -> usize {
        self.signature.len() - usize::from(self.fixed_last_phase)
    }

    pub fn n_points(&self) -> usize {
        self.steps.pow(self.n_cycled() as u32)
    }

    /// All grid points in lexicographic order; each entry is the step index of a cycled pulse.
    pub fn grid_points(&self) -> Vec<Vec<usize>> {
        let n = self.n_cycled();
        (0..self.n_points())
            .map(|mut flat| {
                let mut point = vec![0; n];
                for slot in point.iter_mut().rev() {
                    *slot = flat % self.steps;
                    flat /= self.steps;
                }
                point
            })
            .collect()
    }

    /// Phase of every pulse at a grid point (0 for an uncycled last pulse).
    pub fn phases(&self, point: &[usize]) -> Vec<f64> {
        let mut out: Vec<f64> = point.iter().map(|&j| TAU * j as f64 / self.steps as f64).collect();
        out.resize(self.n_pulses(), 0.0);
        out
    }

    /// DFT weight `e^{-i s.phi} / L^n` of a grid point.
    pub fn weight(&self, point: &[usize]) -> C64 {
        let phases = self.phases(point);
        let arg: f64 = self
            .signature
            .iter()
            .zip(&phases)
            .take(self.n_cycled())
            .map(|(&s, &phi)| s as f64 * phi)
            .sum();
        C64::from_polar(1.0 / self.n_points() as f64, -arg)
    }
}

/// Inverse-DFT coefficient of the scheme's signature from samples keyed by grid point.
pub fn phase_cycle_extract(samples: &BTreeMap<Vec<usize>, C64>, scheme: &PhaseCycleScheme) -> Result<C64> {
    let points = scheme.grid_points();
    let mut acc = C64::new(0.0, 0.0);
    let mut found = 0;
    for p in &points {
        if let Some(&s) = samples.get(p) {
            acc += s * scheme.weight(p);
            found += 1;
        }
    }
    if found != points.len() {
        return Err(Error::IncompletePhaseGrid {
            expected: points.len(),
            found,
        });
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_1d(f: impl Fn(f64) -> C64, steps: usize) -> BTreeMap<Vec<usize>, C64> {
        (0..steps).map(|j| (vec![j], f(TAU * j as f64 / steps as f64))).collect()
    }

    #[test]
    fn single_harmonic_is_isolated() {
        let samples = sample_1d(|phi| C64::from_polar(1.0, phi), 3);
        for (k, want) in [(1, 1.0), (0, 0.0), (-1, 0.0)] {
            let s = PhaseCycleScheme::new(vec![k], 3, false, 1).unwrap();
            let got = phase_cycle_extract(&samples, &s).unwrap();
            assert!((got - C64::new(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn offset_plus_negative_harmonic() {
        let samples = sample_1d(|phi| C64::new(2.0, 0.0) + C64::from_polar(3.0, -phi), 3);
        let s = PhaseCycleScheme::new(vec![-1], 3, false, 1).unwrap();
        assert!((phase_cycle_extract(&samples, &s).unwrap() - C64::new(3.0, 0.0)).norm() < 1e-14);
        let s0 = PhaseCycleScheme::new(vec![0], 3, false, 1).unwrap();
        assert!((phase_cycle_extract(&samples, &s0).unwrap() - C64::new(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn multidimensional_grid_and_fixed_last_phase() {
        let f = |p: &[f64]| C64::from_polar(1.5, p[0] - p[1]) + C64::from_polar(0.25, p[0] + p[1]);
        let full = PhaseCycleScheme::new(vec![1, -1], 3, false, 1).unwrap();
        assert_eq!(full.n_points(), 9);
        let samples: BTreeMap<_, _> = full.grid_points().into_iter().map(|p| (p.clone(), f(&full.phases(&p)))).collect();
        assert!((phase_cycle_extract(&samples, &full).unwrap() - C64::new(1.5, 0.0)).norm() < 1e-14);
        let plus = PhaseCycleScheme::new(vec![1, 1], 3, false, 1).unwrap();
        assert!((phase_cycle_extract(&samples, &plus).unwrap() - C64::new(0.25, 0.0)).norm() < 1e-14);

        // fixed last phase folds every last-pulse harmonic onto the cycled ones
        let fixed = PhaseCycleScheme::new(vec![1, -1], 3, true, 1).unwrap();
        assert_eq!(fixed.grid_points(), vec![vec![0], vec![1], vec![2]]);
        let samples: BTreeMap<_, _> = fixed.grid_points().into_iter().map(|p| (p.clone(), f(&fixed.phases(&p)))).collect();
        assert!((phase_cycle_extract(&samples, &fixed).unwrap() - C64::new(1.75, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn incomplete_grid_is_an_error() {
        let s = PhaseCycleScheme::new(vec![1, -1], 3, false, 1).unwrap();
        let mut samples: BTreeMap<_, _> = s.grid_points().into_iter().map(|p| (p, C64::new(1.0, 0.0))).collect();
        samples.remove(&vec![2, 1]);
        assert!(matches!(
            phase_cycle_extract(&samples, &s),
            Err(Error::IncompletePhaseGrid { expected: 9, found: 8 })
        ));
    }

    #[test]
    fn scheme_validation() {
        assert!(PhaseCycleScheme::new(vec![1, -1], 4, false, 1).is_err());
        assert!(PhaseCycleScheme::new(vec![1, -1], 3, false, 2).is_err());
        assert!(PhaseCycleScheme::new(vec![2, -1], 3, false, 1).is_err());
        assert!(PhaseCycleScheme::new(vec![1, 1], 3, true, 1).is_err());
        assert!(PhaseCycleScheme::new(vec![1, 1, -1, -1], 5, true, 2).is_ok());
    }
}

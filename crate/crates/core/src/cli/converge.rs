//! Convergence checks for phonon pathway experiments.
//!
//! The resolved config is rerun three times with one knob changed:
//! `excitation_cap + 1`, `alpha / 2`, and twice the samples over the same
//! `t_max`. The first two compare normalized signal grids; the third compares
//! peak lists, because a finer `dt` moves the Nyquist band and therefore the
//! aliasing of the original spectrum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::{find_peaks, Peak, Spectrum2D};

use super::config::ExperimentConfig;
use super::run::{config_spectrum, phonon_scan};

/// `alpha / 2` may change the normalized signal by at most this fraction.
pub const ALPHA_TOLERANCE: f64 = 0.01;
/// The cap check tolerates `CAP_TOLERANCE_FACTOR * alpha^2`.
pub const CAP_TOLERANCE_FACTOR: f64 = 5.0;
/// Peaks of the refined grid must lie within this many original bins.
pub const GRID_TOLERANCE_BINS: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    pub name: String,
    pub metric: f64,
    pub threshold: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub name: String,
    pub checks: Vec<ConvergenceCheck>,
}

impl ConvergenceReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ConvergenceCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn relative_change(base: &nalgebra::DMatrix<crate::operators::C64>, other: &nalgebra::DMatrix<crate::operators::C64>) -> f64 {
    let scale = base.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let diff = base.iter().zip(other.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}

/// Largest distance, in original bins, from any peak of either list to the
/// nearest peak of the other (infinite if one list is empty and the other not).
fn peak_drift(base: &Spectrum2D, base_peaks: &[Peak], fine_peaks: &[Peak]) -> f64 {
    let (sa, sb) = (base.axis_a.step, base.axis_b.step);
    let dist = |p: &Peak, q: &Peak| ((p.position.0 - q.position.0).abs() / sa).max((p.position.1 - q.position.1).abs() / sb);
    let one_way = |from: &[Peak], to: &[Peak]| {
        from.iter()
            .map(|p| to.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    one_way(base_peaks, fine_peaks).max(one_way(fine_peaks, base_peaks))
}

pub fn convergence_report(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    let config = config.clone().resolve()?;
    if !config.experiment.is_pathway_scan() {
        return Err(Error::Config(format!(
            "convergence checks need an `sqc` or `dqc` experiment, got `{}`",
            config.experiment.as_str()
        )));
    }
    let alpha = config.pulses.as_ref().expect("resolved pulses").alpha;
    let base = phonon_scan(&config)?;
    let mut checks = Vec::new();

    let mut capped = config.clone();
    let cap = {
        let chain = capped.chain.as_mut().expect("resolved chain");
        chain.excitation_cap += 1;
        chain.excitation_cap
    };
    let metric = relative_change(&base.signal.grid.values, &phonon_scan(&capped)?.signal.grid.values);
    let threshold = CAP_TOLERANCE_FACTOR * alpha * alpha;
    checks.push(ConvergenceCheck {
        name: "excitation_cap".into(),
        metric,
        threshold,
        passed: metric < threshold,
        detail: format!("cap {} -> {cap}: max |dS| / max |S|", cap - 1),
    });

    let mut halved = config.clone();
    halved.pulses.as_mut().expect("resolved pulses").alpha = 0.5 * alpha;
    let metric = relative_change(&base.signal.grid.values, &phonon_scan(&halved)?.signal.grid.values);
    checks.push(ConvergenceCheck {
        name: "alpha".into(),
        metric,
        threshold: ALPHA_TOLERANCE,
        passed: metric < ALPHA_TOLERANCE,
        detail: format!("alpha {alpha} -> {}: max |dS| / max |S| of the normalized signal", 0.5 * alpha),
    });

    let mut refined = config.clone();
    let samples = {
        let grid = refined.grid.as_mut().expect("resolved grid");
        let n = 2 * grid.samples();
        grid.samples = Some(n);
        grid.dt = Some(grid.t_max() / n as f64);
        n
    };
    let threshold_rel = config.peak_threshold.expect("resolved threshold");
    let base_spec = config_spectrum(&config, &base.signal)?;
    let fine_spec = config_spectrum(&refined, &phonon_scan(&refined)?.signal)?;
    let base_peaks = find_peaks(&base_spec, threshold_rel)?;
    let fine_peaks = find_peaks(&fine_spec, threshold_rel)?;
    let metric = peak_drift(&base_spec, &base_peaks, &fine_peaks);
    checks.push(ConvergenceCheck {
        name: "grid".into(),
        metric,
        threshold: GRID_TOLERANCE_BINS,
        passed: metric <= GRID_TOLERANCE_BINS,
        detail: format!(
            "samples {} -> {samples}: worst peak displacement in original bins ({} vs {} peaks)",
            samples / 2,
            base_peaks.len(),
            fine_peaks.len()
        ),
    });

    Ok(ConvergenceReport {
        name: config.display_name().to_string(),
        checks,
    })
}

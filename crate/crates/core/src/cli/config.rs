//! Versioned JSON experiment descriptors.
//!
//! A config is parsed strictly (unknown keys are errors) and then resolved:
//! every default that depends on the experiment kind is written back into the
//! struct, so the resolved config serialized into the run manifest is complete.
//! Sections that do not apply to the chosen experiment are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ChannelKind, NoiseChannel};
use crate::error::{Error, Result};
use crate::protocol::{Evaluation, PulseModel};
use crate::spectra::TransformAxes;
use crate::spins::{SpinNoise, DEFAULT_PULSE_BETA, DEFAULT_SAMPLES as SPIN_SAMPLES, DEFAULT_T_MAX as SPIN_T_MAX};

pub const SCHEMA_VERSION: u32 = 1;

pub const PHONON_SAMPLES: usize = 512;
pub const PHONON_T_MAX: f64 = 500.0;
pub const DEFAULT_PAD_FACTOR: usize = 2;
pub const DEFAULT_PEAK_THRESHOLD: f64 = 0.05;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_CAP: usize = 2;
pub const MAX_IONS: usize = 12;
pub const DEFAULT_GAMMAS: [f64; 8] = [0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07, 0.08];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ChainModes,
    Sqc,
    Dqc,
    SpinsLineshape,
    GateErrorScan,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ChainModes => "chain-modes",
            ExperimentKind::Sqc => "sqc",
            ExperimentKind::Dqc => "dqc",
            ExperimentKind::SpinsLineshape => "spins-lineshape",
            ExperimentKind::GateErrorScan => "gate-error-scan",
        }
    }

    pub fn is_phonon(self) -> bool {
        matches!(self, ExperimentKind::ChainModes | ExperimentKind::Sqc | ExperimentKind::Dqc)
    }

    pub fn is_pathway_scan(self) -> bool {
        matches!(self, ExperimentKind::Sqc | ExperimentKind::Dqc)
    }

    fn n_pulses(self) -> usize {
        match self {
            ExperimentKind::Dqc => 4,
            _ => 2,
        }
    }
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_cap() -> usize {
    DEFAULT_CAP
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_omega() -> f64 {
    1.0
}
fn default_pulse_beta() -> f64 {
    DEFAULT_PULSE_BETA
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n_ions: usize,
    /// Coupling strength in units of the axial trap frequency.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(rename = "U", default)]
    pub anharmonicity: f64,
    /// Global cap on the total phonon number.
    #[serde(default = "default_cap")]
    pub excitation_cap: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    /// Pulse sites in time order (0-based); `None` until resolved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sites: Option<Vec<usize>>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub model: PulseModel,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            sites: None,
            alpha: DEFAULT_ALPHA,
            model: PulseModel::Linearized,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinConfig {
    /// Mølmer-Sørensen coupling; times are in units of `1/omega` only when omega = 1.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Spin-flip amplitude of the probe pulses.
    #[serde(default = "default_pulse_beta")]
    pub beta: f64,
    #[serde(default)]
    pub noise: SpinNoise,
    /// Dephasing rate for `spins-lineshape`; `gate-error-scan` uses `gammas`.
    #[serde(default)]
    pub gamma: f64,
}

impl Default for SpinConfig {
    fn default() -> Self {
        SpinConfig {
            omega: 1.0,
            beta: DEFAULT_PULSE_BETA,
            noise: SpinNoise::None,
            gamma: 0.0,
        }
    }
}

/// Square delay grid. Any two of `samples`, `dt`, `t_max` fix the third
/// (`t_max = samples * dt`); missing values fall back to the experiment defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
}

impl GridConfig {
    pub fn samples(&self) -> usize {
        self.samples.expect("resolved grid")
    }

    pub fn dt(&self) -> f64 {
        self.dt.expect("resolved grid")
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.expect("resolved grid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulses: Option<PulseConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_site: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<NoiseChannel>>,
    /// Fixed delay after each pulse; entries at scanned positions are ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delays: Option<Vec<f64>>,
    /// Indices of the two scanned delays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scanned: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spins: Option<SpinConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    /// Exponential window rate, applied on both axes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pad_factor: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformAxes>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peak_threshold: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<String>,
    /// Reserved; every pipeline is deterministic.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn reject<T>(field: &Option<T>, name: &str, kind: ExperimentKind) -> Result<()> {
    if field.is_some() {
        return Err(Error::invalid(name, format!("not used by `{}` experiments", kind.as_str())));
    }
    Ok(())
}

fn positive(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(name, format!("must be positive and finite, got {x}")));
    }
    Ok(())
}

fn non_negative(x: f64, name: &str) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::invalid(name, format!("must be non-negative and finite, got {x}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or(self.experiment.as_str())
    }

    /// Validates the config and fills in every default.
    pub fn resolve(mut self) -> Result<Self> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let kind = self.experiment;
        if self.name.is_none() {
            self.name = Some(kind.as_str().to_string());
        }
        if self.output_dir.is_none() {
            self.output_dir = Some(format!("out/{}", self.display_name()));
        }
        if kind.is_phonon() {
            self.resolve_phonon()?;
        } else {
            self.resolve_spins()?;
        }
        if kind != ExperimentKind::ChainModes {
            self.resolve_spectrum()?;
        }
        Ok(self)
    }

    fn resolve_phonon(&mut self) -> Result<()> {
        let kind = self.experiment;
        reject(&self.spins, "spins", kind)?;
        reject(&self.gammas, "gammas", kind)?;
        let chain = self
            .chain
            .as_ref()
            .ok_or_else(|| Error::invalid("chain", format!("required for `{}` experiments", kind.as_str())))?;
        if chain.n_ions == 0 || chain.n_ions > MAX_IONS {
            return Err(Error::invalid("chain.n_ions", format!("must lie in 1..={MAX_IONS}, got {}", chain.n_ions)));
        }
        non_negative(chain.beta, "chain.beta")?;
        if !chain.anharmonicity.is_finite() {
            return Err(Error::invalid("chain.U", "must be finite"));
        }
        if chain.excitation_cap == 0 {
            return Err(Error::invalid("chain.excitation_cap", "must be at least 1"));
        }
        let n = chain.n_ions;
        if kind == ExperimentKind::ChainModes {
            for (field, name) in [
                (self.pulses.is_some(), "pulses"),
                (self.readout_site.is_some(), "readout_site"),
                (self.noise.is_some(), "noise"),
                (self.delays.is_some(), "delays"),
                (self.scanned.is_some(), "scanned"),
                (self.evaluation.is_some(), "evaluation"),
                (self.grid.is_some(), "grid"),
                (self.eta.is_some(), "eta"),
                (self.pad_factor.is_some(), "pad_factor"),
                (self.transform.is_some(), "transform"),
                (self.peak_threshold.is_some(), "peak_threshold"),
            ] {
                reject(&field.then_some(()), name, kind)?;
            }
            return Ok(());
        }

        let n_pulses = kind.n_pulses();
        let pulses = self.pulses.get_or_insert_with(PulseConfig::default);
        let sites = pulses.sites.get_or_insert_with(|| vec![0; n_pulses]);
        if sites.len() != n_pulses {
            return Err(Error::invalid(
                "pulses.sites",
                format!("`{}` needs {n_pulses} pulse sites, got {}", kind.as_str(), sites.len()),
            ));
        }
        if let Some(&s) = sites.iter().find(|&&s| s >= n) {
            return Err(Error::invalid("pulses.sites", format!("site {s} out of range for {n} ions")));
        }
        positive(pulses.alpha, "pulses.alpha")?;
        if pulses.alpha >= 1.0 {
            return Err(Error::invalid("pulses.alpha", format!("must be below 1, got {}", pulses.alpha)));
        }
        let readout = *self.readout_site.get_or_insert(if kind == ExperimentKind::Sqc { n / 2 } else { 0 });
        if readout >= n {
            return Err(Error::invalid("readout_site", format!("site {readout} out of range for {n} ions")));
        }
        let noise = self.noise.get_or_insert_with(Vec::new);
        for (c, ch) in noise.iter().enumerate() {
            if ch.kind != ChannelKind::PhononLocalDephasing {
                return Err(Error::invalid(format!("noise[{c}].kind"), "phonon experiments take phonon_local_dephasing"));
            }
            non_negative(ch.rate, &format!("noise[{c}].rate"))?;
            if let Some(&s) = ch.sites.iter().find(|&&s| s >= n) {
                return Err(Error::invalid(format!("noise[{c}].sites"), format!("site {s} out of range for {n} ions")));
            }
        }
        let delays = self.delays.get_or_insert_with(|| vec![0.0; n_pulses]);
        if delays.len() != n_pulses {
            return Err(Error::invalid("delays", format!("expected {n_pulses} entries, got {}", delays.len())));
        }
        for (p, &d) in delays.iter().enumerate() {
            non_negative(d, &format!("delays[{p}]"))?;
        }
        let scanned = *self.scanned.get_or_insert(match kind {
            ExperimentKind::Dqc => [0, 2],
            _ => [0, 1],
        });
        if !(scanned[0] < scanned[1] && scanned[1] < n_pulses) {
            return Err(Error::invalid(
                "scanned",
                format!("need two increasing delay indices below {n_pulses}, got {scanned:?}"),
            ));
        }
        match self.evaluation.get_or_insert(Evaluation::Direct { sides: None }) {
            Evaluation::Direct { sides: Some(s) } if s.len() != n_pulses => {
                return Err(Error::invalid("evaluation.sides", format!("expected {n_pulses} entries, got {}", s.len())));
            }
            Evaluation::PhaseCycled { steps, .. } if *steps < 3 => {
                return Err(Error::invalid("evaluation.steps", format!("must be at least 3, got {steps}")));
            }
            _ => {}
        }
        let grid = self.grid.get_or_insert_with(GridConfig::default);
        resolve_grid(grid, PHONON_SAMPLES, PHONON_T_MAX)
    }

    fn resolve_spins(&mut self) -> Result<()> {
        let kind = self.experiment;
        reject(&self.chain, "chain", kind)?;
        reject(&self.pulses, "pulses", kind)?;
        reject(&self.readout_site, "readout_site", kind)?;
        reject(&self.noise, "noise", kind)?;
        reject(&self.delays, "delays", kind)?;
        reject(&self.scanned, "scanned", kind)?;
        reject(&self.evaluation, "evaluation", kind)?;
        let spins = self.spins.get_or_insert_with(SpinConfig::default);
        positive(spins.omega, "spins.omega")?;
        positive(spins.beta, "spins.beta")?;
        if spins.beta >= 1.0 {
            return Err(Error::invalid("spins.beta", format!("must be below 1, got {}", spins.beta)));
        }
        non_negative(spins.gamma, "spins.gamma")?;
        let t_max = SPIN_T_MAX / spins.omega;
        if kind == ExperimentKind::GateErrorScan {
            if spins.gamma != 0.0 {
                return Err(Error::invalid("spins.gamma", "gate-error-scan takes its rates from `gammas`"));
            }
            let gammas = self.gammas.get_or_insert_with(|| DEFAULT_GAMMAS.to_vec());
            if gammas.len() < 2 {
                return Err(Error::invalid("gammas", "at least two rates are needed for the fit"));
            }
            for (k, &g) in gammas.iter().enumerate() {
                non_negative(g, &format!("gammas[{k}]"))?;
            }
        } else {
            reject(&self.gammas, "gammas", kind)?;
        }
        let grid = self.grid.get_or_insert_with(GridConfig::default);
        resolve_grid(grid, SPIN_SAMPLES, t_max)
    }

    fn resolve_spectrum(&mut self) -> Result<()> {
        let t_max = self.grid.as_ref().expect("grid resolved").t_max();
        let eta = *self.eta.get_or_insert(3.0 / t_max);
        non_negative(eta, "eta")?;
        let pad = *self.pad_factor.get_or_insert(DEFAULT_PAD_FACTOR);
        if pad == 0 {
            return Err(Error::invalid("pad_factor", "must be at least 1"));
        }
        self.transform.get_or_insert(TransformAxes::Both);
        let thr = *self.peak_threshold.get_or_insert(DEFAULT_PEAK_THRESHOLD);
        if !(thr > 0.0 && thr < 1.0) {
            return Err(Error::invalid("peak_threshold", format!("must lie in (0, 1), got {thr}")));
        }
        Ok(())
    }
}

fn resolve_grid(grid: &mut GridConfig, default_samples: usize, default_t_max: f64) -> Result<()> {
    if let Some(dt) = grid.dt {
        positive(dt, "grid.dt")?;
    }
    if let Some(t) = grid.t_max {
        positive(t, "grid.t_max")?;
    }
    if grid.samples == Some(0) {
        return Err(Error::invalid("grid.samples", "must be at least 1"));
    }
    let (samples, dt, t_max) = match (grid.samples, grid.dt, grid.t_max) {
        (Some(n), Some(dt), Some(t)) => {
            if (n as f64 * dt - t).abs() > 1e-9 * t {
                return Err(Error::invalid("grid.t_max", format!("must equal samples * dt = {}", n as f64 * dt)));
            }
            (n, dt, t)
        }
        (Some(n), Some(dt), None) => (n, dt, n as f64 * dt),
        (Some(n), None, t) => {
            let t = t.unwrap_or(default_t_max);
            (n, t / n as f64, t)
        }
        (None, Some(dt), Some(t)) => {
            let n = (t / dt).round();
            if n < 1.0 || (n * dt - t).abs() > 1e-9 * t {
                return Err(Error::invalid("grid.dt", format!("t_max = {t} is not a whole number of steps")));
            }
            (n as usize, dt, t)
        }
        (None, Some(dt), None) => (default_samples, dt, default_samples as f64 * dt),
        (None, None, t) => {
            let t = t.unwrap_or(default_t_max);
            (default_samples, t / default_samples as f64, t)
        }
    };
    *grid = GridConfig {
        samples: Some(samples),
        dt: Some(dt),
        t_max: Some(t_max),
    };
    Ok(())
}

/// 1-based line of the JSON key named by the last component of `field`
/// (searched after the line of its parent key, if any).
pub fn locate_field(text: &str, field: &str) -> Option<usize> {
    let strip = |s: &str| s.split('[').next().unwrap_or(s).to_string();
    let parts: Vec<String> = field.split('.').map(strip).collect();
    let mut start = 0;
    for part in &parts {
        let needle = format!("\"{part}\"");
        let offset = text.lines().skip(start).position(|l| l.contains(&needle))?;
        start += offset;
    }
    Some(start + 1)
}

/// Reads, parses and resolves a config file. Any failure is reported as
/// `Error::Config` with the file name and, where known, the offending line.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: cannot read config: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

pub fn parse_config(text: &str, origin: &str) -> Result<ExperimentConfig> {
    let parsed = ExperimentConfig::from_json_str(text).map_err(|e| match e {
        Error::Json(j) => Error::Config(format!("{origin}:{}: {j}", j.line())),
        other => other,
    })?;
    parsed.resolve().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => {
            let line = locate_field(text, &name).map(|l| format!(":{l}")).unwrap_or_default();
            Error::Config(format!("{origin}{line}: field `{name}`: {reason}"))
        }
        other => other,
    })
}

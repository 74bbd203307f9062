//! Preset configs shipped in `presets/`, embedded at build time.

use crate::error::{Error, Result};

use super::config::{parse_config, ExperimentConfig};

macro_rules! preset {
    ($name:literal) => {
        ($name, include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/presets/", $name, ".json")))
    };
}

/// `(name, JSON text)` pairs in listing order.
pub const PRESETS: [(&str, &str); 9] = [
    preset!("chain-modes"),
    preset!("fig2-sqc-unitary"),
    preset!("fig2-sqc-dephasing"),
    preset!("fig3-dqc-harmonic"),
    preset!("fig3-dqc-anharmonic"),
    preset!("fig4-spins-local"),
    preset!("fig4-spins-collective"),
    preset!("fig4-gate-error-scan"),
    preset!("sqc-n2"),
];

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Resolved config of a named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let text = preset_text(name).ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?;
    parse_config(text, &format!("preset {name}"))
}

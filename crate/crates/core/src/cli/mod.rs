//! Config-driven batch runner behind the `ionspec` binary.

pub mod config;
pub mod converge;
pub mod presets;
pub mod run;

pub use config::{load_config, parse_config, ExperimentConfig, ExperimentKind, SCHEMA_VERSION};
pub use converge::{convergence_report, ConvergenceCheck, ConvergenceReport};
pub use presets::{preset, preset_text, PRESETS};
pub use run::{config_spectrum, phonon_scan, run, scan_line_fit, spin_settings, PhononScan, RunOutcome, TOOL_VERSION};

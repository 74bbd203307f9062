//! Batch execution of a resolved config and artifact output.
//!
//! Every artifact is a pure function of the resolved config: no timestamps,
//! host data or thread counts are written, so repeated runs are bit-identical.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::chain::{build_hamiltonian, diagonalize_single_sector, sector_spectrum, ChainModel};
use crate::dynamics::{make_propagator, NoiseSpec};
use crate::error::{Error, Result};
use crate::operators::{OperatorMatrix, StateBasis};
use crate::protocol::{
    scan_2d, Experiment, GridSpec, PathwaySignal, PulseEvent, PulseSequence, ReadoutKind, DQC_SIGNATURE,
    SQC_SIGNATURE,
};
use crate::spectra::{
    distinct_frequencies, find_peaks, fit_lines, fourier_2d, write_signal_csv, write_spectrum_csv, LineFit, Peak,
    Spectrum2D,
};
use crate::spins::{gate_error_scan, ms_sqc_signal, write_gate_error_csv, MsModel, SpinSqcSettings};

use super::config::{ExperimentConfig, ExperimentKind, SCHEMA_VERSION};

pub const TOOL_NAME: &str = "ionspec";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Frequencies closer than this are treated as one line.
const LINE_MERGE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub output_dir: PathBuf,
    /// Artifact file names relative to `output_dir`, manifest last.
    pub files: Vec<String>,
}

/// Pathway scan of a phonon experiment together with the model it ran on.
pub struct PhononScan {
    pub model: ChainModel,
    pub basis: StateBasis,
    pub hamiltonian: OperatorMatrix,
    pub signal: PathwaySignal,
}

fn signature(kind: ExperimentKind) -> Vec<i32> {
    match kind {
        ExperimentKind::Dqc => DQC_SIGNATURE.to_vec(),
        _ => SQC_SIGNATURE.to_vec(),
    }
}

/// Runs the two-dimensional delay scan of a resolved `sqc` or `dqc` config.
pub fn phonon_scan(config: &ExperimentConfig) -> Result<PhononScan> {
    let kind = config.experiment;
    if !kind.is_pathway_scan() {
        return Err(Error::Config(format!("`{}` is not a phonon pathway experiment", kind.as_str())));
    }
    let chain = config.chain.as_ref().expect("resolved chain");
    let pulses = config.pulses.as_ref().expect("resolved pulses");
    let grid = config.grid.as_ref().expect("resolved grid");
    let model = ChainModel::for_chain(chain.n_ions, chain.beta, chain.anharmonicity)?;
    let basis = StateBasis::phonon(chain.n_ions, chain.excitation_cap)?;
    let hamiltonian = build_hamiltonian(&model, &basis)?;
    let noise = NoiseSpec {
        channels: config.noise.clone().unwrap_or_default(),
    };
    let prop = make_propagator(&hamiltonian, &noise, &basis)?;
    let events = pulses
        .sites
        .as_ref()
        .expect("resolved sites")
        .iter()
        .map(|&s| PulseEvent::phonon(s, pulses.alpha, pulses.model))
        .collect::<Result<Vec<_>>>()?;
    let sequence = PulseSequence::new(
        events,
        config.delays.clone().expect("resolved delays"),
        config.readout_site.expect("resolved readout"),
        ReadoutKind::PhononA,
    )?;
    let scanned = config.scanned.expect("resolved scanned");
    let experiment = Experiment {
        initial: OperatorMatrix::outer(basis.dim(), 0, 0),
        basis: basis.clone(),
        sequence,
        scanned: (scanned[0], scanned[1]),
        signature: signature(kind),
        evaluation: config.evaluation.clone().expect("resolved evaluation"),
    };
    let signal = scan_2d(&experiment, &prop, &GridSpec::square(grid.samples(), grid.dt()))?;
    Ok(PhononScan {
        model,
        basis,
        hamiltonian,
        signal,
    })
}

/// Spectrum of a signal grid with the config's window, padding and axes.
pub fn config_spectrum(config: &ExperimentConfig, signal: &PathwaySignal) -> Result<Spectrum2D> {
    let eta = config.eta.expect("resolved eta");
    fourier_2d(
        &signal.grid,
        [eta, eta],
        config.pad_factor.expect("resolved pad"),
        config.transform.expect("resolved transform"),
    )
}

/// `(ket, bra)` excitation sectors reachable after each pulse when the pathway
/// interactions act on the ground state (`+1`: raise ket or lower bra).
fn reachable_sectors(signature: &[i32], cap: usize) -> Vec<BTreeSet<(usize, usize)>> {
    let mut current: BTreeSet<(usize, usize)> = [(0, 0)].into();
    let mut out = Vec::with_capacity(signature.len());
    for &k in signature {
        let mut next = BTreeSet::new();
        for &(ket, bra) in &current {
            let (raise, lower) = if k > 0 { ((ket + 1, bra), bra.checked_sub(1).map(|b| (ket, b))) } else { ((ket, bra + 1), ket.checked_sub(1).map(|kt| (kt, bra))) };
            if raise.0.max(raise.1) <= cap {
                next.insert(raise);
            }
            next.extend(lower);
        }
        out.push(next.clone());
        current = next;
    }
    out
}

/// Coherence frequencies `E_m - E_n` available in each delay interval of a
/// number-conserving Hamiltonian.
pub fn interval_frequencies(scan: &PhononScan, signature: &[i32]) -> Vec<Vec<f64>> {
    let cap = scan.basis.excitation_cap();
    let energies: Vec<Vec<f64>> = (0..=cap).map(|n| sector_spectrum(&scan.hamiltonian, &scan.basis, n).0).collect();
    reachable_sectors(signature, cap)
        .into_iter()
        .map(|pairs| {
            let diffs = pairs
                .iter()
                .flat_map(|&(ket, bra)| {
                    let e = &energies;
                    e[ket].iter().flat_map(move |em| e[bra].iter().map(move |en| em - en))
                })
                .collect::<Vec<f64>>();
            distinct_frequencies(diffs, LINE_MERGE_TOL)
        })
        .collect()
}

/// Line amplitudes of a unitary scan on the model's transition frequencies.
pub fn scan_line_fit(config: &ExperimentConfig, scan: &PhononScan) -> Result<LineFit> {
    let scanned = config.scanned.expect("resolved scanned");
    let freqs = interval_frequencies(scan, &scan.signal.signature);
    fit_lines(&scan.signal.grid, &freqs[scanned[0]], &freqs[scanned[1]])
}

fn is_unitary(config: &ExperimentConfig) -> bool {
    NoiseSpec {
        channels: config.noise.clone().unwrap_or_default(),
    }
    .is_empty()
}

#[derive(Serialize)]
struct PeakRecord {
    omega_a: f64,
    omega_b: f64,
    bin_a: usize,
    bin_b: usize,
    magnitude: f64,
    relative: f64,
    fwhm_a: Option<f64>,
    fwhm_b: Option<f64>,
}

fn peak_records(peaks: &[Peak], max: f64) -> Vec<PeakRecord> {
    peaks
        .iter()
        .map(|p| PeakRecord {
            omega_a: p.position.0,
            omega_b: p.position.1,
            bin_a: p.bin.0,
            bin_b: p.bin.1,
            magnitude: p.magnitude,
            relative: p.magnitude / max,
            fwhm_a: p.fwhm_a,
            fwhm_b: p.fwhm_b,
        })
        .collect()
}

#[derive(Serialize)]
struct LineRecord {
    omega_a: f64,
    omega_b: f64,
    re: f64,
    im: f64,
    magnitude: f64,
    relative: f64,
}

/// Lines sorted by magnitude (descending), then by frequency.
fn line_records(fit: &LineFit) -> Vec<LineRecord> {
    let max = fit.max_weight();
    let mut out = Vec::with_capacity(fit.weights.len());
    for (j, &wa) in fit.freqs_a.iter().enumerate() {
        for (k, &wb) in fit.freqs_b.iter().enumerate() {
            let c = fit.weights[(j, k)];
            out.push(LineRecord {
                omega_a: wa,
                omega_b: wb,
                re: c.re,
                im: c.im,
                magnitude: c.norm(),
                relative: if max > 0.0 { c.norm() / max } else { 0.0 },
            });
        }
    }
    out.sort_by(|x, y| {
        y.magnitude
            .total_cmp(&x.magnitude)
            .then(x.omega_a.total_cmp(&y.omega_a))
            .then(x.omega_b.total_cmp(&y.omega_b))
    });
    out
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    fn json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        write_json(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn signal(&mut self, signal: &PathwaySignal) -> Result<()> {
        write_signal_csv(&self.dir, "signal", &signal.grid)?;
        self.files.extend(["signal_re.csv".into(), "signal_im.csv".into()]);
        Ok(())
    }

    fn spectrum(&mut self, config: &ExperimentConfig, signal: &PathwaySignal, units: &str) -> Result<Spectrum2D> {
        let spectrum = config_spectrum(config, signal)?;
        write_spectrum_csv(&self.dir, "spectrum", &spectrum)?;
        self.files
            .extend(["spectrum_abs.csv".into(), "spectrum_re.csv".into(), "spectrum_im.csv".into()]);
        let eta = config.eta.expect("resolved eta");
        self.json(
            "spectrum.json",
            &json!({
                "experiment": config.experiment,
                "name": config.display_name(),
                "units": units,
                "eta": [eta, eta],
                "pad_factor": config.pad_factor,
                "transform": config.transform,
                "grid": config.grid,
                "axis_a": spectrum.axis_a,
                "axis_b": spectrum.axis_b,
                "signature": signal.signature,
                "normalization": signal.normalization,
                "phase_points": signal.phase_points,
                "max_raw_imaginary": signal.max_raw_imaginary,
            }),
        )?;
        let threshold = config.peak_threshold.expect("resolved threshold");
        let peaks = find_peaks(&spectrum, threshold)?;
        self.json(
            "peaks.json",
            &json!({
                "threshold": threshold,
                "max_magnitude": spectrum.max_abs(),
                "peaks": peak_records(&peaks, spectrum.max_abs()),
            }),
        )?;
        Ok(spectrum)
    }
}

/// Executes `config` and writes its artifacts to `out` (the config's
/// `output_dir` when `None`).
pub fn run(config: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutcome> {
    let mut config = config.clone().resolve()?;
    if let Some(dir) = out {
        config.output_dir = Some(dir.display().to_string());
    }
    let dir = PathBuf::from(config.output_dir.clone().expect("resolved output_dir"));
    std::fs::create_dir_all(&dir)?;
    let mut art = Artifacts { dir, files: Vec::new() };

    match config.experiment {
        ExperimentKind::ChainModes => {
            let chain = config.chain.as_ref().expect("resolved chain");
            let model = ChainModel::for_chain(chain.n_ions, chain.beta, chain.anharmonicity)?;
            let excitons = diagonalize_single_sector(&model);
            write_modes_csv(&art.dir.join("modes.csv"), &excitons.frequencies, &excitons.modes)?;
            art.files.push("modes.csv".into());
            let modes: Vec<Vec<f64>> = (0..model.n_ions).map(|j| excitons.modes.column(j).iter().copied().collect()).collect();
            art.json(
                "chain.json",
                &json!({
                    "units": "frequencies in units of the axial trap frequency nu_x",
                    "model": model,
                    "frequencies": excitons.frequencies,
                    "modes": modes,
                }),
            )?;
        }
        ExperimentKind::Sqc | ExperimentKind::Dqc => {
            let scan = phonon_scan(&config)?;
            art.signal(&scan.signal)?;
            art.spectrum(&config, &scan.signal, "frequencies in units of nu_x, times in units of 1/nu_x")?;
            if is_unitary(&config) {
                let fit = scan_line_fit(&config, &scan)?;
                art.json(
                    "lines.json",
                    &json!({
                        "relative_residual": fit.relative_residual,
                        "lines": line_records(&fit),
                    }),
                )?;
            }
        }
        ExperimentKind::SpinsLineshape => {
            let spins = config.spins.as_ref().expect("resolved spins");
            let model = MsModel::new(spins.omega)?;
            let signal = ms_sqc_signal(&model, spins.noise, spins.gamma, &spin_settings(&config))?;
            art.signal(&signal)?;
            art.spectrum(&config, &signal, "frequencies and times in units of the MS coupling's time base")?;
        }
        ExperimentKind::GateErrorScan => {
            let spins = config.spins.as_ref().expect("resolved spins");
            let model = MsModel::new(spins.omega)?;
            let gammas = config.gammas.clone().expect("resolved gammas");
            let scan = gate_error_scan(&model, &gammas, &spin_settings(&config))?;
            write_gate_error_csv(&art.dir.join("gate_error.csv"), &scan.points)?;
            art.files.push("gate_error.csv".into());
            art.json(
                "fit.json",
                &json!({
                    "x": "error",
                    "y": "fwhm_omega1",
                    "fit": scan.fit,
                    "excluded": scan.excluded,
                    "eta": scan.eta,
                }),
            )?;
        }
    }

    let mut files = art.files.clone();
    files.push("manifest.json".into());
    art.json(
        "manifest.json",
        &json!({
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "schema_version": SCHEMA_VERSION,
            "config": config,
            "outputs": files,
        }),
    )?;
    Ok(RunOutcome {
        output_dir: art.dir,
        files: art.files,
    })
}

pub fn spin_settings(config: &ExperimentConfig) -> SpinSqcSettings {
    let spins = config.spins.as_ref().expect("resolved spins");
    let grid = config.grid.as_ref().expect("resolved grid");
    SpinSqcSettings {
        beta: spins.beta,
        samples: grid.samples(),
        t_max: grid.t_max(),
        pad_factor: config.pad_factor.expect("resolved pad"),
        eta: config.eta,
    }
}

fn write_modes_csv(path: &Path, frequencies: &[f64], modes: &nalgebra::DMatrix<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "mode,frequency")?;
    for i in 0..modes.nrows() {
        write!(out, ",site_{i}")?;
    }
    writeln!(out)?;
    for (j, w) in frequencies.iter().enumerate() {
        write!(out, "{j},{w:.16e}")?;
        for i in 0..modes.nrows() {
            write!(out, ",{:.16e}", modes[(i, j)])?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::parse_config;

    #[test]
    fn reachable_sectors_follow_the_pathways() {
        let sqc = reachable_sectors(&SQC_SIGNATURE, 2);
        assert_eq!(sqc[0], [(1, 0)].into());
        assert_eq!(sqc[1], [(0, 0), (1, 1)].into());
        let dqc = reachable_sectors(&DQC_SIGNATURE, 2);
        assert_eq!(dqc[1], [(2, 0)].into());
        assert_eq!(dqc[2], [(1, 0), (2, 1)].into());
        assert_eq!(dqc[3], [(0, 0), (1, 1), (2, 2)].into());
    }

    #[test]
    fn dqc_interval_frequencies_include_two_exciton_lines() {
        let cfg = parse_config(
            r#"{"schema_version": 1, "experiment": "dqc", "chain": {"n_ions": 2, "U": -0.025},
                "grid": {"samples": 8, "t_max": 8.0}}"#,
            "t",
        )
        .unwrap();
        let scan = phonon_scan(&cfg).unwrap();
        let f = interval_frequencies(&scan, &DQC_SIGNATURE);
        assert_eq!(f[0].len(), 2);
        assert!((f[0][0] - 0.95).abs() < 1e-9 && (f[0][1] - 1.0).abs() < 1e-9);
        // omega_e plus the 3 x 2 differences omega_f - omega_e, where 1.9 - 0.95 merges with omega_1
        assert_eq!(f[2].len(), 7);
    }
}

//! Two-spin Mølmer–Sørensen experiments: SQC lineshapes under local and
//! collective dephasing, gate fidelity, and the linewidth-versus-error scan.
//!
//! Frequencies and rates are in units of the coupling `Omega` when the model
//! is built with `omega = 1`.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{make_propagator, ChannelKind, NoiseSpec};
use crate::error::{Error, Result};
use crate::operators::{spin_operator, BasisKind, CMatrix, OperatorMatrix, SpinComponent, StateBasis, C64};
use crate::protocol::{
    scan_2d, Evaluation, Experiment, GridSpec, PathwaySignal, PulseEvent, PulseSequence, ReadoutKind, SQC_SIGNATURE,
};
use crate::spectra::{find_peaks, fourier_2d, fwhm, Peak, Spectrum2D, SpectrumAxis, TransformAxes, Width};

pub const N_SPINS: usize = 2;
pub const DEFAULT_PULSE_BETA: f64 = 0.1;
/// Default delay range in units of `1 / Omega`.
pub const DEFAULT_T_MAX: f64 = 60.0;
pub const DEFAULT_SAMPLES: usize = 256;
/// Peaks weaker than this fraction of the global maximum are not matched to
/// the `(Omega, Omega)` resonance.
const PEAK_SEARCH_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsModel {
    pub omega: f64,
}

impl MsModel {
    pub fn new(omega: f64) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::invalid("omega", format!("must be positive, got {omega}")));
        }
        Ok(MsModel { omega })
    }

    /// Gate time `pi / (2 Omega)` of the maximally entangling MS gate.
    pub fn gate_time(&self) -> f64 {
        FRAC_PI_2 / self.omega
    }
}

/// `(Omega / 2) sigma_x ⊗ sigma_x`.
pub fn build_ms_hamiltonian(model: &MsModel, basis: &StateBasis) -> Result<OperatorMatrix> {
    basis.require_kind(BasisKind::Spin)?;
    if basis.n_sites() != N_SPINS {
        return Err(Error::DimensionMismatch {
            expected: 1 << N_SPINS,
            found: basis.dim(),
        });
    }
    let xx = spin_operator(basis, 0, SpinComponent::X)?.mul(&spin_operator(basis, 1, SpinComponent::X)?);
    Ok(xx.scale(C64::new(0.5 * model.omega, 0.0)))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpinNoise {
    #[default]
    None,
    /// `sqrt(gamma) sigma_z^(i)` on each spin.
    Local,
    /// `sqrt(gamma) sigma_z ⊗ sigma_z`.
    Collective,
}

impl SpinNoise {
    pub fn noise_spec(self, gamma: f64) -> Result<NoiseSpec> {
        if !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::invalid("gamma", format!("must be finite and non-negative, got {gamma}")));
        }
        let sites: Vec<usize> = (0..N_SPINS).collect();
        Ok(match self {
            SpinNoise::None => NoiseSpec::none(),
            SpinNoise::Local => NoiseSpec::single(ChannelKind::SpinLocalDephasing, sites, gamma),
            SpinNoise::Collective => NoiseSpec::single(ChannelKind::SpinCollectiveDephasing, sites, gamma),
        })
    }
}

/// Delay grid, pulse amplitude and transform settings of the spin SQC experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinSqcSettings {
    pub beta: f64,
    pub samples: usize,
    pub t_max: f64,
    pub pad_factor: usize,
    /// Window per axis; `None` resolves to `3 / t_max`.
    pub eta: Option<f64>,
}

impl SpinSqcSettings {
    /// Defaults for a model: `beta = 0.1`, 256 samples over `60 / Omega`, pad 2.
    pub fn for_model(model: &MsModel) -> Self {
        SpinSqcSettings {
            beta: DEFAULT_PULSE_BETA,
            samples: DEFAULT_SAMPLES,
            t_max: DEFAULT_T_MAX / model.omega,
            pad_factor: 2,
            eta: None,
        }
    }

    pub fn dt(&self) -> f64 {
        self.t_max / self.samples as f64
    }

    pub fn window(&self) -> f64 {
        self.eta.unwrap_or(3.0 / self.t_max)
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::square(self.samples, self.dt())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::invalid("beta", format!("must lie in (0, 1), got {}", self.beta)));
        }
        if self.samples < 2 {
            return Err(Error::invalid("samples", "must be at least 2"));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(Error::invalid("t_max", format!("must be positive, got {}", self.t_max)));
        }
        if self.pad_factor == 0 {
            return Err(Error::invalid("pad_factor", "must be at least 1"));
        }
        if let Some(eta) = self.eta {
            if !(eta >= 0.0) || !eta.is_finite() {
                return Err(Error::invalid("eta", format!("must be finite and non-negative, got {eta}")));
            }
        }
        Ok(())
    }
}

/// Phase-cycled SQC grid: spin pulses on spin 0, `sigma_z` readout on spin 0,
/// initial `|00>`, signature `(+1, -1)`. Both pulses are cycled because
/// `H_MS` conserves only excitation parity.
pub fn ms_sqc_signal(model: &MsModel, noise: SpinNoise, gamma: f64, settings: &SpinSqcSettings) -> Result<PathwaySignal> {
    settings.validate()?;
    let basis = StateBasis::spin(N_SPINS)?;
    let h = build_ms_hamiltonian(model, &basis)?;
    let prop = make_propagator(&h, &noise.noise_spec(gamma)?, &basis)?;
    let pulse = PulseEvent::spin(0, settings.beta)?;
    let steps = 2 * pulse.cycling_band() + 1;
    let exp = Experiment {
        initial: OperatorMatrix::outer(basis.dim(), 0, 0),
        sequence: PulseSequence::new(vec![pulse, pulse], vec![0.0, 0.0], 0, ReadoutKind::SpinZ)?,
        basis,
        scanned: (0, 1),
        signature: SQC_SIGNATURE.to_vec(),
        evaluation: Evaluation::PhaseCycled {
            steps,
            fixed_last_phase: false,
        },
    };
    scan_2d(&exp, &prop, &settings.grid())
}

pub fn ms_sqc_spectrum(model: &MsModel, noise: SpinNoise, gamma: f64, settings: &SpinSqcSettings) -> Result<Spectrum2D> {
    let signal = ms_sqc_signal(model, noise, gamma, settings)?;
    let eta = settings.window();
    fourier_2d(&signal.grid, [eta, eta], settings.pad_factor, TransformAxes::Both)
}

/// Detected peak nearest to `(a, b)` within `max_bins` bins on both axes.
pub fn peak_near(spectrum: &Spectrum2D, a: f64, b: f64, max_bins: f64) -> Result<Option<Peak>> {
    let (da, db) = (spectrum.axis_a.step, spectrum.axis_b.step);
    let best = find_peaks(spectrum, PEAK_SEARCH_THRESHOLD)?
        .into_iter()
        .map(|p| {
            let d = ((p.position.0 - a) / da).abs().max(((p.position.1 - b) / db).abs());
            (d, p)
        })
        .filter(|(d, _)| *d <= max_bins)
        .min_by(|x, y| x.0.total_cmp(&y.0));
    Ok(best.map(|(_, p)| p))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateErrorPoint {
    pub gamma: f64,
    pub fidelity: f64,
    pub error: f64,
    /// FWHM along `Omega_1` of the `(Omega, Omega)` peak; `None` when unresolved
    /// or not computed.
    pub fwhm_omega1: Option<f64>,
}

/// `F = sqrt(<psi| G(t_g)[|00><00|] |psi>)` with `|psi> = U_MS |00>` and
/// `t_g = pi / (2 Omega)`, under dephasing of kind `noise` and rate `gamma`.
pub fn ms_gate_fidelity(model: &MsModel, gamma: f64, noise: SpinNoise) -> Result<GateErrorPoint> {
    let basis = StateBasis::spin(N_SPINS)?;
    let h = build_ms_hamiltonian(model, &basis)?;
    let t = model.gate_time();
    let prop = make_propagator(&h, &noise.noise_spec(gamma)?, &basis)?;
    let rho = prop.evolve(t, &OperatorMatrix::outer(basis.dim(), 0, 0))?;
    let ideal = make_propagator(&h, &NoiseSpec::none(), &basis)?.evolve(t, &OperatorMatrix::outer(basis.dim(), 0, 0))?;
    // Tr{rho_ideal rho} = <psi|rho|psi> for the pure ideal output.
    let overlap = ideal.trace_product(&rho).re.clamp(0.0, 1.0);
    let fidelity = overlap.sqrt();
    Ok(GateErrorPoint {
        gamma,
        fidelity,
        error: 1.0 - fidelity,
        fwhm_omega1: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `max |fwhm - fit| / fwhm` over the fitted points.
    pub max_relative_residual: f64,
    pub n_points: usize,
}

/// Least-squares line `y = slope x + intercept`. Needs two distinct `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if x.len() < 2 || !(sxx > 0.0) {
        return Err(Error::invalid("fit", "needs at least two distinct abscissae"));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_relative_residual = x
        .iter()
        .zip(y)
        .map(|(a, b)| ((b - (slope * a + intercept)) / b).abs())
        .fold(0.0, f64::max);
    Ok(LinearFit {
        slope,
        intercept,
        max_relative_residual,
        n_points: x.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateErrorScan {
    pub points: Vec<GateErrorPoint>,
    /// Fit of `fwhm_omega1` against `error` over the resolved points.
    pub fit: Option<LinearFit>,
    /// Indices of points left out of the fit because their FWHM is unresolved.
    pub excluded: Vec<usize>,
    pub eta: f64,
}

/// One point of the scan: gate fidelity and the `Omega_1` FWHM of the
/// `(Omega, Omega)` SQC peak under local dephasing.
pub fn gate_error_point(model: &MsModel, gamma: f64, settings: &SpinSqcSettings) -> Result<GateErrorPoint> {
    let mut point = ms_gate_fidelity(model, gamma, SpinNoise::Local)?;
    let spectrum = ms_sqc_spectrum(model, SpinNoise::Local, gamma, settings)?;
    point.fwhm_omega1 = match peak_near(&spectrum, model.omega, model.omega, 2.0)? {
        Some(peak) => fwhm(&spectrum, &peak, SpectrumAxis::A)?.value(),
        None => None,
    };
    Ok(point)
}

/// Evaluates every `gamma` in parallel; points keep the input order. The
/// window is fixed across the scan so width differences come from `gamma`.
pub fn gate_error_scan(model: &MsModel, gammas: &[f64], settings: &SpinSqcSettings) -> Result<GateErrorScan> {
    settings.validate()?;
    if gammas.is_empty() {
        return Err(Error::invalid("gammas", "must not be empty"));
    }
    if let Some(g) = gammas.iter().find(|g| **g >= 0.1 * model.omega) {
        log::warn!("gamma = {g} is outside the weak-dephasing range gamma < 0.1 Omega");
    }
    let points = gammas
        .par_iter()
        .map(|&g| gate_error_point(model, g, settings))
        .collect::<Result<Vec<_>>>()?;
    let excluded: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.fwhm_omega1.is_none())
        .map(|(i, _)| i)
        .collect();
    for &i in &excluded {
        log::warn!("unresolved FWHM at gamma = {}; point excluded from the fit", points[i].gamma);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.fwhm_omega1.map(|w| (p.error, w)))
        .unzip();
    let fit = linear_fit(&x, &y).ok();
    Ok(GateErrorScan {
        points,
        fit,
        excluded,
        eta: settings.window(),
    })
}

/// CSV with columns `gamma,fidelity,error,fwhm_omega1` (empty when unresolved).
pub fn write_gate_error_csv(path: &Path, points: &[GateErrorPoint]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "gamma,fidelity,error,fwhm_omega1")?;
    for p in points {
        let w = p.fwhm_omega1.map(|w| format!("{w:.16e}")).unwrap_or_default();
        writeln!(out, "{:.16e},{:.16e},{:.16e},{}", p.gamma, p.fidelity, p.error, w)?;
    }
    out.flush()?;
    Ok(())
}

/// Bell states `[Phi+, Phi-, Psi+, Psi-]` as columns in the two-spin basis.
pub fn bell_states(basis: &StateBasis) -> Result<CMatrix> {
    basis.require_kind(BasisKind::Spin)?;
    if basis.n_sites() != N_SPINS {
        return Err(Error::DimensionMismatch {
            expected: 1 << N_SPINS,
            found: basis.dim(),
        });
    }
    let idx = |occ: [u8; 2]| basis.index_of(&occ).expect("two-spin basis is complete");
    let (i00, i01, i10, i11) = (idx([0, 0]), idx([0, 1]), idx([1, 0]), idx([1, 1]));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut m = CMatrix::zeros(4, 4);
    for (col, (a, b, sign)) in [(i00, i11, 1.0), (i00, i11, -1.0), (i01, i10, 1.0), (i01, i10, -1.0)]
        .into_iter()
        .enumerate()
    {
        m[(a, col)] = C64::new(s, 0.0);
        m[(b, col)] = C64::new(sign * s, 0.0);
    }
    Ok(m)
}

/// FWHM of the `(Omega, Omega)` peak along one axis, if the peak is found and resolved.
pub fn resonance_width(spectrum: &Spectrum2D, model: &MsModel, axis: SpectrumAxis) -> Result<Width> {
    match peak_near(spectrum, model.omega, model.omega, 2.0)? {
        Some(peak) => fwhm(spectrum, &peak, axis),
        None => Ok(Width::Unresolved),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{build_liouvillian, CVector};

    fn basis() -> StateBasis {
        StateBasis::spin(2).unwrap()
    }

    #[test]
    fn hamiltonian_spectrum_and_bell_eigenvectors() {
        let m = MsModel::new(1.3).unwrap();
        let b = basis();
        let h = build_ms_hamiltonian(&m, &b).unwrap();
        assert!(h.trace().norm() < 1e-15);
        let mut ev = h.hermitian_eigenvalues();
        ev.sort_by(f64::total_cmp);
        for (got, want) in ev.iter().zip([-0.65, -0.65, 0.65, 0.65]) {
            assert!((got - want).abs() < 1e-14);
        }
        let bell = bell_states(&b).unwrap();
        for (k, e) in [0.65, -0.65, 0.65, -0.65].into_iter().enumerate() {
            let v: CVector = bell.column(k).into();
            let hv = h.matrix() * &v;
            assert!((hv - v * C64::new(e, 0.0)).norm() < 1e-14, "Bell state {k}");
        }
        assert!(build_ms_hamiltonian(&m, &StateBasis::spin(3).unwrap()).is_err());
        assert!(build_ms_hamiltonian(&m, &StateBasis::phonon(2, 1).unwrap()).is_err());
        assert!(MsModel::new(0.0).is_err());
    }

    #[test]
    fn collective_dissipator_annihilates_psi_coherence() {
        let b = basis();
        let bell = bell_states(&b).unwrap();
        let x = OperatorMatrix::new(bell.column(2) * bell.column(3).adjoint()).unwrap();
        let lind = SpinNoise::Collective.noise_spec(0.37).unwrap().lindblads(&b).unwrap();
        let d = build_liouvillian(&OperatorMatrix::zeros(4), &lind).unwrap();
        let out = d.matrix() * x.to_vec();
        assert!(out.norm() < 1e-12, "{}", out.norm());
        let local = SpinNoise::Local.noise_spec(0.37).unwrap().lindblads(&b).unwrap();
        let dl = build_liouvillian(&OperatorMatrix::zeros(4), &local).unwrap();
        assert!((dl.matrix() * x.to_vec()).norm() > 0.1);
    }

    #[test]
    fn unitary_evolution_preserves_bell_blocks() {
        let m = MsModel::new(1.0).unwrap();
        let b = basis();
        let h = build_ms_hamiltonian(&m, &b).unwrap();
        let prop = make_propagator(&h, &NoiseSpec::none(), &b).unwrap();
        let bell = bell_states(&b).unwrap();
        let blocks = [[0usize, 1], [2, 3]];
        for (bi, block) in blocks.iter().enumerate() {
            for &p in block {
                for &q in block {
                    let x = OperatorMatrix::new(bell.column(p) * bell.column(q).adjoint()).unwrap();
                    let y = prop.evolve(2.7, &x).unwrap();
                    let in_bell = bell.adjoint() * y.matrix() * &bell;
                    let other = blocks[1 - bi];
                    for &r in &other {
                        for s in 0..4 {
                            assert!(in_bell[(r, s)].norm() < 1e-13 && in_bell[(s, r)].norm() < 1e-13);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn fidelity_is_one_without_noise_and_decreases_with_gamma() {
        let m = MsModel::new(1.0).unwrap();
        let p0 = ms_gate_fidelity(&m, 0.0, SpinNoise::Local).unwrap();
        assert!((p0.fidelity - 1.0).abs() < 1e-12 && p0.error.abs() < 1e-12);
        let errors: Vec<f64> = (1..=10)
            .map(|k| ms_gate_fidelity(&m, 0.01 * k as f64, SpinNoise::Local).unwrap().error)
            .collect();
        assert!(errors.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn fidelity_matches_first_order_estimate() {
        // F^2 = 1 + int_0^t <psi(s)|D[psi(s)]|psi(s)> ds + O(gamma^2), and
        // <D> = -2 gamma sin^2(Omega s) along the ideal trajectory, so
        // 1 - F ~ pi gamma / (4 Omega).
        for omega in [1.0, 2.5] {
            let m = MsModel::new(omega).unwrap();
            let gamma = 0.05 * omega;
            let got = ms_gate_fidelity(&m, gamma, SpinNoise::Local).unwrap().error;
            let want = std::f64::consts::PI * gamma / (4.0 * omega);
            assert!(((got - want) / want).abs() < 0.2, "{got} vs {want}");
        }
    }

    fn default_spectrum(noise: SpinNoise, gamma: f64) -> (MsModel, Spectrum2D) {
        let m = MsModel::new(1.0).unwrap();
        let s = SpinSqcSettings::for_model(&m);
        (m, ms_sqc_spectrum(&m, noise, gamma, &s).unwrap())
    }

    #[test]
    fn noiseless_resonances_come_in_pairs() {
        let (m, sp) = default_spectrum(SpinNoise::None, 0.0);
        let bin = sp.axis_a.step;
        for (a, b) in [(0.0, m.omega), (m.omega, m.omega)] {
            for sign in [1.0, -1.0] {
                let p = peak_near(&sp, sign * a, sign * b, 1.0).unwrap();
                assert!(p.is_some(), "no peak at {:?}", (sign * a, sign * b));
            }
        }
        for p in find_peaks(&sp, 0.05).unwrap() {
            let mirror = peak_near(&sp, -p.position.0, -p.position.1, 1.0).unwrap();
            let q = mirror.expect("every peak has a mirror partner");
            assert!((q.magnitude - p.magnitude).abs() < 1e-9 * p.magnitude);
            assert!((q.position.0 + p.position.0).abs() < bin);
        }
    }

    #[test]
    fn collective_dephasing_leaves_t2_width_at_the_window_floor() {
        let (m, clean) = default_spectrum(SpinNoise::None, 0.0);
        let (_, coll) = default_spectrum(SpinNoise::Collective, 0.05);
        let (_, local) = default_spectrum(SpinNoise::Local, 0.05);
        let w = |sp: &Spectrum2D, axis| resonance_width(sp, &m, axis).unwrap().value().unwrap();
        let w0 = w(&clean, SpectrumAxis::B);
        let wc = w(&coll, SpectrumAxis::B);
        assert!(((wc - w0) / w0).abs() < 0.1, "{wc} vs {w0}");
        assert!(w(&local, SpectrumAxis::B) >= 2.0 * wc);
        // collective dephasing still broadens along Omega_1
        assert!(w(&coll, SpectrumAxis::A) > 1.5 * w(&clean, SpectrumAxis::A));
    }

    #[test]
    fn doubling_gamma_doubles_excess_width_and_error() {
        let m = MsModel::new(1.0).unwrap();
        let s = SpinSqcSettings::for_model(&m);
        let floor = gate_error_point(&m, 0.0, &s).unwrap().fwhm_omega1.unwrap();
        for (g1, g2) in [(0.01, 0.02), (0.02, 0.04)] {
            let p1 = gate_error_point(&m, g1, &s).unwrap();
            let p2 = gate_error_point(&m, g2, &s).unwrap();
            let width_ratio = (p2.fwhm_omega1.unwrap() - floor) / (p1.fwhm_omega1.unwrap() - floor);
            let error_ratio = p2.error / p1.error;
            for r in [width_ratio, error_ratio] {
                assert!((r - 2.0).abs() < 0.4, "ratio {r} at {g1}/{g2}");
            }
        }
    }

    #[test]
    fn scan_keeps_input_order_and_fits_resolved_points() {
        let m = MsModel::new(1.0).unwrap();
        let s = SpinSqcSettings::for_model(&m);
        let gammas = [0.03, 0.01, 0.02];
        let scan = gate_error_scan(&m, &gammas, &s).unwrap();
        let got: Vec<f64> = scan.points.iter().map(|p| p.gamma).collect();
        assert_eq!(got, gammas);
        let fit = scan.fit.unwrap();
        assert_eq!(fit.n_points, 3);
        assert!(fit.slope > 0.0);
        assert!(scan.excluded.is_empty());
    }

    #[test]
    fn linear_fit_of_two_points_is_exact() {
        let f = linear_fit(&[1.0, 3.0], &[2.0, 8.0]).unwrap();
        assert!((f.slope - 3.0).abs() < 1e-15 && (f.intercept + 1.0).abs() < 1e-15);
        assert!(f.max_relative_residual < 1e-15);
        assert!(linear_fit(&[1.0], &[2.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[2.0, 3.0]).is_err());
    }

    #[test]
    fn scan_csv_has_one_row_per_point() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scan.csv");
        let pts = [
            GateErrorPoint {
                gamma: 0.01,
                fidelity: 0.99,
                error: 0.01,
                fwhm_omega1: Some(0.2),
            },
            GateErrorPoint {
                gamma: 0.02,
                fidelity: 0.98,
                error: 0.02,
                fwhm_omega1: None,
            },
        ];
        write_gate_error_csv(&path, &pts).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with(','));
    }
}

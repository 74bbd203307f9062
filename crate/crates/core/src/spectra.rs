//! One-sided Fourier transforms of delay-grid signals and lineshape analysis.
//!
//! The transform approximates `S(W) = int_0^inf dt e^{+i W t} S(t)` with the
//! trapezoid rule (half weight on the `t = 0` sample), an exponential window
//! `e^{-eta t}` and zero padding. A time-domain factor `e^{-i w t}` therefore
//! peaks at `W = +w`. Frequency axes are centred: bin `r` sits at
//! `(r - n/2) * dW` with `dW = 2 pi / (n_padded * dt)`.
//!
//! Normalization: with `x_k` the weighted, windowed samples,
//! `dt * sum |x_k|^2 = dW / (2 pi) * sum |X_r|^2` exactly (per transformed axis).

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::C64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeAxis {
    pub n: usize,
    pub dt: f64,
    pub label: String,
}

impl TimeAxis {
    pub fn new(n: usize, dt: f64, label: impl Into<String>) -> Self {
        TimeAxis {
            n,
            dt,
            label: label.into(),
        }
    }

    pub fn t_max(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|k| k as f64 * self.dt).collect()
    }
}

/// Complex signal sampled on `axis_a x axis_b`; row index runs over `axis_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalGrid2D {
    pub axis_a: TimeAxis,
    pub axis_b: TimeAxis,
    pub values: DMatrix<C64>,
}

impl SignalGrid2D {
    pub fn new(axis_a: TimeAxis, axis_b: TimeAxis, values: DMatrix<C64>) -> Result<Self> {
        if values.nrows() != axis_a.n || values.ncols() != axis_b.n {
            return Err(Error::DimensionMismatch {
                expected: axis_a.n * axis_b.n,
                found: values.len(),
            });
        }
        for ax in [&axis_a, &axis_b] {
            if !(ax.dt > 0.0) || !ax.dt.is_finite() {
                return Err(Error::invalid(format!("{}.dt", ax.label), "time step must be positive"));
            }
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("signal grid contains non-finite values".into()));
        }
        Ok(SignalGrid2D { axis_a, axis_b, values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisKind {
    Frequency,
    Time,
}

/// Uniform axis with `values[r] = origin + r * step`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub kind: AxisKind,
    pub n: usize,
    pub step: f64,
    pub origin: f64,
    pub label: String,
}

impl Axis {
    pub fn value(&self, r: f64) -> f64 {
        self.origin + r * self.step
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.n).map(|r| self.value(r as f64)).collect()
    }

    /// Nearest bin to `x`, if inside the axis range.
    pub fn bin_of(&self, x: f64) -> Option<usize> {
        let r = ((x - self.origin) / self.step).round();
        if r < 0.0 || r >= self.n as f64 {
            None
        } else {
            Some(r as usize)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum2D {
    pub axis_a: Axis,
    pub axis_b: Axis,
    pub values: DMatrix<C64>,
}

impl Spectrum2D {
    pub fn magnitudes(&self) -> DMatrix<f64> {
        self.values.map(|z| z.norm())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn axis(&self, which: SpectrumAxis) -> &Axis {
        match which {
            SpectrumAxis::A => &self.axis_a,
            SpectrumAxis::B => &self.axis_b,
        }
    }

    /// Magnitude at the bin nearest to `(a, b)`, or `None` outside the grid.
    pub fn magnitude_at(&self, a: f64, b: f64) -> Option<f64> {
        Some(self.values[(self.axis_a.bin_of(a)?, self.axis_b.bin_of(b)?)].norm())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformAxes {
    Both,
    /// Transform along axis a only; axis b stays a time axis.
    FirstOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpectrumAxis {
    A,
    B,
}

fn transform_line(planner: &mut FftPlanner<f64>, line: &[C64], dt: f64, eta: f64, n_pad: usize) -> Vec<C64> {
    let mut buf = vec![C64::new(0.0, 0.0); n_pad];
    for (k, &x) in line.iter().enumerate() {
        let w = if k == 0 { 0.5 } else { 1.0 };
        buf[k] = x * (w * (-eta * k as f64 * dt).exp() * dt);
    }
    // Inverse-direction FFT computes sum_k x_k e^{+2 pi i q k / N}.
    planner.plan_fft_inverse(n_pad).process(&mut buf);
    let half = n_pad / 2;
    (0..n_pad).map(|r| buf[(r + half) % n_pad]).collect()
}

fn frequency_axis(time: &TimeAxis, n_pad: usize) -> Axis {
    let step = 2.0 * PI / (n_pad as f64 * time.dt);
    Axis {
        kind: AxisKind::Frequency,
        n: n_pad,
        step,
        origin: -((n_pad / 2) as f64) * step,
        label: format!("omega_{}", time.label.trim_start_matches('t')),
    }
}

/// Default apodization for undamped signals: `3 / t_max`.
pub fn default_window(axis: &TimeAxis) -> f64 {
    3.0 / axis.t_max()
}

pub fn fourier_2d(signal: &SignalGrid2D, eta: [f64; 2], pad_factor: usize, axes: TransformAxes) -> Result<Spectrum2D> {
    if signal.axis_a.n == 0 || signal.axis_b.n == 0 {
        return Err(Error::invalid("signal", "empty grid"));
    }
    if pad_factor == 0 {
        return Err(Error::invalid("pad_factor", "must be at least 1"));
    }
    for (e, name) in eta.iter().zip(["eta_a", "eta_b"]) {
        if !(*e >= 0.0) || !e.is_finite() {
            return Err(Error::invalid(name, "window rate must be finite and non-negative"));
        }
    }
    let mut planner = FftPlanner::new();
    let (na, nb) = (signal.axis_a.n, signal.axis_b.n);
    let pa = na * pad_factor;
    let mut stage = DMatrix::<C64>::zeros(pa, nb);
    for col in 0..nb {
        let line: Vec<C64> = signal.values.column(col).iter().copied().collect();
        let out = transform_line(&mut planner, &line, signal.axis_a.dt, eta[0], pa);
        for (r, v) in out.into_iter().enumerate() {
            stage[(r, col)] = v;
        }
    }
    let axis_a = frequency_axis(&signal.axis_a, pa);
    match axes {
        TransformAxes::FirstOnly => Ok(Spectrum2D {
            axis_a,
            axis_b: Axis {
                kind: AxisKind::Time,
                n: nb,
                step: signal.axis_b.dt,
                origin: 0.0,
                label: signal.axis_b.label.clone(),
            },
            values: stage,
        }),
        TransformAxes::Both => {
            let pb = nb * pad_factor;
            let mut values = DMatrix::<C64>::zeros(pa, pb);
            for row in 0..pa {
                let line: Vec<C64> = stage.row(row).iter().copied().collect();
                let out = transform_line(&mut planner, &line, signal.axis_b.dt, eta[1], pb);
                for (c, v) in out.into_iter().enumerate() {
                    values[(row, c)] = v;
                }
            }
            Ok(Spectrum2D {
                axis_a,
                axis_b: frequency_axis(&signal.axis_b, pb),
                values,
            })
        }
    }
}

/// `v -> arcsinh(|v| / scale)`, for display only.
pub fn arcsinh_rescale(spectrum: &Spectrum2D, scale: f64) -> Result<Spectrum2D> {
    if !(scale > 0.0) {
        return Err(Error::invalid("scale", "must be positive"));
    }
    Ok(Spectrum2D {
        axis_a: spectrum.axis_a.clone(),
        axis_b: spectrum.axis_b.clone(),
        values: spectrum.values.map(|z| C64::new((z.norm() / scale).asinh(), 0.0)),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Width {
    Resolved(f64),
    Unresolved,
}

impl Width {
    pub fn value(&self) -> Option<f64> {
        match self {
            Width::Resolved(w) => Some(*w),
            Width::Unresolved => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub position: (f64, f64),
    pub bin: (usize, usize),
    pub magnitude: f64,
    pub fwhm_a: Option<f64>,
    pub fwhm_b: Option<f64>,
}

/// Vertex offset of the parabola through three samples, in bins (|offset| <= 0.5
/// for a local maximum).
fn parabolic_offset(left: f64, centre: f64, right: f64) -> f64 {
    let denom = left - 2.0 * centre + right;
    if denom.abs() < 1e-300 {
        return 0.0;
    }
    (0.5 * (left - right) / denom).clamp(-0.5, 0.5)
}

/// Local maxima of `|S|` over 8-neighbourhoods above `rel_threshold * max|S|`,
/// sorted by magnitude (descending) then by bin index. A plateau contributes its
/// first bin in row-major order; a plateau with no lower neighbour contributes nothing.
pub fn find_peaks(spectrum: &Spectrum2D, rel_threshold: f64) -> Result<Vec<Peak>> {
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(Error::invalid("rel_threshold", "must lie in (0, 1)"));
    }
    let mag = spectrum.magnitudes();
    let (na, nb) = mag.shape();
    let global = mag.iter().fold(0.0f64, |m, &x| m.max(x));
    if global == 0.0 {
        return Ok(Vec::new());
    }
    let cut = rel_threshold * global;
    let mut peaks = Vec::new();
    for i in 0..na {
        for j in 0..nb {
            let v = mag[(i, j)];
            if v <= cut {
                continue;
            }
            let mut is_peak = true;
            let mut any_lower = false;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= na as i64 || jj >= nb as i64 {
                        continue;
                    }
                    let w = mag[(ii as usize, jj as usize)];
                    let earlier = (di, dj) < (0, 0);
                    if w > v || (earlier && w == v) {
                        is_peak = false;
                        break 'nb;
                    }
                    any_lower |= w < v;
                }
            }
            if !is_peak || !any_lower {
                continue;
            }
            let off_a = if i > 0 && i + 1 < na {
                parabolic_offset(mag[(i - 1, j)], v, mag[(i + 1, j)])
            } else {
                0.0
            };
            let off_b = if j > 0 && j + 1 < nb {
                parabolic_offset(mag[(i, j - 1)], v, mag[(i, j + 1)])
            } else {
                0.0
            };
            let mut peak = Peak {
                position: (spectrum.axis_a.value(i as f64 + off_a), spectrum.axis_b.value(j as f64 + off_b)),
                bin: (i, j),
                magnitude: v,
                fwhm_a: None,
                fwhm_b: None,
            };
            if spectrum.axis_a.kind == AxisKind::Frequency {
                peak.fwhm_a = fwhm(spectrum, &peak, SpectrumAxis::A)?.value();
            }
            if spectrum.axis_b.kind == AxisKind::Frequency {
                peak.fwhm_b = fwhm(spectrum, &peak, SpectrumAxis::B)?.value();
            }
            peaks.push(peak);
        }
    }
    peaks.sort_by(|p, q| q.magnitude.total_cmp(&p.magnitude).then(p.bin.cmp(&q.bin)));
    Ok(peaks)
}

/// Full width at half maximum of the power `|S|^2` along one axis, through the
/// interpolated peak position. Crossings are located by linear interpolation
/// between bins. A peak whose immediate neighbours both fall below half
/// maximum, or whose half maximum is not bracketed inside the grid, is
/// reported as unresolved.
pub fn fwhm(spectrum: &Spectrum2D, peak: &Peak, axis: SpectrumAxis) -> Result<Width> {
    let (na, nb) = spectrum.values.shape();
    let (i0, j0) = peak.bin;
    if i0 >= na || j0 >= nb {
        return Err(Error::invalid("peak", "bin outside the spectrum grid"));
    }
    let power = |i: usize, j: usize| spectrum.values[(i, j)].norm_sqr();
    // Slice along `axis`, interpolated across the other axis.
    let (len, centre, slice): (usize, usize, Vec<f64>) = match axis {
        SpectrumAxis::A => {
            let frac = (peak.position.1 - spectrum.axis_b.value(j0 as f64)) / spectrum.axis_b.step;
            let other = if frac >= 0.0 { (j0 + 1).min(nb - 1) } else { j0.saturating_sub(1) };
            let w = frac.abs().min(1.0);
            (na, i0, (0..na).map(|i| (1.0 - w) * power(i, j0) + w * power(i, other)).collect())
        }
        SpectrumAxis::B => {
            let frac = (peak.position.0 - spectrum.axis_a.value(i0 as f64)) / spectrum.axis_a.step;
            let other = if frac >= 0.0 { (i0 + 1).min(na - 1) } else { i0.saturating_sub(1) };
            let w = frac.abs().min(1.0);
            (nb, j0, (0..nb).map(|j| (1.0 - w) * power(i0, j) + w * power(other, j)).collect())
        }
    };
    let step = spectrum.axis(axis).step;
    let top = if centre > 0 && centre + 1 < len {
        let (l, c, r) = (slice[centre - 1], slice[centre], slice[centre + 1]);
        let off = parabolic_offset(l, c, r);
        c - 0.25 * (l - r) * off
    } else {
        slice[centre]
    };
    let half = 0.5 * top;
    let left_ok = centre > 0 && slice[centre - 1] >= half;
    let right_ok = centre + 1 < len && slice[centre + 1] >= half;
    if !left_ok && !right_ok {
        return Ok(Width::Unresolved);
    }
    let mut left = None;
    for k in (0..centre).rev() {
        if slice[k] < half {
            let (lo, hi) = (slice[k], slice[k + 1]);
            left = Some(k as f64 + (half - lo) / (hi - lo));
            break;
        }
    }
    let mut right = None;
    for k in (centre + 1)..len {
        if slice[k] < half {
            let (hi, lo) = (slice[k - 1], slice[k]);
            right = Some((k - 1) as f64 + (hi - half) / (hi - lo));
            break;
        }
    }
    Ok(match (left, right) {
        (Some(l), Some(r)) => Width::Resolved((r - l) * step),
        _ => Width::Unresolved,
    })
}

/// Sorted frequencies with near-duplicates (closer than `tol`) merged.
pub fn distinct_frequencies(values: impl IntoIterator<Item = f64>, tol: f64) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        match out.last() {
            Some(&last) if x - last <= tol => {}
            _ => out.push(x),
        }
    }
    out
}

/// Least-squares amplitudes of `S(t_a, t_b) = sum_jk c_jk e^{-i (w_j t_a + v_k t_b)}`
/// on prescribed line frequencies.
#[derive(Clone, Debug)]
pub struct LineFit {
    pub freqs_a: Vec<f64>,
    pub freqs_b: Vec<f64>,
    /// `weights[(j, k)]` belongs to `(freqs_a[j], freqs_b[k])`.
    pub weights: DMatrix<C64>,
    /// `|S - fit|_F / |S|_F`; small only if the line set is complete and the lines undamped.
    pub relative_residual: f64,
}

impl LineFit {
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `|c|` of the line nearest to `(a, b)` within `tol` on both axes.
    pub fn weight_near(&self, a: f64, b: f64, tol: f64) -> Option<f64> {
        let nearest = |fs: &[f64], x: f64| {
            fs.iter()
                .enumerate()
                .filter(|(_, f)| (*f - x).abs() <= tol)
                .min_by(|p, q| (p.1 - x).abs().total_cmp(&(q.1 - x).abs()))
                .map(|(i, _)| i)
        };
        Some(self.weights[(nearest(&self.freqs_a, a)?, nearest(&self.freqs_b, b)?)].norm())
    }
}

fn tone_matrix(axis: &TimeAxis, freqs: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(axis.n, freqs.len(), |i, j| C64::new(0.0, -freqs[j] * i as f64 * axis.dt).exp())
}

pub fn fit_lines(signal: &SignalGrid2D, freqs_a: &[f64], freqs_b: &[f64]) -> Result<LineFit> {
    if freqs_a.is_empty() || freqs_b.is_empty() {
        return Err(Error::invalid("freqs", "at least one line per axis is required"));
    }
    if freqs_a.len() > signal.axis_a.n || freqs_b.len() > signal.axis_b.n {
        return Err(Error::invalid("freqs", "more lines than samples"));
    }
    let ea = tone_matrix(&signal.axis_a, freqs_a);
    let eb = tone_matrix(&signal.axis_b, freqs_b);
    let pinv = |m: DMatrix<C64>| {
        m.pseudo_inverse(1e-10)
            .map_err(|e| Error::Numerical(format!("line fit pseudo-inverse: {e}")))
    };
    let weights = pinv(ea.clone())? * &signal.values * pinv(eb.clone())?.transpose();
    let fitted = &ea * &weights * eb.transpose();
    let norm = signal.values.norm();
    let relative_residual = if norm > 0.0 { (&signal.values - fitted).norm() / norm } else { 0.0 };
    Ok(LineFit {
        freqs_a: freqs_a.to_vec(),
        freqs_b: freqs_b.to_vec(),
        weights,
        relative_residual,
    })
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a real grid as CSV: the first row holds the axis-b values, the first
/// column the axis-a values. Numbers use 17 significant digits.
pub fn write_grid_csv(path: &Path, corner: &str, axis_a: &[f64], axis_b: &[f64], data: &DMatrix<f64>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write!(out, "{corner}")?;
    for b in axis_b {
        write!(out, ",{}", fmt_num(*b))?;
    }
    writeln!(out)?;
    for (i, a) in axis_a.iter().enumerate() {
        write!(out, "{}", fmt_num(*a))?;
        for j in 0..axis_b.len() {
            write!(out, ",{}", fmt_num(data[(i, j)]))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Real and imaginary parts of a time-domain grid, as `<stem>_re.csv` / `<stem>_im.csv`.
pub fn write_signal_csv(dir: &Path, stem: &str, signal: &SignalGrid2D) -> Result<()> {
    let (a, b) = (signal.axis_a.values(), signal.axis_b.values());
    let corner = format!("{}\\{}", signal.axis_a.label, signal.axis_b.label);
    write_grid_csv(&dir.join(format!("{stem}_re.csv")), &corner, &a, &b, &signal.values.map(|z| z.re))?;
    write_grid_csv(&dir.join(format!("{stem}_im.csv")), &corner, &a, &b, &signal.values.map(|z| z.im))
}

/// `|S|`, `Re S` and `Im S` of a spectrum as `<stem>_abs.csv`, `<stem>_re.csv`, `<stem>_im.csv`.
pub fn write_spectrum_csv(dir: &Path, stem: &str, spectrum: &Spectrum2D) -> Result<()> {
    let (a, b) = (spectrum.axis_a.values(), spectrum.axis_b.values());
    let corner = format!("{}\\{}", spectrum.axis_a.label, spectrum.axis_b.label);
    write_grid_csv(&dir.join(format!("{stem}_abs.csv")), &corner, &a, &b, &spectrum.magnitudes())?;
    write_grid_csv(&dir.join(format!("{stem}_re.csv")), &corner, &a, &b, &spectrum.values.map(|z| z.re))?;
    write_grid_csv(&dir.join(format!("{stem}_im.csv")), &corner, &a, &b, &spectrum.values.map(|z| z.im))
}

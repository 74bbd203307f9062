//! C ABI for the ionspec simulator.
//!
//! Every fallible function returns an [`IonspecStatus`]; on failure the
//! message is kept in a thread-local slot readable through
//! [`ionspec_last_error`]. Objects cross the boundary as opaque handles that
//! the caller releases with the matching `*_free` function. Panics never
//! unwind into C: they are caught and reported as `IONSPEC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use ionspec::chain::{diagonalize_single_sector, ChainModel, ExcitonBasis};
use ionspec::cli::{self, ExperimentConfig, ExperimentKind};
use ionspec::spectra::Spectrum2D;
use ionspec::spins::{ms_gate_fidelity, ms_sqc_signal, MsModel, SpinNoise};
use ionspec::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonspecStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

/// Spin dephasing model selector for [`ionspec_gate_fidelity`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonspecSpinNoise {
    None = 0,
    Local = 1,
    Collective = 2,
}

/// Spectrum axis selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IonspecAxis {
    A = 0,
    B = 1,
}

/// Trapped-ion chain with its single-exciton eigenmodes.
pub struct IonspecChain {
    model: ChainModel,
    excitons: ExcitonBasis,
}

/// Parsed and resolved experiment config.
pub struct IonspecConfig {
    config: ExperimentConfig,
}

/// Complex 2D spectrum on two uniform frequency axes.
pub struct IonspecSpectrum {
    spectrum: Spectrum2D,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> IonspecStatus {
    match e {
        Error::Config(_) | Error::Json(_) => IonspecStatus::Config,
        Error::InvalidParameter { .. }
        | Error::SiteOutOfRange { .. }
        | Error::DimensionMismatch { .. }
        | Error::DimensionOverflow { .. }
        | Error::WrongBasisKind { .. } => IonspecStatus::InvalidArgument,
        Error::Io(_) => IonspecStatus::Io,
        _ => IonspecStatus::Numerical,
    }
}

struct Failure(IonspecStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

/// Runs `f` with panics and errors mapped onto a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> IonspecStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            IonspecStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            IonspecStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(IonspecStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(IonspecStatus::InvalidArgument, format!("`{what}` is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Copies `src` into `dst[..len]`; fails if `len` is too small.
unsafe fn copy_slice(src: &[f64], dst: *mut f64, len: usize, what: &str) -> Result<(), Failure> {
    if dst.is_null() {
        return Err(null(what));
    }
    if len < src.len() {
        return Err(Failure(
            IonspecStatus::BufferTooSmall,
            format!("`{what}` holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next ionspec call on the same thread.
#[no_mangle]
pub extern "C" fn ionspec_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ionspec_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from an ionspec function that transfers ownership and must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn ionspec_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds an `n_ions` chain with coupling `beta` and anharmonicity `u`.
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn ionspec_chain_new(n_ions: usize, beta: f64, u: f64, out: *mut *mut IonspecChain) -> IonspecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = ChainModel::for_chain(n_ions, beta, u)?;
        let excitons = diagonalize_single_sector(&model);
        write_out(out, Box::into_raw(Box::new(IonspecChain { model, excitons })), "out")
    })
}

/// # Safety
/// `chain` must be NULL or a handle from [`ionspec_chain_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ionspec_chain_free(chain: *mut IonspecChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// # Safety
/// `chain` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ionspec_chain_n_ions(chain: *const IonspecChain, out: *mut usize) -> IonspecStatus {
    guard(|| write_out(out, ref_arg(chain, "chain")?.model.n_ions, "out"))
}

/// Exciton frequencies (ascending) into `buf[..n_ions]`.
///
/// # Safety
/// `chain` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ionspec_chain_frequencies(chain: *const IonspecChain, buf: *mut f64, len: usize) -> IonspecStatus {
    guard(|| copy_slice(&ref_arg(chain, "chain")?.excitons.frequencies, buf, len, "buf"))
}

/// Site amplitudes of exciton `mode` into `buf[..n_ions]`.
///
/// # Safety
/// `chain` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ionspec_chain_mode(chain: *const IonspecChain, mode: usize, buf: *mut f64, len: usize) -> IonspecStatus {
    guard(|| {
        let c = ref_arg(chain, "chain")?;
        if mode >= c.model.n_ions {
            return Err(Failure(
                IonspecStatus::InvalidArgument,
                format!("mode {mode} out of range for {} ions", c.model.n_ions),
            ));
        }
        let column: Vec<f64> = c.excitons.modes.column(mode).iter().copied().collect();
        copy_slice(&column, buf, len, "buf")
    })
}

/// Parses and resolves a JSON experiment config.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ionspec_config_from_json(json: *const c_char, out: *mut *mut IonspecConfig) -> IonspecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = cli::parse_config(str_arg(json, "json")?, "<ffi>")?;
        write_out(out, Box::into_raw(Box::new(IonspecConfig { config })), "out")
    })
}

/// Loads a shipped preset by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ionspec_config_from_preset(name: *const c_char, out: *mut *mut IonspecConfig) -> IonspecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let config = cli::preset(str_arg(name, "name")?)?;
        write_out(out, Box::into_raw(Box::new(IonspecConfig { config })), "out")
    })
}

/// # Safety
/// `config` must be NULL or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ionspec_config_free(config: *mut IonspecConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Resolved config as pretty JSON; release with [`ionspec_string_free`].
///
/// # Safety
/// `config` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ionspec_config_resolved_json(config: *const IonspecConfig, out: *mut *mut c_char) -> IonspecStatus {
    guard(|| {
        let c = ref_arg(config, "config")?;
        let text = serde_json::to_string_pretty(&c.config).map_err(Error::from)?;
        let s = CString::new(text).map_err(|e| Failure(IonspecStatus::Numerical, e.to_string()))?;
        write_out(out, s.into_raw(), "out")
    })
}

/// Runs the experiment and writes all artifacts to `out_dir`.
///
/// # Safety
/// `config` must be a live handle and `out_dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn ionspec_run(config: *const IonspecConfig, out_dir: *const c_char) -> IonspecStatus {
    guard(|| {
        let c = ref_arg(config, "config")?;
        let dir = str_arg(out_dir, "out_dir")?;
        cli::run(&c.config, Some(Path::new(dir)))?;
        Ok(())
    })
}

/// Computes the 2D spectrum of an `sqc`, `dqc` or `spins-lineshape` config in memory.
///
/// # Safety
/// `config` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ionspec_spectrum_compute(config: *const IonspecConfig, out: *mut *mut IonspecSpectrum) -> IonspecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = &ref_arg(config, "config")?.config;
        let signal = match cfg.experiment {
            ExperimentKind::Sqc | ExperimentKind::Dqc => cli::phonon_scan(cfg)?.signal,
            ExperimentKind::SpinsLineshape => {
                let spins = cfg.spins.as_ref().expect("resolved spins");
                ms_sqc_signal(&MsModel::new(spins.omega)?, spins.noise, spins.gamma, &cli::spin_settings(cfg))?
            }
            other => {
                return Err(Failure(
                    IonspecStatus::InvalidArgument,
                    format!("`{}` does not produce a 2D spectrum", other.as_str()),
                ))
            }
        };
        let spectrum = cli::config_spectrum(cfg, &signal)?;
        write_out(out, Box::into_raw(Box::new(IonspecSpectrum { spectrum })), "out")
    })
}

/// # Safety
/// `spectrum` must be NULL or a live handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ionspec_spectrum_free(spectrum: *mut IonspecSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Number of bins along each axis.
///
/// # Safety
/// `spectrum` must be a live handle; `n_a` and `n_b` writable.
#[no_mangle]
pub unsafe extern "C" fn ionspec_spectrum_shape(spectrum: *const IonspecSpectrum, n_a: *mut usize, n_b: *mut usize) -> IonspecStatus {
    guard(|| {
        let s = &ref_arg(spectrum, "spectrum")?.spectrum;
        write_out(n_a, s.axis_a.n, "n_a")?;
        write_out(n_b, s.axis_b.n, "n_b")
    })
}

/// Frequency values of one axis.
///
/// # Safety
/// `spectrum` must be a live handle and `buf` must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ionspec_spectrum_axis(
    spectrum: *const IonspecSpectrum,
    axis: IonspecAxis,
    buf: *mut f64,
    len: usize,
) -> IonspecStatus {
    guard(|| {
        let s = &ref_arg(spectrum, "spectrum")?.spectrum;
        let values = match axis {
            IonspecAxis::A => s.axis_a.values(),
            IonspecAxis::B => s.axis_b.values(),
        };
        copy_slice(&values, buf, len, "buf")
    })
}

/// Real and imaginary parts in row-major order (`index = a * n_b + b`).
///
/// # Safety
/// `spectrum` must be a live handle; `re` and `im` must each hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ionspec_spectrum_values(
    spectrum: *const IonspecSpectrum,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> IonspecStatus {
    guard(|| {
        let s = &ref_arg(spectrum, "spectrum")?.spectrum;
        let (na, nb) = (s.axis_a.n, s.axis_b.n);
        let mut r = Vec::with_capacity(na * nb);
        let mut i = Vec::with_capacity(na * nb);
        for a in 0..na {
            for b in 0..nb {
                let z = s.values[(a, b)];
                r.push(z.re);
                i.push(z.im);
            }
        }
        copy_slice(&r, re, len, "re")?;
        copy_slice(&i, im, len, "im")
    })
}

/// Fidelity of the Mølmer-Sørensen gate with coupling `omega` under dephasing `gamma`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ionspec_gate_fidelity(
    omega: f64,
    gamma: f64,
    noise: IonspecSpinNoise,
    out: *mut f64,
) -> IonspecStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let kind = match noise {
            IonspecSpinNoise::None => SpinNoise::None,
            IonspecSpinNoise::Local => SpinNoise::Local,
            IonspecSpinNoise::Collective => SpinNoise::Collective,
        };
        let point = ms_gate_fidelity(&MsModel::new(omega)?, gamma, kind)?;
        write_out(out, point.fidelity, "out")
    })
}

//! C ABI for `thermo-core`.
//!
//! Spectra and baths are opaque heap objects created by `*_new`-style
//! constructors and released with the matching `*_free`. Every fallible
//! function returns a [`ThermoStatus`] and writes its result through an out
//! pointer; on failure a message is available from [`thermo_last_error`]
//! until the next failing call on the same thread. Panics never cross the
//! boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use thermo::bath::BathModel;
use thermo::error::Error;
use thermo::estimate::{mle, EstimationConfig};
use thermo::fisher::{empirical_fi_rate, fi_rate_exact, fi_rate_two_level, reset_bound, Variant};
use thermo::optimize::{optimize_asymptotic, optimize_two_level, OptimizationResult};
use thermo::spectrum::{EnergySpectrum, TwoLevelAnsatz};
use thermo::trajectory::SufficientStats;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThermoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A well-formed request with no answer, such as a flat objective.
    DomainError = 3,
    /// Estimation input without any manifold-crossing jump.
    NoJumps = 4,
    /// The likelihood equation has no admissible root.
    InvalidRoot = 5,
    /// Internal failure; the library state is unaffected.
    Panic = 6,
}

/// Opaque energy spectrum.
pub struct ThermoSpectrum(EnergySpectrum);

/// Opaque bath model.
pub struct ThermoBath(BathModel);

/// Measure-and-reset reference point.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ThermoResetBound {
    pub x_reset: f64,
    pub coefficient: f64,
    pub bound: f64,
}

/// Optimum of a gap search. `n0_star` is 0 when the search has no level
/// count; `c_star` is NaN when it has no degeneracy fraction.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ThermoOptimum {
    pub x_star: f64,
    pub c_star: f64,
    pub fi_rate: f64,
    pub coefficient_per_level: f64,
    pub n0_star: usize,
    pub converged: bool,
}

/// Sufficient statistics of a two-manifold record.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ThermoStats {
    pub k: u64,
    pub l: u64,
    pub tau0: f64,
    pub tau: f64,
}

/// Maximum-likelihood temperature estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ThermoMle {
    pub t_hat: f64,
    pub occupation_hat: f64,
    pub valid: bool,
    pub log_likelihood: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> ThermoStatus {
    match e {
        Error::NoJumps => ThermoStatus::NoJumps,
        Error::InvalidRoot { .. } => ThermoStatus::InvalidRoot,
        Error::NoBracket { .. } | Error::AbsorbingState { .. } | Error::SingularPopulation { .. } => {
            ThermoStatus::DomainError
        }
        _ => ThermoStatus::InvalidArgument,
    }
}

// Runs `f`, translating errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (ThermoStatus, String)>) -> ThermoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ThermoStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            ThermoStatus::Panic
        }
    }
}

fn core<T>(r: Result<T, Error>) -> Result<T, (ThermoStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (ThermoStatus, String)> {
    p.as_ref()
        .ok_or_else(|| (ThermoStatus::NullPointer, format!("{name} is null")))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), (ThermoStatus, String)> {
    if out.is_null() {
        return Err((ThermoStatus::NullPointer, "output pointer is null".into()));
    }
    out.write(value);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn thermo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn thermo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Spectrum from `len` level values (in units of k_B T or energies,
/// depending on use).
#[no_mangle]
pub unsafe extern "C" fn thermo_spectrum_new(
    levels: *const f64,
    len: usize,
    out: *mut *mut ThermoSpectrum,
) -> ThermoStatus {
    guard(|| {
        if levels.is_null() {
            return Err((ThermoStatus::NullPointer, "levels is null".into()));
        }
        let values = std::slice::from_raw_parts(levels, len).to_vec();
        let spec = core(EnergySpectrum::new(values))?;
        write(out, Box::into_raw(Box::new(ThermoSpectrum(spec))))
    })
}

/// Two-level spectrum: `n0` levels at 0 and `n - n0` at `x`.
#[no_mangle]
pub unsafe extern "C" fn thermo_spectrum_two_level(
    n: usize,
    n0: usize,
    x: f64,
    out: *mut *mut ThermoSpectrum,
) -> ThermoStatus {
    guard(|| {
        let a = core(TwoLevelAnsatz::new(n, n0, x))?;
        write(out, Box::into_raw(Box::new(ThermoSpectrum(a.to_spectrum()))))
    })
}

/// Number of levels, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn thermo_spectrum_len(spectrum: *const ThermoSpectrum) -> usize {
    spectrum.as_ref().map_or(0, |s| s.0.len())
}

/// Releases a spectrum; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn thermo_spectrum_free(spectrum: *mut ThermoSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

#[no_mangle]
pub unsafe extern "C" fn thermo_bath_fermionic(gamma: f64, out: *mut *mut ThermoBath) -> ThermoStatus {
    guard(|| {
        let bath = core(BathModel::fermionic(gamma))?;
        write(out, Box::into_raw(Box::new(ThermoBath(bath))))
    })
}

/// Bosonic bath with ohmicity `s > 1`.
#[no_mangle]
pub unsafe extern "C" fn thermo_bath_bosonic(gamma: f64, s: f64, out: *mut *mut ThermoBath) -> ThermoStatus {
    guard(|| {
        let bath = core(BathModel::bosonic(gamma, s))?;
        write(out, Box::into_raw(Box::new(ThermoBath(bath))))
    })
}

/// Releases a bath; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn thermo_bath_free(bath: *mut ThermoBath) {
    if !bath.is_null() {
        drop(Box::from_raw(bath));
    }
}

/// Dimensionless FI rate of a spectrum given in units of k_B T.
#[no_mangle]
pub unsafe extern "C" fn thermo_fi_rate_exact(
    spectrum: *const ThermoSpectrum,
    bath: *const ThermoBath,
    out: *mut f64,
) -> ThermoStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        let b = deref(bath, "bath")?;
        write(out, fi_rate_exact(&s.0, &b.0).value())
    })
}

/// Closed-form FI rate of the two-level spectrum `(n, n0, x)`.
#[no_mangle]
pub unsafe extern "C" fn thermo_fi_rate_two_level(
    n: usize,
    n0: usize,
    x: f64,
    bath: *const ThermoBath,
    out: *mut f64,
) -> ThermoStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        let a = core(TwoLevelAnsatz::new(n, n0, x))?;
        write(out, fi_rate_two_level(&a, &b.0).value())
    })
}

/// FI rate available from time-averaged populations only.
#[no_mangle]
pub unsafe extern "C" fn thermo_empirical_fi_rate(
    spectrum: *const ThermoSpectrum,
    bath: *const ThermoBath,
    out: *mut f64,
) -> ThermoStatus {
    guard(|| {
        let s = deref(spectrum, "spectrum")?;
        let b = deref(bath, "bath")?;
        write(out, core(empirical_fi_rate(&s.0, &b.0))?.value())
    })
}

#[no_mangle]
pub unsafe extern "C" fn thermo_reset_bound(
    n: usize,
    bath: *const ThermoBath,
    out: *mut ThermoResetBound,
) -> ThermoStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        let r = core(reset_bound(n, &b.0))?;
        write(
            out,
            ThermoResetBound {
                x_reset: r.x_reset,
                coefficient: r.coefficient,
                bound: r.bound,
            },
        )
    })
}

fn optimum(r: &OptimizationResult) -> ThermoOptimum {
    ThermoOptimum {
        x_star: r.x_star,
        c_star: r.c_star.unwrap_or(f64::NAN),
        fi_rate: r.fi_rate,
        coefficient_per_level: r.coefficient_per_level,
        n0_star: r.n0_star.unwrap_or(0),
        converged: r.converged,
    }
}

/// Large-N optimum per level; `empirical` selects the population-only rate.
#[no_mangle]
pub unsafe extern "C" fn thermo_optimize_asymptotic(
    bath: *const ThermoBath,
    empirical: bool,
    out: *mut ThermoOptimum,
) -> ThermoStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        let variant = if empirical {
            Variant::Empirical
        } else {
            Variant::Monitored
        };
        let r = core(optimize_asymptotic(&b.0, variant))?;
        write(out, optimum(&r))
    })
}

/// Best two-level spectrum with `n` levels.
#[no_mangle]
pub unsafe extern "C" fn thermo_optimize_two_level(
    n: usize,
    bath: *const ThermoBath,
    out: *mut ThermoOptimum,
) -> ThermoStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        let r = core(optimize_two_level(n, &b.0))?;
        write(out, optimum(&r))
    })
}

/// Maximum-likelihood temperature for a two-level probe `(n, n0)` with
/// physical gap `epsilon`, using the bath's coupling as the known one.
#[no_mangle]
pub unsafe extern "C" fn thermo_mle(
    stats: *const ThermoStats,
    n: usize,
    n0: usize,
    epsilon: f64,
    bath: *const ThermoBath,
    out: *mut ThermoMle,
) -> ThermoStatus {
    guard(|| {
        let st = deref(stats, "stats")?;
        let b = deref(bath, "bath")?;
        let a = core(TwoLevelAnsatz::new(n, n0, epsilon))?;
        let cfg = core(EstimationConfig::new(a, b.0))?;
        let stats = SufficientStats {
            k: st.k,
            l: st.l,
            tau0: st.tau0,
            tau: st.tau,
        };
        let r = core(mle(&stats, &cfg))?;
        write(
            out,
            ThermoMle {
                t_hat: r.t_hat,
                occupation_hat: r.occupation_hat,
                valid: r.valid,
                log_likelihood: r.log_likelihood_at_hat,
            },
        )
    })
}

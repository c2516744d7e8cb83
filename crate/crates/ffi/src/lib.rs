//! C interface to `fluxtheo`.
//!
//! Objects are opaque handles created by the constructor functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`FluxStatus`]; on failure [`flux_last_error`] describes the cause. Arrays
//! are caller-allocated: pass a buffer and its length, and the call reports
//! the length it needs through `required` when the buffer is too short.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fluxtheo::ame::{AnnealSpec, AnnealSpecFile, PropagateOptions};
use fluxtheo::experiment::{simulate, AnnealRun};
use fluxtheo::fluctuation::{efficacy, forward_pdf, ObservableDistribution, ProtocolSpec, VChoice};
use fluxtheo::scenario::ProtocolBlock;
use fluxtheo::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Domain = 4,
    Numerical = 5,
    Io = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> FluxStatus {
    match e {
        Error::Validation(_) | Error::Json(_) | Error::Csv(_) => FluxStatus::InvalidArgument,
        Error::DimensionMismatch { .. } => FluxStatus::DimensionMismatch,
        Error::Domain(_) => FluxStatus::Domain,
        Error::Numerical(_) => FluxStatus::Numerical,
        Error::Io(_) => FluxStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (FluxStatus, String)>) -> FluxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FluxStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FluxStatus::Panic
        }
    }
}

fn lib<T>(r: fluxtheo::Result<T>) -> Result<T, (FluxStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, (FluxStatus, String)> {
    // SAFETY: the caller passes either null or a pointer obtained from this
    // library that has not been freed.
    unsafe { p.as_ref() }.ok_or((FluxStatus::NullPointer, format!("{what} is null")))
}

fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FluxStatus, String)> {
    if p.is_null() {
        return Err((FluxStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: non-null and NUL-terminated by contract.
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| (FluxStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn store<T>(out: *mut *mut T, value: T) -> Result<(), (FluxStatus, String)> {
    if out.is_null() {
        return Err((FluxStatus::NullPointer, "output handle pointer is null".into()));
    }
    // SAFETY: `out` is non-null and points to writable storage for a pointer.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn write_slice(src: &[f64], out: *mut f64, len: usize, required: *mut usize) -> Result<(), (FluxStatus, String)> {
    if !required.is_null() {
        // SAFETY: non-null, writable by contract.
        unsafe { *required = src.len() };
    }
    if len < src.len() {
        return Err((FluxStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", src.len())));
    }
    if out.is_null() {
        return Err((FluxStatus::NullPointer, "output buffer is null".into()));
    }
    // SAFETY: `out` has room for at least `len >= src.len()` values.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), out, src.len()) };
    Ok(())
}

fn write_value(v: f64, out: *mut f64) -> Result<(), (FluxStatus, String)> {
    if out.is_null() {
        return Err((FluxStatus::NullPointer, "output pointer is null".into()));
    }
    // SAFETY: non-null, writable by contract.
    unsafe { *out = v };
    Ok(())
}

/// Message of the last failed call on this thread, empty if none. Valid
/// until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn flux_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn flux_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Two-qubit master-equation anneal description.
pub struct FluxAnnealSpec(AnnealSpec);

/// Result of one simulated anneal.
pub struct FluxAnnealRun(AnnealRun);

/// Measure-evolve-measure protocol.
pub struct FluxProtocol {
    spec: ProtocolSpec,
    forward: ObservableDistribution,
}

/// Two qubits with fields `h`, coupling `j`, anneal time in microseconds,
/// inverse temperature in 1/GHz and bath coupling `kappa`.
#[no_mangle]
pub extern "C" fn flux_anneal_spec_two_qubit(
    h: f64,
    j: f64,
    t_f_us: f64,
    beta: f64,
    kappa: f64,
    out: *mut *mut FluxAnnealSpec,
) -> FluxStatus {
    guard(|| store(out, FluxAnnealSpec(lib(AnnealSpec::two_qubit(h, j, t_f_us, beta, kappa))?)))
}

/// Anneal spec from its JSON form. Schedule files are resolved against the
/// working directory.
#[no_mangle]
pub extern "C" fn flux_anneal_spec_from_json(json: *const c_char, out: *mut *mut FluxAnnealSpec) -> FluxStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let file: AnnealSpecFile = lib(serde_json::from_str(text).map_err(Error::from))?;
        store(out, FluxAnnealSpec(lib(file.build(None))?))
    })
}

/// Hilbert-space dimension, 0 for a null handle.
#[no_mangle]
pub extern "C" fn flux_anneal_spec_dim(spec: *const FluxAnnealSpec) -> usize {
    // SAFETY: null or a live handle.
    unsafe { spec.as_ref() }.map_or(0, |s| s.0.dim())
}

#[no_mangle]
pub extern "C" fn flux_anneal_spec_free(spec: *mut FluxAnnealSpec) {
    if !spec.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(spec) });
    }
}

/// Integrates the anneal from the Gibbs state of `H(0)`. `ode_tol <= 0`
/// selects the default local error target.
#[no_mangle]
pub extern "C" fn flux_anneal_simulate(
    spec: *const FluxAnnealSpec,
    ode_tol: f64,
    out: *mut *mut FluxAnnealRun,
) -> FluxStatus {
    guard(|| {
        let spec = non_null(spec, "spec")?;
        let mut options = PropagateOptions::default();
        if ode_tol > 0.0 {
            options = options.with_tol(ode_tol);
        }
        store(out, FluxAnnealRun(lib(simulate(&spec.0, &options))?))
    })
}

/// Final occupations of the computational basis states, qubit 0 as the most
/// significant bit.
#[no_mangle]
pub extern "C" fn flux_anneal_run_occupations(
    run: *const FluxAnnealRun,
    out: *mut f64,
    len: usize,
    required: *mut usize,
) -> FluxStatus {
    guard(|| write_slice(&non_null(run, "run")?.0.f, out, len, required))
}

/// `<v> = beta(<epsilon(t_f)> - <epsilon(0)> - Delta F)`.
#[no_mangle]
pub extern "C" fn flux_anneal_run_mean_v(run: *const FluxAnnealRun, out: *mut f64) -> FluxStatus {
    guard(|| write_value(non_null(run, "run")?.0.mean_v(), out))
}

/// Both sides of the exponential-average identity: the average over the
/// transition statistics and `Tr[rho_G(t_f) E(1)]`.
#[no_mangle]
pub extern "C" fn flux_anneal_run_efficacy(run: *const FluxAnnealRun, lhs: *mut f64, rhs: *mut f64) -> FluxStatus {
    guard(|| {
        let q = lib(non_null(run, "run")?.0.qje())?;
        write_value(q.lhs, lhs)?;
        write_value(q.rhs, rhs)
    })
}

/// Transition probabilities `p(beta|alpha)` between energy eigenstates,
/// row-major with rows indexed by the final level.
#[no_mangle]
pub extern "C" fn flux_anneal_run_transitions(
    run: *const FluxAnnealRun,
    out: *mut f64,
    len: usize,
    required: *mut usize,
) -> FluxStatus {
    guard(|| {
        let t = &non_null(run, "run")?.0.statistics.transitions;
        let d = t.entries().nrows();
        let flat: Vec<f64> = (0..d).flat_map(|b| (0..d).map(move |a| t.get(b, a))).collect();
        write_slice(&flat, out, len, required)
    })
}

#[no_mangle]
pub extern "C" fn flux_anneal_run_free(run: *mut FluxAnnealRun) {
    if !run.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(run) });
    }
}

/// Protocol from the JSON `protocol` block of a scenario file.
#[no_mangle]
pub extern "C" fn flux_protocol_from_json(json: *const c_char, out: *mut *mut FluxProtocol) -> FluxStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        let block: ProtocolBlock = lib(serde_json::from_str(text).map_err(Error::from))?;
        let spec = lib(block.build())?;
        let forward = lib(forward_pdf(&spec, VChoice::LogPQ))?;
        store(out, FluxProtocol { spec, forward })
    })
}

/// `gamma = <e^{-v}>` for `v = ln(p_alpha / q_beta)`.
#[no_mangle]
pub extern "C" fn flux_protocol_efficacy(p: *const FluxProtocol, out: *mut f64) -> FluxStatus {
    guard(|| write_value(lib(efficacy(&non_null(p, "protocol")?.spec))?.value(), out))
}

#[no_mangle]
pub extern "C" fn flux_protocol_mean_v(p: *const FluxProtocol, out: *mut f64) -> FluxStatus {
    guard(|| write_value(non_null(p, "protocol")?.forward.mean(), out))
}

/// `<e^{lambda v}>` over the forward distribution.
#[no_mangle]
pub extern "C" fn flux_protocol_mgf(p: *const FluxProtocol, lambda: f64, out: *mut f64) -> FluxStatus {
    guard(|| write_value(non_null(p, "protocol")?.forward.mgf(lambda), out))
}

#[no_mangle]
pub extern "C" fn flux_protocol_free(p: *mut FluxProtocol) {
    if !p.is_null() {
        // SAFETY: created by `Box::into_raw` in this library and freed once.
        drop(unsafe { Box::from_raw(p) });
    }
}

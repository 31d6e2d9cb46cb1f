//! C ABI over `pwcycles`.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every fallible call returns a
//! [`PwcStatus`]; on failure [`pwc_last_error_message`] describes it.
//! Strings returned to the caller are freed with [`pwc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use pwcycles::bifurcation::lyapunov_v2_leading;
use pwcycles::certify::{certify_chain, certify_level0, CountReport};
use pwcycles::field::PiecewiseField;
use pwcycles::hamiltonian_family::{build_level, default_tables, expected_cycles, field_degree, HamiltonianLevel};
use pwcycles::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PwcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Precondition = 3,
    Numerical = 4,
    Serialization = 5,
    Panic = 6,
}

/// Assembled level of the recursive family.
pub struct PwcLevel(HamiltonianLevel);

/// Piecewise polynomial vector field.
pub struct PwcField(PiecewiseField);

/// Cycle count of one level.
pub struct PwcReport(CountReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> PwcStatus {
    match e {
        Error::InvalidArgument(_) | Error::Domain(_) | Error::DegenerateInterval { .. } => PwcStatus::InvalidArgument,
        Error::Precondition(_)
        | Error::ConditionA(_)
        | Error::ConditionB(_)
        | Error::MonodromyMissing
        | Error::DegreeOverflow { .. } => PwcStatus::Precondition,
        Error::Serde(_) | Error::Io(_) => PwcStatus::Serialization,
        _ => PwcStatus::Numerical,
    }
}

/// Runs `f`, recording any error or panic for `pwc_last_error_message`.
fn guard<F: FnOnce() -> Result<(), (PwcStatus, String)>>(f: F) -> PwcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PwcStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PwcStatus::Panic
        }
    }
}

fn lib<T>(r: pwcycles::Result<T>) -> Result<T, (PwcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (PwcStatus, String) {
    (PwcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PwcStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), (PwcStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], (PwcStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null("array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn to_c_string(s: String) -> Result<*mut c_char, (PwcStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| (PwcStatus::Serialization, e.to_string()))
}

fn json<T: serde::Serialize>(v: &T) -> Result<*mut c_char, (PwcStatus, String)> {
    let s = serde_json::to_string(v).map_err(|e| (PwcStatus::Serialization, e.to_string()))?;
    to_c_string(s)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pwc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn pwc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pwc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// `c_k = 3 k 2^(k-1) + 1`.
#[no_mangle]
pub extern "C" fn pwc_expected_cycles(k: usize) -> u64 {
    expected_cycles(k)
}

/// `n_k = 3 2^k - 1`.
#[no_mangle]
pub extern "C" fn pwc_field_degree(k: usize) -> usize {
    field_degree(k)
}

/// Level `k` with the default coefficient tables.
///
/// # Safety
/// `epsilon_vector` must hold `len` doubles (it may be null when `len` is 0);
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_level_build(
    k: usize,
    epsilon: f64,
    epsilon_vector: *const f64,
    len: usize,
    out: *mut *mut PwcLevel,
) -> PwcStatus {
    guard(|| {
        let evec = slice(epsilon_vector, len)?;
        let tables = lib(default_tables(k))?;
        let level = lib(build_level(k, epsilon, evec, &tables))?;
        write_out(out, Box::into_raw(Box::new(PwcLevel(level))))
    })
}

/// # Safety
/// `level` must come from [`pwc_level_build`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pwc_level_free(level: *mut PwcLevel) {
    if !level.is_null() {
        drop(Box::from_raw(level));
    }
}

/// The vector field of a level.
///
/// # Safety
/// `level` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_level_field(level: *const PwcLevel, out: *mut *mut PwcField) -> PwcStatus {
    guard(|| {
        let l = deref(level, "level")?;
        write_out(out, Box::into_raw(Box::new(PwcField(l.0.field()))))
    })
}

/// JSON of the level record.
///
/// # Safety
/// `level` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_level_to_json(level: *const PwcLevel, out: *mut *mut c_char) -> PwcStatus {
    guard(|| {
        let l = deref(level, "level")?;
        write_out(out, json(&l.0)?)
    })
}

/// Parses a field from JSON.
///
/// # Safety
/// `text` must be a nul-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_field_from_json(text: *const c_char, out: *mut *mut PwcField) -> PwcStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (PwcStatus::InvalidArgument, e.to_string()))?;
        let z: PiecewiseField = serde_json::from_str(s).map_err(|e| (PwcStatus::Serialization, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(PwcField(z))))
    })
}

/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_field_to_json(field: *const PwcField, out: *mut *mut c_char) -> PwcStatus {
    guard(|| {
        let z = deref(field, "field")?;
        write_out(out, json(&z.0)?)
    })
}

/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_field_get_degree(field: *const PwcField, out: *mut usize) -> PwcStatus {
    guard(|| {
        let z = deref(field, "field")?;
        write_out(out, z.0.degree())
    })
}

/// `(P, Q)` at `(x, y)`, the upper piece for `x > 0`.
///
/// # Safety
/// `field` must be a live handle and `out` must hold two doubles.
#[no_mangle]
pub unsafe extern "C" fn pwc_field_eval(field: *const PwcField, x: f64, y: f64, out: *mut f64) -> PwcStatus {
    guard(|| {
        let z = deref(field, "field")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let v = z.0.eval(x, y);
        out.write(v[0]);
        out.add(1).write(v[1]);
        Ok(())
    })
}

/// # Safety
/// `field` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pwc_field_free(field: *mut PwcField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Certifies the level-0 cycle at `epsilon`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_certify_level0(epsilon: f64, out: *mut *mut PwcReport) -> PwcStatus {
    guard(|| {
        let r = lib(certify_level0(epsilon))?;
        write_out(out, Box::into_raw(Box::new(PwcReport(r))))
    })
}

/// Certifies levels `0..=k` and returns the report of level `k`.
///
/// # Safety
/// `epsilon_vector` must hold `len` doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_certify_level(
    k: usize,
    epsilon: f64,
    epsilon_vector: *const f64,
    len: usize,
    out: *mut *mut PwcReport,
) -> PwcStatus {
    guard(|| {
        let evec = slice(epsilon_vector, len)?;
        let reports = lib(certify_chain(k, epsilon, evec, &Default::default()))?;
        let top = reports
            .into_iter()
            .find(|r| r.level == k)
            .ok_or_else(|| (PwcStatus::Numerical, format!("no report for level {k}")))?;
        write_out(out, Box::into_raw(Box::new(PwcReport(top))))
    })
}

/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_report_found(report: *const PwcReport, out: *mut u64) -> PwcStatus {
    guard(|| write_out(out, deref(report, "report")?.0.found))
}

/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_report_expected(report: *const PwcReport, out: *mut u64) -> PwcStatus {
    guard(|| write_out(out, deref(report, "report")?.0.expected))
}

/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_report_passed(report: *const PwcReport, out: *mut bool) -> PwcStatus {
    guard(|| write_out(out, deref(report, "report")?.0.passed()))
}

/// Seconds spent producing the report; not part of its JSON.
///
/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_report_wall_clock(report: *const PwcReport, out: *mut f64) -> PwcStatus {
    guard(|| write_out(out, deref(report, "report")?.0.wall_clock_seconds))
}

/// # Safety
/// `report` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_report_to_json(report: *const PwcReport, out: *mut *mut c_char) -> PwcStatus {
    guard(|| {
        let r = deref(report, "report")?;
        write_out(out, json(&r.0)?)
    })
}

/// # Safety
/// `report` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pwc_report_free(report: *mut PwcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Leading `1/eps` term of the second Lyapunov coefficient of the lifted
/// two-fold, from the field values at the origin.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pwc_lyapunov_v2_leading(pp: f64, qp: f64, pm: f64, qm: f64, epsilon: f64, out: *mut f64) -> PwcStatus {
    guard(|| write_out(out, lib(lyapunov_v2_leading(pp, qp, pm, qm, epsilon))?))
}

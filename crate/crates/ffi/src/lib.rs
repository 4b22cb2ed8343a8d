//! C ABI over the qutrit-transfer simulator.
//!
//! Every fallible call returns a [`QstStatus`]; on failure a message is
//! kept per thread and can be copied out with [`qst_last_error_message`].
//! Handles are opaque and must be released with their `_free` function.
//! Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use qutrit_transfer::config::{parse_config_with_overrides, RunConfig};
use qutrit_transfer::experiments::{run_sweep, SweepKind, SweepResult};
use qutrit_transfer::model::angular_to_mhz;
use qutrit_transfer::output::write_csv;
use qutrit_transfer::protocol::TransferResult;
use qutrit_transfer::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QstStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Numerical = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QstSweepKind {
    Detuning = 0,
    StateGrid = 1,
    Coupling = 2,
    Convergence = 3,
}

impl From<QstSweepKind> for SweepKind {
    fn from(k: QstSweepKind) -> Self {
        match k {
            QstSweepKind::Detuning => SweepKind::Detuning,
            QstSweepKind::StateGrid => SweepKind::StateGrid,
            QstSweepKind::Coupling => SweepKind::Coupling,
            QstSweepKind::Convergence => SweepKind::Convergence,
        }
    }
}

/// Scalar outcome of one transfer. Frequencies are ω/2π in MHz, times in ns.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct QstTransferSummary {
    pub fidelity: f64,
    pub lambda1_mhz: f64,
    pub lambda2_mhz: f64,
    pub t1_ns: f64,
    pub t2_ns: f64,
    pub q_a: f64,
    pub q_b: f64,
    pub peak_photons: f64,
    pub max_trace_error: f64,
    pub min_eigenvalue: f64,
}

/// Configuration: the source text plus `key=value` overrides, revalidated
/// on every change.
pub struct QstConfig {
    text: String,
    overrides: Vec<String>,
    parsed: RunConfig,
}

pub struct QstTransfer {
    result: TransferResult,
}

pub struct QstSweep {
    result: SweepResult,
    columns: Vec<CString>,
    metadata: Vec<(String, String)>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> QstStatus {
    match e {
        Error::Config { .. } => QstStatus::Config,
        Error::Io { .. } => QstStatus::Io,
        Error::StepLimit { .. } | Error::TraceDrift { .. } => QstStatus::Numerical,
        _ => QstStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (QstStatus, String)>) -> QstStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QstStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            QstStatus::Panic
        }
    }
}

fn lib(e: Error) -> (QstStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QstStatus, String) {
    (QstStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QstStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (QstStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (QstStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (QstStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

fn new_config(text: String, overrides: Vec<String>) -> Result<Box<QstConfig>, (QstStatus, String)> {
    let mut parsed = parse_config_with_overrides(&text, &overrides).map_err(lib)?;
    parsed
        .apply_workers_override(std::env::var(qutrit_transfer::config::WORKERS_ENV).ok().as_deref())
        .map_err(lib)?;
    Ok(Box::new(QstConfig {
        text,
        overrides,
        parsed,
    }))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qst_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`) and returns the full message length
/// including the terminator; 0 when there is no error.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn qst_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Default configuration.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn qst_config_new(out: *mut *mut QstConfig) -> QstStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(new_config(String::new(), Vec::new())?);
        Ok(())
    })
}

/// Configuration parsed from `key = value` text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn qst_config_from_str(text: *const c_char, out: *mut *mut QstConfig) -> QstStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(new_config(text.to_string(), Vec::new())?);
        Ok(())
    })
}

/// Sets one key. On error the configuration is left unchanged.
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qst_config_set(cfg: *mut QstConfig, key: *const c_char, value: *const c_char) -> QstStatus {
    guard(|| {
        let cfg = out_arg(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let mut overrides = cfg.overrides.clone();
        overrides.push(format!("{key}={value}"));
        let next = new_config(cfg.text.clone(), overrides)?;
        *cfg = *next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn qst_config_free(cfg: *mut QstConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one transfer.
///
/// # Safety
/// `cfg` must come from this library; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn qst_transfer_run(cfg: *const QstConfig, out: *mut *mut QstTransfer) -> QstStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        let result = cfg.parsed.scenario.run().map_err(lib)?;
        *out = Box::into_raw(Box::new(QstTransfer { result }));
        Ok(())
    })
}

/// # Safety
/// `t` must come from this library; `out` valid for a struct write.
#[no_mangle]
pub unsafe extern "C" fn qst_transfer_summary(t: *const QstTransfer, out: *mut QstTransferSummary) -> QstStatus {
    guard(|| {
        let r = &handle(t, "transfer")?.result;
        let out = out_arg(out, "out")?;
        *out = QstTransferSummary {
            fidelity: r.fidelity,
            lambda1_mhz: angular_to_mhz(r.schedule.lambda1),
            lambda2_mhz: angular_to_mhz(r.schedule.lambda2),
            t1_ns: r.schedule.t1,
            t2_ns: r.schedule.t2,
            q_a: r.q_a,
            q_b: r.q_b,
            peak_photons: r.peak_photons(),
            max_trace_error: r.max_trace_error(),
            min_eigenvalue: r.min_eigenvalue(),
        };
        Ok(())
    })
}

/// # Safety
/// `t` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn qst_transfer_free(t: *mut QstTransfer) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Runs a parameter sweep with the configuration's sweep settings.
///
/// # Safety
/// `cfg` must come from this library; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn qst_sweep_run(cfg: *const QstConfig, kind: QstSweepKind, out: *mut *mut QstSweep) -> QstStatus {
    guard(|| {
        let cfg = handle(cfg, "cfg")?;
        let out = out_arg(out, "out")?;
        let result = run_sweep(kind.into(), &cfg.parsed.scenario, &cfg.parsed.sweep).map_err(lib)?;
        let columns = result
            .columns()
            .into_iter()
            .map(|c| CString::new(c).expect("column names have no NUL"))
            .collect();
        *out = Box::into_raw(Box::new(QstSweep {
            result,
            columns,
            metadata: cfg.parsed.metadata(),
        }));
        Ok(())
    })
}

/// Number of rows; 0 for a null handle.
///
/// # Safety
/// `s` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn qst_sweep_rows(s: *const QstSweep) -> usize {
    s.as_ref().map_or(0, |s| s.result.rows.len())
}

/// Number of columns per row; 0 for a null handle.
///
/// # Safety
/// `s` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn qst_sweep_columns(s: *const QstSweep) -> usize {
    s.as_ref().map_or(0, |s| s.columns.len())
}

/// Name of column `i`, valid until the sweep is freed; null when out of
/// range.
///
/// # Safety
/// `s` must be null or come from this library.
#[no_mangle]
pub unsafe extern "C" fn qst_sweep_column_name(s: *const QstSweep, i: usize) -> *const c_char {
    s.as_ref()
        .and_then(|s| s.columns.get(i))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Copies row `i` into `buf`, which must hold `qst_sweep_columns` values.
///
/// # Safety
/// `s` must come from this library; `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qst_sweep_row(s: *const QstSweep, i: usize, buf: *mut f64, len: usize) -> QstStatus {
    guard(|| {
        let s = handle(s, "sweep")?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let row = s
            .result
            .rows
            .get(i)
            .ok_or_else(|| (QstStatus::OutOfRange, format!("row {i} of {}", s.result.rows.len())))?;
        let values = SweepResult::row_values(row);
        if len < values.len() {
            return Err((QstStatus::OutOfRange, format!("buffer holds {len} values, row has {}", values.len())));
        }
        ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
        Ok(())
    })
}

/// Writes the sweep as CSV.
///
/// # Safety
/// `s` must come from this library; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn qst_sweep_write_csv(s: *const QstSweep, path: *const c_char) -> QstStatus {
    guard(|| {
        let s = handle(s, "sweep")?;
        let path = str_arg(path, "path")?;
        write_csv(Path::new(path), &s.result, &s.metadata).map_err(lib)
    })
}

/// # Safety
/// `s` must be null or come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn qst_sweep_free(s: *mut QstSweep) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

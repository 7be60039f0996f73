//! C ABI over the abrsim simulator.
//!
//! Handles are opaque heap objects owned by the caller and released with the
//! matching `_free` function. Fallible calls return an [`AbrsimStatus`]; the
//! message for the most recent failure on the calling thread is available
//! through [`abrsim_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use abrsim::erica::queue_control_factor;
use abrsim::metrics::{write_metrics_csv, write_trace_csv, Divergence};
use abrsim::{parse_scenario, run_scenario, RunOutput, ScenarioConfig, SimTime};

/// Status codes returned by fallible calls.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbrsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ConfigError = 3,
    IoError = 4,
    OutOfRange = 5,
    Panic = 6,
}

/// Queue classification of a finished run.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbrsimDivergence {
    Convergent = 0,
    Divergent = 1,
    Unknown = 2,
}

/// Scenario configuration handle.
pub struct AbrsimConfig {
    inner: ScenarioConfig,
}

/// Results of one run: metrics plus the sampled trace.
pub struct AbrsimMetrics {
    inner: RunOutput,
    n_sources: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

fn fail(status: AbrsimStatus, msg: impl Into<String>) -> AbrsimStatus {
    let mut bytes = msg.into().into_bytes();
    bytes.retain(|&b| b != 0);
    LAST_ERROR.with(|e| *e.borrow_mut() = bytes);
    status
}

fn clear_error() {
    LAST_ERROR.with(|e| e.borrow_mut().clear());
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, AbrsimStatus> {
    if p.is_null() {
        return Err(fail(AbrsimStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(AbrsimStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn guarded(f: impl FnOnce() -> AbrsimStatus) -> AbrsimStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "simulator panicked".to_string());
            fail(AbrsimStatus::Panic, msg)
        }
    }
}

/// Copies the last error message on this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length excluding the NUL,
/// so a caller can size a buffer with a first call passing `len = 0`.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null when `len` is 0.
#[no_mangle]
pub unsafe extern "C" fn abrsim_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn abrsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration: 15 TCP sources, 1000 km links, ERICA+, no VBR.
#[no_mangle]
pub extern "C" fn abrsim_config_default() -> *mut AbrsimConfig {
    Box::into_raw(Box::new(AbrsimConfig {
        inner: ScenarioConfig::default(),
    }))
}

/// Parses a `key = value` scenario document.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abrsim_config_parse(text: *const c_char, out: *mut *mut AbrsimConfig) -> AbrsimStatus {
    clear_error();
    if out.is_null() {
        return fail(AbrsimStatus::NullPointer, "out is null");
    }
    *out = ptr::null_mut();
    let text = match str_arg(text, "text") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match parse_scenario(text) {
        Ok(c) => {
            *out = Box::into_raw(Box::new(AbrsimConfig { inner: c }));
            AbrsimStatus::Ok
        }
        Err(e) => fail(AbrsimStatus::ConfigError, e.to_string()),
    }
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn abrsim_config_free(cfg: *mut AbrsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn abrsim_config_set_duration_s(cfg: *mut AbrsimConfig, seconds: f64) -> AbrsimStatus {
    clear_error();
    let Some(cfg) = cfg.as_mut() else {
        return fail(AbrsimStatus::NullPointer, "cfg is null");
    };
    if !(seconds.is_finite() && seconds > 0.0) {
        return fail(
            AbrsimStatus::OutOfRange,
            format!("duration {seconds} s must be positive"),
        );
    }
    cfg.inner.duration = SimTime::from_secs_f64(seconds);
    AbrsimStatus::Ok
}

/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn abrsim_config_n_sources(cfg: *const AbrsimConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.inner.n_sources)
}

/// ERICA+ queue-control factor for `q` cells under this configuration.
/// Returns NaN for a null handle.
///
/// # Safety
/// `cfg` must be a live config handle.
#[no_mangle]
pub unsafe extern "C" fn abrsim_queue_control_factor(cfg: *const AbrsimConfig, q: f64) -> f64 {
    cfg.as_ref().map_or(f64::NAN, |c| {
        queue_control_factor(q, &c.inner.erica, c.inner.link_cell_rate())
    })
}

/// Cells needed to carry a TCP segment of `payload_bytes` over AAL5.
#[no_mangle]
pub extern "C" fn abrsim_segment_to_cells(payload_bytes: u64) -> u64 {
    abrsim::tcp::segment_to_cells(payload_bytes)
}

/// Runs the scenario to completion.
///
/// # Safety
/// `cfg` must be a live config handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abrsim_run(cfg: *const AbrsimConfig, out: *mut *mut AbrsimMetrics) -> AbrsimStatus {
    clear_error();
    if out.is_null() {
        return fail(AbrsimStatus::NullPointer, "out is null");
    }
    *out = ptr::null_mut();
    let Some(cfg) = cfg.as_ref() else {
        return fail(AbrsimStatus::NullPointer, "cfg is null");
    };
    if let Err(e) = cfg.inner.validate() {
        return fail(AbrsimStatus::ConfigError, e.to_string());
    }
    guarded(|| {
        let result = run_scenario(&cfg.inner);
        *out = Box::into_raw(Box::new(AbrsimMetrics {
            inner: result,
            n_sources: cfg.inner.n_sources,
        }));
        AbrsimStatus::Ok
    })
}

/// # Safety
/// `m` must come from [`abrsim_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_free(m: *mut AbrsimMetrics) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Aggregate TCP goodput in Mbps; NaN for a null handle.
///
/// # Safety
/// `m` must be a live metrics handle or null.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_goodput_mbps(m: *const AbrsimMetrics) -> f64 {
    m.as_ref().map_or(f64::NAN, |m| m.inner.metrics.total_tcp_goodput_mbps)
}

/// # Safety
/// `m` must be a live metrics handle or null.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_max_switch_queue(m: *const AbrsimMetrics) -> u64 {
    m.as_ref().map_or(0, |m| m.inner.metrics.max_switch_queue)
}

/// Mean switch queue over the final third of the run.
///
/// # Safety
/// `m` must be a live metrics handle or null.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_steady_switch_queue(m: *const AbrsimMetrics) -> f64 {
    m.as_ref()
        .map_or(f64::NAN, |m| m.inner.metrics.steady_state_switch_queue)
}

/// # Safety
/// `m` must be a live metrics handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_max_source_queue(
    m: *const AbrsimMetrics,
    vc: usize,
    out: *mut u64,
) -> AbrsimStatus {
    clear_error();
    let (Some(m), Some(out)) = (m.as_ref(), out.as_mut()) else {
        return fail(AbrsimStatus::NullPointer, "null argument");
    };
    match m.inner.metrics.max_source_queue.get(vc) {
        Some(&q) => {
            *out = q;
            AbrsimStatus::Ok
        }
        None => fail(AbrsimStatus::OutOfRange, format!("vc {vc} >= {}", m.n_sources)),
    }
}

/// # Safety
/// `m` must be a live metrics handle or null.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_drops_source(m: *const AbrsimMetrics) -> u64 {
    m.as_ref().map_or(0, |m| m.inner.metrics.drops_source)
}

/// # Safety
/// `m` must be a live metrics handle or null.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_drops_switch(m: *const AbrsimMetrics) -> u64 {
    m.as_ref().map_or(0, |m| m.inner.metrics.drops_switch)
}

/// # Safety
/// `m` must be a live metrics handle or null.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_divergence(m: *const AbrsimMetrics) -> AbrsimDivergence {
    match m.as_ref().map(|m| m.inner.metrics.divergence) {
        Some(Divergence::Convergent) => AbrsimDivergence::Convergent,
        Some(Divergence::Divergent) => AbrsimDivergence::Divergent,
        _ => AbrsimDivergence::Unknown,
    }
}

/// Writes the one-row metrics CSV.
///
/// # Safety
/// `m` must be a live metrics handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn abrsim_metrics_write_csv(m: *const AbrsimMetrics, path: *const c_char) -> AbrsimStatus {
    clear_error();
    let Some(m) = m.as_ref() else {
        return fail(AbrsimStatus::NullPointer, "metrics is null");
    };
    let path = match str_arg(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match write_metrics_csv(Path::new(path), std::slice::from_ref(&m.inner.metrics)) {
        Ok(()) => AbrsimStatus::Ok,
        Err(e) => fail(AbrsimStatus::IoError, e.to_string()),
    }
}

/// Writes the sampled trace CSV.
///
/// # Safety
/// `m` must be a live metrics handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn abrsim_trace_write_csv(m: *const AbrsimMetrics, path: *const c_char) -> AbrsimStatus {
    clear_error();
    let Some(m) = m.as_ref() else {
        return fail(AbrsimStatus::NullPointer, "metrics is null");
    };
    let path = match str_arg(path, "path") {
        Ok(p) => p,
        Err(s) => return s,
    };
    match write_trace_csv(Path::new(path), &m.inner.trace, m.n_sources) {
        Ok(()) => AbrsimStatus::Ok,
        Err(e) => fail(AbrsimStatus::IoError, e.to_string()),
    }
}

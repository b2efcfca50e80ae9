//! C ABI over the `mtdecide` simulator.
//!
//! Objects cross the boundary as opaque handles that the caller frees with the
//! matching `*_free` function. Fallible calls return an [`MtdStatus`]; on
//! failure, [`mtd_last_error`] describes the most recent error on the calling
//! thread. Strings returned through out-pointers are owned by the caller and
//! released with [`mtd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mtdecide::harness::run_trial;
use mtdecide::{run_monte_carlo, AggregateSummary, Error, ExperimentConfig, Mode, RunRecord};

/// Status code of a fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    InfeasibleTopology = 4,
    Divergence = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MtdMode {
    Decide = 0,
    Follow = 1,
    Mobile = 2,
}

impl From<MtdMode> for Mode {
    fn from(m: MtdMode) -> Self {
        match m {
            MtdMode::Decide => Mode::Decide,
            MtdMode::Follow => Mode::Follow,
            MtdMode::Mobile => Mode::Mobile,
        }
    }
}

/// Experiment configuration.
pub struct MtdConfig(ExperimentConfig);

/// Result of one trial.
pub struct MtdRecord(RunRecord);

/// Aggregate of a Monte Carlo run.
pub struct MtdSummary(AggregateSummary);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> MtdStatus {
    match e {
        Error::Config(_) | Error::Toml(_) => MtdStatus::Config,
        Error::InfeasibleTopology { .. } => MtdStatus::InfeasibleTopology,
        Error::Divergence { .. } => MtdStatus::Divergence,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Parse(_) => MtdStatus::Io,
    }
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), (MtdStatus, String)>) -> MtdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MtdStatus::Ok,
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
            set_error(format!("panic: {msg}"));
            MtdStatus::Panic
        }
    }
}

fn core_err(e: Error) -> (MtdStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (MtdStatus, String) {
    (MtdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn config_mut<'a>(cfg: *mut MtdConfig) -> Result<&'a mut ExperimentConfig, (MtdStatus, String)> {
    cfg.as_mut().map(|c| &mut c.0).ok_or_else(|| null("config"))
}

fn to_c_string(s: String, out: *mut *mut c_char) -> Result<(), (MtdStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    let c = CString::new(s).map_err(|e| (MtdStatus::InvalidArgument, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mtd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mtd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mtd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Default configuration for `mode`.
#[no_mangle]
pub extern "C" fn mtd_config_new(mode: MtdMode) -> *mut MtdConfig {
    Box::into_raw(Box::new(MtdConfig(ExperimentConfig::for_mode(mode.into()))))
}

/// Parses TOML laid over the defaults of `mode` and validates the result.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtd_config_from_toml(mode: MtdMode, text: *const c_char, out: *mut *mut MtdConfig) -> MtdStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let text = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (MtdStatus::InvalidArgument, format!("text is not UTF-8: {e}")))?;
        let cfg = ExperimentConfig::from_toml_over(&ExperimentConfig::for_mode(mode.into()), text).map_err(core_err)?;
        cfg.validate().map_err(core_err)?;
        *out = Box::into_raw(Box::new(MtdConfig(cfg)));
        Ok(())
    })
}

/// Serializes the configuration as TOML.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtd_config_to_toml(cfg: *const MtdConfig, out: *mut *mut c_char) -> MtdStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        to_c_string(cfg.0.to_toml(), out)
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_config_set_trials(cfg: *mut MtdConfig, n_trials: usize) -> MtdStatus {
    guard(|| {
        config_mut(cfg)?.n_trials = n_trials;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_config_set_max_iters(cfg: *mut MtdConfig, max_iters: usize) -> MtdStatus {
    guard(|| {
        config_mut(cfg)?.max_iters = max_iters;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_config_set_models(cfg: *mut MtdConfig, n_models: usize) -> MtdStatus {
    guard(|| {
        config_mut(cfg)?.n_models = n_models;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_config_set_seed(cfg: *mut MtdConfig, seed: u64) -> MtdStatus {
    guard(|| {
        config_mut(cfg)?.seed = seed;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_config_set_equilibrium_breaking(cfg: *mut MtdConfig, enabled: bool) -> MtdStatus {
    guard(|| {
        config_mut(cfg)?.equilibrium_breaking = enabled;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_config_free(cfg: *mut MtdConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs trial `trial` of `cfg`. A diverged trial still yields a record, with
/// `success` false.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtd_run_trial(cfg: *const MtdConfig, trial: usize, out: *mut *mut MtdRecord) -> MtdStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        cfg.0.validate().map_err(core_err)?;
        let record = run_trial(&cfg.0, trial).map_err(core_err)?;
        *out = Box::into_raw(Box::new(MtdRecord(record)));
        Ok(())
    })
}

/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_record_success(rec: *const MtdRecord) -> bool {
    rec.as_ref().is_some_and(|r| r.0.success)
}

/// One-based model the network agreed on, 0 when it did not agree.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_record_final_label(rec: *const MtdRecord) -> usize {
    rec.as_ref().and_then(|r| r.0.final_label).unwrap_or(0)
}

/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_record_iterations(rec: *const MtdRecord) -> usize {
    rec.as_ref().map_or(0, |r| r.0.rows.len())
}

/// `MSD_d` at zero-based row `index`; NaN where undefined or out of range.
///
/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_record_msd_d(rec: *const MtdRecord, index: usize) -> f64 {
    rec.as_ref()
        .and_then(|r| r.0.rows.get(index))
        .and_then(|row| row.msd_d)
        .unwrap_or(f64::NAN)
}

/// # Safety
/// `rec` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_record_total_switches(rec: *const MtdRecord) -> u64 {
    rec.as_ref().map_or(0, |r| r.0.total_switches())
}

/// JSON form of the record, without per-iteration rows.
///
/// # Safety
/// `rec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtd_record_to_json(rec: *const MtdRecord, out: *mut *mut c_char) -> MtdStatus {
    guard(|| {
        let rec = rec.as_ref().ok_or_else(|| null("record"))?;
        let mut buf = Vec::new();
        rec.0.write_json(&mut buf).map_err(core_err)?;
        to_c_string(String::from_utf8(buf).expect("JSON is UTF-8"), out)
    })
}

/// # Safety
/// `rec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_record_free(rec: *mut MtdRecord) {
    if !rec.is_null() {
        drop(Box::from_raw(rec));
    }
}

/// Runs `n_trials` trials. The summary does not depend on `parallel`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtd_run_monte_carlo(cfg: *const MtdConfig, parallel: bool, out: *mut *mut MtdSummary) -> MtdStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("config"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let result = run_monte_carlo(&cfg.0, parallel).map_err(core_err)?;
        *out = Box::into_raw(Box::new(MtdSummary(result.summary)));
        Ok(())
    })
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_summary_trials(s: *const MtdSummary) -> usize {
    s.as_ref().map_or(0, |s| s.0.n_trials)
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_summary_successes(s: *const MtdSummary) -> usize {
    s.as_ref().map_or(0, |s| s.0.successes)
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_summary_success_rate(s: *const MtdSummary) -> f64 {
    s.as_ref().map_or(f64::NAN, |s| s.0.success_rate)
}

/// Mobile runs whose agents all ended near one source.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_summary_captures(s: *const MtdSummary) -> usize {
    s.as_ref().map_or(0, |s| s.0.captures)
}

/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mtd_summary_to_json(s: *const MtdSummary, out: *mut *mut c_char) -> MtdStatus {
    guard(|| {
        let s = s.as_ref().ok_or_else(|| null("summary"))?;
        let json = serde_json::to_string(&s.0).map_err(|e| core_err(e.into()))?;
        to_c_string(json, out)
    })
}

/// # Safety
/// `s` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mtd_summary_free(s: *mut MtdSummary) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

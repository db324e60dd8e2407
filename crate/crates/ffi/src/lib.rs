//! C ABI over `tsconformal`.
//!
//! Every function returns a [`TscStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read with
//! [`tsc_last_error_message`]. Handles are opaque and freed by their own
//! `*_free` function; freeing null is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tsconformal::harness::predict::PredictInput;
use tsconformal::harness::{
    predict_next, run_coverage_sim, run_exact_coverage, CoverageReport, ExperimentConfig,
    PredictConfig,
};
use tsconformal::process::DataPoint;
use tsconformal::quantile::{conformal_level, ScoreVector};
use tsconformal::{bounds, Error};

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TscStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    InsufficientData = 4,
    StateSpaceTooLarge = 5,
    Io = 6,
    Panic = 7,
}

fn status_of(e: &Error) -> TscStatus {
    match e {
        Error::Config(_) | Error::Json(_) => TscStatus::InvalidConfig,
        Error::EmptyScores
        | Error::NoCalibrationScores { .. }
        | Error::CalibrationBlockTooShort { .. }
        | Error::TrainingBlockTooShort { .. }
        | Error::InsufficientContext { .. } => TscStatus::InsufficientData,
        Error::StateSpaceTooLarge { .. } => TscStatus::StateSpaceTooLarge,
        Error::Io(_) | Error::Csv(_) => TscStatus::Io,
        _ => TscStatus::InvalidArgument,
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    // interior NULs cannot cross the boundary; replace them
    let msg = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `body`, recording its error or panic as the last error.
fn guard(body: impl FnOnce() -> Result<(), (TscStatus, String)>) -> TscStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TscStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TscStatus::Panic
        }
    }
}

fn lib<T>(r: tsconformal::Result<T>) -> Result<T, (TscStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (TscStatus, String) {
    (TscStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `ptr` is null or points to `len` readable values.
unsafe fn slice<'a, T>(
    ptr: *const T,
    len: usize,
    what: &str,
) -> Result<&'a [T], (TscStatus, String)> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn utf8<'a>(s: *const c_char, what: &str) -> Result<&'a str, (TscStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (TscStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len − 1` bytes) and returns the full message length, or 0
/// when there is none. `buf` may be null to query the length.
///
/// # Safety
/// `buf` is null or points to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn tsc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Opaque experiment configuration.
pub struct TscConfig(ExperimentConfig);

/// Opaque Monte Carlo coverage report.
pub struct TscReport(CoverageReport);

/// Parses a JSON experiment config into `*out`.
///
/// # Safety
/// `json` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_config_from_json(
    json: *const c_char,
    out: *mut *mut TscConfig,
) -> TscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = utf8(json, "json")?;
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| (TscStatus::InvalidConfig, e.to_string()))?;
        lib(cfg.validate())?;
        *out = Box::into_raw(Box::new(TscConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` is null or came from [`tsc_config_from_json`] and is not used again.
#[no_mangle]
pub unsafe extern "C" fn tsc_config_free(cfg: *mut TscConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Overrides the master seed and trial count (`trials = 0` keeps the current one).
///
/// # Safety
/// `cfg` is a live config handle.
#[no_mangle]
pub unsafe extern "C" fn tsc_config_set_run(
    cfg: *mut TscConfig,
    seed: u64,
    trials: u64,
) -> TscStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        cfg.0.seed = seed;
        if trials > 0 {
            cfg.0.trials = trials;
        }
        Ok(())
    })
}

/// Monte Carlo coverage of `cfg` into a new report handle.
///
/// # Safety
/// `cfg` is a live config handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_coverage_sim(
    cfg: *const TscConfig,
    out: *mut *mut TscReport,
) -> TscStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = lib(run_coverage_sim(&cfg.0))?;
        *out = Box::into_raw(Box::new(TscReport(report)));
        Ok(())
    })
}

/// # Safety
/// `report` is null or came from [`tsc_coverage_sim`] and is not used again.
#[no_mangle]
pub unsafe extern "C" fn tsc_report_free(report: *mut TscReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Coverage estimate, its standard error and the trial count.
///
/// # Safety
/// `report` is a live report handle; each out-pointer is null or writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_report_summary(
    report: *const TscReport,
    coverage: *mut f64,
    standard_error: *mut f64,
    trials: *mut u64,
) -> TscStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        if let Some(c) = coverage.as_mut() {
            *c = r.empirical_coverage;
        }
        if let Some(s) = standard_error.as_mut() {
            *s = r.standard_error;
        }
        if let Some(t) = trials.as_mut() {
            *t = r.trials;
        }
        Ok(())
    })
}

/// Whole report as a JSON string; free it with [`tsc_string_free`].
///
/// # Safety
/// `report` is a live report handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_report_to_json(
    report: *const TscReport,
    out: *mut *mut c_char,
) -> TscStatus {
    guard(|| {
        let r = &report.as_ref().ok_or_else(|| null("report"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = lib(serde_json::to_string(r).map_err(Error::from))?;
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` is null or came from this library and is not used again.
#[no_mangle]
pub unsafe extern "C" fn tsc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Exact coverage of a finite-process config.
///
/// # Safety
/// `cfg` is a live config handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_exact_coverage(cfg: *const TscConfig, out: *mut f64) -> TscStatus {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = lib(run_exact_coverage(&cfg.0))?.coverage;
        Ok(())
    })
}

/// Conformal threshold of `len` calibration scores: the
/// `⌈(1−α)(len+1)⌉`-th smallest, or `+∞` when that exceeds `len`.
///
/// # Safety
/// `scores` points to `len` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_conformal_threshold(
    scores: *const f64,
    len: usize,
    alpha: f64,
    out: *mut f64,
) -> TscStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let values = lib(ScoreVector::new(slice(scores, len, "scores")?.to_vec()))?;
        let level = lib(conformal_level(alpha, len))?;
        *out = values.quantile(level);
        Ok(())
    })
}

/// Coverage lower bound from a `β(0), β(1), …` table for `n` calibration
/// points and memory `L`; missing lags count as 1.
///
/// # Safety
/// `beta` points to `beta_len` values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_mixing_lower_bound(
    alpha: f64,
    n: usize,
    memory: usize,
    beta: *const f64,
    beta_len: usize,
    out: *mut f64,
) -> TscStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let mut table = slice(beta, beta_len, "beta")?.to_vec();
        table.resize(n + 1, 1.0);
        *out = lib(bounds::mixing_lower_bound(alpha, n, memory, &table))?.value;
        Ok(())
    })
}

/// Opaque split-calibration predictor.
pub struct TscPredictor(PredictConfig);

/// Predictor fitting a least-squares AR(`memory`) model on the first `n0`
/// points (`n0 = 0` for half the history) and calibrating on the rest.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_predictor_new(
    alpha: f64,
    memory: usize,
    n0: usize,
    out: *mut *mut TscPredictor,
) -> TscStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err((
                TscStatus::InvalidArgument,
                format!("alpha must lie in (0, 1), got {alpha}"),
            ));
        }
        let cfg = PredictConfig {
            alpha,
            memory,
            n0: (n0 > 0).then_some(n0),
            ..PredictConfig::default()
        };
        *out = Box::into_raw(Box::new(TscPredictor(cfg)));
        Ok(())
    })
}

/// # Safety
/// `p` is null or came from [`tsc_predictor_new`] and is not used again.
#[no_mangle]
pub unsafe extern "C" fn tsc_predictor_free(p: *mut TscPredictor) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Prediction interval; bounds are `±∞` when unbounded.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TscInterval {
    pub lower: f64,
    pub upper: f64,
    pub threshold: f64,
    pub m_cal: usize,
}

/// Interval for `y` at `x_test` given `len` history points `(x[i], y[i])`.
///
/// # Safety
/// `p` is a live predictor; `x` and `y` point to `len` values; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tsc_predict(
    p: *const TscPredictor,
    x: *const f64,
    y: *const f64,
    len: usize,
    x_test: f64,
    out: *mut TscInterval,
) -> TscStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("predictor"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (xs, ys) = (slice(x, len, "x")?, slice(y, len, "y")?);
        if xs.iter().chain(ys).chain([&x_test]).any(|v| !v.is_finite()) {
            return Err((TscStatus::InvalidArgument, "inputs must be finite".into()));
        }
        let input = PredictInput {
            history: xs
                .iter()
                .zip(ys)
                .map(|(&x, &y)| DataPoint::new(x, y))
                .collect(),
            x_test,
        };
        let r = lib(predict_next(&input, &p.0))?;
        *out = TscInterval {
            lower: r.lower,
            upper: r.upper,
            threshold: r.threshold,
            m_cal: r.m_cal,
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message() -> String {
        let mut buf = vec![0 as c_char; 256];
        let n = unsafe { tsc_last_error_message(buf.as_mut_ptr(), buf.len()) };
        let s = unsafe { CStr::from_ptr(buf.as_ptr()) }
            .to_str()
            .unwrap()
            .to_owned();
        assert_eq!(n, s.len());
        s
    }

    #[test]
    fn error_message_is_truncated_and_cleared() {
        let mut out = 0.0;
        let st = unsafe { tsc_conformal_threshold(ptr::null(), 0, 0.1, &mut out) };
        assert_eq!(st, TscStatus::InsufficientData);
        assert_eq!(message(), "empty score list");
        let mut small = [0 as c_char; 4];
        let full = unsafe { tsc_last_error_message(small.as_mut_ptr(), small.len()) };
        assert_eq!(full, "empty score list".len());
        assert_eq!(unsafe { CStr::from_ptr(small.as_ptr()) }.to_bytes(), b"emp");
        let scores = [1.0, 2.0, 3.0];
        let st = unsafe { tsc_conformal_threshold(scores.as_ptr(), 3, 0.5, &mut out) };
        assert_eq!(st, TscStatus::Ok);
        assert_eq!(out, 2.0);
        assert_eq!(unsafe { tsc_last_error_message(ptr::null_mut(), 0) }, 0);
    }

    #[test]
    fn status_mapping() {
        assert_eq!(
            status_of(&Error::Config("x".into())),
            TscStatus::InvalidConfig
        );
        assert_eq!(
            status_of(&Error::CalibrationBlockTooShort { n1: 1, needed: 2 }),
            TscStatus::InsufficientData
        );
        assert_eq!(
            status_of(&Error::InvalidArgument("x".into())),
            TscStatus::InvalidArgument
        );
    }
}

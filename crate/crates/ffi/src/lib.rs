//! C ABI for the corrqcd library.
//!
//! Every fallible function returns a [`CqStatus`]; results are written
//! through out-pointers only on success. The message of the most recent
//! failure on the calling thread is available from
//! [`cq_last_error_message`]. Handles are opaque and must be released with
//! their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use corrqcd::qcd::StoppingRule;
use corrqcd::{
    calibrate_threshold, cdf_v, kl_divergence, log_pdf_v, mle_j, summary_statistic, w_transform, DataBlock, Error,
    GlrConfig, GlrDetector, ModelParams, ShapeParam, Sidedness, Window,
};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CqStatus {
    Ok = 0,
    InvalidArgument = 1,
    NullPointer = 2,
    ZeroVariance = 3,
    NonFinite = 4,
    Domain = 5,
    DivergentDensity = 6,
    InfiniteEstimate = 7,
    NotPositiveDefinite = 8,
    /// The detector has not stopped, so there is no verdict yet.
    NotStopped = 9,
    Panic = 255,
}

/// Window length meaning "derive from threshold and epsilon".
pub const CQ_WINDOW_AUTO: u64 = 0;
/// Window length meaning "use every past change-point candidate".
pub const CQ_WINDOW_UNBOUNDED: u64 = u64::MAX;

/// Limiting-density parameters for fixed (n, p, delta).
pub struct CqModel(ModelParams);

/// A GLR detector fed one summary value or one data block at a time.
pub struct CqDetector(GlrDetector);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqVerdict {
    pub stopping_time: u64,
    pub change_point_estimate: u64,
    pub j_estimate: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> CqStatus {
    match err {
        Error::InvalidParameter { .. } => CqStatus::InvalidArgument,
        Error::ZeroVariance { .. } => CqStatus::ZeroVariance,
        Error::NonFinite { .. } => CqStatus::NonFinite,
        Error::Domain { .. } => CqStatus::Domain,
        Error::DivergentDensity { .. } => CqStatus::DivergentDensity,
        Error::InfiniteEstimate => CqStatus::InfiniteEstimate,
        Error::NotPositiveDefinite { .. } => CqStatus::NotPositiveDefinite,
    }
}

struct Fail(CqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CqStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CqStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            CqStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Fail> {
    ptr.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn slice_of<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null("values"));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

fn shape(j: f64) -> Result<ShapeParam, Fail> {
    Ok(ShapeParam::new(j)?)
}

/// Message of the last failed call on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cq_model_new(n: usize, p: usize, delta: usize, out: *mut *mut CqModel) -> CqStatus {
    guard(|| {
        let params = ModelParams::new(n, p, delta)?;
        write(out, Box::into_raw(Box::new(CqModel(params))))
    })
}

/// # Safety
/// `model` must come from `cq_model_new` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cq_model_free(model: *mut CqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Limiting cdf of V at `rho` for shape `j`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_cdf_v(model: *const CqModel, rho: f64, j: f64, out: *mut f64) -> CqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, cdf_v(rho, &m.0, shape(j)?)?)
    })
}

/// Log density of V at `rho` for shape `j`.
///
/// # Safety
/// `model` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_log_pdf_v(model: *const CqModel, rho: f64, j: f64, out: *mut f64) -> CqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, log_pdf_v(rho, &m.0, shape(j)?)?)
    })
}

/// # Safety
/// `model` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_w_transform(model: *const CqModel, rho: f64, out: *mut f64) -> CqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, w_transform(rho, &m.0)?)
    })
}

/// Kullback-Leibler divergence between shapes `j` and 1.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_kl_divergence(j: f64, out: *mut f64) -> CqStatus {
    guard(|| write(out, kl_divergence(shape(j)?)))
}

/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_calibrate_threshold(beta: f64, out: *mut f64) -> CqStatus {
    guard(|| write(out, calibrate_threshold(beta)?))
}

/// Maximum-likelihood J from `len` summary values.
///
/// # Safety
/// `model` must be a live handle, `values` readable for `len` doubles and
/// `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_mle_j(model: *const CqModel, values: *const f64, len: usize, out: *mut f64) -> CqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        write(out, mle_j(slice_of(values, len)?, &m.0)?.value())
    })
}

unsafe fn block(data: *const f64, n: usize, p: usize) -> Result<DataBlock, Fail> {
    let len = n
        .checked_mul(p)
        .ok_or_else(|| Fail(CqStatus::InvalidArgument, "n*p overflows".into()))?;
    Ok(DataBlock::new(n, p, slice_of(data, len)?.to_vec())?)
}

/// Summary statistic of a row-major `n × p` block.
///
/// # Safety
/// `data` must be readable for `n*p` doubles and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_summary_statistic(
    data: *const f64,
    n: usize,
    p: usize,
    delta: usize,
    out: *mut f64,
) -> CqStatus {
    guard(|| write(out, summary_statistic(&block(data, n, p)?, delta)?.v))
}

/// Creates a detector. `window` is a length, `CQ_WINDOW_AUTO` or
/// `CQ_WINDOW_UNBOUNDED`; `two_sided` also tests decreases of J.
///
/// # Safety
/// `model` must be a live handle and `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn cq_detector_new(
    model: *const CqModel,
    epsilon: f64,
    threshold: f64,
    window: u64,
    two_sided: bool,
    out: *mut *mut CqDetector,
) -> CqStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let mut config = GlrConfig::new(epsilon, threshold)?;
        config = match window {
            CQ_WINDOW_AUTO => config,
            CQ_WINDOW_UNBOUNDED => config.with_window(Window::Unbounded)?,
            w => config.with_window(Window::Bounded(usize::try_from(w).unwrap_or(usize::MAX)))?,
        };
        if two_sided {
            config = config.with_sidedness(Sidedness::TwoSided);
        }
        write(out, Box::into_raw(Box::new(CqDetector(GlrDetector::new(config, m.0)))))
    })
}

/// # Safety
/// `detector` must come from `cq_detector_new` and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn cq_detector_free(detector: *mut CqDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Feeds one summary value; `stopped` receives whether the detector stopped.
///
/// # Safety
/// `detector` must be a live handle and `stopped` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_detector_push_value(detector: *mut CqDetector, v: f64, stopped: *mut bool) -> CqStatus {
    guard(|| {
        let d = detector.as_mut().ok_or_else(|| null("detector"))?;
        write(stopped, d.0.observe(v)?)
    })
}

/// Feeds one row-major `n × p` block.
///
/// # Safety
/// `detector` must be a live handle, `data` readable for `n*p` doubles and
/// `stopped` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_detector_push_block(
    detector: *mut CqDetector,
    data: *const f64,
    n: usize,
    p: usize,
    stopped: *mut bool,
) -> CqStatus {
    guard(|| {
        let d = detector.as_mut().ok_or_else(|| null("detector"))?;
        let params = d.0.params();
        if (n, p) != (params.n(), params.p()) {
            return Err(Fail(
                CqStatus::InvalidArgument,
                format!("block is {n}x{p}, detector expects {}x{}", params.n(), params.p()),
            ));
        }
        let v = summary_statistic(&block(data, n, p)?, params.delta())?;
        write(stopped, d.0.observe(v.v)?)
    })
}

/// Current GLR statistic.
///
/// # Safety
/// `detector` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_detector_stat(detector: *const CqDetector, out: *mut f64) -> CqStatus {
    guard(|| write(out, deref(detector, "detector")?.0.state().current_stat()))
}

/// Writes the verdict, or returns `NotStopped`.
///
/// # Safety
/// `detector` must be a live handle and `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn cq_detector_verdict(detector: *const CqDetector, out: *mut CqVerdict) -> CqStatus {
    guard(|| {
        let v = deref(detector, "detector")?
            .0
            .verdict()
            .ok_or_else(|| Fail(CqStatus::NotStopped, "detector has not stopped".into()))?;
        write(
            out,
            CqVerdict {
                stopping_time: v.stopping_time,
                change_point_estimate: v.change_point_estimate,
                j_estimate: v.j_estimate,
            },
        )
    })
}

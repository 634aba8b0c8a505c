//! C ABI over the benchmark: opaque cohort and forecast handles, status codes
//! and a thread-local message for the last error.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use meterbench::data::calendar::MONTHS;
use meterbench::data::io::{read_cohort_dir, write_cohort_dir, MonthlyTable};
use meterbench::data::{Cohort, MeterId};
use meterbench::datagen::{generate_cohort, CohortConfig};
use meterbench::forecast::{builtin_pipeline, run_pipeline, ForecastSet};
use meterbench::scoring::{total_rae, MeanReference};
use meterbench::Error;

/// Months per forecast row.
pub const MB_MONTHS: usize = 12;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Data = 5,
    UnknownPipeline = 6,
    OutOfRange = 7,
    Panic = 8,
}

/// A loaded or generated cohort.
pub struct MbCohort {
    inner: Cohort,
}

/// Forecast-year monthly predictions of one pipeline, in meter-id order.
pub struct MbForecast {
    inner: ForecastSet,
    ids: Vec<MeterId>,
}

const _: () = assert!(MB_MONTHS == MONTHS);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MbStatus {
    match e {
        Error::Io(_) | Error::MissingInput(_) => MbStatus::Io,
        Error::Csv(_)
        | Error::Json(_)
        | Error::MalformedTimestamp { .. }
        | Error::MalformedValue { .. }
        | Error::BadHeader { .. }
        | Error::NegativeConsumption { .. }
        | Error::DuplicateRow { .. }
        | Error::TimestampOutOfRange { .. } => MbStatus::Parse,
        Error::UnknownPipeline(_) => MbStatus::UnknownPipeline,
        Error::InvalidConfig(_) | Error::InvalidParameter(_) | Error::InfeasibleProfile(_) => MbStatus::InvalidArgument,
        _ => MbStatus::Data,
    }
}

struct Failure(MbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            MbStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(MbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(MbStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn mb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Generates a synthetic cohort of `n_meters` meters.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a handle to free
/// with `mb_cohort_free`.
#[no_mangle]
pub unsafe extern "C" fn mb_cohort_generate(n_meters: usize, seed: u64, out: *mut *mut MbCohort) -> MbStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = generate_cohort(&CohortConfig::small(n_meters, seed))?;
        *out = Box::into_raw(Box::new(MbCohort { inner }));
        Ok(())
    })
}

/// Reads a cohort directory (readings, weather, survey, optional truth).
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_cohort_load(dir: *const c_char, out: *mut *mut MbCohort) -> MbStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = read_cohort_dir(Path::new(dir))?;
        *out = Box::into_raw(Box::new(MbCohort { inner }));
        Ok(())
    })
}

/// Writes a cohort directory.
///
/// # Safety
/// `cohort` must come from this library; `dir` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mb_cohort_save(cohort: *const MbCohort, dir: *const c_char) -> MbStatus {
    guard(|| {
        let cohort = handle(cohort, "cohort")?;
        let dir = str_arg(dir, "dir")?;
        write_cohort_dir(Path::new(dir), &cohort.inner)?;
        Ok(())
    })
}

/// # Safety
/// `cohort` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mb_cohort_free(cohort: *mut MbCohort) {
    if !cohort.is_null() {
        drop(Box::from_raw(cohort));
    }
}

/// # Safety
/// `cohort` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_cohort_meter_count(cohort: *const MbCohort, out: *mut usize) -> MbStatus {
    guard(|| {
        let cohort = handle(cohort, "cohort")?;
        *out.as_mut().ok_or_else(|| null("out"))? = cohort.inner.meters.len();
        Ok(())
    })
}

/// Runs a built-in pipeline on the cohort.
///
/// # Safety
/// `cohort` must come from this library, `pipeline` must be NUL-terminated
/// and `out` valid; free the result with `mb_forecast_free`.
#[no_mangle]
pub unsafe extern "C" fn mb_run_pipeline(
    cohort: *const MbCohort,
    pipeline: *const c_char,
    seed: u64,
    out: *mut *mut MbForecast,
) -> MbStatus {
    guard(|| {
        let cohort = handle(cohort, "cohort")?;
        let name = str_arg(pipeline, "pipeline")?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let inner = run_pipeline(&cohort.inner, &builtin_pipeline(name)?, seed)?;
        let ids = inner.predictions.keys().cloned().collect();
        *out = Box::into_raw(Box::new(MbForecast { inner, ids }));
        Ok(())
    })
}

/// # Safety
/// `forecast` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mb_forecast_free(forecast: *mut MbForecast) {
    if !forecast.is_null() {
        drop(Box::from_raw(forecast));
    }
}

/// # Safety
/// `forecast` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_forecast_meter_count(forecast: *const MbForecast, out: *mut usize) -> MbStatus {
    guard(|| {
        let f = handle(forecast, "forecast")?;
        *out.as_mut().ok_or_else(|| null("out"))? = f.ids.len();
        Ok(())
    })
}

/// Copies the twelve monthly predictions of meter `index` (id order) into `out`.
///
/// # Safety
/// `out` must point to at least `MB_MONTHS` doubles.
#[no_mangle]
pub unsafe extern "C" fn mb_forecast_get(forecast: *const MbForecast, index: usize, out: *mut f64) -> MbStatus {
    guard(|| {
        let f = handle(forecast, "forecast")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let id = f
            .ids
            .get(index)
            .ok_or_else(|| Failure(MbStatus::OutOfRange, format!("meter index {index} out of range")))?;
        let row = f.inner.predictions[id];
        ptr::copy_nonoverlapping(row.as_ptr(), out, MONTHS);
        Ok(())
    })
}

/// Writes the predictions CSV.
///
/// # Safety
/// `forecast` must come from this library; `path` must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn mb_forecast_write_csv(forecast: *const MbForecast, path: *const c_char) -> MbStatus {
    guard(|| {
        let f = handle(forecast, "forecast")?;
        let path = str_arg(path, "path")?;
        let file = std::fs::File::create(path).map_err(Error::from)?;
        f.inner.write_csv(file)?;
        Ok(())
    })
}

/// Scores a forecast against the cohort's forecast-year truth.
///
/// # Safety
/// Handles must come from this library; output pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_score(
    forecast: *const MbForecast,
    cohort: *const MbCohort,
    year_rae: *mut f64,
    month_rae: *mut f64,
    total: *mut f64,
) -> MbStatus {
    guard(|| {
        let f = handle(forecast, "forecast")?;
        let c = handle(cohort, "cohort")?;
        if year_rae.is_null() || month_rae.is_null() || total.is_null() {
            return Err(null("output"));
        }
        let truth = c
            .inner
            .truth_table()
            .ok_or_else(|| Failure(MbStatus::Data, "cohort has no ground truth".into()))?;
        let r = total_rae(&f.inner.predictions, &truth, MeanReference::default())?;
        *year_rae = r.year_rae;
        *month_rae = r.month_rae;
        *total = r.total_rae;
        Ok(())
    })
}

/// Total rAE of row-major `n_meters × MB_MONTHS` prediction and truth arrays.
///
/// # Safety
/// Both arrays must hold `n_meters * MB_MONTHS` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_total_rae(pred: *const f64, truth: *const f64, n_meters: usize, out: *mut f64) -> MbStatus {
    guard(|| {
        if pred.is_null() || truth.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let len = n_meters
            .checked_mul(MONTHS)
            .ok_or_else(|| Failure(MbStatus::InvalidArgument, "n_meters too large".into()))?;
        let (p, t) = (std::slice::from_raw_parts(pred, len), std::slice::from_raw_parts(truth, len));
        let table = |v: &[f64]| -> MonthlyTable {
            v.chunks(MONTHS)
                .enumerate()
                .map(|(i, c)| (MeterId(format!("m{i:08}")), c.try_into().expect("chunk of 12")))
                .collect()
        };
        *out = total_rae(&table(p), &table(t), MeanReference::default())?.total_rae;
        Ok(())
    })
}

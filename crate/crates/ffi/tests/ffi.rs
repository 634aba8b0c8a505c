use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use meterbench_ffi::*;

fn last_error() -> String {
    let p = mb_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn generate_predict_score_round_trip() {
    unsafe {
        let mut cohort = ptr::null_mut();
        assert_eq!(mb_cohort_generate(20, 9, &mut cohort), MbStatus::Ok);
        let mut n = 0usize;
        assert_eq!(mb_cohort_meter_count(cohort, &mut n), MbStatus::Ok);
        assert_eq!(n, 20);

        let name = CString::new("naive").unwrap();
        let mut forecast = ptr::null_mut();
        assert_eq!(mb_run_pipeline(cohort, name.as_ptr(), 1, &mut forecast), MbStatus::Ok);
        let mut m = 0usize;
        assert_eq!(mb_forecast_meter_count(forecast, &mut m), MbStatus::Ok);
        assert_eq!(m, 20);

        let mut row = [0.0f64; MB_MONTHS];
        assert_eq!(mb_forecast_get(forecast, 0, row.as_mut_ptr()), MbStatus::Ok);
        assert!(row.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(mb_forecast_get(forecast, 20, row.as_mut_ptr()), MbStatus::OutOfRange);
        assert!(last_error().contains("out of range"));

        let (mut y, mut mo, mut t) = (0.0, 0.0, 0.0);
        assert_eq!(mb_score(forecast, cohort, &mut y, &mut mo, &mut t), MbStatus::Ok);
        assert!(((y + mo) / 2.0 - t).abs() < 1e-12);

        mb_forecast_free(forecast);
        mb_cohort_free(cohort);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut cohort = ptr::null_mut();
        assert_eq!(mb_cohort_generate(5, 1, ptr::null_mut()), MbStatus::NullPointer);
        assert_eq!(mb_cohort_generate(0, 1, &mut cohort), MbStatus::InvalidArgument);
        assert!(cohort.is_null());

        let missing = CString::new("/nonexistent/meterbench").unwrap();
        assert_eq!(mb_cohort_load(missing.as_ptr(), &mut cohort), MbStatus::Io);

        assert_eq!(mb_cohort_generate(5, 1, &mut cohort), MbStatus::Ok);
        let bogus = CString::new("nope").unwrap();
        let mut forecast = ptr::null_mut();
        assert_eq!(
            mb_run_pipeline(cohort, bogus.as_ptr(), 1, &mut forecast),
            MbStatus::UnknownPipeline
        );
        assert!(last_error().contains("nope"));
        mb_cohort_free(cohort);
        mb_cohort_free(ptr::null_mut());
        mb_forecast_free(ptr::null_mut());
    }
}

#[test]
fn total_rae_over_raw_arrays() {
    let truth: Vec<f64> = (0..24).map(|i| (10 * (1 + i / 12) + i % 12) as f64).collect();
    let pred: Vec<f64> = truth.iter().map(|t| t + 1.0).collect();
    let mut out = f64::NAN;
    unsafe {
        assert_eq!(mb_total_rae(truth.as_ptr(), truth.as_ptr(), 2, &mut out), MbStatus::Ok);
        assert_eq!(out, 0.0);
        assert_eq!(mb_total_rae(pred.as_ptr(), truth.as_ptr(), 2, &mut out), MbStatus::Ok);
    }
    // yearly totals 186 and 306 each miss by 12 against a spread of 60;
    // each meter's months miss by 1 against a spread of 3.
    let expected = 0.5 * (12.0 / 60.0) + 0.5 * (1.0 / 3.0);
    assert!((out - expected).abs() < 1e-12, "{out} vs {expected}");
}

#[test]
fn cohort_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().to_str().unwrap()).unwrap();
    unsafe {
        let mut a = ptr::null_mut();
        assert_eq!(mb_cohort_generate(6, 4, &mut a), MbStatus::Ok);
        assert_eq!(mb_cohort_save(a, path.as_ptr()), MbStatus::Ok);
        let mut b = ptr::null_mut();
        assert_eq!(mb_cohort_load(path.as_ptr(), &mut b), MbStatus::Ok);
        let mut n = 0;
        assert_eq!(mb_cohort_meter_count(b, &mut n), MbStatus::Ok);
        assert_eq!(n, 6);
        mb_cohort_free(a);
        mb_cohort_free(b);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(mb_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn generated_header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/meterbench.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in ["mb_cohort_generate", "mb_run_pipeline", "mb_score", "MB_STATUS_OK", "MB_MONTHS"] {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler available; syntax check skipped");
        return;
    };
    assert!(status.success());
}

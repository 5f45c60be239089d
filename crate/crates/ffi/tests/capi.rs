use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use msmtfl_ffi::*;

fn last_error() -> String {
    let p = msmtfl_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn dataset_round_trip_and_lasso() {
    // two tasks, d = 2, identity designs
    let counts = [2usize, 2];
    let x = [1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
    let y = [3.0, 0.0, 0.0, -2.0];
    let mut data = ptr::null_mut();
    let status = unsafe { msmtfl_dataset_new(2, 2, counts.as_ptr(), x.as_ptr(), y.as_ptr(), &mut data) };
    assert_eq!(status, MsmtflStatus::Ok);

    let (mut m, mut d) = (0, 0);
    assert_eq!(unsafe { msmtfl_dataset_shape(data, &mut m, &mut d) }, MsmtflStatus::Ok);
    assert_eq!((m, d), (2, 2));

    // with an identity design each coordinate is a scalar soft-threshold:
    // w = sign(y) max(|y| - lambda*m*n/2, 0) = sign(y) max(|y| - 0.5, 0) for lambda = 0.25
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { msmtfl_run_lasso(data, 0.25, &mut run) }, MsmtflStatus::Ok);
    let mut count = 0;
    assert_eq!(unsafe { msmtfl_run_stage_count(run, &mut count) }, MsmtflStatus::Ok);
    assert_eq!(count, 1);
    let mut w = [f64::NAN; 4];
    assert_eq!(unsafe { msmtfl_run_weights(run, 1, w.as_mut_ptr(), 4) }, MsmtflStatus::Ok);
    // row-major d x m: [w(0,task0), w(0,task1), w(1,task0), w(1,task1)]
    assert_eq!(w, [2.5, 0.0, 0.0, -1.5]);
    let mut theta = 0.0;
    assert_eq!(unsafe { msmtfl_run_theta(run, 1, &mut theta) }, MsmtflStatus::Ok);
    assert!(theta.is_infinite());

    assert_eq!(unsafe { msmtfl_run_weights(run, 2, w.as_mut_ptr(), 4) }, MsmtflStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));
    assert_eq!(unsafe { msmtfl_run_weights(run, 1, w.as_mut_ptr(), 3) }, MsmtflStatus::InvalidArgument);

    unsafe {
        msmtfl_run_free(run);
        msmtfl_dataset_free(data);
    }
}

#[test]
fn multistage_runs_through_handles() {
    let mut data = ptr::null_mut();
    let mut truth = vec![0.0; 30 * 3];
    let status = unsafe { msmtfl_synthetic_generate(3, 15, 30, 0.01, 7, &mut data, truth.as_mut_ptr()) };
    assert_eq!(status, MsmtflStatus::Ok);
    assert!(truth.iter().any(|&v| v != 0.0));

    let lambda = msmtfl_lambda_from_alpha(0.01, 30, 3, 15);
    let mut fixed = ptr::null_mut();
    let mut adaptive = ptr::null_mut();
    let mut lasso = ptr::null_mut();
    unsafe {
        assert_eq!(msmtfl_run_msmtfl(data, lambda, 50.0 * 3.0 * lambda, 4, &mut fixed), MsmtflStatus::Ok);
        assert_eq!(msmtfl_run_msmtfl_at(data, lambda, 1.0, 4, &mut adaptive), MsmtflStatus::Ok);
        assert_eq!(msmtfl_run_lasso(data, lambda, &mut lasso), MsmtflStatus::Ok);
    }
    let weights = |run: *const MsmtflRun, stage: usize| {
        let mut w = vec![0.0; 90];
        assert_eq!(unsafe { msmtfl_run_weights(run, stage, w.as_mut_ptr(), 90) }, MsmtflStatus::Ok);
        w
    };
    let first = weights(lasso, 1);
    assert_eq!(weights(fixed, 1), first);
    assert_eq!(weights(adaptive, 1), first);
    let mut count = 0;
    unsafe { msmtfl_run_stage_count(adaptive, &mut count) };
    assert_eq!(count, 4);

    let mut l21 = ptr::null_mut();
    assert_eq!(unsafe { msmtfl_run_l21(data, lambda, &mut l21) }, MsmtflStatus::Ok);

    unsafe {
        msmtfl_run_free(fixed);
        msmtfl_run_free(adaptive);
        msmtfl_run_free(lasso);
        msmtfl_run_free(l21);
        msmtfl_dataset_free(data);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut data = ptr::null_mut();
    let missing = CString::new("/nonexistent/manifest.txt").unwrap();
    assert_eq!(unsafe { msmtfl_dataset_load(missing.as_ptr(), &mut data) }, MsmtflStatus::Io);
    assert!(last_error().contains("/nonexistent/manifest.txt"));
    assert!(data.is_null());

    assert_eq!(unsafe { msmtfl_dataset_load(ptr::null(), &mut data) }, MsmtflStatus::NullPointer);
    assert_eq!(
        unsafe { msmtfl_synthetic_generate(0, 5, 5, 0.1, 0, &mut data, ptr::null_mut()) },
        MsmtflStatus::InvalidArgument
    );

    let mut count = 0;
    assert_eq!(unsafe { msmtfl_run_stage_count(ptr::null(), &mut count) }, MsmtflStatus::NullPointer);
    assert!(last_error().contains("run"));

    unsafe {
        msmtfl_synthetic_generate(2, 5, 4, 0.1, 0, &mut data, ptr::null_mut());
    }
    let mut run = ptr::null_mut();
    assert_eq!(unsafe { msmtfl_run_msmtfl(data, 0.1, -1.0, 3, &mut run) }, MsmtflStatus::InvalidArgument);
    assert!(run.is_null());
    unsafe {
        msmtfl_dataset_free(data);
        msmtfl_dataset_free(ptr::null_mut());
        msmtfl_run_free(ptr::null_mut());
    }
}

#[test]
fn manifest_loads_through_the_c_api() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("manifest.txt"), "d: 2\ntask: a.csv\n").unwrap();
    std::fs::write(dir.path().join("a.csv"), "1,2,3\n4,5,6\n").unwrap();
    let path = CString::new(dir.path().join("manifest.txt").to_str().unwrap()).unwrap();
    let mut data = ptr::null_mut();
    assert_eq!(unsafe { msmtfl_dataset_load(path.as_ptr(), &mut data) }, MsmtflStatus::Ok);
    let (mut m, mut d) = (0, 0);
    unsafe { msmtfl_dataset_shape(data, &mut m, &mut d) };
    assert_eq!((m, d), (1, 2));
    unsafe { msmtfl_dataset_free(data) };
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/msmtfl.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "msmtfl_dataset_new",
        "msmtfl_dataset_load",
        "msmtfl_run_msmtfl_at",
        "msmtfl_run_weights",
        "msmtfl_last_error",
        "MSMTFL_STATUS_OK",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    let Ok(status) = Command::new("cc")
        .args(["-fsyntax-only", "-std=c99", "-Wall", "-Werror", "-x", "c"])
        .arg(&header)
        .status()
    else {
        eprintln!("no C compiler available; syntax check skipped");
        return;
    };
    assert!(status.success());
}

//! C interface to the `msmtfl` library.
//!
//! Datasets and runs live behind opaque handles created by `msmtfl_*_new`,
//! `msmtfl_*_load` or `msmtfl_run_*` and released with the matching `_free`.
//! Every fallible function returns an [`MsmtflStatus`]; on failure
//! [`msmtfl_last_error`] describes the problem for the calling thread.
//!
//! Matrices cross the boundary as row-major `double` buffers.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use msmtfl::baselines::{solve_l21, solve_lasso_l11, L21Options};
use msmtfl::datagen::{generate, SyntheticSpec};
use msmtfl::io::load_dataset;
use msmtfl::multistage::{lambda_from_alpha, run_msmtfl, run_msmtfl_at, MultistageConfig};
use msmtfl::wlasso::SolverOptions;
use msmtfl::{MtflError, TaskDataset, WeightMatrix};

use ndarray::{Array1, Array2};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsmtflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Io = 4,
    Parse = 5,
    Numerical = 6,
    Panic = 7,
}

/// Opaque multi-task dataset.
pub struct MsmtflDataset {
    inner: TaskDataset,
}

struct StageResult {
    weights: WeightMatrix,
    theta: f64,
}

/// Opaque result of a solver run: one entry per stage (a single entry for
/// the convex baselines).
pub struct MsmtflRun {
    stages: Vec<StageResult>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &MtflError) -> MsmtflStatus {
    match err {
        MtflError::Dimension(_) => MsmtflStatus::Dimension,
        MtflError::InvalidParameter(_) | MtflError::Config(_) => MsmtflStatus::InvalidArgument,
        MtflError::Io { .. } => MsmtflStatus::Io,
        MtflError::Parse { .. } => MsmtflStatus::Parse,
        MtflError::Numerical(_) => MsmtflStatus::Numerical,
    }
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(MtflError),
}

impl From<MtflError> for Failure {
    fn from(e: MtflError) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MsmtflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsmtflStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer passed as `{name}`"));
            MsmtflStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            MsmtflStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            MsmtflStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(name))
}

fn check_out<T>(p: *mut T, name: &'static str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::Null(name))
    } else {
        Ok(())
    }
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn msmtfl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a dataset from `m` tasks. `x` holds the row-major `n_i x d`
/// design matrices of all tasks back to back and `y` the responses in the
/// same order.
///
/// # Safety
/// `n_per_task` must point to `m` values, `x` to `d * sum(n_i)` values and
/// `y` to `sum(n_i)` values. `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_dataset_new(
    m: usize,
    d: usize,
    n_per_task: *const usize,
    x: *const f64,
    y: *const f64,
    out: *mut *mut MsmtflDataset,
) -> MsmtflStatus {
    guard(|| {
        check_out(out, "out")?;
        if n_per_task.is_null() {
            return Err(Failure::Null("n_per_task"));
        }
        if x.is_null() {
            return Err(Failure::Null("x"));
        }
        if y.is_null() {
            return Err(Failure::Null("y"));
        }
        if m == 0 || d == 0 {
            return Err(Failure::Arg(format!("m and d must be positive (m={m}, d={d})")));
        }
        let counts = std::slice::from_raw_parts(n_per_task, m);
        let total: usize = counts.iter().sum();
        let xs = std::slice::from_raw_parts(x, total * d);
        let ys = std::slice::from_raw_parts(y, total);
        let mut pairs = Vec::with_capacity(m);
        let mut offset = 0;
        for &n in counts {
            let xi = Array2::from_shape_vec((n, d), xs[offset * d..(offset + n) * d].to_vec())
                .map_err(|e| Failure::Arg(e.to_string()))?;
            let yi = Array1::from(ys[offset..offset + n].to_vec());
            pairs.push((xi, yi));
            offset += n;
        }
        let inner = TaskDataset::from_pairs(pairs)?;
        *out = Box::into_raw(Box::new(MsmtflDataset { inner }));
        Ok(())
    })
}

/// Loads a dataset from a manifest file.
///
/// # Safety
/// `manifest` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_dataset_load(
    manifest: *const c_char,
    out: *mut *mut MsmtflDataset,
) -> MsmtflStatus {
    guard(|| {
        check_out(out, "out")?;
        if manifest.is_null() {
            return Err(Failure::Null("manifest"));
        }
        let path = CStr::from_ptr(manifest)
            .to_str()
            .map_err(|_| Failure::Arg("manifest path is not UTF-8".into()))?;
        let inner = load_dataset(path)?;
        *out = Box::into_raw(Box::new(MsmtflDataset { inner }));
        Ok(())
    })
}

/// Draws a synthetic instance with the default sparsity levels. When
/// `true_weights` is not NULL it receives the `d x m` ground truth.
///
/// # Safety
/// `out` must be writable; `true_weights`, if not NULL, must hold `d * m`
/// values.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_synthetic_generate(
    m: usize,
    n: usize,
    d: usize,
    sigma: f64,
    seed: u64,
    out: *mut *mut MsmtflDataset,
    true_weights: *mut f64,
) -> MsmtflStatus {
    guard(|| {
        check_out(out, "out")?;
        let inst = generate(&SyntheticSpec::new(m, n, d, sigma, seed))?;
        if !true_weights.is_null() {
            copy_row_major(&inst.true_weights, std::slice::from_raw_parts_mut(true_weights, d * m));
        }
        *out = Box::into_raw(Box::new(MsmtflDataset { inner: inst.data }));
        Ok(())
    })
}

/// Writes the number of tasks and features.
///
/// # Safety
/// `data` must be a live handle; `m` and `d` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_dataset_shape(
    data: *const MsmtflDataset,
    m: *mut usize,
    d: *mut usize,
) -> MsmtflStatus {
    guard(|| {
        let data = deref(data, "data")?;
        check_out(m, "m")?;
        check_out(d, "d")?;
        *m = data.inner.m();
        *d = data.inner.d();
        Ok(())
    })
}

/// # Safety
/// `data` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_dataset_free(data: *mut MsmtflDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// `alpha * sqrt(ln(d m) / n)`.
#[no_mangle]
pub extern "C" fn msmtfl_lambda_from_alpha(alpha: f64, d: usize, m: usize, n: usize) -> f64 {
    lambda_from_alpha(alpha, d, m, n)
}

fn finish_run(out: *mut *mut MsmtflRun, stages: Vec<StageResult>) {
    unsafe { *out = Box::into_raw(Box::new(MsmtflRun { stages })) };
}

/// Multi-stage run with fixed threshold `theta`.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_run_msmtfl(
    data: *const MsmtflDataset,
    lambda: f64,
    theta: f64,
    stages: usize,
    out: *mut *mut MsmtflRun,
) -> MsmtflStatus {
    guard(|| {
        let data = deref(data, "data")?;
        check_out(out, "out")?;
        let cfg = MultistageConfig::new(lambda).with_theta(theta).with_stages(stages);
        let traces = run_msmtfl(&data.inner, &cfg)?;
        finish_run(
            out,
            traces
                .into_iter()
                .map(|t| StageResult { weights: t.solution, theta: t.theta })
                .collect(),
        );
        Ok(())
    })
}

/// Multi-stage run with the adaptive threshold.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_run_msmtfl_at(
    data: *const MsmtflDataset,
    lambda: f64,
    tau_multiplier: f64,
    stages: usize,
    out: *mut *mut MsmtflRun,
) -> MsmtflStatus {
    guard(|| {
        let data = deref(data, "data")?;
        check_out(out, "out")?;
        let cfg = MultistageConfig::new(lambda)
            .with_tau_multiplier(tau_multiplier)
            .with_stages(stages);
        let traces = run_msmtfl_at(&data.inner, &cfg)?;
        finish_run(
            out,
            traces
                .into_iter()
                .map(|t| StageResult { weights: t.solution, theta: t.theta })
                .collect(),
        );
        Ok(())
    })
}

/// l1,1-regularized baseline. The run has one stage with infinite theta.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_run_lasso(
    data: *const MsmtflDataset,
    lambda: f64,
    out: *mut *mut MsmtflRun,
) -> MsmtflStatus {
    guard(|| {
        let data = deref(data, "data")?;
        check_out(out, "out")?;
        let weights = solve_lasso_l11(&data.inner, lambda, &SolverOptions::default())?;
        finish_run(out, vec![StageResult { weights, theta: f64::INFINITY }]);
        Ok(())
    })
}

/// l2,1-regularized baseline. The run has one stage with infinite theta.
///
/// # Safety
/// `data` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_run_l21(
    data: *const MsmtflDataset,
    lambda: f64,
    out: *mut *mut MsmtflRun,
) -> MsmtflStatus {
    guard(|| {
        let data = deref(data, "data")?;
        check_out(out, "out")?;
        let report = solve_l21(&data.inner, &L21Options::new(lambda))?;
        finish_run(
            out,
            vec![StageResult { weights: report.solution, theta: f64::INFINITY }],
        );
        Ok(())
    })
}

/// # Safety
/// `run` must be a live handle; `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_run_stage_count(run: *const MsmtflRun, count: *mut usize) -> MsmtflStatus {
    guard(|| {
        let run = deref(run, "run")?;
        check_out(count, "count")?;
        *count = run.stages.len();
        Ok(())
    })
}

fn stage_of(run: &MsmtflRun, stage: usize) -> Result<&StageResult, Failure> {
    if stage == 0 || stage > run.stages.len() {
        return Err(Failure::Arg(format!(
            "stage {stage} out of range 1..={}",
            run.stages.len()
        )));
    }
    Ok(&run.stages[stage - 1])
}

fn copy_row_major(w: &WeightMatrix, buf: &mut [f64]) {
    for (dst, src) in buf.iter_mut().zip(w.as_array().iter()) {
        *dst = *src;
    }
}

/// Copies the `d x m` weights of a 1-based stage into `buffer`.
///
/// # Safety
/// `run` must be a live handle; `buffer` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_run_weights(
    run: *const MsmtflRun,
    stage: usize,
    buffer: *mut f64,
    len: usize,
) -> MsmtflStatus {
    guard(|| {
        let run = deref(run, "run")?;
        check_out(buffer, "buffer")?;
        let s = stage_of(run, stage)?;
        let need = s.weights.d() * s.weights.m();
        if len != need {
            return Err(Failure::Arg(format!("buffer holds {len} values, weights need {need}")));
        }
        copy_row_major(&s.weights, std::slice::from_raw_parts_mut(buffer, len));
        Ok(())
    })
}

/// Threshold used after a 1-based stage (`inf` when no row was released).
///
/// # Safety
/// `run` must be a live handle; `theta` must be writable.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_run_theta(run: *const MsmtflRun, stage: usize, theta: *mut f64) -> MsmtflStatus {
    guard(|| {
        let run = deref(run, "run")?;
        check_out(theta, "theta")?;
        *theta = stage_of(run, stage)?.theta;
        Ok(())
    })
}

/// # Safety
/// `run` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msmtfl_run_free(run: *mut MsmtflRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

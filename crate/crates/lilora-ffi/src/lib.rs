//! C ABI for the lilora continual-learning laboratory.
//!
//! The surface follows the usual C-binding conventions: opaque handles,
//! integer status codes, out-parameters, and a thread-local error message
//! retrievable with [`lilora_last_error_message`]. Every function catches
//! panics at the boundary and reports them as `LILORA_RUNTIME_ERROR`.
//!
//! The header `include/lilora.h` is generated by cbindgen from this file
//! (regenerated on every build).

use lilora::adapters::{param_count, LayerDims, Strategy};
use lilora::analysis::linear_cka;
use lilora::cli::{cmd_pretrain, cmd_run, ExperimentConfig};
use lilora::error::Error;
use lilora::linalg::Matrix;
use lilora::metrics::{
    average_performance, backward_transfer, mean_average_performance, AccuracyMatrix,
};
use lilora::taskgen::{generate_suite, load_suite, save_suite, SuiteParams, TaskSuite};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LiloraStatus {
    LiloraOk = 0,
    /// Invalid argument or configuration.
    LiloraInvalidArgument = 1,
    /// Runtime failure (training, I/O, internal panic).
    LiloraRuntimeError = 2,
    /// Checksum mismatch or corrupted artifact.
    LiloraIntegrityError = 3,
    /// A required pointer argument was null.
    LiloraNullPointer = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> LiloraStatus {
    match err {
        Error::Config(_) | Error::Parse { .. } | Error::Shape(_) | Error::Contract(_)
        | Error::Lookup(_) | Error::Data(_) => LiloraStatus::LiloraInvalidArgument,
        Error::Integrity(_) => LiloraStatus::LiloraIntegrityError,
        _ => LiloraStatus::LiloraRuntimeError,
    }
}

fn guard(f: impl FnOnce() -> LiloraStatus + std::panic::UnwindSafe) -> LiloraStatus {
    match catch_unwind(f) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            LiloraStatus::LiloraRuntimeError
        }
    }
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Option<&'a str> {
    if ptr.is_null() {
        return None;
    }
    CStr::from_ptr(ptr).to_str().ok()
}

/// Opaque task-suite handle.
pub struct LiloraSuite {
    inner: TaskSuite,
}

/// Version string of the library; the pointer is valid for the process
/// lifetime.
#[no_mangle]
pub extern "C" fn lilora_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Message of the last error raised on this thread; valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn lilora_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Generate a synthetic continual task suite. On success `*out` owns the
/// suite; release it with `lilora_suite_free`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lilora_suite_generate(
    d_in: u32,
    tasks: u32,
    classes_per_task: u32,
    train_per_class: u32,
    sigma: f64,
    seed: u64,
    out: *mut *mut LiloraSuite,
) -> LiloraStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return LiloraStatus::LiloraNullPointer;
    }
    guard(AssertUnwindSafe(|| {
        let params = SuiteParams {
            d_in: d_in as usize,
            tasks: tasks as usize,
            classes_per_task: classes_per_task as usize,
            train_per_class: train_per_class as usize,
            sigma,
            seed,
        };
        match generate_suite(params) {
            Ok(suite) => {
                *out = Box::into_raw(Box::new(LiloraSuite { inner: suite }));
                LiloraStatus::LiloraOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Write a suite to `path` (atomic, checksummed).
///
/// # Safety
/// `suite` must come from this library; `path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn lilora_suite_save(
    suite: *const LiloraSuite,
    path: *const c_char,
) -> LiloraStatus {
    let Some(path) = cstr(path) else {
        set_error("path is null or not UTF-8");
        return LiloraStatus::LiloraNullPointer;
    };
    if suite.is_null() {
        set_error("suite is null");
        return LiloraStatus::LiloraNullPointer;
    }
    guard(AssertUnwindSafe(|| {
        match save_suite(&(*suite).inner, Path::new(path)) {
            Ok(()) => LiloraStatus::LiloraOk,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Load a suite from `path`, verifying the checksum.
///
/// # Safety
/// `path` must be a valid C string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lilora_suite_load(
    path: *const c_char,
    out: *mut *mut LiloraSuite,
) -> LiloraStatus {
    let Some(path) = cstr(path) else {
        set_error("path is null or not UTF-8");
        return LiloraStatus::LiloraNullPointer;
    };
    if out.is_null() {
        set_error("out pointer is null");
        return LiloraStatus::LiloraNullPointer;
    }
    guard(AssertUnwindSafe(|| match load_suite(Path::new(path)) {
        Ok(suite) => {
            *out = Box::into_raw(Box::new(LiloraSuite { inner: suite }));
            LiloraStatus::LiloraOk
        }
        Err(e) => {
            set_error(&e.to_string());
            status_of(&e)
        }
    }))
}

/// Number of tasks in the suite.
///
/// # Safety
/// `suite` must come from this library; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lilora_suite_num_tasks(
    suite: *const LiloraSuite,
    out: *mut u32,
) -> LiloraStatus {
    if suite.is_null() || out.is_null() {
        set_error("null pointer argument");
        return LiloraStatus::LiloraNullPointer;
    }
    *out = (*suite).inner.num_tasks() as u32;
    LiloraStatus::LiloraOk
}

/// Release a suite handle. A null pointer is a no-op.
///
/// # Safety
/// `suite` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn lilora_suite_free(suite: *mut LiloraSuite) {
    if !suite.is_null() {
        drop(Box::from_raw(suite));
    }
}

/// Reassemble the lower-triangular accuracy matrix passed as a flat array
/// `a11, a21, a22, a31, ...` of length K(K+1)/2.
fn matrix_from_flat(values: &[f64]) -> Result<AccuracyMatrix, Error> {
    let mut rows = Vec::new();
    let mut idx = 0usize;
    let mut k = 1usize;
    while idx < values.len() {
        if idx + k > values.len() {
            return Err(Error::Shape(format!(
                "flat length {} is not a triangular number",
                values.len()
            )));
        }
        rows.push(values[idx..idx + k].to_vec());
        idx += k;
        k += 1;
    }
    AccuracyMatrix::from_rows(rows)
}

unsafe fn metric_over_flat(
    values: *const f64,
    len: usize,
    k: u32,
    out: *mut f64,
    f: impl Fn(&AccuracyMatrix, usize) -> Result<f64, Error> + std::panic::RefUnwindSafe,
) -> LiloraStatus {
    if values.is_null() || out.is_null() {
        set_error("null pointer argument");
        return LiloraStatus::LiloraNullPointer;
    }
    let slice = std::slice::from_raw_parts(values, len);
    guard(AssertUnwindSafe(|| {
        match matrix_from_flat(slice).and_then(|m| f(&m, k as usize)) {
            Ok(v) => {
                *out = v;
                LiloraStatus::LiloraOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// `AP_k` over a flat lower-triangular accuracy matrix.
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lilora_average_performance(
    values: *const f64,
    len: usize,
    k: u32,
    out: *mut f64,
) -> LiloraStatus {
    metric_over_flat(values, len, k, out, average_performance)
}

/// `MAP_k` over a flat lower-triangular accuracy matrix.
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lilora_mean_average_performance(
    values: *const f64,
    len: usize,
    k: u32,
    out: *mut f64,
) -> LiloraStatus {
    metric_over_flat(values, len, k, out, mean_average_performance)
}

/// `BWT_k` over a flat lower-triangular accuracy matrix (k >= 2).
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lilora_backward_transfer(
    values: *const f64,
    len: usize,
    k: u32,
    out: *mut f64,
) -> LiloraStatus {
    metric_over_flat(values, len, k, out, backward_transfer)
}

/// Closed-form parameter counts of `strategy_tag` over `layers` identical
/// layers of shape `d x k` with ranks `r` and `r_tilde`, after `num_tasks`
/// tasks.
///
/// # Safety
/// `strategy_tag` must be a valid C string; the three out-pointers must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn lilora_param_counts(
    strategy_tag: *const c_char,
    d: u32,
    k: u32,
    r: u32,
    r_tilde: u32,
    layers: u32,
    num_tasks: u32,
    total: *mut u64,
    per_task: *mut u64,
    shared: *mut u64,
) -> LiloraStatus {
    let Some(tag) = cstr(strategy_tag) else {
        set_error("strategy tag is null or not UTF-8");
        return LiloraStatus::LiloraNullPointer;
    };
    if total.is_null() || per_task.is_null() || shared.is_null() {
        set_error("null out pointer");
        return LiloraStatus::LiloraNullPointer;
    }
    guard(AssertUnwindSafe(|| {
        let strategy = match Strategy::parse(tag) {
            Ok(s) => s,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        };
        let dims = match LayerDims::new(d as usize, k as usize, r as usize, r_tilde as usize) {
            Ok(d) => d,
            Err(e) => {
                set_error(&e.to_string());
                return status_of(&e);
            }
        };
        let stack = vec![dims; layers as usize];
        let counts = param_count(strategy, &stack, num_tasks as usize);
        *total = counts.total;
        *per_task = counts.per_task;
        *shared = counts.shared;
        LiloraStatus::LiloraOk
    }))
}

/// Linear centered kernel alignment between two row-major matrices whose
/// rows are samples.
///
/// # Safety
/// `x` and `y` must point to `x_rows*x_cols` and `y_rows*y_cols` doubles;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lilora_linear_cka(
    x: *const f64,
    x_rows: u32,
    x_cols: u32,
    y: *const f64,
    y_rows: u32,
    y_cols: u32,
    out: *mut f64,
) -> LiloraStatus {
    if x.is_null() || y.is_null() || out.is_null() {
        set_error("null pointer argument");
        return LiloraStatus::LiloraNullPointer;
    }
    let xs = std::slice::from_raw_parts(x, (x_rows * x_cols) as usize).to_vec();
    let ys = std::slice::from_raw_parts(y, (y_rows * y_cols) as usize).to_vec();
    guard(AssertUnwindSafe(|| {
        let run = || -> Result<f64, Error> {
            let xm = Matrix::from_vec(x_rows as usize, x_cols as usize, xs.clone())?;
            let ym = Matrix::from_vec(y_rows as usize, y_cols as usize, ys.clone())?;
            linear_cka(&xm, &ym)
        };
        match run() {
            Ok(v) => {
                *out = v;
                LiloraStatus::LiloraOk
            }
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

/// Run a full experiment from a TOML configuration file: pretraining (suite
/// plus frozen backbone) followed by every configured strategy. Artifacts
/// are written to the config's output directory.
///
/// # Safety
/// `config_path` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn lilora_run_experiment(config_path: *const c_char) -> LiloraStatus {
    let Some(path) = cstr(config_path) else {
        set_error("config path is null or not UTF-8");
        return LiloraStatus::LiloraNullPointer;
    };
    guard(AssertUnwindSafe(|| {
        let run = || -> Result<(), Error> {
            let cfg = ExperimentConfig::load(Path::new(path))?;
            cmd_pretrain(&cfg)?;
            cmd_run(&cfg)?;
            Ok(())
        };
        match run() {
            Ok(()) => LiloraStatus::LiloraOk,
            Err(e) => {
                set_error(&e.to_string());
                status_of(&e)
            }
        }
    }))
}

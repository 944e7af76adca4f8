//! C ABI for the `uncertal` library.
//!
//! Datasets and models are opaque heap handles created and destroyed by
//! this library. Every fallible function returns an [`UncertalStatus`]; on
//! failure a description is available from [`uncertal_last_error`] on the
//! same thread. Panics never cross the boundary: they are caught and
//! reported as [`UncertalStatus::Panic`].
//!
//! The C header `include/uncertal.h` is generated from this file by the
//! build script.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use uncertal::data::{load, DataError, Dataset, Format};
use uncertal::experiment::{run_trial, Budget, ExperimentConfig, ExperimentError, NamedStrategy};
use uncertal::model::{posterior, train, Label, Model, ModelError, Sample, TrainConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UncertalStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range or malformed.
    InvalidArgument = 2,
    /// Dataset loading or validation failed.
    Data = 3,
    /// The numerical core failed (non-finite values, solver breakdown).
    Numerical = 4,
    /// A caller-provided buffer is too small; the required size was reported.
    BufferTooSmall = 5,
    /// An internal panic was caught.
    Panic = 6,
}

/// Opaque dataset handle.
pub struct UncertalDataset {
    inner: Dataset,
}

/// Opaque trained-model handle.
pub struct UncertalModel {
    inner: Model,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(UncertalStatus, String);

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure(UncertalStatus::Data, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::NonFinite(_) => UncertalStatus::Numerical,
            _ => UncertalStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        let status = match &e {
            ExperimentError::Data(_) => UncertalStatus::Data,
            ExperimentError::Config(_) | ExperimentError::Strategy(_) => {
                UncertalStatus::InvalidArgument
            }
            _ => UncertalStatus::Numerical,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(UncertalStatus::InvalidArgument, msg.into())
}

/// Run `f`, translating errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> UncertalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            UncertalStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
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
            UncertalStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure(
            UncertalStatus::NullPointer,
            format!("{what} is null"),
        ))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    non_null(p, what)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

/// Message describing the last failed call on this thread, or null if the
/// last call succeeded. The pointer stays valid until the next call into
/// this library on the same thread.
#[no_mangle]
pub extern "C" fn uncertal_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn uncertal_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a dataset file. `format` is `"libsvm"`, `"csv"` or null to infer it
/// from the extension.
///
/// # Safety
/// `path` must be a NUL-terminated string, `format` null or NUL-terminated,
/// and `out` a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn uncertal_dataset_load(
    path: *const c_char,
    format: *const c_char,
    out: *mut *mut UncertalDataset,
) -> UncertalStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = Path::new(c_str(path, "path")?);
        let format = if format.is_null() {
            Format::from_path(path)
        } else {
            let name = c_str(format, "format")?;
            Format::parse(name).ok_or_else(|| invalid(format!("unknown format '{name}'")))?
        };
        let ds = load(path, format)?;
        *out = Box::into_raw(Box::new(UncertalDataset { inner: ds }));
        Ok(())
    })
}

/// Build a dataset from a row-major `n x dim` feature matrix and `n`
/// labels in {-1, +1}.
///
/// # Safety
/// `features` must point to `n * dim` doubles, `labels` to `n` ints, `name`
/// must be null or NUL-terminated, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uncertal_dataset_from_arrays(
    name: *const c_char,
    features: *const f64,
    labels: *const i32,
    n: usize,
    dim: usize,
    out: *mut *mut UncertalDataset,
) -> UncertalStatus {
    guard(|| {
        non_null(out, "out")?;
        non_null(features, "features")?;
        non_null(labels, "labels")?;
        let len = n
            .checked_mul(dim)
            .ok_or_else(|| invalid("n * dim overflows"))?;
        let name = if name.is_null() {
            "arrays"
        } else {
            c_str(name, "name")?
        };
        let x = std::slice::from_raw_parts(features, len).to_vec();
        let y = std::slice::from_raw_parts(labels, n)
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                Label::from_sign(f64::from(v))
                    .ok_or_else(|| invalid(format!("label {v} at row {i} is not -1 or +1")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let ds = Dataset::new(name, x, dim, y)?;
        *out = Box::into_raw(Box::new(UncertalDataset { inner: ds }));
        Ok(())
    })
}

/// Number of instances, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uncertal_dataset_len(ds: *const UncertalDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Feature dimension, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uncertal_dataset_dim(ds: *const UncertalDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.dim())
}

/// Release a dataset. Null is ignored.
///
/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uncertal_dataset_free(ds: *mut UncertalDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Fit the regularized logistic regression on the given rows of `ds` (all
/// rows when `rows` is null).
///
/// # Safety
/// `ds` must be a live handle, `rows` null or pointing to `n_rows` indices,
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn uncertal_model_train(
    ds: *const UncertalDataset,
    rows: *const usize,
    n_rows: usize,
    lambda: f64,
    out: *mut *mut UncertalModel,
) -> UncertalStatus {
    guard(|| {
        non_null(ds, "dataset")?;
        non_null(out, "out")?;
        let data = &(*ds).inner;
        let indices: Vec<usize> = if rows.is_null() {
            (0..data.len()).collect()
        } else {
            std::slice::from_raw_parts(rows, n_rows).to_vec()
        };
        if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
            return Err(invalid(format!(
                "row {bad} out of range for {} instances",
                data.len()
            )));
        }
        let samples: Vec<Sample<'_>> = indices.iter().map(|&i| data.sample(i)).collect();
        let fit = train(&samples, &TrainConfig::with_lambda(lambda))?;
        *out = Box::into_raw(Box::new(UncertalModel { inner: fit.model }));
        Ok(())
    })
}

/// Feature dimension of a model (weights excluding the bias), or 0 for null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uncertal_model_dim(model: *const UncertalModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.dim())
}

/// Copy the `dim + 1` weights (bias last) into `out`.
///
/// # Safety
/// `model` must be a live handle and `out` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn uncertal_model_weights(
    model: *const UncertalModel,
    out: *mut f64,
    capacity: usize,
) -> UncertalStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        let w = (*model).inner.weights();
        if capacity < w.len() {
            return Err(Failure(
                UncertalStatus::BufferTooSmall,
                format!("need {} doubles, got {capacity}", w.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, w.len()).copy_from_slice(w);
        Ok(())
    })
}

/// `P(+1 | x)` for a `dim`-vector `x`.
///
/// # Safety
/// `model` must be a live handle, `x` must point to `dim` doubles and
/// `out_pos` must be writable.
#[no_mangle]
pub unsafe extern "C" fn uncertal_model_posterior(
    model: *const UncertalModel,
    x: *const f64,
    dim: usize,
    out_pos: *mut f64,
) -> UncertalStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(x, "x")?;
        non_null(out_pos, "out_pos")?;
        let p = posterior(&(*model).inner, std::slice::from_raw_parts(x, dim))?;
        *out_pos = p.pos;
        Ok(())
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn uncertal_model_free(model: *mut UncertalModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Run one active-learning trial of `strategy` on `ds` and write the
/// learning curve (test accuracy after 0, 1, ..., budget queries).
///
/// `budget` 0 selects the default `min(100, pool)`. On
/// [`UncertalStatus::BufferTooSmall`] `curve_len` holds the required
/// capacity.
///
/// # Safety
/// `ds` must be a live handle, `strategy` NUL-terminated, `curve` must hold
/// `curve_capacity` doubles, and `curve_len` and `alc` must be writable.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn uncertal_run_trial(
    ds: *const UncertalDataset,
    strategy: *const c_char,
    trial: usize,
    budget: usize,
    lambda: f64,
    seed: u64,
    curve: *mut f64,
    curve_capacity: usize,
    curve_len: *mut usize,
    alc: *mut f64,
) -> UncertalStatus {
    guard(|| {
        non_null(ds, "dataset")?;
        non_null(curve_len, "curve_len")?;
        non_null(alc, "alc")?;
        let name = c_str(strategy, "strategy")?;
        let strategy = NamedStrategy::from_name(name).map_err(|e| invalid(e.to_string()))?;
        let cfg = ExperimentConfig {
            trials: trial + 1,
            budget: if budget == 0 {
                Budget::Default
            } else {
                Budget::Fixed(budget)
            },
            lambda,
            base_seed: seed,
            ..ExperimentConfig::default()
        };
        let result = run_trial(&(*ds).inner, &strategy, &cfg, trial)?;
        let acc = &result.curve.accuracies;
        *curve_len = acc.len();
        if curve_capacity < acc.len() {
            return Err(Failure(
                UncertalStatus::BufferTooSmall,
                format!("curve needs {} doubles, got {curve_capacity}", acc.len()),
            ));
        }
        non_null(curve, "curve")?;
        std::slice::from_raw_parts_mut(curve, acc.len()).copy_from_slice(acc);
        *alc = result.alc;
        Ok(())
    })
}

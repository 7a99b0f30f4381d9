//! C ABI for optnet.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every fallible call returns an
//! [`OptnetStatus`]; on failure [`optnet_last_error`] describes what went
//! wrong on the calling thread. Panics are caught and reported as
//! `OPTNET_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::{DMatrix, DVector};
use optnet::data::{
    generate_benchmark, load_csv, partition, BenchmarkConfig, Dataset, GroundTruth,
    PartitionRatios, PartitionedDataset,
};
use optnet::linear::{fit_ols, mae, LinearModel};
use optnet::networks::{feature_selection_network, FeatureSelectionSettings, NetworkResult};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptnetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    ConfigError = 4,
    RuntimeError = 5,
    Panic = 6,
}

/// A dataset, plus its ground truth when it was generated.
pub struct OptnetDataset {
    dataset: Dataset,
    truth: Option<GroundTruth>,
}

pub struct OptnetPartition(PartitionedDataset);

pub struct OptnetLinearModel(LinearModel);

pub struct OptnetSelection(NetworkResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(OptnetStatus, String);

impl Failure {
    fn new(status: OptnetStatus, e: impl std::fmt::Display) -> Self {
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OptnetStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OptnetStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {message}"));
            OptnetStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure::new(OptnetStatus::NullPointer, format!("{name} is null")))
}

fn out_ptr<T>(out: *mut *mut T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::new(OptnetStatus::NullPointer, "output pointer is null"));
    }
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::new(OptnetStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(OptnetStatus::InvalidArgument, format!("{name}: {e}")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(OptnetStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next optnet call on the same thread.
#[no_mangle]
pub extern "C" fn optnet_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Generates the synthetic sparse linear benchmark.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn optnet_benchmark_generate(
    n_observations: usize,
    n_features: usize,
    n_relevant: usize,
    noise_variance_fraction: f64,
    seed: u64,
    out: *mut *mut OptnetDataset,
) -> OptnetStatus {
    guard(|| {
        out_ptr(out)?;
        let config = BenchmarkConfig {
            n_observations,
            n_features,
            n_relevant,
            noise_variance_fraction,
            ..Default::default()
        };
        let (dataset, truth) = generate_benchmark(&config, seed)
            .map_err(|e| Failure::new(OptnetStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(OptnetDataset {
            dataset,
            truth: Some(truth),
        }));
        Ok(())
    })
}

/// Loads a CSV with a header row; `target` names the dependent column.
///
/// # Safety
/// `path` and `target` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_dataset_load_csv(
    path: *const c_char,
    target: *const c_char,
    out: *mut *mut OptnetDataset,
) -> OptnetStatus {
    guard(|| {
        out_ptr(out)?;
        let dataset = load_csv(text(path, "path")?, text(target, "target")?)
            .map_err(|e| Failure::new(OptnetStatus::DataError, e))?;
        *out = Box::into_raw(Box::new(OptnetDataset { dataset, truth: None }));
        Ok(())
    })
}

/// Builds a dataset from a row-major `rows × cols` matrix and a target of length `rows`.
///
/// # Safety
/// `x` must hold `rows * cols` values and `y` `rows` values.
#[no_mangle]
pub unsafe extern "C" fn optnet_dataset_from_arrays(
    x: *const f64,
    y: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut OptnetDataset,
) -> OptnetStatus {
    guard(|| {
        out_ptr(out)?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::new(OptnetStatus::InvalidArgument, "rows * cols overflows"))?;
        let x = DMatrix::from_row_slice(rows, cols, slice(x, len, "x")?);
        let y = DVector::from_column_slice(slice(y, rows, "y")?);
        let dataset = Dataset::with_default_names(x, y)
            .map_err(|e| Failure::new(OptnetStatus::DataError, e))?;
        *out = Box::into_raw(Box::new(OptnetDataset { dataset, truth: None }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_dataset_shape(
    dataset: *const OptnetDataset,
    rows: *mut usize,
    cols: *mut usize,
) -> OptnetStatus {
    guard(|| {
        let d = deref(dataset, "dataset")?;
        if rows.is_null() || cols.is_null() {
            return Err(Failure::new(OptnetStatus::NullPointer, "rows or cols is null"));
        }
        *rows = d.dataset.n_rows();
        *cols = d.dataset.n_features();
        Ok(())
    })
}

/// Writes up to `capacity` true feature indices and stores their total count
/// in `count`. Fails for datasets without ground truth.
///
/// # Safety
/// `indices` must hold `capacity` entries (or be null when `capacity` is 0).
#[no_mangle]
pub unsafe extern "C" fn optnet_dataset_true_features(
    dataset: *const OptnetDataset,
    indices: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> OptnetStatus {
    guard(|| {
        let d = deref(dataset, "dataset")?;
        let truth = d.truth.as_ref().ok_or_else(|| {
            Failure::new(OptnetStatus::InvalidArgument, "dataset has no ground truth")
        })?;
        if count.is_null() || (capacity > 0 && indices.is_null()) {
            return Err(Failure::new(OptnetStatus::NullPointer, "indices or count is null"));
        }
        *count = truth.true_indices.len();
        for (i, &j) in truth.true_indices.iter().take(capacity).enumerate() {
            *indices.add(i) = j;
        }
        Ok(())
    })
}

/// # Safety
/// `dataset` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn optnet_dataset_free(dataset: *mut OptnetDataset) {
    free(dataset);
}

/// Splits rows into train, validation and test shares that sum to 1.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_partition(
    dataset: *const OptnetDataset,
    train: f64,
    validation: f64,
    test: f64,
    seed: u64,
    out: *mut *mut OptnetPartition,
) -> OptnetStatus {
    guard(|| {
        out_ptr(out)?;
        let d = deref(dataset, "dataset")?;
        let p = partition(&d.dataset, PartitionRatios::new(train, validation, test), seed)
            .map_err(|e| Failure::new(OptnetStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(OptnetPartition(p)));
        Ok(())
    })
}

/// # Safety
/// `partition` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn optnet_partition_free(partition: *mut OptnetPartition) {
    free(partition);
}

/// Fits ordinary least squares with intercept on every column.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_ols_fit(
    dataset: *const OptnetDataset,
    out: *mut *mut OptnetLinearModel,
) -> OptnetStatus {
    guard(|| {
        out_ptr(out)?;
        let d = deref(dataset, "dataset")?;
        let fit = fit_ols(d.dataset.features(), d.dataset.target())
            .map_err(|e| Failure::new(OptnetStatus::RuntimeError, e))?;
        *out = Box::into_raw(Box::new(OptnetLinearModel(fit.model)));
        Ok(())
    })
}

/// Copies up to `capacity` weights, stores the weight count and intercept.
///
/// # Safety
/// `weights` must hold `capacity` entries (or be null when `capacity` is 0);
/// `count` and `intercept` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_model_coefficients(
    model: *const OptnetLinearModel,
    weights: *mut f64,
    capacity: usize,
    count: *mut usize,
    intercept: *mut f64,
) -> OptnetStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        if count.is_null() || intercept.is_null() || (capacity > 0 && weights.is_null()) {
            return Err(Failure::new(OptnetStatus::NullPointer, "output buffer is null"));
        }
        *count = m.weights.len();
        *intercept = m.intercept;
        for (i, &w) in m.weights.iter().take(capacity).enumerate() {
            *weights.add(i) = w;
        }
        Ok(())
    })
}

/// Predicts `rows` outputs from a row-major matrix with the model's column count.
///
/// # Safety
/// `x` must hold `rows * cols` values and `predictions` `rows` values.
#[no_mangle]
pub unsafe extern "C" fn optnet_model_predict(
    model: *const OptnetLinearModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    predictions: *mut f64,
) -> OptnetStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        if rows > 0 && predictions.is_null() {
            return Err(Failure::new(OptnetStatus::NullPointer, "predictions is null"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure::new(OptnetStatus::InvalidArgument, "rows * cols overflows"))?;
        let x = DMatrix::from_row_slice(rows, cols, slice(x, len, "x")?);
        let y = m
            .predict(&x)
            .map_err(|e| Failure::new(OptnetStatus::InvalidArgument, e))?;
        if rows > 0 {
            std::slice::from_raw_parts_mut(predictions, rows).copy_from_slice(y.as_slice());
        }
        Ok(())
    })
}

/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn optnet_model_free(model: *mut OptnetLinearModel) {
    free(model);
}

/// Mean absolute error of two equally long arrays.
///
/// # Safety
/// Both arrays must hold `len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_mae(
    predicted: *const f64,
    actual: *const f64,
    len: usize,
    out: *mut f64,
) -> OptnetStatus {
    guard(|| {
        if out.is_null() {
            return Err(Failure::new(OptnetStatus::NullPointer, "out is null"));
        }
        *out = mae(slice(predicted, len, "predicted")?, slice(actual, len, "actual")?)
            .map_err(|e| Failure::new(OptnetStatus::InvalidArgument, e))?;
        Ok(())
    })
}

/// Runs the feature-selection network. `settings_toml` may be null for the
/// defaults; otherwise it holds the selection settings as TOML
/// (`osga`, `init_density`, `crossover`, `fitness`, `model`).
///
/// # Safety
/// `partition` must be a live handle, `settings_toml` null or NUL-terminated,
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_feature_selection_run(
    partition: *const OptnetPartition,
    settings_toml: *const c_char,
    seed: u64,
    workers: usize,
    out: *mut *mut OptnetSelection,
) -> OptnetStatus {
    guard(|| {
        out_ptr(out)?;
        let data = &deref(partition, "partition")?.0;
        let settings: FeatureSelectionSettings = if settings_toml.is_null() {
            FeatureSelectionSettings::default()
        } else {
            toml::from_str(text(settings_toml, "settings_toml")?)
                .map_err(|e| Failure::new(OptnetStatus::ConfigError, e))?
        };
        let result = feature_selection_network(data, &settings, seed, workers.max(1))
            .map_err(|e| Failure::new(OptnetStatus::RuntimeError, e))?;
        *out = Box::into_raw(Box::new(OptnetSelection(result)));
        Ok(())
    })
}

/// Copies up to `capacity` selected column indices and stores the count,
/// the refitted model's test MAE and the number of evaluations.
///
/// # Safety
/// `indices` must hold `capacity` entries (or be null when `capacity` is 0);
/// the other outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_selection_summary(
    selection: *const OptnetSelection,
    indices: *mut usize,
    capacity: usize,
    count: *mut usize,
    test_mae: *mut f64,
    evaluations: *mut usize,
) -> OptnetStatus {
    guard(|| {
        let r = &deref(selection, "selection")?.0;
        if count.is_null()
            || test_mae.is_null()
            || evaluations.is_null()
            || (capacity > 0 && indices.is_null())
        {
            return Err(Failure::new(OptnetStatus::NullPointer, "output buffer is null"));
        }
        let selected = r.best_mask.selected();
        *count = selected.len();
        *test_mae = r.best_model.test_mae.unwrap_or(f64::NAN);
        *evaluations = r.evaluations;
        for (i, &j) in selected.iter().take(capacity).enumerate() {
            *indices.add(i) = j;
        }
        Ok(())
    })
}

/// The full result as JSON. Release the string with [`optnet_string_free`].
///
/// # Safety
/// `selection` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn optnet_selection_to_json(
    selection: *const OptnetSelection,
    out: *mut *mut c_char,
) -> OptnetStatus {
    guard(|| {
        out_ptr(out)?;
        let r = &deref(selection, "selection")?.0;
        let json = serde_json::to_string(r).map_err(|e| Failure::new(OptnetStatus::RuntimeError, e))?;
        *out = CString::new(json)
            .map_err(|e| Failure::new(OptnetStatus::RuntimeError, e))?
            .into_raw();
        Ok(())
    })
}

/// # Safety
/// `selection` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn optnet_selection_free(selection: *mut OptnetSelection) {
    free(selection);
}

/// # Safety
/// `s` must be a string returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn optnet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

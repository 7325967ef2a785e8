//! C ABI over the pipeline: opaque handles, integer status codes, and a
//! thread-local last-error message. The header is generated into
//! `include/mrcgat.h` by the build script.
//!
//! Ownership rules: every `*_new`/`*_load`/`*_synth`/`mrcgat_train`
//! output is owned by the caller and released with the matching `*_free`;
//! strings returned through out-parameters are released with
//! `mrcgat_string_free`. Handles are not thread-safe; use one per thread
//! or synchronize externally.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use mrcgat::data::io::{load_csv, save_csv};
use mrcgat::data::synth::{synth_generate, SynthSpec};
use mrcgat::data::Dataset;
use mrcgat::error::Error;
use mrcgat::model::ModelParameters;
use mrcgat::numeric::rng::{streams, RngStream};
use mrcgat::train::{cross_validate, infer_one, train, QueryInput, TrainingConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MrcgatStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Invalid configuration, sampling precondition, or argument.
    InvalidArgument = 2,
    /// Input file violates the documented schema.
    SchemaError = 3,
    /// Numerical failure (non-finite loss, covariance not SPD).
    NumericError = 4,
    IoError = 5,
}

pub struct MrcgatDataset {
    inner: Dataset,
}

pub struct MrcgatConfig {
    inner: TrainingConfig,
}

pub struct MrcgatModel {
    inner: ModelParameters,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> MrcgatStatus {
    match err {
        Error::Schema(_) | Error::Row { .. } | Error::ModelFile(_) => MrcgatStatus::SchemaError,
        Error::NotSpd(_) | Error::Numeric(_) | Error::Domain(_) => MrcgatStatus::NumericError,
        Error::Io(_) | Error::Json(_) => MrcgatStatus::IoError,
        _ => MrcgatStatus::InvalidArgument,
    }
}

fn fail(err: &Error) -> MrcgatStatus {
    set_error(&err.to_string());
    status_of(err)
}

/// Last error message of the current thread; valid until the next failing
/// call on this thread. Never null.
#[no_mangle]
pub extern "C" fn mrcgat_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mrcgat_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn str_arg<'a>(ptr: *const c_char) -> Result<&'a str, MrcgatStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(MrcgatStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        MrcgatStatus::InvalidArgument
    })
}

macro_rules! try_ffi {
    ($expr:expr) => {
        match $expr {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! nonnull {
    ($ptr:expr) => {
        match unsafe { $ptr.as_ref() } {
            Some(v) => v,
            None => {
                set_error("null handle argument");
                return MrcgatStatus::NullArgument;
            }
        }
    };
}

/// Load a dataset CSV (schema: subject_id,label,rf_*,cog_*,mri_*).
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// pointer; on success `*out` owns a new dataset handle.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_dataset_load_csv(
    path: *const c_char,
    out: *mut *mut MrcgatDataset,
) -> MrcgatStatus {
    if out.is_null() {
        set_error("null out pointer");
        return MrcgatStatus::NullArgument;
    }
    let path = try_ffi!(str_arg(path));
    match load_csv(Path::new(path)) {
        Ok(dataset) => {
            *out = Box::into_raw(Box::new(MrcgatDataset { inner: dataset }));
            MrcgatStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Generate a synthetic three-class cohort.
///
/// # Safety
/// `out` must be a valid pointer; on success `*out` owns a new handle.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_dataset_synth(
    seed: u64,
    n_per_class: usize,
    d_rf: usize,
    d_cog: usize,
    d_mri: usize,
    separation: f64,
    out: *mut *mut MrcgatDataset,
) -> MrcgatStatus {
    if out.is_null() {
        set_error("null out pointer");
        return MrcgatStatus::NullArgument;
    }
    let spec = SynthSpec {
        seed,
        n_per_class,
        dims: (d_rf, d_cog, d_mri),
        separation,
    };
    match synth_generate(&spec) {
        Ok(dataset) => {
            *out = Box::into_raw(Box::new(MrcgatDataset { inner: dataset }));
            MrcgatStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `dataset` must be a live handle and `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_dataset_save_csv(
    dataset: *const MrcgatDataset,
    path: *const c_char,
) -> MrcgatStatus {
    let dataset = nonnull!(dataset);
    let path = try_ffi!(str_arg(path));
    match save_csv(&dataset.inner, Path::new(path)) {
        Ok(()) => MrcgatStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `dataset` must be a live handle (or null, which yields 0).
#[no_mangle]
pub unsafe extern "C" fn mrcgat_dataset_num_subjects(dataset: *const MrcgatDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.records.len())
}

/// # Safety
/// `dataset` must be a live handle (or null, which yields 0).
#[no_mangle]
pub unsafe extern "C" fn mrcgat_dataset_num_features(dataset: *const MrcgatDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.num_features())
}

/// # Safety
/// `dataset` must be a live handle (or null, which yields 0).
#[no_mangle]
pub unsafe extern "C" fn mrcgat_dataset_num_classes(dataset: *const MrcgatDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.num_classes())
}

/// # Safety
/// `dataset` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_dataset_free(dataset: *mut MrcgatDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// New configuration with the documented defaults.
#[no_mangle]
pub extern "C" fn mrcgat_config_new() -> *mut MrcgatConfig {
    Box::into_raw(Box::new(MrcgatConfig {
        inner: TrainingConfig::default(),
    }))
}

/// Set one configuration key from its string form, e.g.
/// ("iterations", "300"), ("lambda", "auto"), ("optimizer", "sgd").
///
/// # Safety
/// `config` must be a live handle; `key`/`value` valid strings.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_config_set(
    config: *mut MrcgatConfig,
    key: *const c_char,
    value: *const c_char,
) -> MrcgatStatus {
    let config = match config.as_mut() {
        Some(c) => c,
        None => {
            set_error("null config handle");
            return MrcgatStatus::NullArgument;
        }
    };
    let key = try_ffi!(str_arg(key));
    let value = try_ffi!(str_arg(value));
    match config.inner.set_key(key, value) {
        Ok(()) => MrcgatStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `config` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_config_free(config: *mut MrcgatConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Train on every labeled subject of the dataset.
///
/// # Safety
/// `dataset`/`config` must be live handles; on success `*out` owns a new
/// model handle.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_train(
    dataset: *const MrcgatDataset,
    config: *const MrcgatConfig,
    out: *mut *mut MrcgatModel,
) -> MrcgatStatus {
    let dataset = nonnull!(dataset);
    let config = nonnull!(config);
    if out.is_null() {
        set_error("null out pointer");
        return MrcgatStatus::NullArgument;
    }
    match train(&dataset.inner, &config.inner) {
        Ok(outcome) => {
            *out = Box::into_raw(Box::new(MrcgatModel {
                inner: outcome.params,
            }));
            MrcgatStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `model` must be a live handle and `path` a valid string.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_model_save(
    model: *const MrcgatModel,
    path: *const c_char,
) -> MrcgatStatus {
    let model = nonnull!(model);
    let path = try_ffi!(str_arg(path));
    match model.inner.save(Path::new(path)) {
        Ok(()) => MrcgatStatus::Ok,
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `path` must be a valid string; on success `*out` owns a new handle.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_model_load(
    path: *const c_char,
    out: *mut *mut MrcgatModel,
) -> MrcgatStatus {
    if out.is_null() {
        set_error("null out pointer");
        return MrcgatStatus::NullArgument;
    }
    let path = try_ffi!(str_arg(path));
    match ModelParameters::load(Path::new(path)) {
        Ok(params) => {
            *out = Box::into_raw(Box::new(MrcgatModel { inner: params }));
            MrcgatStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Number of classes the model predicts (0 for null).
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_model_num_classes(model: *const MrcgatModel) -> usize {
    model.as_ref().map_or(0, |m| m.inner.config.num_classes)
}

/// # Safety
/// `model` must come from this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_model_free(model: *mut MrcgatModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Classify one query subject inductively: supports are drawn from the
/// labeled subjects of `support_pool` and the averaged class distribution
/// is written to `probabilities_out` (length = number of classes).
///
/// # Safety
/// `features` must point to `features_len` doubles and
/// `probabilities_out` to one double per class; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_infer(
    model: *const MrcgatModel,
    support_pool: *const MrcgatDataset,
    config: *const MrcgatConfig,
    features: *const f64,
    features_len: usize,
    probabilities_out: *mut f64,
) -> MrcgatStatus {
    let model = nonnull!(model);
    let pool = nonnull!(support_pool);
    let config = nonnull!(config);
    if features.is_null() || probabilities_out.is_null() {
        set_error("null buffer argument");
        return MrcgatStatus::NullArgument;
    }
    let features = std::slice::from_raw_parts(features, features_len);
    let labeled = pool.inner.labeled_indices();
    let stream = RngStream::new(config.inner.seed, streams::INFER);
    let result = infer_one(
        &model.inner,
        &pool.inner,
        &labeled,
        QueryInput {
            subject_id: "ffi_query",
            features,
        },
        &config.inner,
        &stream,
        None,
    );
    match result {
        Ok(probs) => {
            std::ptr::copy_nonoverlapping(probs.as_ptr(), probabilities_out, probs.len());
            MrcgatStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

#[derive(serde::Serialize)]
struct FfiCvReport<'a> {
    accuracy_mean: f64,
    accuracy_std: f64,
    micro_auc_mean: f64,
    micro_auc_std: f64,
    folds: &'a [mrcgat::metrics::MetricsReport],
}

/// Cross-validate with retraining per fold; the JSON report is returned
/// through `report_json_out` and must be released with
/// `mrcgat_string_free`.
///
/// # Safety
/// `dataset`/`config` must be live handles and `report_json_out` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_cross_validate(
    dataset: *const MrcgatDataset,
    config: *const MrcgatConfig,
    report_json_out: *mut *mut c_char,
) -> MrcgatStatus {
    let dataset = nonnull!(dataset);
    let config = nonnull!(config);
    if report_json_out.is_null() {
        set_error("null out pointer");
        return MrcgatStatus::NullArgument;
    }
    match cross_validate(&dataset.inner, &config.inner) {
        Ok(outcome) => {
            let report = FfiCvReport {
                accuracy_mean: outcome.accuracy_mean,
                accuracy_std: outcome.accuracy_std,
                micro_auc_mean: outcome.micro_auc_mean,
                micro_auc_std: outcome.micro_auc_std,
                folds: &outcome.folds,
            };
            let json = match serde_json::to_string_pretty(&report) {
                Ok(j) => j,
                Err(e) => {
                    set_error(&e.to_string());
                    return MrcgatStatus::IoError;
                }
            };
            let c = CString::new(json.replace('\0', " ")).unwrap_or_default();
            *report_json_out = c.into_raw();
            MrcgatStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must have been returned by this library and not already be freed.
#[no_mangle]
pub unsafe extern "C" fn mrcgat_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    #[test]
    fn synth_train_infer_round_trip() {
        unsafe {
            let mut dataset: *mut MrcgatDataset = std::ptr::null_mut();
            let status = mrcgat_dataset_synth(7, 8, 2, 2, 2, 5.0, &mut dataset);
            assert_eq!(status, MrcgatStatus::Ok);
            assert_eq!(mrcgat_dataset_num_subjects(dataset), 24);
            assert_eq!(mrcgat_dataset_num_features(dataset), 6);
            assert_eq!(mrcgat_dataset_num_classes(dataset), 3);

            let config = mrcgat_config_new();
            for (k, v) in [
                ("q", "3"),
                ("knn_k", "3"),
                ("iterations", "20"),
                ("episodes_per_iteration", "8"),
                ("head_dim_1", "4"),
                ("head_dim_2", "4"),
                ("classifier_hidden", "6"),
            ] {
                assert_eq!(
                    mrcgat_config_set(config, c(k).as_ptr(), c(v).as_ptr()),
                    MrcgatStatus::Ok
                );
            }

            let mut model: *mut MrcgatModel = std::ptr::null_mut();
            assert_eq!(mrcgat_train(dataset, config, &mut model), MrcgatStatus::Ok);
            assert_eq!(mrcgat_model_num_classes(model), 3);

            let features = [0.1; 6];
            let mut probs = vec![0.0; 3];
            assert_eq!(
                mrcgat_infer(
                    model,
                    dataset,
                    config,
                    features.as_ptr(),
                    6,
                    probs.as_mut_ptr()
                ),
                MrcgatStatus::Ok
            );
            let sum: f64 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);

            let dir = tempfile::tempdir().unwrap();
            let model_path = c(dir.path().join("m.json").to_str().unwrap());
            assert_eq!(
                mrcgat_model_save(model, model_path.as_ptr()),
                MrcgatStatus::Ok
            );
            let mut loaded: *mut MrcgatModel = std::ptr::null_mut();
            assert_eq!(
                mrcgat_model_load(model_path.as_ptr(), &mut loaded),
                MrcgatStatus::Ok
            );
            let mut probs2 = vec![0.0; 3];
            assert_eq!(
                mrcgat_infer(
                    loaded,
                    dataset,
                    config,
                    features.as_ptr(),
                    6,
                    probs2.as_mut_ptr()
                ),
                MrcgatStatus::Ok
            );
            assert_eq!(probs, probs2);

            mrcgat_model_free(loaded);
            mrcgat_model_free(model);
            mrcgat_config_free(config);
            mrcgat_dataset_free(dataset);
        }
    }

    #[test]
    fn errors_set_status_and_message() {
        unsafe {
            let mut dataset: *mut MrcgatDataset = std::ptr::null_mut();
            let missing = c("/nonexistent/nope.csv");
            let status = mrcgat_dataset_load_csv(missing.as_ptr(), &mut dataset);
            assert_eq!(status, MrcgatStatus::SchemaError);
            let msg = CStr::from_ptr(mrcgat_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());

            assert_eq!(
                mrcgat_dataset_load_csv(std::ptr::null(), &mut dataset),
                MrcgatStatus::NullArgument
            );

            let config = mrcgat_config_new();
            assert_eq!(
                mrcgat_config_set(config, c("tau").as_ptr(), c("-3").as_ptr()),
                MrcgatStatus::InvalidArgument
            );
            assert_eq!(
                mrcgat_config_set(config, c("lambda").as_ptr(), c("auto").as_ptr()),
                MrcgatStatus::Ok
            );
            mrcgat_config_free(config);

            let mut model: *mut MrcgatModel = std::ptr::null_mut();
            let bad = c("/nonexistent/model.json");
            assert_eq!(
                mrcgat_model_load(bad.as_ptr(), &mut model),
                MrcgatStatus::IoError
            );
        }
    }

    #[test]
    fn cross_validate_returns_json() {
        unsafe {
            let mut dataset: *mut MrcgatDataset = std::ptr::null_mut();
            assert_eq!(
                mrcgat_dataset_synth(3, 6, 1, 1, 1, 6.0, &mut dataset),
                MrcgatStatus::Ok
            );
            let config = mrcgat_config_new();
            for (k, v) in [
                ("q", "2"),
                ("knn_k", "2"),
                ("iterations", "4"),
                ("episodes_per_iteration", "4"),
                ("fold_count", "2"),
                ("head_dim_1", "3"),
                ("head_dim_2", "3"),
                ("classifier_hidden", "4"),
            ] {
                assert_eq!(
                    mrcgat_config_set(config, c(k).as_ptr(), c(v).as_ptr()),
                    MrcgatStatus::Ok
                );
            }
            let mut json: *mut c_char = std::ptr::null_mut();
            assert_eq!(
                mrcgat_cross_validate(dataset, config, &mut json),
                MrcgatStatus::Ok
            );
            let text = CStr::from_ptr(json).to_str().unwrap();
            let parsed: serde_json::Value = serde_json::from_str(text).unwrap();
            assert!(parsed["accuracy_mean"].is_f64());
            assert_eq!(parsed["folds"].as_array().unwrap().len(), 2);
            mrcgat_string_free(json);
            mrcgat_config_free(config);
            mrcgat_dataset_free(dataset);
        }
    }

    #[test]
    fn version_is_nul_terminated() {
        let v = unsafe { CStr::from_ptr(mrcgat_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }
}

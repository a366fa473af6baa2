//! C ABI over the infercost core: fitted equations, synthetic datasets and
//! trained classifiers behind opaque handles.
//!
//! Every function returns an [`InfercostStatus`]. On failure the message is
//! kept per thread and can be copied out with [`infercost_last_error`].
//! Handles are released with their matching `*_free` function; strings
//! returned by the library are released with [`infercost_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use infercost::classifiers::train;
use infercost::datasets::generate;
use infercost::guardrails::GuardrailStack;
use infercost::model::{design_row, fit_with, FitOptions};
use infercost::{
    AlgorithmKind, DataType, Dataset, Error, FittedEquation, GuardrailConfig, GuardrailConstants, Hyperparameters,
    MeasurementRecord, PredictorInputs, Target, TrainedModel,
};

pub const INFERCOST_ALGO_SVM: u32 = 0;
pub const INFERCOST_ALGO_KNN: u32 = 1;
pub const INFERCOST_ALGO_RF: u32 = 2;
pub const INFERCOST_ALGO_NN: u32 = 3;

pub const INFERCOST_TYPE_TABULAR: u32 = 0;
pub const INFERCOST_TYPE_TEXT: u32 = 1;
pub const INFERCOST_TYPE_IMAGE: u32 = 2;

pub const INFERCOST_TARGET_LATENCY: u32 = 0;
pub const INFERCOST_TARGET_ENERGY: u32 = 1;

/// Length of a design row in the numeric data-type encoding.
pub const INFERCOST_DESIGN_WIDTH: usize = 12;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InfercostStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    /// The fit had too few records or collinear columns.
    FitFailed = 3,
    Io = 4,
    Runtime = 5,
    Panic = 6,
    BufferTooSmall = 7,
}

/// Inputs of one equation evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct InfercostInputs {
    /// One of the `INFERCOST_ALGO_*` constants.
    pub algorithm: u32,
    pub n: u64,
    pub p: u64,
    /// One of the `INFERCOST_TYPE_*` constants.
    pub data_type: u32,
    /// Intensities for explainability, fairness, interpretability, safety
    /// and privacy, each in [0, 1].
    pub guardrails: [f64; 5],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct InfercostPointPrediction {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct InfercostClassification {
    pub label: u8,
    pub score: f64,
    /// Predict calls made by guardrails beyond the base prediction.
    pub extra_predict_calls: u64,
}

/// A fitted latency or energy equation.
pub struct InfercostEquation(FittedEquation);

/// A synthetic dataset.
pub struct InfercostDataset(Dataset);

/// A trained classifier.
pub struct InfercostModel(TrainedModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(InfercostStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Underdetermined { .. } | Error::RankDeficient { .. } | Error::IllConditioned { .. } => {
                InfercostStatus::FitFailed
            }
            Error::Io(_) => InfercostStatus::Io,
            e if e.is_validation() => InfercostStatus::InvalidArgument,
            _ => InfercostStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(InfercostStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure(InfercostStatus::NullArgument, format!("{what} is null"))
}

/// Runs `f`, records any failure message and converts panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> InfercostStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => InfercostStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            InfercostStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes a valid pointer or null.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn as_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    // SAFETY: non-null, NUL-terminated by contract.
    unsafe { CStr::from_ptr(s) }.to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output handle pointer"));
    }
    // SAFETY: checked non-null; caller provides writable storage.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn algorithm(code: u32) -> Result<AlgorithmKind, Failure> {
    AlgorithmKind::ALL.get(code as usize).copied().ok_or_else(|| invalid(format!("unknown algorithm code {code}")))
}

fn data_type(code: u32) -> Result<DataType, Failure> {
    u8::try_from(code).map_err(|_| invalid("data type code out of range")).and_then(|c| Ok(DataType::from_code(c)?))
}

fn target(code: u32) -> Result<Target, Failure> {
    match code {
        INFERCOST_TARGET_LATENCY => Ok(Target::Latency),
        INFERCOST_TARGET_ENERGY => Ok(Target::Energy),
        other => Err(invalid(format!("unknown target code {other}"))),
    }
}

fn predictor_inputs(i: &InfercostInputs) -> Result<PredictorInputs, Failure> {
    let g = GuardrailConfig::from_array(i.guardrails)?;
    Ok(PredictorInputs::new(algorithm(i.algorithm)?, i.n, i.p, data_type(i.data_type)?, g)?)
}

/// Copies the calling thread's last error message, NUL-terminated, into
/// `buf` and returns the full message length excluding the NUL. A message
/// longer than `len - 1` bytes is truncated. Returns 0 when no error has
/// been recorded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn infercost_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            // SAFETY: `buf` has `len` bytes and `n < len`.
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
                *buf.add(n) = 0;
            }
        }
        bytes.len()
    })
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn infercost_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: allocated by `CString::into_raw` in this crate.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Writes the 12-component numeric-encoding design row for `inputs`.
///
/// # Safety
/// `inputs` must point to a valid struct and `out` to 12 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn infercost_design_row(
    inputs: *const InfercostInputs,
    target_code: u32,
    out: *mut f64,
) -> InfercostStatus {
    guard(|| {
        let x = predictor_inputs(unsafe { as_ref(inputs, "inputs") }?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let row = design_row(&x, target(target_code)?);
        // SAFETY: caller provides INFERCOST_DESIGN_WIDTH doubles.
        unsafe { ptr::copy_nonoverlapping(row.as_ptr(), out, row.len()) };
        Ok(())
    })
}

/// Parses an equation from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn infercost_equation_from_json(
    json: *const c_char,
    out: *mut *mut InfercostEquation,
) -> InfercostStatus {
    guard(|| {
        let eq = FittedEquation::from_json(unsafe { as_str(json, "json") }?)?;
        unsafe { put(out, InfercostEquation(eq)) }
    })
}

/// Fits an equation to a records CSV. `drop_constant` fixes columns that
/// never vary in the records at zero.
///
/// # Safety
/// `records_path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn infercost_equation_fit_csv(
    records_path: *const c_char,
    target_code: u32,
    drop_constant: bool,
    out: *mut *mut InfercostEquation,
) -> InfercostStatus {
    guard(|| {
        let path = unsafe { as_str(records_path, "records_path") }?;
        let records = MeasurementRecord::read_path(Path::new(path))?;
        let opts = FitOptions { drop_constant_columns: drop_constant, ..Default::default() };
        let eq = fit_with(&records, target(target_code)?, &opts)?;
        unsafe { put(out, InfercostEquation(eq)) }
    })
}

/// Serialises an equation to JSON. Release the string with
/// [`infercost_string_free`].
///
/// # Safety
/// `eq` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn infercost_equation_to_json(
    eq: *const InfercostEquation,
    out: *mut *mut c_char,
) -> InfercostStatus {
    guard(|| {
        let eq = unsafe { as_ref(eq, "equation") }?;
        let json = CString::new(eq.0.to_json()?).map_err(|e| Failure(InfercostStatus::Runtime, e.to_string()))?;
        if out.is_null() {
            return Err(null("out"));
        }
        unsafe { *out = json.into_raw() };
        Ok(())
    })
}

/// Point prediction with its `± 2 sigma` interval.
///
/// # Safety
/// `eq` must be a live handle, `inputs` valid and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn infercost_equation_predict(
    eq: *const InfercostEquation,
    inputs: *const InfercostInputs,
    out: *mut InfercostPointPrediction,
) -> InfercostStatus {
    guard(|| {
        let eq = unsafe { as_ref(eq, "equation") }?;
        let x = predictor_inputs(unsafe { as_ref(inputs, "inputs") }?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let p = eq.0.predict(&x);
        unsafe { *out = InfercostPointPrediction { point: p.point, lower: p.lower, upper: p.upper } };
        Ok(())
    })
}

/// Copies the coefficients into `buf` and stores their count in `count`.
/// With a null `buf` only the count is written.
///
/// # Safety
/// `eq` must be a live handle, `count` writable and `buf` null or `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn infercost_equation_coefficients(
    eq: *const InfercostEquation,
    buf: *mut f64,
    len: usize,
    count: *mut usize,
) -> InfercostStatus {
    guard(|| {
        let c = &unsafe { as_ref(eq, "equation") }?.0.coefficients;
        if count.is_null() {
            return Err(null("count"));
        }
        unsafe { *count = c.len() };
        if buf.is_null() {
            return Ok(());
        }
        if len < c.len() {
            return Err(Failure(InfercostStatus::BufferTooSmall, format!("need {} doubles, got {len}", c.len())));
        }
        unsafe { ptr::copy_nonoverlapping(c.as_ptr(), buf, c.len()) };
        Ok(())
    })
}

/// Residual standard deviation of the fit.
///
/// # Safety
/// `eq` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn infercost_equation_sigma(eq: *const InfercostEquation) -> f64 {
    unsafe { eq.as_ref() }.map_or(f64::NAN, |e| e.0.sigma_eps)
}

/// # Safety
/// `eq` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn infercost_equation_free(eq: *mut InfercostEquation) {
    if !eq.is_null() {
        drop(unsafe { Box::from_raw(eq) });
    }
}

/// Generates a two-class Gaussian dataset.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn infercost_dataset_generate(
    n: usize,
    p: usize,
    data_type_code: u32,
    separation: f64,
    seed: u64,
    out: *mut *mut InfercostDataset,
) -> InfercostStatus {
    guard(|| {
        let ds = generate(n, p, data_type(data_type_code)?, separation, seed)?;
        unsafe { put(out, InfercostDataset(ds)) }
    })
}

/// Number of rows, or 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn infercost_dataset_rows(ds: *const InfercostDataset) -> usize {
    unsafe { ds.as_ref() }.map_or(0, |d| d.0.n())
}

/// Copies row `index` into `buf`, which must hold `p` doubles.
///
/// # Safety
/// `ds` must be a live handle and `buf` null or `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn infercost_dataset_row(
    ds: *const InfercostDataset,
    index: usize,
    buf: *mut f64,
    len: usize,
) -> InfercostStatus {
    guard(|| {
        let ds = &unsafe { as_ref(ds, "dataset") }?.0;
        let row = ds.samples.get(index).ok_or_else(|| invalid(format!("row {index} out of range")))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < row.len() {
            return Err(Failure(InfercostStatus::BufferTooSmall, format!("need {} doubles, got {len}", row.len())));
        }
        unsafe { ptr::copy_nonoverlapping(row.as_ptr(), buf, row.len()) };
        Ok(())
    })
}

/// # Safety
/// `ds` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn infercost_dataset_free(ds: *mut InfercostDataset) {
    if !ds.is_null() {
        drop(unsafe { Box::from_raw(ds) });
    }
}

/// Trains a classifier with default hyperparameters.
///
/// # Safety
/// `ds` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn infercost_model_train(
    algorithm_code: u32,
    ds: *const InfercostDataset,
    seed: u64,
    out: *mut *mut InfercostModel,
) -> InfercostStatus {
    guard(|| {
        let ds = &unsafe { as_ref(ds, "dataset") }?.0;
        let model = train(algorithm(algorithm_code)?, ds, &Hyperparameters::default(), seed)?;
        unsafe { put(out, InfercostModel(model)) }
    })
}

/// Classifies one sample with the given guardrail intensities applied.
/// `guardrails` may be null for a bare prediction. Each call uses a fresh
/// fairness window.
///
/// # Safety
/// `model` must be a live handle, `features` point to `len` doubles,
/// `guardrails` be null or point to 5 doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn infercost_model_predict(
    model: *const InfercostModel,
    features: *const f64,
    len: usize,
    group: u8,
    guardrails: *const f64,
    seed: u64,
    out: *mut InfercostClassification,
) -> InfercostStatus {
    guard(|| {
        let model = &unsafe { as_ref(model, "model") }?.0;
        if features.is_null() {
            return Err(null("features"));
        }
        let x = unsafe { std::slice::from_raw_parts(features, len) };
        let cfg = if guardrails.is_null() {
            GuardrailConfig::OFF
        } else {
            let mut g = [0.0; 5];
            g.copy_from_slice(unsafe { std::slice::from_raw_parts(guardrails, 5) });
            GuardrailConfig::from_array(g)?
        };
        if out.is_null() {
            return Err(null("out"));
        }
        let stack = GuardrailStack::new(cfg, GuardrailConstants::default())?;
        let r = stack.run(model, x, group, &mut stack.fairness_window(), seed)?;
        unsafe {
            *out = InfercostClassification {
                label: r.label,
                score: r.score,
                extra_predict_calls: r.extra_predict_calls as u64,
            }
        };
        Ok(())
    })
}

/// Number of input features the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn infercost_model_input_dim(model: *const InfercostModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.input_dim())
}

/// # Safety
/// `model` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn infercost_model_free(model: *mut InfercostModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

//! C ABI over `fairtrs`.
//!
//! Datasets and models are opaque heap handles released with their `_free`
//! function. Every fallible call returns an [`FtStatus`]; on failure the
//! message is available from [`ft_last_error_message`] on the same thread
//! until the next failing call. Panics are caught at the boundary and
//! reported as [`FtStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use fairtrs::data::{generate_unfair2d, TabularDataset, Unfair2dParams};
use fairtrs::fairness::{fairness_report, Gap};
use fairtrs::inner::{trs_solve, SolverError, TrsOptions};
use fairtrs::linalg::SymmetricMatrix;
use fairtrs::model::{AffineModel, LossLocalModel};
use fairtrs::trainer::{evaluate, train, TrainConfig, TrainError};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    ParseError = 4,
    DimensionMismatch = 5,
    SolverFailure = 6,
    Panic = 7,
}

/// Opaque dataset handle.
pub struct FtDataset(TabularDataset);

/// Opaque model handle.
pub struct FtModel(AffineModel);

/// Group-fairness gaps; an undefined gap (empty conditioning group) is NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtFairnessReport {
    pub independence: f64,
    pub separation_y0: f64,
    pub separation_y1: f64,
    pub sufficiency_yhat0: f64,
    pub sufficiency_yhat1: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(FtStatus, String);

impl Failure {
    fn new(status: FtStatus, msg: impl Into<String>) -> Self {
        Failure(status, msg.into())
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        let status = match &e {
            TrainError::Config(_) => FtStatus::InvalidArgument,
            TrainError::DimensionMismatch { .. } => FtStatus::DimensionMismatch,
            _ => FtStatus::SolverFailure,
        };
        Failure(status, e.to_string())
    }
}

impl From<SolverError> for Failure {
    fn from(e: SolverError) -> Self {
        let status = match &e {
            SolverError::InvalidRadius(_) | SolverError::InvalidOption(_) => {
                FtStatus::InvalidArgument
            }
            _ => FtStatus::SolverFailure,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> FtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FtStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside fairtrs");
            FtStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err(Failure::new(
            FtStatus::NullPointer,
            format!("`{name}` is null"),
        ))
    } else {
        Ok(())
    }
}

unsafe fn opt_str<'a>(p: *const c_char) -> Result<Option<&'a str>, Failure> {
    if p.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Some)
        .map_err(|e| Failure::new(FtStatus::InvalidUtf8, e.to_string()))
}

unsafe fn slice_in<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, name)?;
    Ok(slice::from_raw_parts(p, len))
}

fn parse_json<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> Result<T, Failure> {
    match text {
        None => Ok(T::default()),
        Some(t) => {
            serde_json::from_str(t).map_err(|e| Failure::new(FtStatus::ParseError, e.to_string()))
        }
    }
}

/// Message of the most recent failure on this thread, or NULL.
///
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ft_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ft_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Generates the synthetic two-group dataset. `params_json` may be NULL for
/// defaults.
///
/// # Safety
/// `params_json` must be NULL or a NUL-terminated string; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_generate_unfair2d(
    params_json: *const c_char,
    out: *mut *mut FtDataset,
) -> FtStatus {
    guard(|| {
        non_null(out, "out")?;
        let params: Unfair2dParams = parse_json(opt_str(params_json)?)?;
        let d = generate_unfair2d(&params)
            .map_err(|e| Failure::new(FtStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(FtDataset(d)));
        Ok(())
    })
}

/// Builds a dataset from a row-major `m x n` feature matrix in `[0, 1]`.
///
/// # Safety
/// `features` must hold `m * n` values; `labels` and `sensitive` must hold
/// `m` values each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_from_arrays(
    features: *const f64,
    m: usize,
    n: usize,
    labels: *const u8,
    sensitive: *const u8,
    out: *mut *mut FtDataset,
) -> FtStatus {
    guard(|| {
        non_null(out, "out")?;
        let len = m
            .checked_mul(n)
            .ok_or_else(|| Failure::new(FtStatus::InvalidArgument, "m * n overflows"))?;
        let x = slice_in(features, len, "features")?;
        let y = slice_in(labels, m, "labels")?;
        let s = slice_in(sensitive, m, "sensitive")?;
        let rows = if n == 0 {
            Vec::new()
        } else {
            x.chunks(n).map(<[f64]>::to_vec).collect()
        };
        let names = (0..n).map(|j| format!("x{}", j + 1)).collect();
        let d = TabularDataset::new(rows, y.to_vec(), s.to_vec(), names)
            .map_err(|e| Failure::new(FtStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(FtDataset(d)));
        Ok(())
    })
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_len(d: *const FtDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.len())
}

/// Number of features, or 0 for NULL.
///
/// # Safety
/// `d` must be NULL or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_n_features(d: *const FtDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.n_features())
}

/// # Safety
/// `d` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ft_dataset_free(d: *mut FtDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Creates a model from explicit parameters.
///
/// # Safety
/// `weights` must hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ft_model_new(
    weights: *const f64,
    n: usize,
    bias: f64,
    out: *mut *mut FtModel,
) -> FtStatus {
    guard(|| {
        non_null(out, "out")?;
        let w = slice_in(weights, n, "weights")?;
        let m = AffineModel::new(w.to_vec(), bias)
            .map_err(|e| Failure::new(FtStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(FtModel(m)));
        Ok(())
    })
}

/// Trains a model. `config_json` is a training config object (NULL for
/// defaults).
///
/// # Safety
/// `d` must be a live dataset handle; `config_json` NULL or NUL-terminated;
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ft_train(
    d: *const FtDataset,
    config_json: *const c_char,
    out: *mut *mut FtModel,
) -> FtStatus {
    guard(|| {
        non_null(d, "dataset")?;
        non_null(out, "out")?;
        let cfg: TrainConfig = parse_json(opt_str(config_json)?)?;
        let (model, _) = train(&(*d).0, &cfg)?;
        *out = Box::into_raw(Box::new(FtModel(model)));
        Ok(())
    })
}

/// Number of weights, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn ft_model_n_features(m: *const FtModel) -> usize {
    m.as_ref().map_or(0, |m| m.0.n_features())
}

/// Copies the weights into `out` (capacity `len`) and the bias into `bias`.
///
/// # Safety
/// `m` must be a live model handle; `out` must hold `len` values; `bias`
/// NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ft_model_params(
    m: *const FtModel,
    out: *mut f64,
    len: usize,
    bias: *mut f64,
) -> FtStatus {
    guard(|| {
        non_null(m, "model")?;
        let model = &(*m).0;
        if len != model.n_features() {
            return Err(Failure::new(
                FtStatus::DimensionMismatch,
                format!(
                    "buffer holds {len} values, model has {}",
                    model.n_features()
                ),
            ));
        }
        if len > 0 {
            non_null(out, "out")?;
            slice::from_raw_parts_mut(out, len).copy_from_slice(&model.weights);
        }
        if !bias.is_null() {
            *bias = model.bias;
        }
        Ok(())
    })
}

/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ft_model_free(m: *mut FtModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Accuracy at `threshold`; predictions are written to `preds` when it is
/// not NULL (capacity must equal the dataset length).
///
/// # Safety
/// Handles must be live; `accuracy` writable; `preds` NULL or holding
/// `ft_dataset_len(d)` bytes.
#[no_mangle]
pub unsafe extern "C" fn ft_evaluate(
    m: *const FtModel,
    d: *const FtDataset,
    threshold: f64,
    accuracy: *mut f64,
    preds: *mut u8,
) -> FtStatus {
    guard(|| {
        non_null(m, "model")?;
        non_null(d, "dataset")?;
        non_null(accuracy, "accuracy")?;
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Failure::new(
                FtStatus::InvalidArgument,
                format!("threshold must lie in (0, 1), got {threshold}"),
            ));
        }
        let ev = evaluate(&(*m).0, &(*d).0, threshold)?;
        *accuracy = ev.accuracy;
        if !preds.is_null() {
            slice::from_raw_parts_mut(preds, ev.preds.len()).copy_from_slice(&ev.preds);
        }
        Ok(())
    })
}

/// Solves the trust-region subproblem for gradient `grad` (length `n`) and
/// row-major symmetric Hessian `hess` (`n * n`). A nonpositive `tol` uses
/// the default.
///
/// # Safety
/// Arrays must hold the stated lengths; `delta_out` must hold `n` values;
/// `lambda_out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ft_trs_solve(
    grad: *const f64,
    hess: *const f64,
    n: usize,
    radius: f64,
    tol: f64,
    delta_out: *mut f64,
    lambda_out: *mut f64,
) -> FtStatus {
    guard(|| {
        if n == 0 {
            return Err(Failure::new(
                FtStatus::InvalidArgument,
                "n must be at least 1",
            ));
        }
        let g = slice_in(grad, n, "grad")?;
        let h = slice_in(hess, n * n, "hess")?;
        non_null(delta_out, "delta_out")?;
        let hess = SymmetricMatrix::new(n, h.to_vec())
            .map_err(|e| Failure::new(FtStatus::InvalidArgument, e.to_string()))?;
        let local = LossLocalModel {
            value: 0.0,
            grad: g.to_vec(),
            hess,
        };
        let mut opts = TrsOptions::default();
        if tol > 0.0 {
            opts.tol = tol;
        }
        let res = trs_solve(&local, radius, &opts)?;
        slice::from_raw_parts_mut(delta_out, n).copy_from_slice(&res.delta);
        if !lambda_out.is_null() {
            *lambda_out = res.lambda;
        }
        Ok(())
    })
}

/// Fairness gaps of binary predictions against labels and a binary
/// sensitive attribute, all of length `len`.
///
/// # Safety
/// Arrays must hold `len` bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ft_fairness_report(
    preds: *const u8,
    labels: *const u8,
    sensitive: *const u8,
    len: usize,
    out: *mut FtFairnessReport,
) -> FtStatus {
    guard(|| {
        non_null(out, "out")?;
        let p = slice_in(preds, len, "preds")?;
        let y = slice_in(labels, len, "labels")?;
        let s = slice_in(sensitive, len, "sensitive")?;
        let r = fairness_report(p, y, s)
            .map_err(|e| Failure::new(FtStatus::InvalidArgument, e.to_string()))?;
        let v = |g: Option<Gap>| g.map_or(f64::NAN, |g| g.value());
        *out = FtFairnessReport {
            independence: v(r.independence),
            separation_y0: v(r.separation_y0),
            separation_y1: v(r.separation_y1),
            sufficiency_yhat0: v(r.sufficiency_yhat0),
            sufficiency_yhat1: v(r.sufficiency_yhat1),
        };
        Ok(())
    })
}

//! C interface for loading trained checkpoints, running predictions and
//! reading dataset containers.
//!
//! Every fallible call returns a [`PiwnoStatus`]. On failure the message is
//! kept per thread and can be read with [`piwno_last_error`]. Handles are
//! opaque and must be released with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use piwno::harness::{evaluate, predict_raw, relative_mse, Checkpoint};
use piwno::problems::Dataset;
use piwno::Error;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PiwnoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Io = 4,
    Format = 5,
    Config = 6,
    Numeric = 7,
    Panic = 8,
}

impl From<&Error> for PiwnoStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ShapeMismatch { .. } => PiwnoStatus::ShapeMismatch,
            Error::Io(_) => PiwnoStatus::Io,
            Error::Format { .. } | Error::Json(_) => PiwnoStatus::Format,
            Error::Config(_) | Error::UnknownBasis(_) | Error::LevelsTooDeep { .. } => PiwnoStatus::Config,
            Error::NonFinite { .. }
            | Error::SingularMoment(_)
            | Error::Factorization(_)
            | Error::Divergence { .. } => PiwnoStatus::Numeric,
            _ => PiwnoStatus::InvalidArgument,
        }
    }
}

/// A loaded checkpoint.
pub struct PiwnoModel {
    ck: Checkpoint,
}

/// A loaded dataset container.
pub struct PiwnoDataset {
    ds: Dataset,
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

fn fail(status: PiwnoStatus, msg: impl Into<String>) -> PiwnoStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), PiwnoStatus>) -> PiwnoStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PiwnoStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(PiwnoStatus::Panic, format!("panic: {msg}"))
        }
    }
}

fn lib(e: Error) -> PiwnoStatus {
    let s = PiwnoStatus::from(&e);
    fail(s, e.to_string())
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), PiwnoStatus> {
    if p.is_null() {
        Err(fail(PiwnoStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(())
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, PiwnoStatus> {
    non_null(path, "path")?;
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| fail(PiwnoStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], PiwnoStatus> {
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut_arg<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], PiwnoStatus> {
    non_null(p, what)?;
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<(), PiwnoStatus> {
    if expected == got {
        Ok(())
    } else {
        Err(fail(
            PiwnoStatus::ShapeMismatch,
            format!("{what} has length {got}, expected {expected}"),
        ))
    }
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn piwno_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn piwno_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a checkpoint file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn piwno_model_load(path: *const c_char, out: *mut *mut PiwnoModel) -> PiwnoStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let ck = Checkpoint::load(&path).map_err(lib)?;
        *out = Box::into_raw(Box::new(PiwnoModel { ck }));
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from [`piwno_model_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn piwno_model_free(model: *mut PiwnoModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Problem name of the model (`burgers`, `nagumo`, `poisson`,
/// `allen_cahn`) as a static string, or null for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn piwno_model_problem(model: *const PiwnoModel) -> *const c_char {
    match model.as_ref() {
        None => ptr::null(),
        Some(m) => match m.ck.spec.id.as_str() {
            "burgers" => c"burgers".as_ptr(),
            "nagumo" => c"nagumo".as_ptr(),
            "poisson" => c"poisson".as_ptr(),
            _ => c"allen_cahn".as_ptr(),
        },
    }
}

/// Lengths of one raw input sample and one prediction.
///
/// # Safety
/// `model` must be a live handle; `input_len` and `output_len` writable.
#[no_mangle]
pub unsafe extern "C" fn piwno_model_shape(
    model: *const PiwnoModel,
    input_len: *mut usize,
    output_len: *mut usize,
) -> PiwnoStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(input_len, "input_len")?;
        non_null(output_len, "output_len")?;
        let spec = &(*model).ck.spec;
        *input_len = spec.input_len();
        *output_len = spec.output_len();
        Ok(())
    })
}

/// Grid rows, columns and output channels of a prediction. Predictions are
/// stored row-major as `[rows, cols, channels]`.
///
/// # Safety
/// `model` must be a live handle; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn piwno_model_grid(
    model: *const PiwnoModel,
    rows: *mut usize,
    cols: *mut usize,
    channels: *mut usize,
) -> PiwnoStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(rows, "rows")?;
        non_null(cols, "cols")?;
        non_null(channels, "channels")?;
        let spec = &(*model).ck.spec;
        *rows = spec.rows();
        *cols = spec.cols();
        *channels = spec.out_channels();
        Ok(())
    })
}

/// Predicts the solution for one raw input sample.
///
/// # Safety
/// `input` must hold `input_len` doubles and `output` room for `output_len`.
#[no_mangle]
pub unsafe extern "C" fn piwno_model_predict(
    model: *const PiwnoModel,
    input: *const f64,
    input_len: usize,
    output: *mut f64,
    output_len: usize,
) -> PiwnoStatus {
    guard(|| {
        non_null(model, "model")?;
        let m = &*model;
        check_len("input", m.ck.spec.input_len(), input_len)?;
        check_len("output", m.ck.spec.output_len(), output_len)?;
        let input = slice_arg(input, input_len, "input")?;
        let output = slice_mut_arg(output, output_len, "output")?;
        let pred = predict_raw(&m.ck.model, &m.ck.spec, input).map_err(lib)?;
        output.copy_from_slice(&pred);
        Ok(())
    })
}

/// Mean and population standard deviation of the relative MSE of `model`
/// over every sample of `dataset`, as ratios.
///
/// # Safety
/// Both handles must be live; `mean` and `std` writable.
#[no_mangle]
pub unsafe extern "C" fn piwno_model_evaluate(
    model: *const PiwnoModel,
    dataset: *const PiwnoDataset,
    mean: *mut f64,
    std: *mut f64,
) -> PiwnoStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(dataset, "dataset")?;
        non_null(mean, "mean")?;
        non_null(std, "std")?;
        let m = &*model;
        let r = evaluate(&m.ck.model, &m.ck.spec, &(*dataset).ds).map_err(lib)?;
        *mean = r.mean;
        *std = r.std;
        Ok(())
    })
}

/// Loads a dataset container into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn piwno_dataset_load(path: *const c_char, out: *mut *mut PiwnoDataset) -> PiwnoStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let ds = Dataset::load(&path).map_err(lib)?;
        *out = Box::into_raw(Box::new(PiwnoDataset { ds }));
        Ok(())
    })
}

/// Releases a dataset handle. Null is ignored.
///
/// # Safety
/// `dataset` must come from [`piwno_dataset_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn piwno_dataset_free(dataset: *mut PiwnoDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Sample count, per-sample input and solution lengths, and whether
/// solutions are stored (1) or not (0).
///
/// # Safety
/// `dataset` must be a live handle; the out pointers writable.
#[no_mangle]
pub unsafe extern "C" fn piwno_dataset_info(
    dataset: *const PiwnoDataset,
    count: *mut usize,
    input_len: *mut usize,
    solution_len: *mut usize,
    has_solutions: *mut i32,
) -> PiwnoStatus {
    guard(|| {
        non_null(dataset, "dataset")?;
        non_null(count, "count")?;
        non_null(input_len, "input_len")?;
        non_null(solution_len, "solution_len")?;
        non_null(has_solutions, "has_solutions")?;
        let ds = &(*dataset).ds;
        let spec = ds.spec();
        *count = ds.count;
        *input_len = spec.input_len();
        *solution_len = spec.output_len();
        *has_solutions = i32::from(ds.has_solutions());
        Ok(())
    })
}

/// Copies input sample `index` into `out`.
///
/// # Safety
/// `dataset` must be a live handle and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn piwno_dataset_input(
    dataset: *const PiwnoDataset,
    index: usize,
    out: *mut f64,
    len: usize,
) -> PiwnoStatus {
    guard(|| {
        non_null(dataset, "dataset")?;
        let ds = &(*dataset).ds;
        if index >= ds.count {
            return Err(fail(
                PiwnoStatus::InvalidArgument,
                format!("sample {index} out of range (count {})", ds.count),
            ));
        }
        let src = ds.input(index);
        check_len("out", src.len(), len)?;
        slice_mut_arg(out, len, "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// Copies the solution of sample `index` into `out`.
///
/// # Safety
/// `dataset` must be a live handle and `out` hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn piwno_dataset_solution(
    dataset: *const PiwnoDataset,
    index: usize,
    out: *mut f64,
    len: usize,
) -> PiwnoStatus {
    guard(|| {
        non_null(dataset, "dataset")?;
        let ds = &(*dataset).ds;
        if index >= ds.count {
            return Err(fail(
                PiwnoStatus::InvalidArgument,
                format!("sample {index} out of range (count {})", ds.count),
            ));
        }
        let src = ds
            .solution(index)
            .ok_or_else(|| fail(PiwnoStatus::Config, "dataset has no solutions"))?;
        check_len("out", src.len(), len)?;
        slice_mut_arg(out, len, "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// `‖pred − truth‖² / ‖truth‖²` over `len` values. Fails with
/// `InvalidArgument` when `truth` is identically zero.
///
/// # Safety
/// `pred` and `truth` must hold `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn piwno_relative_mse(
    pred: *const f64,
    truth: *const f64,
    len: usize,
    out: *mut f64,
) -> PiwnoStatus {
    guard(|| {
        non_null(out, "out")?;
        let pred = slice_arg(pred, len, "pred")?;
        let truth = slice_arg(truth, len, "truth")?;
        *out = relative_mse(pred, truth)
            .ok_or_else(|| fail(PiwnoStatus::InvalidArgument, "reference field is identically zero"))?;
        Ok(())
    })
}

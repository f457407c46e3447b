//! C ABI over `qfred`. Objects are opaque handles created and released by
//! this library; every fallible call returns a [`QfredStatus`] and leaves a
//! message retrievable with [`qfred_last_error`].

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};

use qfred::cli::{AlgebraChoice, SchemeArg, SimArgs, reduce_with, run_compare_experiment};
use qfred::error::Error;
use qfred::io::{ModelFile, ReducedModelFile, to_json};
use qfred::linops::QuantumModel;
use qfred::pipeline::Reduction;

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum QfredStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Dimension = 4,
    Config = 5,
    Decomposition = 6,
    Containment = 7,
    Integration = 8,
    BufferTooSmall = 9,
    Other = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum QfredAlgebra {
    Auto = 0,
    Chain = 1,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum QfredScheme {
    Euler = 0,
    PositivityPreserving = 1,
}

#[repr(C)]
#[derive(Copy, Clone, Debug)]
pub struct QfredSimParams {
    pub t_final: f64,
    pub dt: f64,
    pub seed: u64,
    pub scheme: QfredScheme,
}

#[repr(C)]
#[derive(Copy, Clone, Debug, Default)]
pub struct QfredReductionInfo {
    /// Dimension of the observable space, or -1 when it was not computed.
    pub kappa: i64,
    pub alg_dim: usize,
    pub reduced_dim: usize,
    pub num_blocks: usize,
    pub invariant: bool,
}

/// Opaque model handle.
pub struct QfredModel(QuantumModel);

/// Opaque reduction handle.
pub struct QfredReduction(Reduction);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = clean);
}

fn status_of(err: &Error) -> QfredStatus {
    match err {
        Error::Parse(_) => QfredStatus::Parse,
        Error::Dimension(_) | Error::InvalidIndex(_) => QfredStatus::Dimension,
        Error::Config(_) => QfredStatus::Config,
        Error::Decomposition { .. } => QfredStatus::Decomposition,
        Error::Containment(_) => QfredStatus::Containment,
        Error::Integration { .. } | Error::Degeneracy { .. } => QfredStatus::Integration,
        _ => QfredStatus::Other,
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (QfredStatus, String)>) -> QfredStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            QfredStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            QfredStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (QfredStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QfredStatus, String) {
    (QfredStatus::NullPointer, format!("{what} is null"))
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, (QfredStatus, String)> {
    if s.is_null() {
        return Err(null("string argument"));
    }
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| (QfredStatus::InvalidUtf8, "string is not UTF-8".into()))
}

fn give_string(s: String, out: *mut *mut c_char) -> Result<(), (QfredStatus, String)> {
    let c = CString::new(s).map_err(|_| (QfredStatus::Other, "string contains NUL".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Message of the last failed call on this thread (empty after success).
/// The pointer stays valid until the next call on the same thread.
#[unsafe(no_mangle)]
pub extern "C" fn qfred_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Parses a model from its JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_model_from_json(json: *const c_char, out: *mut *mut QfredModel) -> QfredStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let text = unsafe { read_str(json) }?;
        let file: ModelFile = serde_json::from_str(text).map_err(|e| (QfredStatus::Parse, e.to_string()))?;
        let model = file.to_model().map_err(lib_err)?;
        unsafe { *out = Box::into_raw(Box::new(QfredModel(model))) };
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`qfred_model_from_json`] (or be null) and not be used afterwards.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_model_free(model: *mut QfredModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Hilbert-space dimension of a model (0 for null).
///
/// # Safety
/// `model` must be a live handle or null.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_model_dim(model: *const QfredModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.0.n)
}

/// Reduces a model onto the chosen algebra.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_reduce(
    model: *const QfredModel,
    algebra: QfredAlgebra,
    seed: u64,
    out: *mut *mut QfredReduction,
) -> QfredStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let choice = match algebra {
            QfredAlgebra::Auto => AlgebraChoice::Auto,
            QfredAlgebra::Chain => AlgebraChoice::Chain,
        };
        let red = reduce_with(&model.0, choice, seed).map_err(lib_err)?;
        unsafe { *out = Box::into_raw(Box::new(QfredReduction(red))) };
        Ok(())
    })
}

/// # Safety
/// `red` must come from [`qfred_reduce`] (or be null) and not be used afterwards.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_reduction_free(red: *mut QfredReduction) {
    if !red.is_null() {
        drop(unsafe { Box::from_raw(red) });
    }
}

/// # Safety
/// `red` must be a live handle and `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_reduction_info(red: *const QfredReduction, out: *mut QfredReductionInfo) -> QfredStatus {
    guard(|| {
        let red = &unsafe { red.as_ref() }.ok_or_else(|| null("reduction"))?.0;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = QfredReductionInfo {
            kappa: red.kappa().map_or(-1, |k| k as i64),
            alg_dim: red.algebra_dim,
            reduced_dim: red.reduced.m,
            num_blocks: red.reduced.blocks.len(),
            invariant: red.invariance.invariant,
        };
        Ok(())
    })
}

/// Copies the block structure (d_F, d_G per block) into caller buffers of
/// length `capacity`. Fails with `BufferTooSmall` if fewer than
/// `num_blocks` slots are available.
///
/// # Safety
/// `red` must be a live handle; `d_f` and `d_g` must hold `capacity` elements.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_reduction_blocks(
    red: *const QfredReduction,
    d_f: *mut usize,
    d_g: *mut usize,
    capacity: usize,
) -> QfredStatus {
    guard(|| {
        let red = &unsafe { red.as_ref() }.ok_or_else(|| null("reduction"))?.0;
        if d_f.is_null() || d_g.is_null() {
            return Err(null("block buffer"));
        }
        let blocks = &red.reduced.blocks;
        if capacity < blocks.len() {
            return Err((QfredStatus::BufferTooSmall, format!("need {} slots", blocks.len())));
        }
        for (k, &(f, g)) in blocks.iter().enumerate() {
            unsafe {
                *d_f.add(k) = f;
                *d_g.add(k) = g;
            }
        }
        Ok(())
    })
}

/// Serializes the reduced model; release the string with [`qfred_string_free`].
///
/// # Safety
/// `red` must be a live handle and `out` a valid pointer.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_reduction_to_json(red: *const QfredReduction, out: *mut *mut c_char) -> QfredStatus {
    guard(|| {
        let red = &unsafe { red.as_ref() }.ok_or_else(|| null("reduction"))?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        give_string(to_json(&ReducedModelFile::new(&red.reduced, red.wedderburn())), out)
    })
}

/// Runs the full-vs-reduced comparison experiment and returns its JSON
/// report; `max_deviation` (optional) receives max_t |Θ − Θ̌| over all
/// observables.
///
/// # Safety
/// `model` must be a live handle, `params` and `report` valid pointers;
/// `max_deviation` may be null.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_compare(
    model: *const QfredModel,
    algebra: QfredAlgebra,
    params: *const QfredSimParams,
    report: *mut *mut c_char,
    max_deviation: *mut f64,
) -> QfredStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        let params = unsafe { params.as_ref() }.ok_or_else(|| null("params"))?;
        if report.is_null() {
            return Err(null("report"));
        }
        let sim = SimArgs {
            t_final: params.t_final,
            dt: params.dt,
            seed: params.seed,
            scheme: match params.scheme {
                QfredScheme::Euler => SchemeArg::Euler,
                QfredScheme::PositivityPreserving => SchemeArg::PositivityPreserving,
            },
        };
        let choice = match algebra {
            QfredAlgebra::Auto => AlgebraChoice::Auto,
            QfredAlgebra::Chain => AlgebraChoice::Chain,
        };
        let rep = run_compare_experiment(&model.0, &sim, choice, 1e-8, false).map_err(lib_err)?;
        if let Some(slot) = unsafe { max_deviation.as_mut() } {
            *slot = rep.output_deviation.iter().copied().fold(0.0, f64::max);
        }
        give_string(to_json(&rep), report)
    })
}

/// # Safety
/// `s` must come from this library (or be null) and not be used afterwards.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn qfred_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Library version as a static NUL-terminated string.
#[unsafe(no_mangle)]
pub extern "C" fn qfred_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

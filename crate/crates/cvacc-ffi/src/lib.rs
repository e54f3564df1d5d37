//! C ABI for the cvacc accuracy models.
//!
//! Conventions:
//! - Models are opaque handles created by `cvacc_qrmoda_new` /
//!   `cvacc_brmoda_new` / `cvacc_fit` and released with
//!   `cvacc_model_free`.
//! - Every fallible call returns a `CvaccStatus`; outputs are written
//!   through pointers only on `CVACC_STATUS_OK` (or as documented).
//! - No call keeps internal state between invocations; handles are
//!   immutable after creation, so sharing one across threads for reads
//!   is safe.
//!
//! The matching header is generated into `include/cvacc.h` at build
//! time.

use cvacc::fit::{self, FitConfig, FitPoint};
use cvacc::model::clamp_error;
use cvacc::{BrmodaConstants, ModelConstants, QrmodaConstants, Resolution};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result codes for all fallible entry points.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvaccStatus {
    Ok = 0,
    /// A pointer argument was null.
    NullPointer = 1,
    /// An argument failed validation (range, sign, finiteness).
    InvalidArgument = 2,
    /// The requested inversion has no solution in range.
    Unsatisfiable = 3,
    /// Calibration failed (bad points or no converged start).
    FitFailed = 4,
    /// An internal panic was caught at the boundary.
    Panic = 5,
}

/// Opaque model handle: either QRMODA or BRMODA constants.
pub struct CvaccModel {
    constants: ModelConstants,
}

fn model_out(out: *mut *mut CvaccModel, constants: ModelConstants) -> CvaccStatus {
    if out.is_null() {
        return CvaccStatus::NullPointer;
    }
    let handle = Box::new(CvaccModel { constants });
    unsafe { *out = Box::into_raw(handle) };
    CvaccStatus::Ok
}

/// Create a QRMODA (quantization + resolution) model.
///
/// Requirements: c1 > 0, c3 >= 0, c4 >= 0, c5 < 0, all finite.
#[no_mangle]
pub extern "C" fn cvacc_qrmoda_new(
    c1: f64,
    c2: f64,
    c3: f64,
    c4: f64,
    c5: f64,
    out_model: *mut *mut CvaccModel,
) -> CvaccStatus {
    match QrmodaConstants::new(c1, c2, c3, c4, c5) {
        Ok(k) => model_out(out_model, ModelConstants::Qrmoda(k)),
        Err(_) => CvaccStatus::InvalidArgument,
    }
}

/// Create a BRMODA (bitrate + resolution) model.
///
/// Requirements: cp1 >= 0, cp3 < 0, cp4 >= 0, cp5 < 0, all finite.
/// Bitrates passed to eval/invert must use the unit the constants were
/// calibrated in; the ABI does not convert units.
#[no_mangle]
pub extern "C" fn cvacc_brmoda_new(
    cp1: f64,
    cp2: f64,
    cp3: f64,
    cp4: f64,
    cp5: f64,
    out_model: *mut *mut CvaccModel,
) -> CvaccStatus {
    match BrmodaConstants::new(cp1, cp2, cp3, cp4, cp5, None) {
        Ok(k) => model_out(out_model, ModelConstants::Brmoda(k)),
        Err(_) => CvaccStatus::InvalidArgument,
    }
}

/// Release a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a pointer previously returned by this library and
/// not already freed.
#[no_mangle]
pub unsafe extern "C" fn cvacc_model_free(model: *mut CvaccModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// 1 when the handle is a QRMODA model, 0 for BRMODA, -1 on null.
///
/// # Safety
/// `model` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn cvacc_model_is_qrmoda(model: *const CvaccModel) -> i32 {
    match unsafe { model.as_ref() } {
        None => -1,
        Some(m) => match m.constants {
            ModelConstants::Qrmoda(_) => 1,
            ModelConstants::Brmoda(_) => 0,
        },
    }
}

unsafe fn eval_impl(
    model: *const CvaccModel,
    width: u32,
    height: u32,
    knob: f64,
    out_error: *mut f64,
    clamp: bool,
) -> CvaccStatus {
    let Some(m) = (unsafe { model.as_ref() }) else {
        return CvaccStatus::NullPointer;
    };
    if out_error.is_null() {
        return CvaccStatus::NullPointer;
    }
    let res = match Resolution::new(width, height) {
        Ok(r) => r,
        Err(_) => return CvaccStatus::InvalidArgument,
    };
    let value = match m.constants {
        ModelConstants::Qrmoda(k) => {
            if !(0.0..=51.0).contains(&knob) {
                return CvaccStatus::InvalidArgument;
            }
            k.eval(res, knob)
        }
        ModelConstants::Brmoda(k) => k.eval(res, knob),
    };
    match value {
        Ok(v) => {
            unsafe { *out_error = if clamp { clamp_error(v) } else { v } };
            CvaccStatus::Ok
        }
        Err(_) => CvaccStatus::InvalidArgument,
    }
}

/// Evaluate the raw model error at (width, height, knob).
///
/// The knob is Qp in [0, 51] for QRMODA handles and an actual bitrate
/// (>= 0) for BRMODA handles. The raw value may fall outside [0, 1].
///
/// # Safety
/// `model` must be a live handle; `out_error` must point to a writable
/// f64.
#[no_mangle]
pub unsafe extern "C" fn cvacc_eval(
    model: *const CvaccModel,
    width: u32,
    height: u32,
    knob: f64,
    out_error: *mut f64,
) -> CvaccStatus {
    unsafe { eval_impl(model, width, height, knob, out_error, false) }
}

/// Like `cvacc_eval`, but clamps the result into [0, 1].
///
/// # Safety
/// Same as `cvacc_eval`.
#[no_mangle]
pub unsafe extern "C" fn cvacc_eval_clamped(
    model: *const CvaccModel,
    width: u32,
    height: u32,
    knob: f64,
    out_error: *mut f64,
) -> CvaccStatus {
    unsafe { eval_impl(model, width, height, knob, out_error, true) }
}

/// Largest integer Qp whose clamped error stays within `target_error`,
/// written to `out_qp`. Returns `Unsatisfiable` when even Qp = 0
/// exceeds the target.
///
/// # Safety
/// `model` must be a live QRMODA handle; `out_qp` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvacc_qrmoda_max_qp(
    model: *const CvaccModel,
    width: u32,
    height: u32,
    target_error: f64,
    out_qp: *mut i32,
) -> CvaccStatus {
    let Some(m) = (unsafe { model.as_ref() }) else {
        return CvaccStatus::NullPointer;
    };
    if out_qp.is_null() {
        return CvaccStatus::NullPointer;
    }
    let ModelConstants::Qrmoda(k) = m.constants else {
        return CvaccStatus::InvalidArgument;
    };
    let res = match Resolution::new(width, height) {
        Ok(r) => r,
        Err(_) => return CvaccStatus::InvalidArgument,
    };
    match k.max_qp_for_error(res, target_error) {
        Ok(Some(qp)) => {
            unsafe { *out_qp = i32::from(qp) };
            CvaccStatus::Ok
        }
        Ok(None) => CvaccStatus::Unsatisfiable,
        Err(_) => CvaccStatus::InvalidArgument,
    }
}

/// Smallest actual bitrate (searched up to `max_bitrate`) whose clamped
/// error stays within `target_error`, written to `out_bitrate`.
/// Returns `Unsatisfiable` when `max_bitrate` is not enough.
///
/// # Safety
/// `model` must be a live BRMODA handle; `out_bitrate` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn cvacc_brmoda_required_bitrate(
    model: *const CvaccModel,
    width: u32,
    height: u32,
    target_error: f64,
    max_bitrate: f64,
    out_bitrate: *mut f64,
) -> CvaccStatus {
    let Some(m) = (unsafe { model.as_ref() }) else {
        return CvaccStatus::NullPointer;
    };
    if out_bitrate.is_null() {
        return CvaccStatus::NullPointer;
    }
    let ModelConstants::Brmoda(k) = m.constants else {
        return CvaccStatus::InvalidArgument;
    };
    let res = match Resolution::new(width, height) {
        Ok(r) => r,
        Err(_) => return CvaccStatus::InvalidArgument,
    };
    match k.required_bitrate(res, target_error, max_bitrate) {
        Ok(Some(r)) => {
            unsafe { *out_bitrate = r };
            CvaccStatus::Ok
        }
        Ok(None) => CvaccStatus::Unsatisfiable,
        Err(_) => CvaccStatus::InvalidArgument,
    }
}

/// Read the five constants out of a handle, in c1..c5 / cp1..cp5 order.
///
/// # Safety
/// `model` must be a live handle; `out_constants` must point to an
/// array of at least five f64.
#[no_mangle]
pub unsafe extern "C" fn cvacc_model_constants(
    model: *const CvaccModel,
    out_constants: *mut f64,
) -> CvaccStatus {
    let Some(m) = (unsafe { model.as_ref() }) else {
        return CvaccStatus::NullPointer;
    };
    if out_constants.is_null() {
        return CvaccStatus::NullPointer;
    }
    let values = match m.constants {
        ModelConstants::Qrmoda(k) => [k.c1, k.c2, k.c3, k.c4, k.c5],
        ModelConstants::Brmoda(k) => [k.cp1, k.cp2, k.cp3, k.cp4, k.cp5],
    };
    let out = unsafe { std::slice::from_raw_parts_mut(out_constants, 5) };
    out.copy_from_slice(&values);
    CvaccStatus::Ok
}

/// Which model family `cvacc_fit` should calibrate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvaccModelKind {
    Qrmoda = 0,
    Brmoda = 1,
}

/// Calibrate model constants from `n` measurement points.
///
/// `widths`, `heights`, `knobs` and `observed` are parallel arrays of
/// length `n`. Knobs are Qp values for QRMODA and actual bitrates for
/// BRMODA; observed errors must lie in [0, 1]. The fit needs at least
/// 6 points, 2 distinct resolutions and 4 distinct knob values. `seed`
/// makes the multistart search reproducible. On success a new handle
/// is written to `out_model` and the fit's R² to `out_r2` (which may
/// be null if not wanted).
///
/// # Safety
/// The array pointers must be readable for `n` elements; `out_model`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvacc_fit(
    kind: CvaccModelKind,
    n: usize,
    widths: *const u32,
    heights: *const u32,
    knobs: *const f64,
    observed: *const f64,
    seed: u64,
    out_model: *mut *mut CvaccModel,
    out_r2: *mut f64,
) -> CvaccStatus {
    if widths.is_null() || heights.is_null() || knobs.is_null() || observed.is_null() {
        return CvaccStatus::NullPointer;
    }
    if out_model.is_null() {
        return CvaccStatus::NullPointer;
    }
    if n == 0 {
        return CvaccStatus::InvalidArgument;
    }
    let widths = unsafe { std::slice::from_raw_parts(widths, n) };
    let heights = unsafe { std::slice::from_raw_parts(heights, n) };
    let knobs = unsafe { std::slice::from_raw_parts(knobs, n) };
    let observed = unsafe { std::slice::from_raw_parts(observed, n) };

    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let res = match Resolution::new(widths[i], heights[i]) {
            Ok(r) => r,
            Err(_) => return CvaccStatus::InvalidArgument,
        };
        if !(observed[i].is_finite() && (0.0..=1.0).contains(&observed[i])) {
            return CvaccStatus::InvalidArgument;
        }
        points.push(FitPoint {
            resolution: res,
            knob: knobs[i],
            observed: observed[i],
        });
    }

    let cfg = FitConfig::new(seed);
    let result = catch_unwind(AssertUnwindSafe(|| match kind {
        CvaccModelKind::Qrmoda => fit::fit_qrmoda(&points, &cfg),
        CvaccModelKind::Brmoda => fit::fit_brmoda(&points, None, &cfg),
    }));
    match result {
        Ok(Ok(fit_result)) => {
            if !out_r2.is_null() {
                unsafe { *out_r2 = fit_result.r2 };
            }
            model_out(out_model, fit_result.constants)
        }
        Ok(Err(_)) => CvaccStatus::FitFailed,
        Err(_) => CvaccStatus::Panic,
    }
}

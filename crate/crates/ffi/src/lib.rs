//! C ABI over the `satm` core: chip loading and checkpoint inference.
//!
//! Every fallible function returns a [`SatmStatus`]. On failure the message
//! is available from [`satm_last_error`] on the same thread until the next
//! failing call. Handles are opaque and must be released with their `_free`
//! function; passing null to a `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use satm::data::{load_chip_file, translated_crop, Chip, Image, Split};
use satm::eval::Classifier;
use satm::model::{load_checkpoint, TrainedModel};
use satm::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SatmStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// Bad argument value, configuration or crop/translation range.
    InvalidArgument = 2,
    /// Malformed, truncated or unreadable input.
    Data = 3,
    /// Non-finite values during computation.
    Numerical = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// A loaded chip.
pub struct SatmChip {
    chip: Chip,
}

/// A trained network with its normalization and class list.
pub struct SatmModel {
    model: TrainedModel,
    class_names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> SatmStatus {
    match e.exit_code() {
        1 => SatmStatus::InvalidArgument,
        3 => SatmStatus::Numerical,
        _ => SatmStatus::Data,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (SatmStatus, String)>) -> SatmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SatmStatus::Ok,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            SatmStatus::Internal
        }
    }
}

fn fail(e: Error) -> (SatmStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (SatmStatus, String) {
    (SatmStatus::NullArgument, format!("{name} is null"))
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, (SatmStatus, String)> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| (SatmStatus::InvalidArgument, "path is not valid UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn satm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the most recent failure on this thread, or null if none.
/// The pointer is valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn satm_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a SARC or Phoenix chip file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn satm_chip_load(path: *const c_char, out: *mut *mut SatmChip) -> SatmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        let chip = load_chip_file(&path, 0, "", Split::Test).map_err(fail)?;
        *out = Box::into_raw(Box::new(SatmChip { chip }));
        Ok(())
    })
}

/// # Safety
/// `chip` must be null or a handle from [`satm_chip_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn satm_chip_free(chip: *mut SatmChip) {
    if !chip.is_null() {
        drop(Box::from_raw(chip));
    }
}

/// # Safety
/// `chip` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn satm_chip_rows(chip: *const SatmChip) -> usize {
    chip.as_ref().map_or(0, |c| c.chip.pixels.rows)
}

/// # Safety
/// `chip` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn satm_chip_cols(chip: *const SatmChip) -> usize {
    chip.as_ref().map_or(0, |c| c.chip.pixels.cols)
}

/// Row-major magnitudes, `rows * cols` values, owned by the handle.
///
/// # Safety
/// `chip` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn satm_chip_pixels(chip: *const SatmChip) -> *const f32 {
    chip.as_ref().map_or(ptr::null(), |c| c.chip.pixels.data.as_ptr())
}

/// Loads a checkpoint ready for inference.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn satm_model_load(path: *const c_char, out: *mut *mut SatmModel) -> SatmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = path_arg(path)?;
        let model = load_checkpoint(&path).map_err(fail)?;
        let class_names = model
            .meta
            .class_names
            .iter()
            .map(|n| CString::new(n.as_str()).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(SatmModel { model, class_names }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`satm_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn satm_model_free(model: *mut SatmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn satm_model_num_classes(model: *const SatmModel) -> usize {
    model.as_ref().map_or(0, |m| m.class_names.len())
}

/// Side of the square crop the network consumes.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn satm_model_crop_size(model: *const SatmModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.meta.crop_size)
}

/// Name of class `index`, or null when out of range. Owned by the handle.
///
/// # Safety
/// `model` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn satm_model_class_name(model: *const SatmModel, index: usize) -> *const c_char {
    model
        .as_ref()
        .and_then(|m| m.class_names.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Classifies the crop of a raw chip displaced by `(dx, dy)` from its
/// center; `(0, 0)` is the center crop. Writes the class index to `label`.
///
/// # Safety
/// `model` must be a live handle, `pixels` must point to `rows * cols`
/// floats and `label` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn satm_model_classify(
    model: *const SatmModel,
    pixels: *const f32,
    rows: usize,
    cols: usize,
    dx: i64,
    dy: i64,
    label: *mut usize,
) -> SatmStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        if pixels.is_null() {
            return Err(null("pixels"));
        }
        if label.is_null() {
            return Err(null("label"));
        }
        let n = rows.checked_mul(cols).ok_or_else(|| (SatmStatus::InvalidArgument, "rows * cols overflows".to_string()))?;
        let image = Image::new(rows, cols, std::slice::from_raw_parts(pixels, n).to_vec()).map_err(fail)?;
        let patch = translated_crop(&image, model.model.meta.crop_size, dx, dy).map_err(fail)?;
        let predicted = model.model.classify(&[patch]).map_err(fail)?;
        *label = predicted[0];
        Ok(())
    })
}

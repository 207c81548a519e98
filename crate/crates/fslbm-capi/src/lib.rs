//! C ABI for the fslbm classifier.
//!
//! All state lives behind an opaque [`FslbmModel`] handle: create one with
//! `fslbm_model_create` or `fslbm_model_load_path`, pass it to every call,
//! and release it with `fslbm_model_free`. Every fallible function returns an
//! [`FslbmStatus`] code and writes results through out-pointers; the header
//! in `include/fslbm.h` is generated from this file by cbindgen at build
//! time.
//!
//! Handles are not synchronized: share a model across threads only for
//! concurrent queries, never while absorbing.

use std::ffi::{c_char, CStr};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::panic::{catch_unwind, AssertUnwindSafe};

use fslbm::bitcode::{ball_size, hamming_distance, Codeword, HammingRadius};
use fslbm::labels::{LabelDistribution, LabelId};
use fslbm::sht::{Fallback, StorageMode, SupervisedHashTable, TrainConfig, ZetaPolicy};
use fslbm::Error;

/// Result code of every fallible `fslbm_*` call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FslbmStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// An argument was out of range (width, radius, zeta, class count, ...).
    InvalidArgument = 2,
    /// Input data violated a contract (width or class mismatch, parse error).
    DataError = 3,
    /// The projected table memory exceeds the configured budget.
    BudgetExceeded = 4,
    /// An I/O operation failed.
    IoError = 5,
    /// A model stream was rejected (magic, version, checksum, structure).
    CorruptModel = 6,
    /// An internal invariant failed; the operation was abandoned.
    InternalError = 7,
}

/// Weight increment policy selector for `fslbm_model_create`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FslbmZetaKind {
    Constant = 0,
    DistanceDecay = 1,
}

/// Entry storage selector for `fslbm_model_create`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FslbmStorage {
    Dense = 0,
    Sparse = 1,
    Auto = 2,
}

/// Opaque classifier handle.
pub struct FslbmModel {
    inner: SupervisedHashTable,
}

fn status_of(err: &Error) -> FslbmStatus {
    match err {
        Error::BudgetExceeded { .. } => FslbmStatus::BudgetExceeded,
        Error::InvalidWidth(_)
        | Error::RadiusTooLarge { .. }
        | Error::BadZeta(_)
        | Error::BadClassCount(_) => FslbmStatus::InvalidArgument,
        Error::BadMagic
        | Error::UnsupportedVersion(_)
        | Error::Truncated
        | Error::ChecksumMismatch { .. }
        | Error::CorruptModel(_) => FslbmStatus::CorruptModel,
        Error::Io(_) => FslbmStatus::IoError,
        _ => FslbmStatus::DataError,
    }
}

fn guard(body: impl FnOnce() -> FslbmStatus) -> FslbmStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(FslbmStatus::InternalError)
}

unsafe fn model_ref<'a>(handle: *const FslbmModel) -> Option<&'a SupervisedHashTable> {
    handle.as_ref().map(|m| &m.inner)
}

unsafe fn path_str<'a>(path: *const c_char) -> Option<&'a str> {
    if path.is_null() {
        return None;
    }
    CStr::from_ptr(path).to_str().ok()
}

/// Create an empty model.
///
/// `zeta_kind` takes an `FslbmZetaKind` value and `storage` an
/// `FslbmStorage` value; both are validated. A `memory_budget` of zero
/// selects the library default. On success `*out` owns the new handle and
/// must be released with `fslbm_model_free`.
/// # Safety
/// `out` must be a valid pointer to writable `*mut FslbmModel` storage.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_create(
    width: u8,
    radius: u8,
    zeta_kind: u32,
    zeta_value: f64,
    storage: u32,
    memory_budget: u64,
    class_count: u16,
    out: *mut *mut FslbmModel,
) -> FslbmStatus {
    guard(|| {
        if out.is_null() {
            return FslbmStatus::NullPointer;
        }
        let zeta = match zeta_kind {
            0 => ZetaPolicy::Constant(zeta_value),
            1 => ZetaPolicy::DistanceDecay(zeta_value),
            _ => return FslbmStatus::InvalidArgument,
        };
        let storage = match storage {
            0 => StorageMode::Dense,
            1 => StorageMode::Sparse,
            2 => StorageMode::Auto,
            _ => return FslbmStatus::InvalidArgument,
        };
        let config = match TrainConfig::new(width, HammingRadius::new(radius))
            .and_then(|c| c.with_zeta(zeta))
        {
            Ok(c) => c,
            Err(e) => return status_of(&e),
        };
        let mut config = config.with_storage(storage);
        if memory_budget > 0 {
            config = config.with_memory_budget(memory_budget);
        }
        match SupervisedHashTable::new(config, usize::from(class_count)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FslbmModel { inner }));
                FslbmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Absorb one training point with a crisp label.
/// # Safety
/// `model` must be a live handle from `fslbm_model_create` or
/// `fslbm_model_load_path`, with no concurrent access.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_absorb_crisp(
    model: *mut FslbmModel,
    code: u32,
    label: u16,
) -> FslbmStatus {
    guard(|| {
        let Some(model) = model.as_mut() else {
            return FslbmStatus::NullPointer;
        };
        let class_count = model.inner.class_count();
        let code = match Codeword::new(code, model.inner.width()) {
            Ok(c) => c,
            Err(e) => return status_of(&e),
        };
        let dist = match LabelDistribution::crisp(LabelId(label), class_count) {
            Ok(d) => d,
            Err(e) => return status_of(&e),
        };
        match model.inner.absorb(code, &dist) {
            Ok(()) => FslbmStatus::Ok,
            Err(e) => status_of(&e),
        }
    })
}

/// Absorb one training point with fuzzy per-class weights.
///
/// `weights` must point to `len` values with `len` equal to the model's
/// class count; the weights need not be normalized.
/// # Safety
/// `model` must be a live handle with no concurrent access and `weights`
/// must point to `len` readable values.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_absorb_weights(
    model: *mut FslbmModel,
    code: u32,
    weights: *const f64,
    len: usize,
) -> FslbmStatus {
    guard(|| {
        let Some(model) = model.as_mut() else {
            return FslbmStatus::NullPointer;
        };
        if weights.is_null() {
            return FslbmStatus::NullPointer;
        }
        if len != model.inner.class_count() {
            return FslbmStatus::DataError;
        }
        let code = match Codeword::new(code, model.inner.width()) {
            Ok(c) => c,
            Err(e) => return status_of(&e),
        };
        let weights = std::slice::from_raw_parts(weights, len);
        let dist = match LabelDistribution::from_weights(weights) {
            Ok(d) => d,
            Err(e) => return status_of(&e),
        };
        match model.inner.absorb(code, &dist) {
            Ok(()) => FslbmStatus::Ok,
            Err(e) => status_of(&e),
        }
    })
}

/// Query one codeword.
///
/// `max_extra_radius < 0` disables fallback expansion; otherwise empty slots
/// probe rings out to that distance. `out_probs` must hold `probs_len`
/// values with `probs_len` equal to the model's class count. A distribution
/// was produced iff `*out_matched != 0` or `*out_fallback_radius >= 0`;
/// otherwise `out_probs` is zeroed.
/// # Safety
/// `model` must be a live handle; `out_probs` must point to `probs_len`
/// writable values; the flag out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_query(
    model: *const FslbmModel,
    code: u32,
    max_extra_radius: i32,
    out_probs: *mut f64,
    probs_len: usize,
    out_matched: *mut u8,
    out_fallback_radius: *mut i32,
) -> FslbmStatus {
    guard(|| {
        let Some(table) = model_ref(model) else {
            return FslbmStatus::NullPointer;
        };
        if out_probs.is_null() || out_matched.is_null() || out_fallback_radius.is_null() {
            return FslbmStatus::NullPointer;
        }
        if probs_len != table.class_count() {
            return FslbmStatus::DataError;
        }
        let code = match Codeword::new(code, table.width()) {
            Ok(c) => c,
            Err(e) => return status_of(&e),
        };
        let fallback = if max_extra_radius < 0 {
            Fallback::None
        } else {
            Fallback::Expand {
                max_extra_radius: max_extra_radius.min(i32::from(u8::MAX)) as u8,
            }
        };
        let prediction = match table.query(code, fallback) {
            Ok(p) => p,
            Err(e) => return status_of(&e),
        };
        let probs = std::slice::from_raw_parts_mut(out_probs, probs_len);
        match &prediction.distribution {
            Some(dist) => probs.copy_from_slice(dist.probs()),
            None => probs.fill(0.0),
        }
        *out_matched = u8::from(prediction.matched);
        *out_fallback_radius = prediction
            .fallback_radius_used
            .map_or(-1, i32::from);
        FslbmStatus::Ok
    })
}

/// Codeword width in bits, or 0 for a null handle.
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_width(model: *const FslbmModel) -> u8 {
    model_ref(model).map_or(0, |t| t.width())
}

/// Training expansion radius, or 0 for a null handle.
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_radius(model: *const FslbmModel) -> u8 {
    model_ref(model).map_or(0, |t| t.radius().get())
}

/// Number of classes, or 0 for a null handle.
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_class_count(model: *const FslbmModel) -> u16 {
    model_ref(model).map_or(0, |t| t.class_count() as u16)
}

/// Number of training points absorbed, or 0 for a null handle.
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_trained_count(model: *const FslbmModel) -> u64 {
    model_ref(model).map_or(0, |t| t.trained_count())
}

/// Number of non-null table slots, or 0 for a null handle.
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_entry_count(model: *const FslbmModel) -> u64 {
    model_ref(model).map_or(0, |t| t.entry_count())
}

/// Write the model to a file in the versioned checksummed format.
/// # Safety
/// `model` must be a live handle; `path` must be a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_save_path(
    model: *const FslbmModel,
    path: *const c_char,
) -> FslbmStatus {
    guard(|| {
        let Some(table) = model_ref(model) else {
            return FslbmStatus::NullPointer;
        };
        let Some(path) = path_str(path) else {
            return FslbmStatus::InvalidArgument;
        };
        let file = match File::create(path) {
            Ok(f) => f,
            Err(_) => return FslbmStatus::IoError,
        };
        match table.save_to(BufWriter::new(file)) {
            Ok(()) => FslbmStatus::Ok,
            Err(e) => status_of(&e),
        }
    })
}

/// Load a model from a file. On success `*out` owns the new handle.
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_load_path(
    path: *const c_char,
    out: *mut *mut FslbmModel,
) -> FslbmStatus {
    guard(|| {
        if out.is_null() {
            return FslbmStatus::NullPointer;
        }
        let Some(path) = path_str(path) else {
            return FslbmStatus::InvalidArgument;
        };
        let file = match File::open(path) {
            Ok(f) => f,
            Err(_) => return FslbmStatus::IoError,
        };
        match SupervisedHashTable::load_from(BufReader::new(file)) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(FslbmModel { inner }));
                FslbmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Release a handle. Null is a no-op.
/// # Safety
/// `model` must be a handle owned by the caller (then consumed) or null.
#[no_mangle]
pub unsafe extern "C" fn fslbm_model_free(model: *mut FslbmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Hamming distance between two codewords of the given width.
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fslbm_hamming_distance(
    a: u32,
    b: u32,
    width: u8,
    out: *mut u32,
) -> FslbmStatus {
    guard(|| {
        if out.is_null() {
            return FslbmStatus::NullPointer;
        }
        let pair = Codeword::new(a, width).and_then(|ca| Ok((ca, Codeword::new(b, width)?)));
        match pair.and_then(|(ca, cb)| hamming_distance(ca, cb)) {
            Ok(d) => {
                *out = d;
                FslbmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Number of codewords within `radius` of any center at the given width.
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fslbm_ball_size(width: u8, radius: u8, out: *mut u64) -> FslbmStatus {
    guard(|| {
        if out.is_null() {
            return FslbmStatus::NullPointer;
        }
        match ball_size(width, HammingRadius::new(radius)) {
            Ok(n) => {
                *out = n;
                FslbmStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn fslbm_status_name(status: FslbmStatus) -> *const c_char {
    let name: &'static str = match status {
        FslbmStatus::Ok => "ok\0",
        FslbmStatus::NullPointer => "null pointer\0",
        FslbmStatus::InvalidArgument => "invalid argument\0",
        FslbmStatus::DataError => "data error\0",
        FslbmStatus::BudgetExceeded => "memory budget exceeded\0",
        FslbmStatus::IoError => "i/o error\0",
        FslbmStatus::CorruptModel => "corrupt model\0",
        FslbmStatus::InternalError => "internal error\0",
    };
    name.as_ptr().cast()
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn fslbm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

//! C ABI for the signature-verification pipeline.
//!
//! The surface uses opaque handles plus integer status codes. Every
//! function: returns `SigshellStatus`, never unwinds across the boundary,
//! and reports failure details through `sigshell_last_error` (thread-local,
//! valid until the next failing call on the same thread).
//!
//! The generated header lands in `include/sigshell.h`.

use sigshell::metric::{embed_single, BatchInput, Model};
use sigshell::nn::{load_checkpoint, Tensor};
use sigshell::raster::{load_gray, preprocess_signature, BinaryImage, GrayImage};
use sigshell::shells::{
    cleaned_mask, extract_shells_pruned, pressure_map, read_record, thickness, write_record,
    ShellRecord, PRESSURE_OFFSETS, SHELL_COUNT, SHELL_WIDTH,
};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status codes returned by every API call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigshellStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// File system or decoding failure.
    Io = 3,
    /// The input data was rejected (no ink, wrong size, bad labels...).
    Data = 4,
    /// The model cannot consume this input kind.
    ArchMismatch = 5,
    /// Unexpected internal failure.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(cleaned).unwrap_or_default();
    });
}

fn fail(status: SigshellStatus, msg: &str) -> SigshellStatus {
    set_error(msg);
    status
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sigshell_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn guard(body: impl FnOnce() -> SigshellStatus) -> SigshellStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(SigshellStatus::Internal, "internal panic"),
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, SigshellStatus> {
    if ptr.is_null() {
        return Err(fail(SigshellStatus::NullArgument, "null path"));
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => Err(fail(SigshellStatus::InvalidUtf8, "path is not UTF-8")),
    }
}

/// Pre-processed signature: 512x512 grayscale plus its ink mask.
pub struct SigshellImage {
    gray: GrayImage,
    mask: BinaryImage,
}

/// Extracted shell features of one signature.
pub struct SigshellRecord {
    record: ShellRecord,
}

/// A loaded embedding model.
pub struct SigshellModel {
    model: Model,
}

/// Loads a PNG/PGM scan and runs the full pre-processing chain.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer. On success `*out` owns a handle to free with
/// [`sigshell_image_free`].
#[no_mangle]
pub unsafe extern "C" fn sigshell_image_load(
    path: *const c_char,
    out: *mut *mut SigshellImage,
) -> SigshellStatus {
    guard(|| {
        if out.is_null() {
            return fail(SigshellStatus::NullArgument, "null out pointer");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let img = match load_gray(path) {
            Ok(img) => img,
            Err(e) => return fail(SigshellStatus::Io, &e.to_string()),
        };
        match preprocess_signature(&img) {
            Ok((gray, mask)) => {
                *out = Box::into_raw(Box::new(SigshellImage { gray, mask }));
                SigshellStatus::Ok
            }
            Err(e) => fail(SigshellStatus::Data, &e.to_string()),
        }
    })
}

/// Builds a handle from raw row-major 8-bit grayscale pixels and runs the
/// pre-processing chain.
///
/// # Safety
/// `pixels` must point to `height * width` readable bytes; `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn sigshell_image_from_gray(
    pixels: *const u8,
    height: usize,
    width: usize,
    out: *mut *mut SigshellImage,
) -> SigshellStatus {
    guard(|| {
        if pixels.is_null() || out.is_null() {
            return fail(SigshellStatus::NullArgument, "null pixels or out pointer");
        }
        if height == 0 || width == 0 {
            return fail(SigshellStatus::Data, "image dimensions must be nonzero");
        }
        let data = std::slice::from_raw_parts(pixels, height * width).to_vec();
        let img = GrayImage::from_raw(height, width, data);
        match preprocess_signature(&img) {
            Ok((gray, mask)) => {
                *out = Box::into_raw(Box::new(SigshellImage { gray, mask }));
                SigshellStatus::Ok
            }
            Err(e) => fail(SigshellStatus::Data, &e.to_string()),
        }
    })
}

/// Copies the 512x512 pre-processed grayscale into `out` (262144 bytes).
///
/// # Safety
/// `image` must be a live handle; `out` must hold 512*512 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sigshell_image_gray(
    image: *const SigshellImage,
    out: *mut u8,
) -> SigshellStatus {
    guard(|| {
        if image.is_null() || out.is_null() {
            return fail(SigshellStatus::NullArgument, "null image or out pointer");
        }
        let img = &(*image).gray;
        std::ptr::copy_nonoverlapping(img.data().as_ptr(), out, img.data().len());
        SigshellStatus::Ok
    })
}

/// # Safety
/// `image` must be a pointer previously returned by this library and not
/// yet freed (or null, which is a no-op).
#[no_mangle]
pub unsafe extern "C" fn sigshell_image_free(image: *mut SigshellImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Runs shell extraction (pruning, ribbons, pressure, thickness) on a
/// pre-processed image.
///
/// # Safety
/// `image` must be a live handle; `out` must be valid. On success `*out`
/// owns a handle to free with [`sigshell_record_free`].
#[no_mangle]
pub unsafe extern "C" fn sigshell_extract(
    image: *const SigshellImage,
    hole_area: usize,
    out: *mut *mut SigshellRecord,
) -> SigshellStatus {
    guard(|| {
        if image.is_null() || out.is_null() {
            return fail(SigshellStatus::NullArgument, "null image or out pointer");
        }
        let img = &*image;
        let cleaned = cleaned_mask(&img.mask, hole_area);
        let shells = match extract_shells_pruned(&cleaned) {
            Ok(s) => s,
            Err(e) => return fail(SigshellStatus::Data, &e.to_string()),
        };
        let record = ShellRecord {
            pressure: pressure_map(&img.gray, &shells),
            thickness: thickness(&cleaned),
            shells,
        };
        *out = Box::into_raw(Box::new(SigshellRecord { record }));
        SigshellStatus::Ok
    })
}

/// Writes a record directory (shells/pressure/thickness/valid CSVs).
///
/// # Safety
/// `record` must be a live handle; `dir` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn sigshell_record_save(
    record: *const SigshellRecord,
    dir: *const c_char,
) -> SigshellStatus {
    guard(|| {
        if record.is_null() {
            return fail(SigshellStatus::NullArgument, "null record");
        }
        let dir = match path_arg(dir) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match write_record(&(*record).record, dir) {
            Ok(()) => SigshellStatus::Ok,
            Err(e) => fail(SigshellStatus::Io, &e.to_string()),
        }
    })
}

/// Reads a record directory written by [`sigshell_record_save`].
///
/// # Safety
/// `dir` must be a valid NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn sigshell_record_load(
    dir: *const c_char,
    out: *mut *mut SigshellRecord,
) -> SigshellStatus {
    guard(|| {
        if out.is_null() {
            return fail(SigshellStatus::NullArgument, "null out pointer");
        }
        let dir = match path_arg(dir) {
            Ok(p) => p,
            Err(status) => return status,
        };
        match read_record(dir) {
            Ok(record) => {
                *out = Box::into_raw(Box::new(SigshellRecord { record }));
                SigshellStatus::Ok
            }
            Err(e) => fail(SigshellStatus::Io, &e.to_string()),
        }
    })
}

/// Copies the six contour functions into `out` as 6*512 u16 values
/// (row-major: S1, I1, S2, I2, resS, resI). Invalid columns hold 0.
///
/// # Safety
/// `record` must be a live handle; `out` must hold 6*512 writable u16.
#[no_mangle]
pub unsafe extern "C" fn sigshell_record_shells(
    record: *const SigshellRecord,
    out: *mut u16,
) -> SigshellStatus {
    guard(|| {
        if record.is_null() || out.is_null() {
            return fail(SigshellStatus::NullArgument, "null record or out pointer");
        }
        let shells = &(*record).record.shells;
        if shells.width() != SHELL_WIDTH {
            return fail(SigshellStatus::Data, "record is not 512 columns wide");
        }
        for s in 0..SHELL_COUNT {
            std::ptr::copy_nonoverlapping(
                shells.rows(s).as_ptr(),
                out.add(s * SHELL_WIDTH),
                SHELL_WIDTH,
            );
        }
        SigshellStatus::Ok
    })
}

/// Copies the pseudo-pressure map into `out` as 6*11*512 bytes
/// (shell-major, offset-minor).
///
/// # Safety
/// `record` must be a live handle; `out` must hold 6*11*512 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sigshell_record_pressure(
    record: *const SigshellRecord,
    out: *mut u8,
) -> SigshellStatus {
    guard(|| {
        if record.is_null() || out.is_null() {
            return fail(SigshellStatus::NullArgument, "null record or out pointer");
        }
        let pressure = &(*record).record.pressure;
        let mut offset = 0usize;
        for row in pressure.rows() {
            std::ptr::copy_nonoverlapping(row.as_ptr(), out.add(offset), row.len());
            offset += row.len();
        }
        debug_assert_eq!(offset, SHELL_COUNT * PRESSURE_OFFSETS * SHELL_WIDTH);
        SigshellStatus::Ok
    })
}

/// Copies the thickness vectors into `out` as 2*512 u16 (superior row
/// first).
///
/// # Safety
/// `record` must be a live handle; `out` must hold 2*512 writable u16.
#[no_mangle]
pub unsafe extern "C" fn sigshell_record_thickness(
    record: *const SigshellRecord,
    out: *mut u16,
) -> SigshellStatus {
    guard(|| {
        if record.is_null() || out.is_null() {
            return fail(SigshellStatus::NullArgument, "null record or out pointer");
        }
        let t = &(*record).record.thickness;
        std::ptr::copy_nonoverlapping(t.sup.as_ptr(), out, t.sup.len());
        std::ptr::copy_nonoverlapping(t.inf.as_ptr(), out.add(t.sup.len()), t.inf.len());
        SigshellStatus::Ok
    })
}

/// # Safety
/// `record` must be a pointer previously returned by this library and not
/// yet freed (or null, which is a no-op).
#[no_mangle]
pub unsafe extern "C" fn sigshell_record_free(record: *mut SigshellRecord) {
    if !record.is_null() {
        drop(Box::from_raw(record));
    }
}

/// Loads a trained checkpoint.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be valid. On
/// success `*out` owns a handle to free with [`sigshell_model_free`].
#[no_mangle]
pub unsafe extern "C" fn sigshell_model_load(
    path: *const c_char,
    out: *mut *mut SigshellModel,
) -> SigshellStatus {
    guard(|| {
        if out.is_null() {
            return fail(SigshellStatus::NullArgument, "null out pointer");
        }
        let path = match path_arg(path) {
            Ok(p) => p,
            Err(status) => return status,
        };
        let ckpt = match load_checkpoint(path) {
            Ok(c) => c,
            Err(e) => return fail(SigshellStatus::Io, &e.to_string()),
        };
        match Model::from_checkpoint(&ckpt) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(SigshellModel { model }));
                SigshellStatus::Ok
            }
            Err(e) => fail(SigshellStatus::Data, &e.to_string()),
        }
    })
}

/// Embedding length produced by this model (0 for a null handle).
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn sigshell_model_embedding_dim(model: *const SigshellModel) -> usize {
    if model.is_null() {
        return 0;
    }
    (*model).model.config().embedding_dim
}

/// Embeds one shell record (shell-based architectures). `out` receives
/// `embedding_dim` doubles.
///
/// # Safety
/// `model` and `record` must be live handles; `out` must hold
/// `sigshell_model_embedding_dim(model)` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sigshell_embed_record(
    model: *mut SigshellModel,
    record: *const SigshellRecord,
    out: *mut f64,
) -> SigshellStatus {
    guard(|| {
        if model.is_null() || record.is_null() || out.is_null() {
            return fail(SigshellStatus::NullArgument, "null model, record, or out pointer");
        }
        let rec = &(*record).record;
        if rec.shells.width() != SHELL_WIDTH {
            return fail(SigshellStatus::Data, "record is not 512 columns wide");
        }
        let mut shells = Vec::with_capacity(SHELL_COUNT * SHELL_WIDTH);
        for s in 0..SHELL_COUNT {
            shells.extend(rec.shells.rows(s).iter().map(|&v| v as f64 / 511.0));
        }
        let mut pressure = Vec::with_capacity(SHELL_COUNT * PRESSURE_OFFSETS * SHELL_WIDTH);
        for row in rec.pressure.rows() {
            pressure.extend(row.iter().map(|&v| v as f64 / 255.0));
        }
        let input = BatchInput::Shells {
            shells: Tensor::new(vec![1, SHELL_COUNT, SHELL_WIDTH], shells),
            pressure: Tensor::new(vec![1, SHELL_COUNT * PRESSURE_OFFSETS, SHELL_WIDTH], pressure),
        };
        match embed_single(&mut (*model).model, input) {
            Ok(embedding) => {
                std::ptr::copy_nonoverlapping(embedding.as_ptr(), out, embedding.len());
                SigshellStatus::Ok
            }
            Err(e) => fail(SigshellStatus::ArchMismatch, &e.to_string()),
        }
    })
}

/// # Safety
/// `model` must be a pointer previously returned by this library and not
/// yet freed (or null, which is a no-op).
#[no_mangle]
pub unsafe extern "C" fn sigshell_model_free(model: *mut SigshellModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Euclidean distance between two embeddings. Returns a negative value on
/// bad arguments.
///
/// # Safety
/// `a` and `b` must point to `dim` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn sigshell_distance_euclidean(
    a: *const f64,
    b: *const f64,
    dim: usize,
) -> f64 {
    if a.is_null() || b.is_null() || dim == 0 {
        return -1.0;
    }
    let a = std::slice::from_raw_parts(a, dim);
    let b = std::slice::from_raw_parts(b, dim);
    match sigshell::metric::dist_euclidean(a, b) {
        Ok(d) => d,
        Err(_) => -1.0,
    }
}

/// Area under the ROC curve for distances scored against {0,1} labels
/// (1 = forged; larger distance = more forged).
///
/// # Safety
/// `distances` and `labels` must point to `n` readable elements; `out`
/// must be valid.
#[no_mangle]
pub unsafe extern "C" fn sigshell_auc(
    distances: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> SigshellStatus {
    guard(|| {
        if distances.is_null() || labels.is_null() || out.is_null() {
            return fail(SigshellStatus::NullArgument, "null distances, labels, or out pointer");
        }
        let distances = std::slice::from_raw_parts(distances, n);
        let labels = std::slice::from_raw_parts(labels, n);
        match sigshell::eval::roc_curve(distances, labels) {
            Ok(curve) => {
                *out = sigshell::eval::auc(&curve);
                SigshellStatus::Ok
            }
            Err(e) => fail(SigshellStatus::Data, &e.to_string()),
        }
    })
}

//! C ABI for the spectral variable selection toolkit.
//!
//! Spectra sets travel as opaque handles; numeric payloads cross the boundary
//! as caller-owned row-major buffers. Every function returns a status code
//! and the last failure message is readable through
//! [`specsel_last_error_message`] (thread local, valid until the next failing
//! call on the same thread).

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use specsel::bspline::{
    build_basis, compress, projection_matrix, select_basis_size, SearchStrategy,
};
use specsel::linalg::RowMatrix;
use specsel::mi::{mutual_information, JointSample, MiEstimatorConfig};
use specsel::models::SavedModel;
use specsel::pipeline::{parse_config, report_to_json, run_pipeline};
use specsel::selection::{forward_backward, SelectionConfig};
use specsel::spectra::{load_spectra, CsvLayout, SpectraSet};

/// Result of every C-ABI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecselStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// An argument was out of range or inconsistent.
    InvalidArgument = 2,
    /// Reading or writing a file failed.
    IoError = 3,
    /// A numerical routine reported a failure.
    NumericError = 4,
    /// The library panicked; state is still consistent.
    InternalError = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() =
            CString::new(message).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    });
}

fn fail(status: SpecselStatus, message: impl Into<String>) -> SpecselStatus {
    set_error(message);
    status
}

fn guard(body: impl FnOnce() -> SpecselStatus) -> SpecselStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(SpecselStatus::InternalError, "internal panic"),
    }
}

/// Message describing the most recent failure on this thread.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn specsel_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opaque spectra handle.
pub struct SpecselSpectra {
    inner: SpectraSet,
}

unsafe fn path_from(ptr: *const c_char) -> Result<PathBuf, SpecselStatus> {
    if ptr.is_null() {
        set_error("path pointer is null");
        return Err(SpecselStatus::NullPointer);
    }
    match unsafe { CStr::from_ptr(ptr) }.to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(SpecselStatus::InvalidArgument)
        }
    }
}

/// Load a spectra CSV. `has_target` selects the `target,<w...>` layout.
///
/// On success `*out` owns the handle; release it with [`specsel_spectra_free`].
///
/// # Safety
/// `path` must point to a NUL-terminated string and `out` to a writable slot.
#[no_mangle]
pub unsafe extern "C" fn specsel_spectra_load(
    path: *const c_char,
    has_target: bool,
    out: *mut *mut SpecselSpectra,
) -> SpecselStatus {
    guard(|| {
        if out.is_null() {
            return fail(SpecselStatus::NullPointer, "output pointer is null");
        }
        let path = match unsafe { path_from(path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let layout = if has_target {
            CsvLayout::TargetFirstColumn
        } else {
            CsvLayout::NoTarget
        };
        match load_spectra(Path::new(&path), layout) {
            Ok(set) => {
                let handle = Box::new(SpecselSpectra { inner: set });
                unsafe { *out = Box::into_raw(handle) };
                SpecselStatus::Ok
            }
            Err(e) => fail(SpecselStatus::IoError, e.to_string()),
        }
    })
}

/// Release a spectra handle. Null is a no-op.
///
/// # Safety
/// `spectra` must have come from [`specsel_spectra_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn specsel_spectra_free(spectra: *mut SpecselSpectra) {
    if !spectra.is_null() {
        drop(unsafe { Box::from_raw(spectra) });
    }
}

/// Number of spectra and of wavelengths in the handle.
///
/// # Safety
/// All pointers must be valid; `spectra` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn specsel_spectra_shape(
    spectra: *const SpecselSpectra,
    out_spectra: *mut usize,
    out_wavelengths: *mut usize,
) -> SpecselStatus {
    guard(|| {
        if spectra.is_null() || out_spectra.is_null() || out_wavelengths.is_null() {
            return fail(SpecselStatus::NullPointer, "null pointer argument");
        }
        let set = unsafe { &(*spectra).inner };
        unsafe {
            *out_spectra = set.n_spectra();
            *out_wavelengths = set.n_wavelengths();
        }
        SpecselStatus::Ok
    })
}

/// Pick the basis size minimizing the total leave-one-out error over
/// `[n_min, n_max]` for the given orders.
///
/// # Safety
/// `orders` must point to `n_orders` readable entries; output pointers must
/// be writable; `spectra` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn specsel_select_basis_size(
    spectra: *const SpecselSpectra,
    n_min: usize,
    n_max: usize,
    orders: *const usize,
    n_orders: usize,
    coarse_to_fine: bool,
    out_n_functions: *mut usize,
    out_order: *mut usize,
) -> SpecselStatus {
    guard(|| {
        if spectra.is_null() || orders.is_null() || out_n_functions.is_null() || out_order.is_null()
        {
            return fail(SpecselStatus::NullPointer, "null pointer argument");
        }
        let set = unsafe { &(*spectra).inner };
        let orders = unsafe { std::slice::from_raw_parts(orders, n_orders) };
        let strategy = if coarse_to_fine {
            SearchStrategy::CoarseToFine
        } else {
            SearchStrategy::Exhaustive
        };
        match select_basis_size(set, (n_min, n_max), orders, strategy) {
            Ok(selection) => {
                unsafe {
                    *out_n_functions = selection.n_functions;
                    *out_order = selection.order;
                }
                SpecselStatus::Ok
            }
            Err(e) => fail(SpecselStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Compress every spectrum onto the `(n_functions, order)` basis.
///
/// `out_coefficients` receives `n_spectra * n_functions` values, row major.
///
/// # Safety
/// `out_coefficients` must point to `capacity` writable doubles; `spectra`
/// must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn specsel_compress(
    spectra: *const SpecselSpectra,
    n_functions: usize,
    order: usize,
    out_coefficients: *mut f64,
    capacity: usize,
) -> SpecselStatus {
    guard(|| {
        if spectra.is_null() || out_coefficients.is_null() {
            return fail(SpecselStatus::NullPointer, "null pointer argument");
        }
        let set = unsafe { &(*spectra).inner };
        if order == 0 || n_functions < order {
            return fail(SpecselStatus::InvalidArgument, "need n_functions >= order");
        }
        let needed = set.n_spectra() * n_functions;
        if capacity < needed {
            return fail(
                SpecselStatus::InvalidArgument,
                format!("buffer holds {capacity} values but {needed} are needed"),
            );
        }
        let run = || -> Result<specsel::bspline::CompressedSet, String> {
            let basis = build_basis(
                set.wavelengths()[0],
                *set.wavelengths().last().unwrap(),
                n_functions + 1 - order,
                order,
            )
            .map_err(|e| e.to_string())?;
            let r = projection_matrix(&basis, set.wavelengths()).map_err(|e| e.to_string())?;
            compress(&r, set).map_err(|e| e.to_string())
        };
        match run() {
            Ok(compressed) => {
                let flat = compressed.coefficients.data();
                unsafe {
                    std::ptr::copy_nonoverlapping(flat.as_ptr(), out_coefficients, flat.len());
                }
                SpecselStatus::Ok
            }
            Err(message) => fail(SpecselStatus::NumericError, message),
        }
    })
}

/// Mutual information (nats) between a feature block and a target, Kraskov
/// kNN estimator.
///
/// `x` is `n_samples * n_features` row major.
///
/// # Safety
/// `x`, `y` and `out_nats` must point to buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn specsel_mutual_information(
    x: *const f64,
    n_samples: usize,
    n_features: usize,
    y: *const f64,
    k: usize,
    seed: u64,
    out_nats: *mut f64,
) -> SpecselStatus {
    guard(|| {
        if x.is_null() || y.is_null() || out_nats.is_null() {
            return fail(SpecselStatus::NullPointer, "null pointer argument");
        }
        let x = unsafe { std::slice::from_raw_parts(x, n_samples * n_features) };
        let y = unsafe { std::slice::from_raw_parts(y, n_samples) };
        let features = RowMatrix::from_flat(n_samples, n_features, x.to_vec());
        let config = MiEstimatorConfig {
            k,
            seed,
            ..MiEstimatorConfig::default()
        };
        let run = || -> Result<f64, String> {
            let sample = JointSample::new(features, y.to_vec()).map_err(|e| e.to_string())?;
            Ok(mutual_information(&sample, &config)
                .map_err(|e| e.to_string())?
                .nats)
        };
        match run() {
            Ok(nats) => {
                unsafe { *out_nats = nats };
                SpecselStatus::Ok
            }
            Err(message) => fail(SpecselStatus::InvalidArgument, message),
        }
    })
}

/// Forward-backward feature selection by mutual information maximization.
///
/// Selected indices land in `out_indices` (ascending); `*out_len` receives
/// the count. `max_size = 0` means unbounded.
///
/// # Safety
/// `x`, `y`, `out_indices` and `out_len` must point to buffers of the stated
/// sizes; `out_indices` must hold `capacity` entries.
#[no_mangle]
pub unsafe extern "C" fn specsel_forward_backward(
    x: *const f64,
    n_samples: usize,
    n_features: usize,
    y: *const f64,
    k: usize,
    seed: u64,
    max_size: usize,
    min_delta: f64,
    out_indices: *mut usize,
    capacity: usize,
    out_len: *mut usize,
) -> SpecselStatus {
    guard(|| {
        if x.is_null() || y.is_null() || out_indices.is_null() || out_len.is_null() {
            return fail(SpecselStatus::NullPointer, "null pointer argument");
        }
        let x = unsafe { std::slice::from_raw_parts(x, n_samples * n_features) };
        let y = unsafe { std::slice::from_raw_parts(y, n_samples) };
        let features = RowMatrix::from_flat(n_samples, n_features, x.to_vec());
        let config = SelectionConfig {
            mi: MiEstimatorConfig {
                k,
                seed,
                ..MiEstimatorConfig::default()
            },
            max_size: (max_size > 0).then_some(max_size),
            min_delta,
            ..SelectionConfig::default()
        };
        match forward_backward(&features, y, &config) {
            Ok(trace) => {
                if trace.final_subset.len() > capacity {
                    return fail(
                        SpecselStatus::InvalidArgument,
                        format!(
                            "selected {} features but the buffer holds {capacity}",
                            trace.final_subset.len()
                        ),
                    );
                }
                unsafe {
                    std::ptr::copy_nonoverlapping(
                        trace.final_subset.as_ptr(),
                        out_indices,
                        trace.final_subset.len(),
                    );
                    *out_len = trace.final_subset.len();
                }
                SpecselStatus::Ok
            }
            Err(e) => fail(SpecselStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Run the full pipeline from a config file and write the JSON report.
///
/// # Safety
/// Both paths must point to NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn specsel_pipeline_run(
    config_path: *const c_char,
    report_path: *const c_char,
) -> SpecselStatus {
    guard(|| {
        let config_path = match unsafe { path_from(config_path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let report_path = match unsafe { path_from(report_path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        let text = match std::fs::read_to_string(&config_path) {
            Ok(t) => t,
            Err(e) => {
                return fail(
                    SpecselStatus::IoError,
                    format!("reading {}: {e}", config_path.display()),
                )
            }
        };
        let config = match parse_config(&text) {
            Ok(c) => c,
            Err(e) => return fail(SpecselStatus::InvalidArgument, e.to_string()),
        };
        let report = match run_pipeline(&config) {
            Ok(r) => r,
            Err(e) => return fail(SpecselStatus::NumericError, e.to_string()),
        };
        let json = match report_to_json(&report) {
            Ok(j) => j,
            Err(e) => return fail(SpecselStatus::NumericError, e.to_string()),
        };
        match std::fs::write(&report_path, json) {
            Ok(()) => SpecselStatus::Ok,
            Err(e) => fail(
                SpecselStatus::IoError,
                format!("writing {}: {e}", report_path.display()),
            ),
        }
    })
}

/// Predict with a model document written by `specsel train`.
///
/// `x` is `n_samples * n_features` row major over the model's input columns;
/// predictions land in `out_predictions`.
///
/// # Safety
/// `model_path` must be NUL-terminated; buffers must match the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn specsel_model_predict(
    model_path: *const c_char,
    x: *const f64,
    n_samples: usize,
    n_features: usize,
    out_predictions: *mut f64,
    capacity: usize,
) -> SpecselStatus {
    guard(|| {
        if x.is_null() || out_predictions.is_null() {
            return fail(SpecselStatus::NullPointer, "null pointer argument");
        }
        let model_path = match unsafe { path_from(model_path) } {
            Ok(p) => p,
            Err(status) => return status,
        };
        if capacity < n_samples {
            return fail(
                SpecselStatus::InvalidArgument,
                format!("buffer holds {capacity} values but {n_samples} are needed"),
            );
        }
        let json = match std::fs::read_to_string(&model_path) {
            Ok(t) => t,
            Err(e) => {
                return fail(
                    SpecselStatus::IoError,
                    format!("reading {}: {e}", model_path.display()),
                )
            }
        };
        let saved: SavedModel = match serde_json::from_str(&json) {
            Ok(m) => m,
            Err(e) => {
                return fail(
                    SpecselStatus::InvalidArgument,
                    format!("parsing model: {e}"),
                )
            }
        };
        let x = unsafe { std::slice::from_raw_parts(x, n_samples * n_features) };
        let features = RowMatrix::from_flat(n_samples, n_features, x.to_vec());
        match saved.predict(&features) {
            Ok(predictions) => {
                unsafe {
                    std::ptr::copy_nonoverlapping(
                        predictions.as_ptr(),
                        out_predictions,
                        predictions.len(),
                    );
                }
                SpecselStatus::Ok
            }
            Err(e) => fail(SpecselStatus::InvalidArgument, e.to_string()),
        }
    })
}

//! C ABI over the importance-tensor fusion and fuzzy-labelling layers.
//!
//! All functions return `FifStatus` (0 = ok, negative = error) unless noted;
//! `fif_last_error` copies the most recent error message of the calling
//! thread. Handles are opaque and must be released with `fif_tensor_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::path::Path;

use fi_fuse::explain::ImportanceTensor;
use fi_fuse::fuse::{fuse_methods, FuseParams, FusionMethod};
use fi_fuse::fuzzy::{fuzzy_report, FuzzyReport};
use fi_fuse::pipeline::tensor_samples;

/// Status codes returned by every fallible function.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FifStatus {
    Ok = 0,
    NullArgument = -1,
    InvalidUtf8 = -2,
    IoError = -3,
    FormatError = -4,
    UnknownMethod = -5,
    FusionError = -6,
    FuzzyError = -7,
    BufferTooSmall = -8,
    IndexOutOfRange = -9,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

/// Opaque handle over a loaded importance tensor and its fuzzy report.
pub struct FifTensor {
    tensor: ImportanceTensor,
    fuzzy: Option<FuzzyReport>,
}

/// Copy the calling thread's last error message (NUL-terminated, truncated
/// to `cap - 1` bytes). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must point to `cap` writable bytes, or be null (then only the
/// length is returned).
#[no_mangle]
pub unsafe extern "C" fn fif_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let message = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = message.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(message.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        message.len()
    })
}

unsafe fn path_from_c(path: *const c_char) -> Result<&'static str, FifStatus> {
    if path.is_null() {
        set_error("path is null".into());
        return Err(FifStatus::NullArgument);
    }
    CStr::from_ptr(path).to_str().map_err(|_| {
        set_error("path is not valid UTF-8".into());
        FifStatus::InvalidUtf8
    })
}

/// Load a tensor CSV (header `model,technique,repetition,<features>`) into a
/// new handle stored in `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fif_tensor_load_csv(
    path: *const c_char,
    out: *mut *mut FifTensor,
) -> FifStatus {
    if out.is_null() {
        set_error("out is null".into());
        return FifStatus::NullArgument;
    }
    let path = match path_from_c(path) {
        Ok(p) => p,
        Err(s) => return s,
    };
    match ImportanceTensor::load_csv(Path::new(path)) {
        Ok(tensor) => {
            *out = Box::into_raw(Box::new(FifTensor {
                tensor,
                fuzzy: None,
            }));
            FifStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            match e {
                fi_fuse::explain::ExplainError::Io(_) => FifStatus::IoError,
                _ => FifStatus::FormatError,
            }
        }
    }
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `handle` must have come from `fif_tensor_load_csv` and not been freed.
#[no_mangle]
pub unsafe extern "C" fn fif_tensor_free(handle: *mut FifTensor) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of features (columns) in the tensor.
///
/// # Safety
/// `handle` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fif_tensor_num_features(handle: *const FifTensor) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).tensor.feature_names.len()
}

/// Number of sources (rows: model x technique x repetition) in the tensor.
///
/// # Safety
/// `handle` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fif_tensor_num_sources(handle: *const FifTensor) -> usize {
    if handle.is_null() {
        return 0;
    }
    (*handle).tensor.entries.len()
}

unsafe fn copy_str(value: &str, buf: *mut c_char, cap: usize) -> FifStatus {
    if buf.is_null() || cap == 0 {
        set_error("buffer is null or empty".into());
        return FifStatus::NullArgument;
    }
    if value.len() + 1 > cap {
        set_error(format!("buffer needs {} bytes", value.len() + 1));
        return FifStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(value.as_ptr(), buf as *mut u8, value.len());
    *buf.add(value.len()) = 0;
    FifStatus::Ok
}

/// Copy the NUL-terminated name of feature `index` into `buf`.
///
/// # Safety
/// `handle` must be live; `buf` must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn fif_tensor_feature_name(
    handle: *const FifTensor,
    index: usize,
    buf: *mut c_char,
    cap: usize,
) -> FifStatus {
    if handle.is_null() {
        set_error("handle is null".into());
        return FifStatus::NullArgument;
    }
    let names = &(*handle).tensor.feature_names;
    match names.get(index) {
        Some(name) => copy_str(name, buf, cap),
        None => {
            set_error(format!("feature index {index} out of range"));
            FifStatus::IndexOutOfRange
        }
    }
}

/// Fuse the tensor with one method ("mean", "median", "mode", "box-whiskers",
/// "tau-test", "majority-vote", "rate-kendall", "rate-spearman") and write
/// one coefficient per feature into `out`.
///
/// # Safety
/// `handle` must be live; `method` NUL-terminated; `out` must point to
/// `fif_tensor_num_features(handle)` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fif_fuse(
    handle: *const FifTensor,
    method: *const c_char,
    alpha: f64,
    num_features: f64,
    out: *mut f64,
) -> FifStatus {
    if handle.is_null() || out.is_null() {
        set_error("handle or out is null".into());
        return FifStatus::NullArgument;
    }
    let method = match path_from_c(method) {
        Ok(m) => m,
        Err(s) => return s,
    };
    let Some(method) = FusionMethod::parse(method) else {
        set_error(format!("unknown fusion method: {method}"));
        return FifStatus::UnknownMethod;
    };
    let tensor = &(*handle).tensor;
    let sources: Vec<Vec<f64>> = tensor.entries.iter().map(|e| e.values.clone()).collect();
    let params = FuseParams {
        alpha,
        num_features,
    };
    match fuse_methods(&tensor.feature_names, &sources, &[method], &params) {
        Ok(fused) => {
            let values = &fused.methods[&method];
            std::ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
            FifStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            FifStatus::FusionError
        }
    }
}

unsafe fn ensure_fuzzy(handle: *mut FifTensor) -> Result<(), FifStatus> {
    let h = &mut *handle;
    if h.fuzzy.is_none() {
        match fuzzy_report(&tensor_samples(&h.tensor)) {
            Ok(report) => h.fuzzy = Some(report),
            Err(e) => {
                set_error(e.to_string());
                return Err(FifStatus::FuzzyError);
            }
        }
    }
    Ok(())
}

/// Fuzzy summary of feature `index`: linguistic label ("low" | "moderate" |
/// "high") copied into `label_buf`, membership degree into `*degree`, and
/// the defuzzified coefficient into `*centroid`. The report is built on
/// first use and cached on the handle.
///
/// # Safety
/// `handle` must be live and exclusively owned by the caller for the call;
/// `label_buf` must point to `label_cap` writable bytes; `degree` and
/// `centroid` must be valid or null (null skips that output).
#[no_mangle]
pub unsafe extern "C" fn fif_fuzzy_feature(
    handle: *mut FifTensor,
    index: usize,
    label_buf: *mut c_char,
    label_cap: usize,
    degree: *mut f64,
    centroid: *mut f64,
) -> FifStatus {
    if handle.is_null() {
        set_error("handle is null".into());
        return FifStatus::NullArgument;
    }
    if let Err(s) = ensure_fuzzy(handle) {
        return s;
    }
    let h = &*handle;
    let Some(feature) = h.tensor.feature_names.get(index) else {
        set_error(format!("feature index {index} out of range"));
        return FifStatus::IndexOutOfRange;
    };
    let entry = &h.fuzzy.as_ref().unwrap().per_feature[feature];
    if !degree.is_null() {
        *degree = entry.degree;
    }
    if !centroid.is_null() {
        *centroid = entry.centroid;
    }
    copy_str(entry.label.name(), label_buf, label_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;

    fn tensor_csv() -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "model,technique,repetition,alpha,beta").unwrap();
        for (m, rep, a, b) in [
            ("m1", 0, 0.1, 0.9),
            ("m1", 1, 0.2, 0.8),
            ("m1", 2, 0.15, 0.85),
            ("m2", 0, 0.0, 1.0),
            ("m2", 1, 0.3, 0.7),
            ("m2", 2, 0.1, 0.95),
        ] {
            writeln!(f, "{m},pi,{rep},{a:.4},{b:.4}").unwrap();
        }
        f
    }

    unsafe fn load(path: &std::path::Path) -> *mut FifTensor {
        let c_path = CString::new(path.to_str().unwrap()).unwrap();
        let mut handle: *mut FifTensor = std::ptr::null_mut();
        assert_eq!(
            fif_tensor_load_csv(c_path.as_ptr(), &mut handle),
            FifStatus::Ok
        );
        handle
    }

    #[test]
    fn load_inspect_fuse_free() {
        let file = tensor_csv();
        unsafe {
            let handle = load(file.path());
            assert_eq!(fif_tensor_num_features(handle), 2);
            assert_eq!(fif_tensor_num_sources(handle), 6);

            let mut buf = [0i8; 16];
            assert_eq!(
                fif_tensor_feature_name(handle, 1, buf.as_mut_ptr(), buf.len()),
                FifStatus::Ok
            );
            assert_eq!(
                CStr::from_ptr(buf.as_ptr()).to_str().unwrap(),
                "beta"
            );

            let method = CString::new("mean").unwrap();
            let mut out = [0.0f64; 2];
            assert_eq!(
                fif_fuse(handle, method.as_ptr(), 0.05, 1.0, out.as_mut_ptr()),
                FifStatus::Ok
            );
            assert!((out[0] - 0.85 / 6.0).abs() < 1e-12);
            assert!((out[1] - 5.2 / 6.0).abs() < 1e-12);

            fif_tensor_free(handle);
        }
    }

    #[test]
    fn fuzzy_labels_via_ffi() {
        let file = tensor_csv();
        unsafe {
            let handle = load(file.path());
            let mut label = [0i8; 16];
            let mut degree = 0.0f64;
            let mut centroid = 0.0f64;
            assert_eq!(
                fif_fuzzy_feature(
                    handle,
                    1,
                    label.as_mut_ptr(),
                    label.len(),
                    &mut degree,
                    &mut centroid
                ),
                FifStatus::Ok
            );
            let label = CStr::from_ptr(label.as_ptr()).to_str().unwrap();
            assert_eq!(label, "high");
            assert!(degree > 0.0 && degree <= 1.0);
            assert!(centroid > 0.5);
            fif_tensor_free(handle);
        }
    }

    #[test]
    fn errors_set_message_and_code() {
        unsafe {
            let missing = CString::new("/nonexistent/tensor.csv").unwrap();
            let mut handle: *mut FifTensor = std::ptr::null_mut();
            let status = fif_tensor_load_csv(missing.as_ptr(), &mut handle);
            assert_eq!(status, FifStatus::IoError);
            let mut buf = [0i8; 256];
            let n = fif_last_error(buf.as_mut_ptr(), buf.len());
            assert!(n > 0);

            let file = tensor_csv();
            let handle = load(file.path());
            let bogus = CString::new("centroid-of-gravity").unwrap();
            let mut out = [0.0f64; 2];
            assert_eq!(
                fif_fuse(handle, bogus.as_ptr(), 0.05, 1.0, out.as_mut_ptr()),
                FifStatus::UnknownMethod
            );
            assert_eq!(
                fif_tensor_feature_name(handle, 9, out.as_mut_ptr() as *mut c_char, 8),
                FifStatus::IndexOutOfRange
            );
            assert_eq!(
                fif_fuse(handle, bogus.as_ptr(), 0.05, 1.0, std::ptr::null_mut()),
                FifStatus::NullArgument
            );
            fif_tensor_free(handle);
            fif_tensor_free(std::ptr::null_mut()); // must be a no-op
        }
    }
}

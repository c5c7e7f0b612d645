//! C ABI over `topostab`.
//!
//! Objects are opaque handles created by the `ts_cloud_from_*`,
//! `ts_diagrams_*` and `ts_cder_model_from_json` constructors and released
//! with the matching `ts_*_free`. Every fallible call returns a
//! [`TsStatus`]; on failure a message is available from [`ts_last_error`]
//! on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::ptr;

use topostab::cder::{self, CderModel};
use topostab::pdb_ingest::{self, WeightedPointCloud};
use topostab::persistence::{transform, PersistenceDiagram};
use topostab::pipeline::{cloud_diagrams, FiltrationConfig};

/// Result codes shared by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Compute = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// Weighted point cloud in R³.
pub struct TsCloud(WeightedPointCloud);

/// Persistence diagrams indexed by homological dimension.
pub struct TsDiagrams(Vec<PersistenceDiagram>);

/// Fitted CDER model.
pub struct TsCderModel(CderModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TsStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(TsStatus::NullPointer, format!("{what} is null"))
    }
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TsStatus {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            TsStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(text: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if text.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(text)
        .to_str()
        .map_err(|e| Failure(TsStatus::InvalidArgument, format!("{what} is not UTF-8: {e}")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call or [`ts_clear_error`] on this thread.
#[no_mangle]
pub extern "C" fn ts_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn ts_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Parse the ATOM records of PDB text and weight each atom by its van der
/// Waals radius.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ts_cloud_from_pdb(text: *const c_char, out: *mut *mut TsCloud) -> TsStatus {
    guard(|| {
        let text = read_str(text, "text")?;
        let atoms = pdb_ingest::parse_pdb(text).map_err(|e| Failure(TsStatus::Parse, e.to_string()))?;
        let cloud = pdb_ingest::assign_weights(&atoms).map_err(|e| Failure(TsStatus::Parse, e.to_string()))?;
        put(out, TsCloud(cloud))
    })
}

/// Cloud from `n` points stored as `x0 y0 z0 x1 y1 z1 ...`. `radii` holds `n`
/// non-negative radii or is NULL for an unweighted cloud.
///
/// # Safety
/// `xyz` must point to `3 n` doubles, `radii` to `n` doubles or be NULL, and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_cloud_from_arrays(
    xyz: *const f64,
    radii: *const f64,
    n: usize,
    out: *mut *mut TsCloud,
) -> TsStatus {
    guard(|| {
        if xyz.is_null() {
            return Err(Failure::null("xyz"));
        }
        if n == 0 {
            return Err(Failure(TsStatus::InvalidArgument, "cloud has no points".into()));
        }
        let flat = std::slice::from_raw_parts(xyz, 3 * n);
        let points: Vec<[f64; 3]> = flat.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Failure(TsStatus::InvalidArgument, "non-finite coordinate".into()));
        }
        let cloud = if radii.is_null() {
            WeightedPointCloud::unweighted(points)
        } else {
            let r = std::slice::from_raw_parts(radii, n).to_vec();
            if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Failure(TsStatus::InvalidArgument, "radii must be finite and non-negative".into()));
            }
            WeightedPointCloud::new(points, r)
        };
        put(out, TsCloud(cloud))
    })
}

/// Number of points, or 0 for NULL.
///
/// # Safety
/// `cloud` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_cloud_len(cloud: *const TsCloud) -> usize {
    cloud.as_ref().map_or(0, |c| c.0.len())
}

/// Copy the radii of the cloud into `radii` (capacity `capacity`).
///
/// # Safety
/// `cloud` must be a live handle and `radii` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ts_cloud_radii(cloud: *const TsCloud, radii: *mut f64, capacity: usize) -> TsStatus {
    guard(|| {
        let cloud = deref(cloud, "cloud")?;
        copy_out(&cloud.0.radii, radii, capacity)
    })
}

/// # Safety
/// `cloud` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_cloud_free(cloud: *mut TsCloud) {
    if !cloud.is_null() {
        drop(Box::from_raw(cloud));
    }
}

unsafe fn diagrams(cloud: *const TsCloud, filtration: FiltrationConfig, max_dim: usize, out: *mut *mut TsDiagrams) -> TsStatus {
    guard(|| {
        let cloud = deref(cloud, "cloud")?;
        if max_dim > 2 {
            return Err(Failure(TsStatus::InvalidArgument, format!("max_dim must be at most 2, got {max_dim}")));
        }
        let dims: Vec<usize> = (0..=max_dim).collect();
        let d = cloud_diagrams(&cloud.0, &filtration, &dims, "")
            .map_err(|e| Failure(TsStatus::Compute, e.to_string()))?;
        put(out, TsDiagrams(d))
    })
}

/// Weighted alpha persistence in dimensions `0..=max_dim` (`max_dim <= 2`).
/// Values are squared radii; vertices enter at `-r^2`.
///
/// # Safety
/// `cloud` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_diagrams_alpha(cloud: *const TsCloud, max_dim: usize, out: *mut *mut TsDiagrams) -> TsStatus {
    diagrams(cloud, FiltrationConfig::WeightedAlpha, max_dim, out)
}

/// Vietoris–Rips persistence up to scale `max_scale` in dimensions
/// `0..=max_dim` (`max_dim <= 2`). Radii are ignored.
///
/// # Safety
/// `cloud` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_diagrams_rips(
    cloud: *const TsCloud,
    max_scale: f64,
    max_dim: usize,
    out: *mut *mut TsDiagrams,
) -> TsStatus {
    if !(max_scale > 0.0) {
        set_error(format!("max_scale must be positive, got {max_scale}"));
        return TsStatus::InvalidArgument;
    }
    diagrams(cloud, FiltrationConfig::Rips { max_scale }, max_dim, out)
}

/// Number of pairs in dimension `dim`, or 0 when absent.
///
/// # Safety
/// `diagrams` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_diagrams_count(diagrams: *const TsDiagrams, dim: usize) -> usize {
    diagrams
        .as_ref()
        .and_then(|d| d.0.get(dim))
        .map_or(0, |d| d.len())
}

/// Copy the pairs of dimension `dim` into `births`/`deaths`, each holding
/// `capacity` doubles. Essential classes have death `+INFINITY`.
///
/// # Safety
/// `diagrams` must be a live handle; `births` and `deaths` must each hold
/// `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn ts_diagrams_get(
    diagrams: *const TsDiagrams,
    dim: usize,
    births: *mut f64,
    deaths: *mut f64,
    capacity: usize,
) -> TsStatus {
    guard(|| {
        let d = deref(diagrams, "diagrams")?;
        let Some(d) = d.0.get(dim) else {
            return Err(Failure(TsStatus::InvalidArgument, format!("no diagram for dimension {dim}")));
        };
        let b: Vec<f64> = d.pairs.iter().map(|p| p.birth).collect();
        let e: Vec<f64> = d.pairs.iter().map(|p| p.death).collect();
        copy_out(&b, births, capacity)?;
        copy_out(&e, deaths, capacity)
    })
}

/// # Safety
/// `diagrams` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_diagrams_free(diagrams: *mut TsDiagrams) {
    if !diagrams.is_null() {
        drop(Box::from_raw(diagrams));
    }
}

/// Load a model saved as `cder_model.json`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_cder_model_from_json(json: *const c_char, out: *mut *mut TsCderModel) -> TsStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let model = CderModel::from_json(text).map_err(|e| Failure(TsStatus::Parse, e.to_string()))?;
        put(out, TsCderModel(model))
    })
}

/// Length of the feature vector, or 0 for NULL.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ts_cder_model_num_features(model: *const TsCderModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.num_features())
}

/// Feature vector of one sample's diagrams. Dimensions the model uses but
/// `diagrams` lacks are treated as empty.
///
/// # Safety
/// `model` and `diagrams` must be live handles; `out` must hold `capacity`
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn ts_cder_model_vectorize(
    model: *const TsCderModel,
    diagrams: *const TsDiagrams,
    out: *mut f64,
    capacity: usize,
) -> TsStatus {
    guard(|| {
        let model = deref(model, "model")?;
        let dgms = deref(diagrams, "diagrams")?;
        let mut points = Vec::with_capacity(model.0.dimensions.len());
        for m in &model.0.dimensions {
            let t = match dgms.0.get(m.dimension) {
                Some(d) => transform(&d.finite()).map_err(|e| Failure(TsStatus::Compute, e.to_string()))?.points,
                None => Vec::new(),
            };
            points.push(t);
        }
        let views: Vec<&[[f64; 2]]> = points.iter().map(|p| p.as_slice()).collect();
        let v = cder::vectorize_sample(&model.0.dimensions, &views)
            .map_err(|e| Failure(TsStatus::Compute, e.to_string()))?;
        copy_out(&v, out, capacity)
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ts_cder_model_free(model: *mut TsCderModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn copy_out(values: &[f64], dest: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < values.len() {
        return Err(Failure(
            TsStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, need {}", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if dest.is_null() {
        return Err(Failure::null("output buffer"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), dest, values.len());
    Ok(())
}

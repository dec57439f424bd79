//! C interface to `fieldrec`.
//!
//! Collections and hierarchies are opaque handles. Every fallible call
//! returns an [`FrmStatus`]; on failure `frm_last_error` describes the error
//! as a JSON object until the next fallible call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fieldrec::collections::{random_collection, validate, ModuliPair, Z2Collection};
use fieldrec::composite::{build_grid_collection, GeometryGrid};
use fieldrec::eval::{evaluate, EvalMethod};
use fieldrec::recursion::{build_hierarchy, RecursionHierarchy, Termination};
use fieldrec::{Error, C64};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrmComplex {
    pub re: f64,
    pub im: f64,
}

impl From<FrmComplex> for C64 {
    fn from(z: FrmComplex) -> Self {
        C64::new(z.re, z.im)
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrmStatus {
    Ok = 0,
    NullPointer = 1,
    BufferTooSmall = 2,
    /// Malformed input: parse errors, bad dimensions, bad geometry.
    InvalidInput = 3,
    /// A matrix that had to be inverted is singular.
    Singular = 4,
    DegenerateIntersection = 5,
    PoleHit = 6,
    /// Any other mathematical failure.
    Failed = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrmTermination {
    DepthReached = 0,
    DimZero = 1,
    Degenerate = 2,
}

/// Opaque collection handle.
pub struct FrmCollection(Z2Collection);

/// Opaque hierarchy handle.
pub struct FrmHierarchy(RecursionHierarchy);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FrmStatus {
    match e {
        _ if e.is_input_error() => FrmStatus::InvalidInput,
        Error::SingularL11 { .. }
        | Error::SingularB { .. }
        | Error::SingularF { .. }
        | Error::SingularShiftedY { .. }
        | Error::ZeroModulus => FrmStatus::Singular,
        Error::DegenerateIntersection { .. } => FrmStatus::DegenerateIntersection,
        Error::PoleHit { .. } => FrmStatus::PoleHit,
        _ => FrmStatus::Failed,
    }
}

fn guard<F>(f: F) -> FrmStatus
where
    F: FnOnce() -> Result<(), FrmStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FrmStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_last_error(r#"{"error":"Panic","message":"internal panic"}"#.into());
            FrmStatus::Panic
        }
    }
}

fn fail(e: Error) -> FrmStatus {
    set_last_error(e.to_json().to_string());
    status_of(&e)
}

fn null_arg(name: &str) -> FrmStatus {
    set_last_error(format!(r#"{{"error":"NullPointer","message":"{name} is null"}}"#));
    FrmStatus::NullPointer
}

unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, FrmStatus> {
    if p.is_null() {
        return Err(null_arg(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(Error::Parse(format!("{name} is not valid UTF-8"))))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn put_string(out: *mut *mut c_char, s: String) {
    *out = CString::new(s).map_or(ptr::null_mut(), CString::into_raw);
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn frm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// JSON description of the last error on this thread, or NULL.
///
/// The pointer stays valid until the next call that returns an
/// `FrmStatus` on the same thread.
#[no_mangle]
pub extern "C" fn frm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from a `frm_*` function that returns an owned string, and
/// must not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn frm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a collection file's JSON text.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn frm_collection_from_json(
    json: *const c_char,
    out: *mut *mut FrmCollection,
) -> FrmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let text = read_str(json, "json")?;
        let c = Z2Collection::from_json_str(text).map_err(fail)?;
        put(out, FrmCollection(c));
        Ok(())
    })
}

/// Serializes a collection; free the result with `frm_string_free`.
///
/// # Safety
/// `c` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn frm_collection_to_json(
    c: *const FrmCollection,
    out: *mut *mut c_char,
) -> FrmStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return Err(null_arg("collection or out"));
        }
        put_string(out, (*c).0.to_json_string());
        Ok(())
    })
}

/// Seeded random collection.
///
/// # Safety
/// `out` must be a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn frm_collection_random(
    ambient_dim: usize,
    dim_u: usize,
    dim_e: usize,
    dim_j: usize,
    dim_p1: usize,
    seed: u64,
    out: *mut *mut FrmCollection,
) -> FrmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let c = random_collection(ambient_dim, dim_u, dim_e, dim_j, dim_p1, seed).map_err(fail)?;
        put(out, FrmCollection(c));
        Ok(())
    })
}

/// Grid collection of a geometry given as ASCII rows or JSON.
///
/// # Safety
/// `geometry` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn frm_grid_collection(
    geometry: *const c_char,
    out: *mut *mut FrmCollection,
) -> FrmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let g = GeometryGrid::parse(read_str(geometry, "geometry")?).map_err(fail)?;
        let gc = build_grid_collection(&g).map_err(fail)?;
        put(out, FrmCollection(gc.base));
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frm_collection_free(c: *mut FrmCollection) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Writes `[ambient, U, E, J, P1, P2]` into `dims`.
///
/// # Safety
/// `c` must be a live handle and `dims` must have room for 6 values.
#[no_mangle]
pub unsafe extern "C" fn frm_collection_dims(c: *const FrmCollection, dims: *mut usize) -> FrmStatus {
    guard(|| {
        if c.is_null() || dims.is_null() {
            return Err(null_arg("collection or dims"));
        }
        let col = &(*c).0;
        let d = col.dims();
        let all = [col.ambient_dim(), d[0], d[1], d[2], d[3], d[4]];
        ptr::copy_nonoverlapping(all.as_ptr(), dims, all.len());
        Ok(())
    })
}

/// Runs the structural checks. `passed` is set either way; the full report
/// is available as JSON through `report` when it is not NULL.
///
/// # Safety
/// `c` must be a live handle, `passed` writable, `report` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn frm_collection_validate(
    c: *const FrmCollection,
    passed: *mut bool,
    report: *mut *mut c_char,
) -> FrmStatus {
    guard(|| {
        if c.is_null() || passed.is_null() {
            return Err(null_arg("collection or passed"));
        }
        let rep = validate(&(*c).0);
        *passed = rep.passed;
        if !report.is_null() {
            let text = serde_json::to_string(&rep).map_err(|e| fail(e.into()))?;
            put_string(report, text);
        }
        Ok(())
    })
}

/// Effective operator `L*(l1, l2)` written row-major into `out`.
///
/// `method` is one of `schur`, `inverse`, `direct`, `fraction`, `spectral`,
/// `cf:<depth>`; NULL means `schur`. `out_len` must be at least `dim(U)²`.
///
/// # Safety
/// `c` must be a live handle, `method` NULL or NUL-terminated, and `out`
/// must have room for `out_len` values.
#[no_mangle]
pub unsafe extern "C" fn frm_effective(
    c: *const FrmCollection,
    l1: FrmComplex,
    l2: FrmComplex,
    method: *const c_char,
    out: *mut FrmComplex,
    out_len: usize,
) -> FrmStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return Err(null_arg("collection or out"));
        }
        let col = &(*c).0;
        let method: EvalMethod = if method.is_null() {
            EvalMethod::Schur
        } else {
            read_str(method, "method")?.parse().map_err(fail)?
        };
        let du = col.u.dim();
        if out_len < du * du {
            set_last_error(format!(
                r#"{{"error":"BufferTooSmall","message":"need {} values","needed":{}}}"#,
                du * du,
                du * du
            ));
            return Err(FrmStatus::BufferTooSmall);
        }
        let r = evaluate(col, &ModuliPair::new(l1.into(), l2.into()), method).map_err(fail)?;
        for i in 0..du {
            for j in 0..du {
                let z = r.matrix[(i, j)];
                *out.add(i * du + j) = FrmComplex { re: z.re, im: z.im };
            }
        }
        Ok(())
    })
}

/// # Safety
/// `c` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn frm_hierarchy_build(
    c: *const FrmCollection,
    max_depth: usize,
    out: *mut *mut FrmHierarchy,
) -> FrmStatus {
    guard(|| {
        if c.is_null() || out.is_null() {
            return Err(null_arg("collection or out"));
        }
        let h = build_hierarchy(&(*c).0, max_depth).map_err(fail)?;
        put(out, FrmHierarchy(h));
        Ok(())
    })
}

/// Number of levels; 0 for a NULL handle.
///
/// # Safety
/// `h` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn frm_hierarchy_depth(h: *const FrmHierarchy) -> usize {
    h.as_ref().map_or(0, |h| h.0.depth())
}

/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn frm_hierarchy_termination(
    h: *const FrmHierarchy,
    out: *mut FrmTermination,
) -> FrmStatus {
    guard(|| {
        if h.is_null() || out.is_null() {
            return Err(null_arg("hierarchy or out"));
        }
        *out = match (*h).0.termination {
            Termination::DepthReached => FrmTermination::DepthReached,
            Termination::DimZero => FrmTermination::DimZero,
            Termination::Degenerate { .. } => FrmTermination::Degenerate,
        };
        Ok(())
    })
}

/// Full hierarchy report; free the result with `frm_string_free`.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn frm_hierarchy_to_json(h: *const FrmHierarchy, out: *mut *mut c_char) -> FrmStatus {
    guard(|| {
        if h.is_null() || out.is_null() {
            return Err(null_arg("hierarchy or out"));
        }
        put_string(out, (*h).0.to_json().to_string());
        Ok(())
    })
}

/// # Safety
/// `h` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn frm_hierarchy_free(h: *mut FrmHierarchy) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

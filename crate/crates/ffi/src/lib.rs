//! C ABI over the `hotspots` library.
//!
//! Objects cross the boundary as opaque handles created by `hs_*_new` style
//! constructors and released with the matching `hs_*_free`. Every fallible
//! call returns an [`HsStatus`]; on failure the message is kept per thread
//! and can be copied out with [`hs_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use hotspots::geometry::{relative_convexity_tol, ConvexPair, Grid2, Rect};
use hotspots::perturbation::{assemble_perturbation, rectangle_grid};
use hotspots::potentials::make_q;
use hotspots::spectral::{ball_radial_eigenvalue, ground_eigenpair, EigenResult};
use hotspots::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Numerical = 3,
    Convexity = 4,
    BufferTooSmall = 5,
    Panic = 6,
}

/// A convex pair: a rectangle grid with a potential sampled at its nodes.
pub struct HsPair(ConvexPair);

/// Ground eigenpair of a pair.
pub struct HsEigen(EigenResult);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::Convexity { .. } => HsStatus::Convexity,
        Error::InvalidParameter(_) | Error::Domain { .. } | Error::Config(_) => HsStatus::InvalidParameter,
        _ => HsStatus::Numerical,
    }
}

/// Runs `f`, recording errors and turning panics into [`HsStatus::Panic`].
fn guard(f: impl FnOnce() -> Result<(), HsStatus>) -> HsStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            HsStatus::Panic
        }
    }
}

fn fail(e: Error) -> HsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> HsStatus {
    set_error(format!("{what} is null"));
    HsStatus::NullPointer
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Copies the last error of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hs_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// `[-pi/2, pi/2] x [-1, 1]` with `V = 0` on an `nx x ny` grid.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn hs_pair_rectangle(nx: usize, ny: usize, out: *mut *mut HsPair) -> HsStatus {
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        let g = rectangle_grid(nx, ny).map_err(fail)?;
        put(out, HsPair(ConvexPair::zero(g)));
        Ok(())
    })
}

/// The rectangle with potential `eps V_q` built from the profile of
/// mollifier width `delta`, in normalized units.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn hs_pair_perturbed(nx: usize, ny: usize, delta: f64, eps: f64, out: *mut *mut HsPair) -> HsStatus {
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        let q = make_q(delta).map_err(fail)?;
        let pr = assemble_perturbation(Arc::new(q), &rectangle_grid(nx, ny).map_err(fail)?, 1.0).map_err(fail)?;
        put(out, HsPair(pr.scaled_pair(eps, &pr.grid).map_err(fail)?));
        Ok(())
    })
}

/// A pair on `[x_min, x_max] x [y_min, y_max]` from node values ordered
/// `k = i * (ny + 1) + j`. The potential must pass the convexity certificate.
///
/// # Safety
/// `values` must point to `len` readable doubles and `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn hs_pair_from_values(
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
    values: *const f64,
    len: usize,
    out: *mut *mut HsPair,
) -> HsStatus {
    if values.is_null() {
        return null("values");
    }
    if out.is_null() {
        return null("out");
    }
    let v = std::slice::from_raw_parts(values, len).to_vec();
    guard(|| {
        let g = Grid2::new(Rect::new(x_min, x_max, y_min, y_max).map_err(fail)?, nx, ny).map_err(fail)?;
        if g.len() != len {
            return Err(fail(Error::InvalidParameter(format!("expected {} values, got {len}", g.len()))));
        }
        let tol = relative_convexity_tol(&v, 1e-8);
        put(out, HsPair(ConvexPair::new(g, v, tol).map_err(fail)?));
        Ok(())
    })
}

/// Number of grid nodes of a pair, or 0 for a null handle.
///
/// # Safety
/// `pair` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hs_pair_len(pair: *const HsPair) -> usize {
    pair.as_ref().map_or(0, |p| p.0.grid.len())
}

/// # Safety
/// `pair` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_pair_free(pair: *mut HsPair) {
    if !pair.is_null() {
        drop(Box::from_raw(pair));
    }
}

/// Ground Neumann eigenpair of the weighted Laplacian of `pair`.
///
/// # Safety
/// `pair` must be a live handle and `out` a valid handle slot.
#[no_mangle]
pub unsafe extern "C" fn hs_eigen_solve(pair: *const HsPair, tol: f64, out: *mut *mut HsEigen) -> HsStatus {
    let Some(p) = pair.as_ref() else { return null("pair") };
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        put(out, HsEigen(ground_eigenpair(&p.0, tol).map_err(fail)?));
        Ok(())
    })
}

/// First two nonzero eigenvalues and the gap flag.
///
/// # Safety
/// `e` must be a live handle; output pointers may be null.
#[no_mangle]
pub unsafe extern "C" fn hs_eigen_values(e: *const HsEigen, lambda1: *mut f64, lambda2: *mut f64, gap_ok: *mut bool) -> HsStatus {
    let Some(e) = e.as_ref() else { return null("eigen") };
    if let Some(l) = lambda1.as_mut() {
        *l = e.0.lambda1;
    }
    if let Some(l) = lambda2.as_mut() {
        *l = e.0.lambda2;
    }
    if let Some(g) = gap_ok.as_mut() {
        *g = e.0.gap_ok;
    }
    HsStatus::Ok
}

/// Copies the eigenfunction (node order as in [`hs_pair_from_values`]).
///
/// # Safety
/// `e` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hs_eigen_copy_phi(e: *const HsEigen, buf: *mut f64, len: usize) -> HsStatus {
    let Some(e) = e.as_ref() else { return null("eigen") };
    if buf.is_null() {
        return null("buf");
    }
    let phi = &e.0.phi1;
    if len < phi.len() {
        set_error(format!("buffer holds {len} values, eigenfunction has {}", phi.len()));
        return HsStatus::BufferTooSmall;
    }
    std::ptr::copy_nonoverlapping(phi.as_ptr(), buf, phi.len());
    HsStatus::Ok
}

/// Bilinear value of the eigenfunction at `(x, y)`.
///
/// # Safety
/// `e` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hs_eigen_value_at(e: *const HsEigen, x: f64, y: f64, out: *mut f64) -> HsStatus {
    let Some(e) = e.as_ref() else { return null("eigen") };
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        *out = e.0.value_at(x, y).map_err(fail)?;
        Ok(())
    })
}

/// # Safety
/// `e` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hs_eigen_free(e: *mut HsEigen) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// First nonzero Neumann eigenvalue of the unit ball in `R^(d+1)` on `n` radial cells.
#[no_mangle]
pub extern "C" fn hs_ball_eigenvalue(d: u32, n: usize) -> f64 {
    if n < 2 {
        return f64::NAN;
    }
    ball_radial_eigenvalue(d, n)
}

//! C ABI for the flea-lab core.
//!
//! Every entry point returns a [`FleaStatus`] and writes results through out-pointers.
//! Objects cross the boundary as opaque handles that the caller releases with the
//! matching `*_free` function. Panics are caught at the boundary and reported as
//! [`FleaStatus::Panic`]. After a failure, [`flea_last_error_message`] describes it.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use flea_lab::potential::{agmon_distance, eval_potential, FleaSpec, PotentialSpec};
use flea_lab::spectral::{self, Grid, Spectrum};
use flea_lab::two_level::{quench_p_left, FleaSide, TwoLevelModel};
use flea_lab::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FleaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NumericalFailure = 3,
    Panic = 4,
}

/// A double-well potential with an optional flea.
pub struct FleaPotential {
    spec: PotentialSpec,
    flea: Option<FleaSpec>,
}

/// The lowest levels of a potential on a grid.
pub struct FleaSpectrum {
    spectrum: Spectrum,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let c = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: FleaStatus, msg: impl Into<String>) -> FleaStatus {
    set_error(msg);
    status
}

fn from_core(e: Error) -> FleaStatus {
    let status = if e.is_numerical() { FleaStatus::NumericalFailure } else { FleaStatus::InvalidArgument };
    fail(status, e.to_string())
}

/// Runs `f`, turning a panic into [`FleaStatus::Panic`].
fn guard(f: impl FnOnce() -> FleaStatus) -> FleaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(FleaStatus::Panic, format!("panic: {msg}"))
        }
    }
}

macro_rules! deref {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_ref() } {
            Some(r) => r,
            None => return fail(FleaStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($ptr:expr, $name:literal) => {
        match unsafe { $ptr.as_mut() } {
            Some(r) => r,
            None => return fail(FleaStatus::NullPointer, concat!($name, " is null")),
        }
    };
}

/// Creates the well `lambda/4 (x^2 - a^2)^2` with `a = omega / sqrt(lambda)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn flea_potential_new(omega: f64, lambda: f64, out: *mut *mut FleaPotential) -> FleaStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        match PotentialSpec::double_well(omega, lambda) {
            Ok(spec) => {
                *out = Box::into_raw(Box::new(FleaPotential { spec, flea: None }));
                FleaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Installs the bump of height `d` and half-width `c` centered at `b`, replacing any previous one.
///
/// # Safety
/// `potential` must be a live handle from [`flea_potential_new`].
#[no_mangle]
pub unsafe extern "C" fn flea_potential_set_flea(potential: *mut FleaPotential, b: f64, c: f64, d: f64) -> FleaStatus {
    guard(|| {
        let p = deref_mut!(potential, "potential");
        match FleaSpec::new(b, c, d) {
            Ok(f) => {
                p.flea = Some(f);
                FleaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Removes the flea.
///
/// # Safety
/// `potential` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn flea_potential_clear_flea(potential: *mut FleaPotential) -> FleaStatus {
    guard(|| {
        deref_mut!(potential, "potential").flea = None;
        FleaStatus::Ok
    })
}

/// `V(x)` including the flea.
///
/// # Safety
/// `potential` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flea_potential_eval(potential: *const FleaPotential, x: f64, out: *mut f64) -> FleaStatus {
    guard(|| {
        let p = deref!(potential, "potential");
        let out = deref_mut!(out, "out");
        *out = eval_potential(&p.spec, p.flea.as_ref(), None, x, 0.0);
        FleaStatus::Ok
    })
}

/// Agmon distance between `x` and `y` in the unperturbed well.
///
/// # Safety
/// `potential` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flea_potential_agmon_distance(
    potential: *const FleaPotential,
    x: f64,
    y: f64,
    out: *mut f64,
) -> FleaStatus {
    guard(|| {
        let p = deref!(potential, "potential");
        let out = deref_mut!(out, "out");
        match agmon_distance(&p.spec, x, y) {
            Ok(d) => {
                *out = d;
                FleaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Releases a potential. Null is ignored.
///
/// # Safety
/// `potential` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn flea_potential_free(potential: *mut FleaPotential) {
    if !potential.is_null() {
        drop(Box::from_raw(potential));
    }
}

/// Solves for the `levels` lowest states on `points` interior grid points.
///
/// # Safety
/// `potential` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flea_spectrum_compute(
    potential: *const FleaPotential,
    hbar: f64,
    points: usize,
    levels: usize,
    out: *mut *mut FleaSpectrum,
) -> FleaStatus {
    guard(|| {
        let p = deref!(potential, "potential");
        let out = deref_mut!(out, "out");
        if levels == 0 {
            return fail(FleaStatus::InvalidArgument, "levels must be at least 1");
        }
        let solved = Grid::for_potential(&p.spec, p.flea.as_ref(), points)
            .and_then(|g| spectral::solve(&p.spec, p.flea.as_ref(), hbar, &g, levels));
        match solved {
            Ok(spectrum) => {
                *out = Box::into_raw(Box::new(FleaSpectrum { spectrum }));
                FleaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// Number of stored levels.
///
/// # Safety
/// `spectrum` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flea_spectrum_len(spectrum: *const FleaSpectrum, out: *mut usize) -> FleaStatus {
    guard(|| {
        let s = deref!(spectrum, "spectrum");
        *deref_mut!(out, "out") = s.spectrum.eigenvalues.len();
        FleaStatus::Ok
    })
}

fn level(s: &FleaSpectrum, k: usize) -> Result<&spectral::WaveFunction, FleaStatus> {
    s.spectrum.eigenfunctions.get(k).ok_or_else(|| {
        fail(FleaStatus::InvalidArgument, format!("level {k} out of range ({} stored)", s.spectrum.eigenfunctions.len()))
    })
}

/// Energy of level `k`.
///
/// # Safety
/// `spectrum` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flea_spectrum_eigenvalue(spectrum: *const FleaSpectrum, k: usize, out: *mut f64) -> FleaStatus {
    guard(|| {
        let s = deref!(spectrum, "spectrum");
        let out = deref_mut!(out, "out");
        match s.spectrum.eigenvalues.get(k) {
            Some(&e) => {
                *out = e;
                FleaStatus::Ok
            }
            None => fail(FleaStatus::InvalidArgument, format!("level {k} out of range")),
        }
    })
}

/// Number of grid points per state.
///
/// # Safety
/// `spectrum` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flea_spectrum_grid_len(spectrum: *const FleaSpectrum, out: *mut usize) -> FleaStatus {
    guard(|| {
        let s = deref!(spectrum, "spectrum");
        *deref_mut!(out, "out") = s.spectrum.eigenfunctions.first().map_or(0, |w| w.grid.n);
        FleaStatus::Ok
    })
}

/// Copies the grid into `x` and the real, unit-normalized state `k` into `psi`.
///
/// Both buffers must hold `len` doubles, and `len` must equal the grid length; `x` may be null.
///
/// # Safety
/// `spectrum` must be a live handle; non-null buffers must hold `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn flea_spectrum_copy_state(
    spectrum: *const FleaSpectrum,
    k: usize,
    x: *mut f64,
    psi: *mut f64,
    len: usize,
) -> FleaStatus {
    guard(|| {
        let s = deref!(spectrum, "spectrum");
        if psi.is_null() {
            return fail(FleaStatus::NullPointer, "psi is null");
        }
        let state = match level(s, k) {
            Ok(w) => w,
            Err(status) => return status,
        };
        let g = state.grid;
        if len != g.n {
            return fail(FleaStatus::InvalidArgument, format!("buffer length {len} differs from the grid length {}", g.n));
        }
        let dst = std::slice::from_raw_parts_mut(psi, len);
        dst.iter_mut().zip(&state.amplitudes).for_each(|(d, a)| *d = a.re);
        if !x.is_null() {
            let dst = std::slice::from_raw_parts_mut(x, len);
            dst.iter_mut().enumerate().for_each(|(i, d)| *d = g.point(i));
        }
        FleaStatus::Ok
    })
}

/// Probability of `x < 0` in level `k`.
///
/// # Safety
/// `spectrum` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flea_spectrum_mass_left(spectrum: *const FleaSpectrum, k: usize, out: *mut f64) -> FleaStatus {
    guard(|| {
        let s = deref!(spectrum, "spectrum");
        let out = deref_mut!(out, "out");
        match level(s, k) {
            Ok(w) => {
                *out = w.mass_split().0;
                FleaStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Releases a spectrum. Null is ignored.
///
/// # Safety
/// `spectrum` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn flea_spectrum_free(spectrum: *mut FleaSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// `P_L(t)` after switching on a flea of strength `delta` in the two-level model,
/// starting from the symmetric ground state. `side` is 0 for the left well, 1 for the right.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flea_two_level_p_left(
    splitting: f64,
    delta: f64,
    side: c_int,
    t: f64,
    hbar: f64,
    out: *mut f64,
) -> FleaStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        let side = match side {
            0 => FleaSide::Left,
            1 => FleaSide::Right,
            other => return fail(FleaStatus::InvalidArgument, format!("side must be 0 or 1, got {other}")),
        };
        if hbar.is_nan() || hbar <= 0.0 || t.is_nan() || t < 0.0 {
            return fail(FleaStatus::InvalidArgument, "need hbar > 0 and t >= 0");
        }
        match TwoLevelModel::new(splitting, delta, side) {
            Ok(m) => {
                *out = quench_p_left(&m, t, hbar);
                FleaStatus::Ok
            }
            Err(e) => from_core(e),
        }
    })
}

/// The barrier phase correction as a function of the barrier action `k`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flea_wkb_phi_tilde(k: f64, out: *mut f64) -> FleaStatus {
    guard(|| {
        let out = deref_mut!(out, "out");
        if !k.is_finite() {
            return fail(FleaStatus::InvalidArgument, "k must be finite");
        }
        *out = flea_lab::special::phi_tilde(k);
        FleaStatus::Ok
    })
}

/// Message of the last failure on this thread, or an empty string.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn flea_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn flea_status_string(status: FleaStatus) -> *const c_char {
    let s: &'static CStr = match status {
        FleaStatus::Ok => c"ok",
        FleaStatus::NullPointer => c"null pointer",
        FleaStatus::InvalidArgument => c"invalid argument",
        FleaStatus::NumericalFailure => c"numerical failure",
        FleaStatus::Panic => c"panic",
    };
    s.as_ptr()
}

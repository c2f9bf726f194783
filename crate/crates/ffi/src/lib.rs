//! C ABI over `dplab`.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a [`DpStatus`]; on failure a message is kept
//! per thread and can be copied out with [`dp_last_error`]. Arrays are passed
//! as pointer plus length and are never retained.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dplab::evolution::{self, EvolveConfig};
use dplab::linops::{self, OperatorMatrix};
use dplab::profile::{self, SolitaryWave, WaveParams};
use dplab::spectral::{functional_h, functional_s};
use dplab::stability;
use dplab::{Error, Field, Grid};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidParams = 3,
    InvalidGrid = 4,
    GridTooShort = 5,
    BufferTooSmall = 6,
    NearSingular = 7,
    NonPositiveMomentum = 8,
    Numerical = 9,
    NoRoots = 10,
    Panic = 99,
}

/// Opaque solitary wave on a periodic grid.
pub struct DpWave {
    wave: SolitaryWave,
}

/// Opaque dense linearized operator about a wave.
pub struct DpOperator {
    wave: SolitaryWave,
    matrix: OperatorMatrix,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DpSpectrum {
    pub lambda_star: f64,
    pub zero_eig: f64,
    pub zero_cosine: f64,
    pub positive_gap: f64,
    pub continuum_edge: f64,
    pub negative_count: usize,
    pub zero_count: usize,
    /// 1 when the spectrum has the expected shape
    pub classified: i32,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct DpOrbital {
    pub d2: f64,
    pub dinf: f64,
    pub x0: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> DpStatus {
    match e {
        Error::InvalidParams { .. } => DpStatus::InvalidParams,
        Error::InvalidGrid(_) | Error::GridMismatch => DpStatus::InvalidGrid,
        Error::GridTooShort { .. } => DpStatus::GridTooShort,
        Error::NearSingular { .. } => DpStatus::NearSingular,
        Error::NonPositiveMomentum { .. } => DpStatus::NonPositiveMomentum,
        Error::InvalidArgument(_) | Error::InvalidCertificate(_) | Error::CflViolation { .. } => {
            DpStatus::InvalidArgument
        }
        _ => DpStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), DpStatus>) -> DpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("panic inside dplab".into());
            DpStatus::Panic
        }
    }
}

fn fail(e: Error) -> DpStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn non_null<T>(p: *const T) -> Result<(), DpStatus> {
    if p.is_null() {
        set_error("null pointer argument".into());
        Err(DpStatus::NullPointer)
    } else {
        Ok(())
    }
}

unsafe fn field_from_raw(values: *const f64, n: usize, half_length: f64) -> Result<Field, DpStatus> {
    non_null(values)?;
    let grid = Grid::new(half_length, n).map_err(fail)?;
    let data = std::slice::from_raw_parts(values, n).to_vec();
    Field::new(&grid, data).map_err(fail)
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), DpStatus> {
    non_null(out)?;
    if len < src.len() {
        set_error(format!("buffer holds {len} values, {} needed", src.len()));
        return Err(DpStatus::BufferTooSmall);
    }
    ptr::copy_nonoverlapping(src.as_ptr(), out, src.len());
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dp_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(s) => s,
        Err(_) => c"unknown",
    };
    VERSION.as_ptr()
}

/// Copy the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dp_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Build the solitary wave of speed `c` on `[−L, L)` with `n` points.
///
/// # Safety
/// `out` must be valid for writing a pointer.
#[no_mangle]
pub unsafe extern "C" fn dp_wave_new(c: f64, k: f64, n: usize, half_length: f64, out: *mut *mut DpWave) -> DpStatus {
    guard(|| {
        non_null(out)?;
        let p = WaveParams::new(c, k).map_err(fail)?;
        let grid = Grid::new(half_length, n).map_err(fail)?;
        let wave = profile::build_profile(&p, &grid, profile::DEFAULT_TOL).map_err(fail)?;
        *out = Box::into_raw(Box::new(DpWave { wave }));
        Ok(())
    })
}

/// # Safety
/// `wave` must come from [`dp_wave_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dp_wave_free(wave: *mut DpWave) {
    if !wave.is_null() {
        drop(Box::from_raw(wave));
    }
}

/// # Safety
/// `wave` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dp_wave_len(wave: *const DpWave) -> usize {
    wave.as_ref().map_or(0, |w| w.wave.grid.len())
}

/// # Safety
/// `wave` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dp_wave_max_height(wave: *const DpWave, out: *mut f64) -> DpStatus {
    guard(|| {
        non_null(wave)?;
        non_null(out)?;
        *out = (*wave).wave.max_height;
        Ok(())
    })
}

/// Residual of the travelling-wave ODE on the grid.
///
/// # Safety
/// `wave` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dp_wave_residual(wave: *const DpWave, out: *mut f64) -> DpStatus {
    guard(|| {
        non_null(wave)?;
        non_null(out)?;
        *out = profile::residual_travel_ode(&(*wave).wave);
        Ok(())
    })
}

/// Copy grid points (`which = 0`), `φ` (1) or `φ_x` (2) into `out`.
///
/// # Safety
/// `wave` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dp_wave_copy(wave: *const DpWave, which: i32, out: *mut f64, len: usize) -> DpStatus {
    guard(|| {
        non_null(wave)?;
        let w = &(*wave).wave;
        match which {
            0 => copy_out(&w.grid.points(), out, len),
            1 => copy_out(w.phi.values(), out, len),
            2 => copy_out(w.phi_x.values(), out, len),
            _ => {
                set_error(format!("unknown field selector {which}"));
                Err(DpStatus::InvalidArgument)
            }
        }
    })
}

/// `S(u)` and `H(u)` of samples on `[−L, L)`.
///
/// # Safety
/// `values` must hold `n` doubles; `s_out`, `h_out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dp_functionals(
    values: *const f64,
    n: usize,
    half_length: f64,
    k: f64,
    s_out: *mut f64,
    h_out: *mut f64,
) -> DpStatus {
    guard(|| {
        non_null(s_out)?;
        non_null(h_out)?;
        let f = field_from_raw(values, n, half_length)?;
        *s_out = functional_s(&f);
        *h_out = functional_h(&f, k);
        Ok(())
    })
}

/// Evolve samples in place from `t = 0` to `t_end` with RK4 step `dt`.
///
/// # Safety
/// `values` must hold `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn dp_evolve(
    values: *mut f64,
    n: usize,
    half_length: f64,
    k: f64,
    dt: f64,
    t_end: f64,
) -> DpStatus {
    guard(|| {
        let u0 = field_from_raw(values, n, half_length)?;
        let cfg = EvolveConfig {
            dt,
            t_end,
            sample_every: usize::MAX,
            ..EvolveConfig::default()
        };
        let state = evolution::run(u0, k, &cfg).map_err(fail)?;
        if state.flags.halted {
            set_error(format!("solution became non-finite near t = {}", state.t));
            return Err(DpStatus::Numerical);
        }
        copy_out(state.u.values(), values, n)
    })
}

/// Orbital distance of samples (on the wave's grid) from the wave's orbit.
///
/// # Safety
/// `wave` must be a live handle, `values` must hold `n` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn dp_orbital_distance(
    wave: *const DpWave,
    values: *const f64,
    n: usize,
    out: *mut DpOrbital,
) -> DpStatus {
    guard(|| {
        non_null(wave)?;
        non_null(out)?;
        let w = &(*wave).wave;
        let u = field_from_raw(values, n, w.grid.half_length())?;
        let d = stability::orbital_distance(&u, w).map_err(fail)?;
        *out = DpOrbital {
            d2: d.d2,
            dinf: d.dinf,
            x0: d.x0,
        };
        Ok(())
    })
}

/// Roots `r1 < r2` of the stability certificate; [`DpStatus::NoRoots`] when
/// the polynomial never changes sign.
///
/// # Safety
/// `r1`, `r2` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dp_certificate(
    alpha: f64,
    beta: f64,
    gamma: f64,
    qbar: f64,
    r1: *mut f64,
    r2: *mut f64,
) -> DpStatus {
    guard(|| {
        non_null(r1)?;
        non_null(r2)?;
        match stability::stability_certificate(alpha, beta, gamma, qbar).map_err(fail)? {
            Some(roots) => {
                *r1 = roots.r1;
                *r2 = roots.r2;
                Ok(())
            }
            None => {
                set_error(format!("no sign change for Qbar = {qbar}"));
                Err(DpStatus::NoRoots)
            }
        }
    })
}

/// Assemble the dense linearized operator about `wave`.
///
/// # Safety
/// `wave` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_new(wave: *const DpWave, out: *mut *mut DpOperator) -> DpStatus {
    guard(|| {
        non_null(wave)?;
        non_null(out)?;
        let w = (*wave).wave.clone();
        let matrix = linops::assemble_lc(&w);
        *out = Box::into_raw(Box::new(DpOperator { wave: w, matrix }));
        Ok(())
    })
}

/// # Safety
/// `op` must come from [`dp_operator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_free(op: *mut DpOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_spectrum(op: *const DpOperator, out: *mut DpSpectrum) -> DpStatus {
    guard(|| {
        non_null(op)?;
        non_null(out)?;
        let o = &*op;
        let r = linops::spectrum_report(&o.matrix, &o.wave);
        *out = DpSpectrum {
            lambda_star: r.lambda_star,
            zero_eig: r.zero_eigenvalue,
            zero_cosine: r.zero_vector_correlation,
            positive_gap: r.positive_gap,
            continuum_edge: r.continuum_edge,
            negative_count: r.negative_count,
            zero_count: r.zero_count,
            classified: i32::from(r.classified),
        };
        Ok(())
    })
}

/// All eigenvalues in ascending order.
///
/// # Safety
/// `op` must be a live handle and `out` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_eigenvalues(op: *const DpOperator, out: *mut f64, len: usize) -> DpStatus {
    guard(|| {
        non_null(op)?;
        copy_out(&(*op).matrix.eigensystem().values, out, len)
    })
}

/// Constrained coercivity constant.
///
/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_alpha(op: *const DpOperator, out: *mut f64) -> DpStatus {
    guard(|| {
        non_null(op)?;
        non_null(out)?;
        let o = &*op;
        *out = linops::constrained_coercivity(&o.matrix, &o.wave);
        Ok(())
    })
}

/// `g(λ) = ((L_c − λ)⁻¹ψ̃, ψ̃)`.
///
/// # Safety
/// `op` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dp_operator_resolvent(op: *const DpOperator, lambda: f64, out: *mut f64) -> DpStatus {
    guard(|| {
        non_null(op)?;
        non_null(out)?;
        let o = &*op;
        *out = linops::resolvent_g(&o.matrix, &o.wave, lambda).map_err(fail)?;
        Ok(())
    })
}

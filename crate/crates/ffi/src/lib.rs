//! C ABI for `shdoa`.
//!
//! Every function returns a [`ShdoaStatus`]. On failure the message is kept
//! per thread and read with [`shdoa_last_error_message`]. Angles are radians,
//! matrices are column-major with one column per snapshot, and DOAs are
//! packed as `(θ, φ)` pairs. Handles are released with their `_free`
//! function; passing null to a `_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DMatrix;

use shdoa::crb::crb_for_scene;
use shdoa::estimators::{
    estimate_em, estimate_uniform_ml, music_estimate, EstimationResult, EstimatorConfig, MusicConfig,
};
use shdoa::scene::{synth_hoa_direct, synth_source_signals, HoaSignal, NoiseSpec, Scene, SignalKind};
use shdoa::sh::{sph_harm_vector, Direction, ShBasis};
use shdoa::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShdoaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    DimensionMismatch = 4,
    RankDeficient = 5,
    Singular = 6,
    Conditioning = 7,
    Domain = 8,
    Internal = 9,
}

/// Source waveform family for [`shdoa_synth_direct`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShdoaSignalKind {
    Gaussian = 0,
    Constant = 1,
    SinusoidBank = 2,
}

/// Estimator selector for [`shdoa_estimate`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShdoaEstimator {
    Em = 0,
    UniformMl = 1,
    Music = 2,
}

/// HOA observation `b(t)`, `P × Ns`.
pub struct ShdoaHoa(HoaSignal);

/// Output of [`shdoa_estimate`].
pub struct ShdoaEstimate(EstimationResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ShdoaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Domain(_) | Error::Pole { .. } => ShdoaStatus::Domain,
            Error::Conditioning { .. } => ShdoaStatus::Conditioning,
            Error::RankDeficient { .. } => ShdoaStatus::RankDeficient,
            Error::DimensionMismatch(_) => ShdoaStatus::DimensionMismatch,
            Error::Singular { .. } => ShdoaStatus::Singular,
            _ => ShdoaStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: ShdoaStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ShdoaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            ShdoaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            ShdoaStatus::Internal
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(ShdoaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, need: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len < need {
        return Err(fail(
            ShdoaStatus::BufferTooSmall,
            format!("{what} holds {len} values, {need} needed"),
        ));
    }
    if need == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(ShdoaStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(ShdoaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(ShdoaStatus::NullPointer, format!("{what} is null")))
}

fn directions(pairs: &[f64]) -> Result<Vec<Direction>, Failure> {
    if !pairs.len().is_multiple_of(2) || pairs.iter().any(|v| !v.is_finite()) {
        return Err(fail(ShdoaStatus::InvalidArgument, "DOAs must be finite (θ, φ) pairs"));
    }
    Ok(pairs.chunks(2).map(|c| Direction::from_unbounded(c[0], c[1])).collect())
}

fn noise_spec(q: &[f64], basis: ShBasis) -> Result<NoiseSpec, Failure> {
    let spec = match q.len() {
        1 => NoiseSpec::Uniform { sigma2: q[0] },
        n if n == basis.dim() => NoiseSpec::Diagonal { q: q.to_vec() },
        n => {
            return Err(fail(
                ShdoaStatus::DimensionMismatch,
                format!("noise needs 1 or {} variances, got {n}", basis.dim()),
            ))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn shdoa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Real SH vector `y(θ, φ)` of order `order` into `out[0..(order+1)²]`.
///
/// # Safety
/// `out` must point to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn shdoa_sph_harm_vector(
    order: usize,
    theta: f64,
    phi: f64,
    out: *mut f64,
    out_len: usize,
) -> ShdoaStatus {
    guard(|| {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(fail(ShdoaStatus::InvalidArgument, "angles must be finite"));
        }
        let basis = ShBasis::new(order);
        let out = out_slice(out, out_len, basis.dim(), "out")?;
        let y = sph_harm_vector(basis, Direction::from_unbounded(theta, phi));
        out[..y.len()].copy_from_slice(&y);
        Ok(())
    })
}

/// Wraps caller-provided frames (`(order+1)² × num_snapshots`, column-major).
///
/// # Safety
/// `frames` must point to `dim * num_snapshots` doubles; `out` to a writable
/// handle slot.
#[no_mangle]
pub unsafe extern "C" fn shdoa_hoa_from_frames(
    order: usize,
    frames: *const f64,
    num_snapshots: usize,
    out: *mut *mut ShdoaHoa,
) -> ShdoaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let basis = ShBasis::new(order);
        let data = slice(frames, basis.dim() * num_snapshots, "frames")?;
        let m = DMatrix::from_column_slice(basis.dim(), num_snapshots, data);
        *out = Box::into_raw(Box::new(ShdoaHoa(HoaSignal::new(m, basis)?)));
        Ok(())
    })
}

/// Direct SH-domain synthesis `b = Y(Ψ)ᵀ s + z`.
///
/// `noise` holds either one variance (uniform) or `(order+1)²` variances
/// (diagonal).
///
/// # Safety
/// `doas` must point to `2 * num_sources` doubles, `noise` to `noise_len`
/// doubles, `out` to a writable handle slot.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn shdoa_synth_direct(
    order: usize,
    doas: *const f64,
    num_sources: usize,
    num_snapshots: usize,
    signal: ShdoaSignalKind,
    noise: *const f64,
    noise_len: usize,
    seed: u64,
    out: *mut *mut ShdoaHoa,
) -> ShdoaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let basis = ShBasis::new(order);
        let doas = directions(slice(doas, 2 * num_sources, "doas")?)?;
        let noise = noise_spec(slice(noise, noise_len, "noise")?, basis)?;
        let kind = match signal {
            ShdoaSignalKind::Gaussian => SignalKind::Gaussian,
            ShdoaSignalKind::Constant => SignalKind::Constant,
            ShdoaSignalKind::SinusoidBank => SignalKind::SinusoidBank,
        };
        let s = synth_source_signals(num_sources, num_snapshots, kind, seed)?;
        let scene = Scene::new(doas, 1.0, s, seed)?;
        *out = Box::into_raw(Box::new(ShdoaHoa(synth_hoa_direct(&scene, basis, &noise)?)));
        Ok(())
    })
}

/// Dimension `P` and snapshot count of an observation.
///
/// # Safety
/// `hoa` must be a live handle; `dim` and `num_snapshots` writable.
#[no_mangle]
pub unsafe extern "C" fn shdoa_hoa_shape(
    hoa: *const ShdoaHoa,
    dim: *mut usize,
    num_snapshots: *mut usize,
) -> ShdoaStatus {
    guard(|| {
        let h = handle(hoa, "hoa")?;
        *out_ref(dim, "dim")? = h.0.dim();
        *out_ref(num_snapshots, "num_snapshots")? = h.0.num_snapshots();
        Ok(())
    })
}

/// Copies the frames, column-major, into `out`.
///
/// # Safety
/// `hoa` must be a live handle; `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shdoa_hoa_frames(hoa: *const ShdoaHoa, out: *mut f64, out_len: usize) -> ShdoaStatus {
    guard(|| {
        let h = handle(hoa, "hoa")?;
        let data = h.0.frames.as_slice();
        let out = out_slice(out, out_len, data.len(), "out")?;
        out[..data.len()].copy_from_slice(data);
        Ok(())
    })
}

/// # Safety
/// `hoa` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shdoa_hoa_free(hoa: *mut ShdoaHoa) {
    if !hoa.is_null() {
        drop(Box::from_raw(hoa));
    }
}

/// Runs one estimator with default settings for `num_sources` sources.
///
/// # Safety
/// `hoa` must be a live handle; `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn shdoa_estimate(
    hoa: *const ShdoaHoa,
    estimator: ShdoaEstimator,
    num_sources: usize,
    out: *mut *mut ShdoaEstimate,
) -> ShdoaStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let b = &handle(hoa, "hoa")?.0;
        let cfg = EstimatorConfig::default();
        let r = match estimator {
            ShdoaEstimator::Em => estimate_em(b, num_sources, &cfg)?,
            ShdoaEstimator::UniformMl => estimate_uniform_ml(b, num_sources, &cfg)?,
            ShdoaEstimator::Music => music_estimate(b, num_sources, &MusicConfig::default())?,
        };
        *out = Box::into_raw(Box::new(ShdoaEstimate(r)));
        Ok(())
    })
}

/// Number of estimated sources.
///
/// # Safety
/// `est` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn shdoa_estimate_num_sources(est: *const ShdoaEstimate, out: *mut usize) -> ShdoaStatus {
    guard(|| {
        *out_ref(out, "out")? = handle(est, "est")?.0.doas.len();
        Ok(())
    })
}

/// Estimated DOAs as `(θ, φ)` pairs.
///
/// # Safety
/// `est` must be a live handle; `out` must point to `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn shdoa_estimate_doas(est: *const ShdoaEstimate, out: *mut f64, out_len: usize) -> ShdoaStatus {
    guard(|| {
        let r = &handle(est, "est")?.0;
        let out = out_slice(out, out_len, 2 * r.doas.len(), "out")?;
        for (i, d) in r.doas.iter().enumerate() {
            out[2 * i] = d.theta;
            out[2 * i + 1] = d.phi;
        }
        Ok(())
    })
}

/// Iteration count and convergence flag.
///
/// # Safety
/// `est` must be a live handle; `iterations` and `converged` writable.
#[no_mangle]
pub unsafe extern "C" fn shdoa_estimate_status(
    est: *const ShdoaEstimate,
    iterations: *mut usize,
    converged: *mut bool,
) -> ShdoaStatus {
    guard(|| {
        let r = &handle(est, "est")?.0;
        *out_ref(iterations, "iterations")? = r.iterations_used;
        *out_ref(converged, "converged")? = r.converged;
        Ok(())
    })
}

/// Copies the objective trace. `written` receives its full length, so a call
/// with `out_len = 0` queries the size.
///
/// # Safety
/// `est` must be a live handle; `out` must point to `out_len` doubles and
/// `written` be writable.
#[no_mangle]
pub unsafe extern "C" fn shdoa_estimate_objective_trace(
    est: *const ShdoaEstimate,
    out: *mut f64,
    out_len: usize,
    written: *mut usize,
) -> ShdoaStatus {
    guard(|| {
        let r = &handle(est, "est")?.0;
        let trace = &r.objective_trace;
        *out_ref(written, "written")? = trace.len();
        if out_len == 0 {
            return Ok(());
        }
        let out = out_slice(out, out_len, trace.len(), "out")?;
        out[..trace.len()].copy_from_slice(trace);
        Ok(())
    })
}

/// # Safety
/// `est` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn shdoa_estimate_free(est: *mut ShdoaEstimate) {
    if !est.is_null() {
        drop(Box::from_raw(est));
    }
}

/// Deterministic CRB in rad² per source and axis.
///
/// `signals` is `num_sources × num_snapshots`, column-major; `noise` holds
/// one variance or `(order+1)²` variances.
///
/// # Safety
/// Pointers must cover the stated lengths; `theta_bounds` and `phi_bounds`
/// must point to `num_sources` writable doubles each.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn shdoa_crb(
    order: usize,
    doas: *const f64,
    num_sources: usize,
    signals: *const f64,
    num_snapshots: usize,
    noise: *const f64,
    noise_len: usize,
    theta_bounds: *mut f64,
    phi_bounds: *mut f64,
) -> ShdoaStatus {
    guard(|| {
        let basis = ShBasis::new(order);
        let doas = directions(slice(doas, 2 * num_sources, "doas")?)?;
        let s = slice(signals, num_sources * num_snapshots, "signals")?;
        let noise = noise_spec(slice(noise, noise_len, "noise")?, basis)?;
        let scene = Scene::new(doas, 1.0, DMatrix::from_column_slice(num_sources, num_snapshots, s), 0)?;
        let r = crb_for_scene(&scene, &noise, basis)?;
        out_slice(theta_bounds, num_sources, num_sources, "theta_bounds")?.copy_from_slice(&r.theta_bounds);
        out_slice(phi_bounds, num_sources, num_sources, "phi_bounds")?.copy_from_slice(&r.phi_bounds);
        Ok(())
    })
}

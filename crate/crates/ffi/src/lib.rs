//! C ABI over landau-core.
//!
//! Objects are opaque heap handles created by `*_new` style functions and
//! released with the matching `*_free`. Every fallible call returns a
//! `LandauStatus`; on failure the message is kept per thread and can be read
//! with `landau_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use landau_core::error::Error;
use landau_core::field_model::{FieldWaveform, PhysicalSystem, UnitSystem};
use landau_core::path_integrals::QuadratureOptions;
use landau_core::propagator::{self, FactorizedPropagator};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandauStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Accuracy = 4,
    Truncation = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandauUnits {
    Si = 0,
    Gaussian = 1,
    Natural = 2,
}

impl From<LandauUnits> for UnitSystem {
    fn from(u: LandauUnits) -> Self {
        match u {
            LandauUnits::Si => UnitSystem::Si,
            LandauUnits::Gaussian => UnitSystem::Gaussian,
            LandauUnits::Natural => UnitSystem::Natural,
        }
    }
}

/// Charged particle in a uniform magnetic field.
pub struct LandauSystem(PhysicalSystem);

/// In-plane electric field waveform.
pub struct LandauWaveform(FieldWaveform);

/// Factorized evolution operator at one time.
pub struct LandauPropagator(FactorizedPropagator);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> LandauStatus {
    match e {
        Error::Domain { .. } => LandauStatus::Domain,
        Error::Accuracy { .. } => LandauStatus::Accuracy,
        Error::Truncation { .. } => LandauStatus::Truncation,
        _ => LandauStatus::InvalidArgument,
    }
}

fn guard<F: FnOnce() -> Result<(), LandauStatus>>(f: F) -> LandauStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LandauStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            LandauStatus::Panic
        }
    }
}

fn fail(e: Error) -> LandauStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> LandauStatus {
    set_error(format!("null pointer: {what}"));
    LandauStatus::NullPointer
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, LandauStatus> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), LandauStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), LandauStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length without
/// the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn landau_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Charge, field and mass in the units of `units`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn landau_system_new(
    charge: f64,
    magnetic_field: f64,
    mass: f64,
    units: LandauUnits,
    out: *mut *mut LandauSystem,
) -> LandauStatus {
    guard(|| {
        let sys = PhysicalSystem::new(charge, magnetic_field, mass, units.into()).map_err(fail)?;
        put(out, LandauSystem(sys))
    })
}

/// Electron in `field_tesla`, SI units.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn landau_system_electron_si(field_tesla: f64, out: *mut *mut LandauSystem) -> LandauStatus {
    guard(|| {
        let sys = PhysicalSystem::electron_si(field_tesla).map_err(fail)?;
        put(out, LandauSystem(sys))
    })
}

/// # Safety
/// `sys` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn landau_system_free(sys: *mut LandauSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Writes ω, l_B and k.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn landau_system_scales(
    sys: *const LandauSystem,
    omega: *mut f64,
    magnetic_length: *mut f64,
    ladder_scale: *mut f64,
) -> LandauStatus {
    guard(|| {
        let s = &get(sys, "sys")?.0;
        write(omega, s.cyclotron_frequency())?;
        write(magnetic_length, s.magnetic_length())?;
        write(ladder_scale, s.ladder_scale())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn landau_waveform_constant(e1: f64, e2: f64, out: *mut *mut LandauWaveform) -> LandauStatus {
    guard(|| {
        let w = FieldWaveform::Constant { e1, e2 };
        w.validate().map_err(fail)?;
        put(out, LandauWaveform(w))
    })
}

/// E(t) = E0·e^{i(φ − νt)}.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn landau_waveform_rotating(
    amplitude: f64,
    frequency: f64,
    phase: f64,
    out: *mut *mut LandauWaveform,
) -> LandauStatus {
    guard(|| {
        let w = FieldWaveform::Rotating { amplitude, frequency, phase };
        w.validate().map_err(fail)?;
        put(out, LandauWaveform(w))
    })
}

/// Piecewise-linear field through `len` samples (t, E1, E2).
///
/// # Safety
/// The three arrays must each hold `len` values; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn landau_waveform_sampled(
    times: *const f64,
    e1: *const f64,
    e2: *const f64,
    len: usize,
    out: *mut *mut LandauWaveform,
) -> LandauStatus {
    guard(|| {
        if times.is_null() || e1.is_null() || e2.is_null() {
            return Err(null("samples"));
        }
        let (t, a, b) = (
            std::slice::from_raw_parts(times, len),
            std::slice::from_raw_parts(e1, len),
            std::slice::from_raw_parts(e2, len),
        );
        let samples = (0..len).map(|j| [t[j], a[j], b[j]]).collect();
        let w = FieldWaveform::sampled(samples).map_err(fail)?;
        put(out, LandauWaveform(w))
    })
}

/// Any waveform from its JSON description, e.g.
/// `{"type": "linear_sinusoid", "amplitude": 1, "direction": 0, "frequency": 2}`.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn landau_waveform_from_json(json: *const c_char, out: *mut *mut LandauWaveform) -> LandauStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| fail(Error::InvalidArgument(e.to_string())))?;
        let w: FieldWaveform =
            serde_json::from_str(text).map_err(|e| fail(Error::InvalidWaveform(e.to_string())))?;
        w.validate().map_err(fail)?;
        put(out, LandauWaveform(w))
    })
}

/// # Safety
/// `w` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn landau_waveform_free(w: *mut LandauWaveform) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// U(t, 0) with a Fock space of `truncation` states (0 picks the default).
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn landau_propagator_assemble(
    sys: *const LandauSystem,
    w: *const LandauWaveform,
    t: f64,
    truncation: usize,
    out: *mut *mut LandauPropagator,
) -> LandauStatus {
    guard(|| {
        let s = &get(sys, "sys")?.0;
        let wave = &get(w, "waveform")?.0;
        let n = (truncation > 0).then_some(truncation);
        let p = propagator::assemble(s, wave, t, n, &QuadratureOptions::default()).map_err(fail)?;
        put(out, LandauPropagator(p))
    })
}

/// # Safety
/// `p` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn landau_propagator_free(p: *mut LandauPropagator) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Fock-space dimension, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or valid.
#[no_mangle]
pub unsafe extern "C" fn landau_propagator_dimension(p: *const LandauPropagator) -> usize {
    p.as_ref().map_or(0, |p| p.0.dimension())
}

/// Writes R, β, u and γ (complex values as re/im pairs).
///
/// # Safety
/// `p` and `out` must be valid; `out` holds 6 doubles
/// [R_re, R_im, β, u_re, u_im, γ].
#[no_mangle]
pub unsafe extern "C" fn landau_propagator_parameters(p: *const LandauPropagator, out: *mut f64) -> LandauStatus {
    guard(|| {
        let p = &get(p, "propagator")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let (r, u) = (p.displacement(), p.amplitude());
        let values = [r.re, r.im, p.magnetic_phase(), u.re, u.im, p.coherent_phase()];
        ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
        Ok(())
    })
}

/// ⟨m|J|n⟩ including the e^{iγ} phase.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn landau_propagator_j_element(
    p: *const LandauPropagator,
    m: usize,
    n: usize,
    re: *mut f64,
    im: *mut f64,
) -> LandauStatus {
    guard(|| {
        let p = &get(p, "propagator")?.0;
        let z = propagator::j_matrix_element(p, m, n).map_err(fail)?;
        write(re, z.re)?;
        write(im, z.im)
    })
}

/// P(n → m) for m = 0..dimension−1.
///
/// # Safety
/// `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn landau_propagator_transitions(
    p: *const LandauPropagator,
    n: usize,
    out: *mut f64,
    len: usize,
) -> LandauStatus {
    guard(|| {
        let p = &get(p, "propagator")?.0;
        let probs = propagator::transition_probabilities(p, n).map_err(fail)?;
        if out.is_null() {
            return Err(null("out"));
        }
        if len < probs.len() {
            set_error(format!("buffer holds {len} values, {} needed", probs.len()));
            return Err(LandauStatus::BufferTooSmall);
        }
        ptr::copy_nonoverlapping(probs.as_ptr(), out, probs.len());
        Ok(())
    })
}

/// Ground-state survival e^{−|uk|²} for a resonant rotating field.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn landau_resonance_survival(
    sys: *const LandauSystem,
    amplitude: f64,
    t: f64,
    out: *mut f64,
) -> LandauStatus {
    guard(|| {
        let s = &get(sys, "sys")?.0;
        let r = propagator::resonance_survival(s, amplitude, t).map_err(fail)?;
        write(out, r.survival)
    })
}

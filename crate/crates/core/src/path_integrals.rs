//! Displacement amplitude u(t), the phases β(C_R) and γ(C_u), and the signed
//! areas they are proportional to.
//!
//! Tone waveforms (zero, constant, rotating, linear sinusoid and sums of
//! these) use closed forms. Anything with a sampled component goes through
//! panel quadrature: every panel is no wider than a quarter oscillation of the
//! e^{−iωs} kernel, the path increment comes from adaptive Gauss–Kronrod and
//! the area is the polyline shoelace over panel endpoints plus the exact
//! arc-versus-chord correction of each panel (a nested quadrature).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_model::{eval_field, exp_integral, internal_path, FieldWaveform, PhysicalSystem};
use crate::quadrature::{self, Integral};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureOptions {
    /// Absolute tolerance in internal units.
    pub abs_tol: f64,
    /// Use quadrature even where a closed form exists.
    pub force_quadrature: bool,
    pub max_depth: u32,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, force_quadrature: false, max_depth: 30 }
    }
}

impl QuadratureOptions {
    pub fn forced() -> Self {
        Self { force_quadrature: true, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    /// Exact integration of a piecewise-linear interpolant.
    PiecewiseExact,
    Quadrature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub path: Method,
    pub amplitude: Method,
    pub magnetic_phase: Method,
    pub coherent_phase: Method,
}

/// R, u, β, γ and the signed areas S_R, S_u sampled on a time grid, all in
/// user units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrivePath {
    pub times: Vec<f64>,
    pub path: Vec<Complex64>,
    pub amplitude: Vec<Complex64>,
    pub magnetic_phase: Vec<f64>,
    pub coherent_phase: Vec<f64>,
    pub path_area: Vec<f64>,
    pub amplitude_area: Vec<f64>,
    pub provenance: Provenance,
}

impl DrivePath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A waveform converted to internal units together with its tone expansion.
pub(crate) struct Drive {
    pub wave: FieldWaveform,
    tones: Option<Vec<crate::field_model::Tone>>,
}

impl Drive {
    pub fn new(sys: &PhysicalSystem, w: &FieldWaveform) -> Result<Self> {
        w.validate()?;
        let wave = w.to_internal(sys);
        let tones = wave.tones();
        Ok(Self { wave, tones })
    }

    pub fn check_span(&self, tau: f64) -> Result<()> {
        self.wave.check_domain(0.0)?;
        self.wave.check_domain(tau)
    }

    pub fn field(&self, tau: f64) -> Complex64 {
        eval_field(&self.wave, tau).expect("time checked against domain")
    }

    pub fn path_rate(&self, tau: f64) -> Complex64 {
        Complex64::new(0.0, -1.0) * self.field(tau)
    }

    /// du/dτ = (i/2)e^{−iτ}dR*/dτ = −½e^{−iτ}E*(τ).
    pub fn amplitude_rate(&self, tau: f64) -> Complex64 {
        -0.5 * Complex64::from_polar(1.0, -tau) * self.field(tau).conj()
    }

    fn path_terms(&self) -> Option<Vec<(Complex64, f64)>> {
        let minus_i = Complex64::new(0.0, -1.0);
        self.tones
            .as_ref()
            .map(|t| t.iter().map(|tone| (minus_i * tone.amplitude, -tone.frequency)).collect())
    }

    fn amplitude_terms(&self) -> Option<Vec<(Complex64, f64)>> {
        self.tones
            .as_ref()
            .map(|t| t.iter().map(|tone| (-0.5 * tone.amplitude.conj(), tone.frequency - 1.0)).collect())
    }

    fn max_width(&self) -> f64 {
        PI / (4.0 * (1.0 + self.wave.max_frequency()))
    }

    fn breaks(&self) -> Vec<f64> {
        self.wave.breakpoints()
    }

    pub fn is_tonal(&self) -> bool {
        self.tones.is_some()
    }
}

/// ∫₀^τ ∫₀^s e^{i(a s + b r)} dr ds.
fn double_exp_integral(a: f64, b: f64, tau: f64) -> Complex64 {
    if a.abs().max(b.abs()) * tau <= 0.5 {
        let ia = Complex64::new(0.0, a * tau);
        let ib = Complex64::new(0.0, b * tau);
        let mut total = Complex64::new(0.0, 0.0);
        let mut pa = Complex64::new(1.0, 0.0);
        for m in 0..24 {
            let mut pb = Complex64::new(1.0, 0.0);
            for n in 0..24 - m {
                total += pa * pb / ((n + 1) as f64 * (m + n + 2) as f64);
                pb *= ib / (n + 1) as f64;
            }
            pa *= ia / (m + 1) as f64;
        }
        return total * tau * tau;
    }
    let e = |l: f64| exp_integral(l, tau);
    if b.abs() >= a.abs() {
        (e(a + b) - e(a)) / Complex64::new(0.0, b)
    } else {
        e(a) * e(b) - (e(a + b) - e(b)) / Complex64::new(0.0, a)
    }
}

/// Value of p(τ) = Σ c_j ∫₀^τ e^{iλ_j s} ds.
fn tone_value(terms: &[(Complex64, f64)], tau: f64) -> Complex64 {
    terms.iter().map(|&(c, l)| c * exp_integral(l, tau)).sum()
}

/// Signed area ½∫ Im(p* dp) swept by the tone path p, chord closure included
/// (the chord back to the origin sweeps no area).
fn tone_area(terms: &[(Complex64, f64)], tau: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &(cj, lj) in terms {
        for &(ck, lk) in terms {
            acc += cj.conj() * ck * double_exp_integral(lk, -lj, tau);
        }
    }
    0.5 * acc.im
}

struct Accumulated {
    values: Vec<Complex64>,
    areas: Vec<f64>,
}

fn accuracy(what: &str, r: &Integral, requested: f64) -> Error {
    Error::Accuracy { what: what.into(), achieved: r.error, requested }
}

/// Integrates `rate` from 0 over `grid` (internal time), returning the path
/// value and swept signed area at each grid point.
fn accumulate<F: Fn(f64) -> Complex64>(
    rate: F,
    grid: &[f64],
    breaks: &[f64],
    max_width: f64,
    opts: &QuadratureOptions,
    what: &str,
) -> Result<Accumulated> {
    let end = *grid.last().unwrap();
    let mut values = vec![Complex64::new(0.0, 0.0)];
    let mut areas = vec![0.0];
    if end <= 0.0 {
        return Ok(Accumulated { values, areas });
    }
    let mut all_breaks: Vec<f64> = grid.to_vec();
    all_breaks.extend_from_slice(breaks);
    all_breaks.sort_by(f64::total_cmp);
    let panels = quadrature::panels(0.0, end, &all_breaks, max_width);

    let mut value = Complex64::new(0.0, 0.0);
    let mut area = 0.0;
    let mut next = 1;
    let mut f = |s: f64| rate(s);
    for (a, b) in panels {
        let share = opts.abs_tol * (b - a) / end;
        let delta = quadrature::adaptive(&mut f, a, b, share, opts.max_depth);
        if !delta.converged {
            return Err(accuracy(what, &delta, share));
        }
        let mut inner_failure: Option<Integral> = None;
        let mut lens_integrand = |s: f64| {
            if s <= a {
                return Complex64::new(0.0, 0.0);
            }
            let mut g = |x: f64| rate(x);
            let partial = quadrature::adaptive(&mut g, a, s, 0.1 * share, opts.max_depth);
            if !partial.converged {
                inner_failure = Some(partial);
            }
            Complex64::new(0.5 * (partial.value.conj() * rate(s)).im, 0.0)
        };
        let lens = quadrature::adaptive(&mut lens_integrand, a, b, share, opts.max_depth);
        if let Some(r) = inner_failure {
            return Err(accuracy(what, &r, 0.1 * share));
        }
        if !lens.converged {
            return Err(accuracy(what, &lens, share));
        }
        area += 0.5 * (value.conj() * delta.value).im + lens.value.re;
        value += delta.value;
        while next < grid.len() && grid[next] <= b {
            values.push(value);
            areas.push(area);
            next += 1;
        }
    }
    while values.len() < grid.len() {
        values.push(value);
        areas.push(area);
    }
    Ok(Accumulated { values, areas })
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("time grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Internal-unit results on an internal-time grid.
pub(crate) struct InternalPath {
    pub path: Vec<Complex64>,
    pub amplitude: Vec<Complex64>,
    pub path_area: Vec<f64>,
    pub amplitude_area: Vec<f64>,
    pub provenance: Provenance,
}

pub(crate) fn internal_drive_path(drive: &Drive, grid: &[f64], opts: &QuadratureOptions) -> Result<InternalPath> {
    let end = *grid.last().unwrap();
    drive.check_span(end)?;
    let path = grid
        .iter()
        .map(|&tau| internal_path(&drive.wave, tau))
        .collect::<Result<Vec<_>>>()?;
    let path_method = if drive.is_tonal() { Method::ClosedForm } else { Method::PiecewiseExact };

    let closed = if opts.force_quadrature {
        None
    } else {
        drive.path_terms().zip(drive.amplitude_terms())
    };
    if let Some((rterms, uterms)) = closed {
        let amplitude = grid.iter().map(|&t| tone_value(&uterms, t)).collect();
        let path_area = grid.iter().map(|&t| tone_area(&rterms, t)).collect();
        let amplitude_area = grid.iter().map(|&t| tone_area(&uterms, t)).collect();
        return Ok(InternalPath {
            path,
            amplitude,
            path_area,
            amplitude_area,
            provenance: Provenance {
                path: path_method,
                amplitude: Method::ClosedForm,
                magnetic_phase: Method::ClosedForm,
                coherent_phase: Method::ClosedForm,
            },
        });
    }

    let breaks = drive.breaks();
    let width = drive.max_width();
    let r = accumulate(|s| drive.path_rate(s), grid, &breaks, width, opts, "magnetic phase")?;
    let u = accumulate(|s| drive.amplitude_rate(s), grid, &breaks, width, opts, "displacement amplitude")?;
    Ok(InternalPath {
        path,
        amplitude: u.values,
        path_area: r.areas,
        amplitude_area: u.areas,
        provenance: Provenance {
            path: path_method,
            amplitude: Method::Quadrature,
            magnetic_phase: Method::Quadrature,
            coherent_phase: Method::Quadrature,
        },
    })
}

/// R, u, β, γ and areas on `t_grid` (user time, strictly increasing from 0).
pub fn build_drive_path(
    sys: &PhysicalSystem,
    w: &FieldWaveform,
    t_grid: &[f64],
    opts: &QuadratureOptions,
) -> Result<DrivePath> {
    check_grid(t_grid)?;
    let drive = Drive::new(sys, w)?;
    let grid: Vec<f64> = t_grid.iter().map(|&t| sys.to_internal_time(t)).collect();
    let p = internal_drive_path(&drive, &grid, opts)?;
    Ok(DrivePath {
        times: t_grid.to_vec(),
        path: p.path.iter().map(|&z| sys.from_internal_length(z)).collect(),
        amplitude: p.amplitude.iter().map(|&z| sys.from_internal_length(z)).collect(),
        // qB/ħc = 1 internally
        magnetic_phase: p.path_area.iter().map(|&s| -s).collect(),
        coherent_phase: p.amplitude_area.iter().map(|&s| -4.0 * s).collect(),
        path_area: p.path_area.iter().map(|&s| sys.from_internal_area(s)).collect(),
        amplitude_area: p.amplitude_area.iter().map(|&s| sys.from_internal_area(s)).collect(),
        provenance: p.provenance,
    })
}

fn endpoint(sys: &PhysicalSystem, w: &FieldWaveform, t: f64, opts: &QuadratureOptions) -> Result<DrivePath> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("time must be finite and non-negative, got {t}")));
    }
    let grid: Vec<f64> = if t == 0.0 { vec![0.0] } else { vec![0.0, t] };
    build_drive_path(sys, w, &grid, opts)
}

/// u(t) = (i/2)∫₀ᵗ e^{−iωs} dR*/ds ds, in user length units.
pub fn displacement_amplitude(
    sys: &PhysicalSystem,
    w: &FieldWaveform,
    t: f64,
    opts: &QuadratureOptions,
) -> Result<Complex64> {
    Ok(*endpoint(sys, w, t, opts)?.amplitude.last().unwrap())
}

/// β(C_R) = −(qB/ħc)·S_R for the guiding-center path up to `t`.
pub fn magnetic_phase(sys: &PhysicalSystem, w: &FieldWaveform, t: f64, opts: &QuadratureOptions) -> Result<f64> {
    Ok(*endpoint(sys, w, t, opts)?.magnetic_phase.last().unwrap())
}

/// γ(C_u) = −(qB/ħc)·4S_u for the amplitude path up to `t`.
pub fn coherent_phase(sys: &PhysicalSystem, w: &FieldWaveform, t: f64, opts: &QuadratureOptions) -> Result<f64> {
    Ok(*endpoint(sys, w, t, opts)?.coherent_phase.last().unwrap())
}

/// Shoelace area of the polyline through `points` closed by the chord from the
/// last point back to the first; positive for counterclockwise traversal.
pub fn signed_area(points: &[Complex64]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let n = points.len();
    let origin = points[0];
    let mut acc = 0.0;
    for j in 0..n {
        let p = points[j] - origin;
        let q = points[(j + 1) % n] - origin;
        acc += p.re * q.im - p.im * q.re;
    }
    0.5 * acc
}

/// β for an explicit polyline of guiding-center positions (user units),
/// starting at the origin.
pub fn magnetic_phase_of_path(sys: &PhysicalSystem, points: &[Complex64]) -> f64 {
    -sys.flux_coupling() * signed_area(points)
}

/// γ for an explicit polyline of displacement amplitudes (user units).
pub fn coherent_phase_of_path(sys: &PhysicalSystem, points: &[Complex64]) -> f64 {
    -4.0 * sys.flux_coupling() * signed_area(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field_model::UnitSystem;

    fn nat() -> PhysicalSystem {
        PhysicalSystem::natural()
    }

    #[test]
    fn signed_area_examples() {
        let square = [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 1.0),
            Complex64::new(0.0, 1.0),
        ];
        assert!((signed_area(&square) - 1.0).abs() < 1e-15);
        let line: Vec<_> = (0..5).map(|j| Complex64::new(j as f64, 2.0 * j as f64)).collect();
        assert_eq!(signed_area(&line), 0.0);
        assert_eq!(signed_area(&[Complex64::new(1.0, 1.0)]), 0.0);
        let n = 10_000;
        let circle: Vec<_> = (0..n)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))
            .collect();
        assert!((signed_area(&circle) - PI).abs() < 1e-6);
    }

    #[test]
    fn double_exp_integral_branches_agree_with_quadrature() {
        for &(a, b, tau) in &[(0.3, -0.2, 1.0), (0.01, 2.0, 5.0), (2.0, 0.01, 5.0), (-1.3, 1.3, 7.0), (0.0, 0.0, 3.0)] {
            let mut total = Complex64::new(0.0, 0.0);
            for (lo, hi) in quadrature::panels(0.0, tau, &[], 0.25) {
                let mut outer = |s: f64| {
                    let mut inner = |r: f64| Complex64::from_polar(1.0, b * r);
                    let i = quadrature::adaptive(&mut inner, 0.0, s, 1e-15, 20).value;
                    Complex64::from_polar(1.0, a * s) * i
                };
                total += quadrature::adaptive(&mut outer, lo, hi, 1e-15, 20).value;
            }
            let q = double_exp_integral(a, b, tau);
            assert!((q - total).norm() < 1e-12, "a={a} b={b}: {q} vs {total}");
        }
    }

    #[test]
    fn zero_field_path_is_zero() {
        let grid: Vec<f64> = (0..20).map(|j| 0.5 * j as f64).collect();
        for opts in [QuadratureOptions::default(), QuadratureOptions::forced()] {
            let p = build_drive_path(&nat(), &FieldWaveform::Zero, &grid, &opts).unwrap();
            assert!(p.path.iter().chain(&p.amplitude).all(|z| z.norm() == 0.0));
            assert!(p.magnetic_phase.iter().chain(&p.coherent_phase).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn rotating_closed_forms() {
        let sys = nat();
        let (e0, nu) = (0.6, 0.4);
        let w = FieldWaveform::rotating(e0, nu);
        let r0 = e0 / nu;
        let opts = QuadratureOptions::default();
        for t in [0.3, 2.0, 11.0, 37.5] {
            let u = displacement_amplitude(&sys, &w, t, &opts).unwrap();
            let d = nu - 1.0;
            let expected = Complex64::new(-r0 * nu / 2.0, 0.0) * (Complex64::from_polar(1.0, d * t) - 1.0)
                / Complex64::new(0.0, d);
            assert!((u - expected).norm() < 1e-13);
            let beta = magnetic_phase(&sys, &w, t, &opts).unwrap();
            let beta_ref = 0.5 * r0 * r0 * (nu * t - (nu * t).sin());
            assert!((beta - beta_ref).abs() < 1e-12 * beta_ref.abs().max(1.0));
            let gamma = coherent_phase(&sys, &w, t, &opts).unwrap();
            let wd = 1.0 - nu;
            let gamma_ref = 0.5 * r0 * r0 * (nu / wd).powi(2) * (wd * t - (wd * t).sin());
            assert!((gamma - gamma_ref).abs() < 1e-12 * gamma_ref.abs().max(1.0));
        }
    }

    #[test]
    fn resonance_is_straight() {
        let sys = nat();
        let w = FieldWaveform::rotating(0.2, 1.0);
        for opts in [QuadratureOptions::default(), QuadratureOptions::forced()] {
            let u = displacement_amplitude(&sys, &w, 12.0, &opts).unwrap();
            assert!((u - Complex64::new(-0.2 * 12.0 / 2.0, 0.0)).norm() < 1e-12);
            assert!(coherent_phase(&sys, &w, 12.0, &opts).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn straight_paths_have_no_magnetic_phase() {
        let sys = nat();
        let opts = QuadratureOptions::default();
        let w = FieldWaveform::LinearSinusoid { amplitude: 0.5, direction: 0.4, frequency: 0.9, phase: 0.2 };
        assert!(magnetic_phase(&sys, &w, 17.0, &opts).unwrap().abs() < 1e-13);
        let c = FieldWaveform::Constant { e1: 0.3, e2: -0.1 };
        assert!(magnetic_phase(&sys, &c, 17.0, &opts).unwrap().abs() < 1e-13);
    }

    #[test]
    fn sampled_matches_rotating_within_interpolation_error() {
        let sys = nat();
        let (e0, nu) = (0.3, 0.6);
        let rot = FieldWaveform::rotating(e0, nu);
        let h = 0.01;
        let samples: Vec<[f64; 3]> = (0..=1000)
            .map(|j| {
                let t = h * j as f64;
                let e = eval_field(&rot, t).unwrap();
                [t, e.re, e.im]
            })
            .collect();
        let sampled = FieldWaveform::sampled(samples).unwrap();
        let grid: Vec<f64> = (0..=10).map(|j| j as f64).collect();
        let opts = QuadratureOptions::default();
        let a = build_drive_path(&sys, &rot, &grid, &opts).unwrap();
        let b = build_drive_path(&sys, &sampled, &grid, &opts).unwrap();
        assert_eq!(b.provenance.amplitude, Method::Quadrature);
        // linear interpolation error ≤ h²/8·max|Ë| per unit time
        let bound = h * h / 8.0 * e0 * nu * nu * 10.0;
        for j in 0..grid.len() {
            assert!((a.path[j] - b.path[j]).norm() < bound);
            assert!((a.amplitude[j] - b.amplitude[j]).norm() < bound);
            assert!((a.magnetic_phase[j] - b.magnetic_phase[j]).abs() < 10.0 * bound);
            assert!((a.coherent_phase[j] - b.coherent_phase[j]).abs() < 10.0 * bound);
        }
    }

    #[test]
    fn phase_area_locks_hold_in_user_units() {
        for q in [1.0, -2.0] {
            let sys = PhysicalSystem::new(q, 3.0, 0.5, UnitSystem::Natural).unwrap();
            let w = FieldWaveform::Sum {
                terms: vec![FieldWaveform::rotating(0.7, 2.5), FieldWaveform::Constant { e1: 0.2, e2: 0.4 }],
            };
            let grid: Vec<f64> = (0..30).map(|j| 0.1 * j as f64).collect();
            let p = build_drive_path(&sys, &w, &grid, &QuadratureOptions::default()).unwrap();
            let g = sys.flux_coupling();
            for j in 0..grid.len() {
                assert!((p.magnetic_phase[j] + g * p.path_area[j]).abs() < 1e-12);
                assert!((p.coherent_phase[j] + 4.0 * g * p.amplitude_area[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let sys = nat();
        let opts = QuadratureOptions::default();
        assert!(build_drive_path(&sys, &FieldWaveform::Zero, &[0.1, 0.2], &opts).is_err());
        assert!(build_drive_path(&sys, &FieldWaveform::Zero, &[0.0, 0.2, 0.2], &opts).is_err());
    }
}

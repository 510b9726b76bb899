//! The evolution operator U(t, 0) = M(C_R)·D(t)·J(C_u) as an explicit record.
//!
//! M(C_R) acts on the guiding-center sector and is kept as the pair (R, β).
//! D(t) is diagonal in the Landau levels with phases θ_n = −ω(n + ½)t.
//! J(C_u) = e^{iγ}·D(α) with α = −u*k is stored as a truncated matrix.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field_model::{FieldWaveform, PhysicalSystem};
use crate::fock_algebra::{
    apply_operator, default_truncation, displacement_matrix, log_factorials, CoherentAmplitude, TruncatedOperator,
};
use crate::path_integrals::{internal_drive_path, Drive, Provenance, QuadratureOptions};

/// Ladder scale k in internal units.
pub(crate) const K_INTERNAL: f64 = std::f64::consts::SQRT_2;

/// α = −u*k for an internal-unit displacement amplitude u, from
/// exp(uk·a − u*k·a†) = D(−u*k).
pub fn coherent_amplitude(u_internal: Complex64) -> CoherentAmplitude {
    CoherentAmplitude(-u_internal.conj() * K_INTERNAL)
}

/// The w-sector content of the evolution: guiding-center displacement R and
/// the magnetic-translation phase β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricRecord {
    pub displacement: Complex64,
    pub magnetic_phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizedPropagator {
    time: f64,
    internal_time: f64,
    cyclotron_frequency: f64,
    geometric: GeometricRecord,
    amplitude: Complex64,
    internal_amplitude: Complex64,
    coherent_phase: f64,
    alpha: CoherentAmplitude,
    j_matrix: TruncatedOperator,
    provenance: Provenance,
}

impl FactorizedPropagator {
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn cyclotron_frequency(&self) -> f64 {
        self.cyclotron_frequency
    }

    pub fn geometric(&self) -> GeometricRecord {
        self.geometric
    }

    /// R(t) in user length units.
    pub fn displacement(&self) -> Complex64 {
        self.geometric.displacement
    }

    pub fn magnetic_phase(&self) -> f64 {
        self.geometric.magnetic_phase
    }

    /// u(t) in user length units.
    pub fn amplitude(&self) -> Complex64 {
        self.amplitude
    }

    pub fn coherent_phase(&self) -> f64 {
        self.coherent_phase
    }

    pub fn alpha(&self) -> CoherentAmplitude {
        self.alpha
    }

    /// |uk|², the mean number of quanta pumped out of the vacuum.
    pub fn drive_strength(&self) -> f64 {
        self.alpha.mean_occupation()
    }

    pub fn j_matrix(&self) -> &TruncatedOperator {
        &self.j_matrix
    }

    pub fn dimension(&self) -> usize {
        self.j_matrix.dim()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn healthy_block(&self) -> usize {
        self.j_matrix.healthy_block()
    }

    /// θ_n = −ω(n + ½)t.
    pub fn dynamical_phase(&self, n: usize) -> f64 {
        -(n as f64 + 0.5) * self.internal_time
    }

    pub fn dynamical_phases(&self) -> Vec<f64> {
        (0..self.dimension()).map(|n| self.dynamical_phase(n)).collect()
    }

    /// Same factors with β and γ replaced.
    pub fn with_phases(&self, magnetic_phase: f64, coherent_phase: f64) -> Self {
        let rephase = Complex64::from_polar(1.0, coherent_phase - self.coherent_phase);
        let mut out = self.clone();
        out.geometric.magnetic_phase = magnetic_phase;
        out.coherent_phase = coherent_phase;
        out.j_matrix = self.j_matrix.scale(rephase);
        out
    }

    /// The π-sector operator D(t)·J(C_u) as a dense matrix.
    pub fn pi_sector_matrix(&self) -> Array2<Complex64> {
        let mut m = self.j_matrix.matrix().clone();
        for (n, mut row) in m.rows_mut().into_iter().enumerate() {
            let phase = Complex64::from_polar(1.0, self.dynamical_phase(n));
            row.mapv_inplace(|z| z * phase);
        }
        m
    }
}

/// Builds U(t, 0) for the drive `w` up to time `t`. `truncation` defaults to
/// max(32, ⌈8|α|² + 16⌉).
pub fn assemble(
    sys: &PhysicalSystem,
    w: &FieldWaveform,
    t: f64,
    truncation: Option<usize>,
    opts: &QuadratureOptions,
) -> Result<FactorizedPropagator> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::InvalidArgument(format!("time must be finite and non-negative, got {t}")));
    }
    let drive = Drive::new(sys, w)?;
    let tau = sys.to_internal_time(t);
    let grid: Vec<f64> = if tau > 0.0 { vec![0.0, tau] } else { vec![0.0] };
    let p = internal_drive_path(&drive, &grid, opts)?;
    let last = grid.len() - 1;
    let u = p.amplitude[last];
    let alpha = coherent_amplitude(u);
    let n = truncation.unwrap_or_else(|| default_truncation(alpha));
    let gamma = -4.0 * p.amplitude_area[last];
    let j_matrix = displacement_matrix(alpha, n)?.scale(Complex64::from_polar(1.0, gamma));
    Ok(FactorizedPropagator {
        time: t,
        internal_time: tau,
        cyclotron_frequency: sys.cyclotron_frequency(),
        geometric: GeometricRecord {
            displacement: sys.from_internal_length(p.path[last]),
            magnetic_phase: -p.path_area[last],
        },
        amplitude: sys.from_internal_length(u),
        internal_amplitude: u,
        coherent_phase: gamma,
        alpha,
        j_matrix,
        provenance: p.provenance,
    })
}

fn check_index(p: &FactorizedPropagator, index: usize) -> Result<()> {
    let healthy = p.healthy_block();
    if index >= healthy {
        return Err(Error::Truncation { index, healthy });
    }
    Ok(())
}

/// ⟨m|J|n⟩ = e^{iγ}e^{−|uk|²/2}(e^{−uka}|m⟩)†(e^{uka}|n⟩), summed exactly over
/// the finitely many lower levels both vectors share.
pub fn j_matrix_element(p: &FactorizedPropagator, m: usize, n: usize) -> Result<Complex64> {
    check_index(p, m)?;
    check_index(p, n)?;
    let w = p.internal_amplitude * K_INTERNAL;
    let x = w.norm_sqr();
    let prefactor = Complex64::from_polar((-0.5 * x).exp(), p.coherent_phase);
    if x == 0.0 {
        return Ok(if m == n { prefactor } else { Complex64::new(0.0, 0.0) });
    }
    let lf = log_factorials(m.max(n));
    let ln_w = x.sqrt().ln();
    let arg = w.arg();
    let mut sum = Complex64::new(0.0, 0.0);
    for l in 0..=m.min(n) {
        let (dm, dn) = (m - l, n - l);
        let log_mag = 0.5 * (lf[m] + lf[n]) - lf[l] - lf[dm] - lf[dn] + (dm + dn) as f64 * ln_w;
        // conj((−w)^{dm})·w^{dn}
        let phase = (dn as f64 - dm as f64) * arg + std::f64::consts::PI * dm as f64;
        sum += Complex64::from_polar(log_mag.exp(), phase);
    }
    Ok(prefactor * sum)
}

/// P(n→m) = |⟨m|J|n⟩|² for m = 0..N−1.
pub fn transition_probabilities(p: &FactorizedPropagator, n: usize) -> Result<Vec<f64>> {
    check_index(p, n)?;
    Ok(p.j_matrix.matrix().column(n).iter().map(|z| z.norm_sqr()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdiabaticEstimate {
    /// P(n → n−1) ≈ n·k²|u|².
    pub down: f64,
    /// P(n → n+1) ≈ (n+1)·k²|u|².
    pub up: f64,
}

/// Leading-order transition probabilities for small k|u|; `u` in user length
/// units. All |Δn| ≥ 2 transitions vanish at this order.
pub fn adiabatic_estimates(sys: &PhysicalSystem, n: usize, u: Complex64) -> AdiabaticEstimate {
    let k = sys.ladder_scale();
    let strength = k * k * u.norm_sqr();
    AdiabaticEstimate { down: n as f64 * strength, up: (n as f64 + 1.0) * strength }
}

/// Drive-strength coefficient (|u_max|/l_B)² for a field of constant
/// magnitude `e` changing direction slowly, with |u_max| = cE/(Bω).
pub fn adiabatic_bound_coefficient(sys: &PhysicalSystem, e: f64) -> f64 {
    let u_max = sys.units().light_factor() * e / (sys.magnetic_field() * sys.cyclotron_frequency());
    (u_max / sys.magnetic_length()).powi(2)
}

/// Duration T = (B/E)ω⁻¹ of an adiabatic sweep, with E/B in velocity form
/// divided by c (dimensionless in Gaussian units).
pub fn adiabatic_duration(sys: &PhysicalSystem, e: f64) -> f64 {
    let c = match sys.units() {
        crate::field_model::UnitSystem::Si => crate::field_model::constants::SPEED_OF_LIGHT_CGS / 100.0,
        _ => 1.0,
    };
    // E/B as a dimensionless ratio: (E/(cB)) in SI, E/B in Gaussian
    let ratio = e / (c * sys.magnetic_field());
    1.0 / (ratio * sys.cyclotron_frequency())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceSurvival {
    /// e^{−|uk|²} with u = −cE₀t/(2B).
    pub survival: f64,
    /// |uk|² = ½(cE₀/B)²t²/l_B².
    pub exponent: f64,
    /// The same expression with prefactor 2 instead of ½.
    pub literal_prefactor_two: f64,
}

/// Ground-state survival for a rotating field at exact resonance.
pub fn resonance_survival(sys: &PhysicalSystem, e0: f64, t: f64) -> Result<ResonanceSurvival> {
    if !(e0 >= 0.0 && t >= 0.0 && e0.is_finite() && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("need finite E0 ≥ 0 and t ≥ 0, got {e0}, {t}")));
    }
    let drift = sys.units().light_factor() * e0 / sys.magnetic_field();
    let scaled = (drift * t / sys.magnetic_length()).powi(2);
    let exponent = 0.5 * scaled;
    Ok(ResonanceSurvival {
        survival: (-exponent).exp(),
        exponent,
        literal_prefactor_two: (-2.0 * scaled).exp(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolvedState {
    pub amplitudes: Vec<Complex64>,
    pub geometric: GeometricRecord,
    /// Population in the last quarter of the basis.
    pub edge_population: f64,
    pub truncation_warning: bool,
}

/// ψ' = diag(e^{iθ_n})·J·ψ on the Landau-level amplitudes; the guiding-center
/// action of M(C_R) is returned as the (R, β) record.
pub fn evolve_state(p: &FactorizedPropagator, psi: &[Complex64]) -> Result<EvolvedState> {
    let mut out = apply_operator(&p.j_matrix, psi)?;
    for (n, z) in out.iter_mut().enumerate() {
        *z *= Complex64::from_polar(1.0, p.dynamical_phase(n));
    }
    let dim = out.len();
    let edge_population: f64 = out[dim - dim / 4..].iter().map(|z| z.norm_sqr()).sum();
    Ok(EvolvedState {
        amplitudes: out,
        geometric: p.geometric,
        edge_population,
        truncation_warning: edge_population > 1e-10,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_algebra::basis_state;

    fn nat() -> PhysicalSystem {
        PhysicalSystem::natural()
    }

    #[test]
    fn zero_field_reduces_to_landau_evolution() {
        let p = assemble(&nat(), &FieldWaveform::Zero, 3.0, Some(16), &QuadratureOptions::default()).unwrap();
        assert_eq!(p.displacement(), Complex64::new(0.0, 0.0));
        assert_eq!(p.amplitude(), Complex64::new(0.0, 0.0));
        assert_eq!(p.magnetic_phase(), 0.0);
        assert_eq!(p.coherent_phase(), 0.0);
        assert_eq!(p.j_matrix().matrix(), &Array2::<Complex64>::eye(16));
        assert!((p.dynamical_phase(2) + 7.5).abs() < 1e-15);
        let probs = transition_probabilities(&p, 3).unwrap();
        for (m, &pr) in probs.iter().enumerate() {
            assert_eq!(pr, if m == 3 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn initial_time_is_identity() {
        let w = FieldWaveform::rotating(0.5, 0.3);
        let p = assemble(&nat(), &w, 0.0, Some(8), &QuadratureOptions::default()).unwrap();
        assert_eq!(p.j_matrix().matrix(), &Array2::<Complex64>::eye(8));
        assert_eq!(p.magnetic_phase(), 0.0);
    }

    #[test]
    fn resonance_is_pure_linear_displacement() {
        let (e0, t) = (0.1, 7.0);
        let w = FieldWaveform::rotating(e0, 1.0);
        let p = assemble(&nat(), &w, t, None, &QuadratureOptions::default()).unwrap();
        assert!((p.amplitude() - Complex64::new(-e0 * t / 2.0, 0.0)).norm() < 1e-14);
        assert!(p.coherent_phase().abs() < 1e-14);
        let r = resonance_survival(&nat(), e0, t).unwrap();
        let direct = transition_probabilities(&p, 0).unwrap()[0];
        assert!((r.survival - direct).abs() < 1e-14);
        assert!(r.literal_prefactor_two < r.survival);
    }

    #[test]
    fn ground_state_element_and_poisson_populations() {
        let w = FieldWaveform::rotating(0.25, 0.6);
        let p = assemble(&nat(), &w, 4.0, Some(48), &QuadratureOptions::default()).unwrap();
        let x = p.drive_strength();
        let g = j_matrix_element(&p, 0, 0).unwrap();
        let expected = Complex64::from_polar((-0.5 * x).exp(), p.coherent_phase());
        assert!((g - expected).norm() < 1e-15);
        let probs = transition_probabilities(&p, 0).unwrap();
        let lf = log_factorials(48);
        for m in 0..20 {
            let poisson = (-x + m as f64 * x.ln() - lf[m]).exp();
            assert!((probs[m] - poisson).abs() < 1e-14);
        }
    }

    #[test]
    fn series_element_matches_stored_matrix() {
        let w = FieldWaveform::Sum {
            terms: vec![FieldWaveform::rotating(0.6, 0.4), FieldWaveform::Constant { e1: 0.1, e2: 0.2 }],
        };
        let p = assemble(&nat(), &w, 6.0, Some(64), &QuadratureOptions::default()).unwrap();
        assert!(p.drive_strength() > 0.5);
        for m in 0..20 {
            for n in 0..20 {
                let a = j_matrix_element(&p, m, n).unwrap();
                assert!((a - p.j_matrix().get(m, n)).norm() < 1e-10, "({m},{n})");
            }
        }
        assert!(matches!(j_matrix_element(&p, 63, 0), Err(Error::Truncation { .. })));
    }

    #[test]
    fn adiabatic_estimate_small_cases() {
        let sys = nat();
        let e = adiabatic_estimates(&sys, 0, Complex64::new(0.01, 0.0));
        assert_eq!(e.down, 0.0);
        assert!((e.up - 2e-4).abs() < 1e-18);
    }

    #[test]
    fn evolve_state_preserves_norm() {
        let w = FieldWaveform::LinearSinusoid { amplitude: 0.4, direction: 1.0, frequency: 0.8, phase: 0.0 };
        let p = assemble(&nat(), &w, 5.0, Some(48), &QuadratureOptions::default()).unwrap();
        let psi = basis_state(0, 48).unwrap();
        let out = evolve_state(&p, &psi).unwrap();
        let norm: f64 = out.amplitudes.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(!out.truncation_warning);
        assert_eq!(out.geometric, p.geometric());
        assert!(evolve_state(&p, &psi[..10]).is_err());
    }

    #[test]
    fn zero_field_phases_compose() {
        let opts = QuadratureOptions::default();
        let a = assemble(&nat(), &FieldWaveform::Zero, 1.3, Some(10), &opts).unwrap();
        let b = assemble(&nat(), &FieldWaveform::Zero, 2.4, Some(10), &opts).unwrap();
        let ab = assemble(&nat(), &FieldWaveform::Zero, 3.7, Some(10), &opts).unwrap();
        for n in 0..10 {
            assert!((a.dynamical_phase(n) + b.dynamical_phase(n) - ab.dynamical_phase(n)).abs() < 1e-13);
        }
        assert_eq!(ab.j_matrix(), a.j_matrix());
    }
}

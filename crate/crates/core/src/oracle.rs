//! Brute-force reference for the π sector: direct time integration of the
//! driven oscillator in a truncated Fock basis, plus residual checks of the
//! Heisenberg-picture solutions. Nothing here uses the path integrals; the
//! only input is the field E(t).

use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_model::{eval_field, guiding_center_path, FieldWaveform, PhysicalSystem};
use crate::fock_algebra::{displacement_matrix, CoherentAmplitude, TruncatedOperator};
use crate::path_integrals::QuadratureOptions;
use crate::propagator::{assemble, FactorizedPropagator, K_INTERNAL};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// Largest internal step the integrators accept.
pub const MAX_STEP: f64 = 0.05;

/// Extra basis states the oracle keeps beyond the propagator's truncation.
pub const HEADROOM: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classical RK4 in the interaction picture of the Landau Hamiltonian.
    Rk4,
    /// Exponential of the midpoint Hamiltonian, Schrödinger picture.
    MidpointExponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Step in internal time ωt.
    pub dt: f64,
    pub truncation: usize,
    pub scheme: Scheme,
    pub tolerance: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { dt: 0.01, truncation: 80, scheme: Scheme::Rk4, tolerance: 1e-6 }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_STEP) {
            return Err(Error::InvalidArgument(format!("dt must lie in (0, {MAX_STEP}], got {}", self.dt)));
        }
        if self.truncation < 4 {
            return Err(Error::InvalidArgument(format!("truncation must be at least 4, got {}", self.truncation)));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }

    /// Requires room for a propagator of dimension `n` plus the headroom.
    pub fn check_headroom(&self, n: usize) -> Result<()> {
        if self.truncation < n + HEADROOM {
            return Err(Error::InvalidArgument(format!(
                "oracle truncation {} is below propagator dimension {} + {}",
                self.truncation, n, HEADROOM
            )));
        }
        Ok(())
    }
}

/// Coupling g(τ) = −(k/2)Ṙ(τ) with Ṙ = −iE in internal units; the drive is
/// g·a† + g*·a.
fn coupling(internal: &FieldWaveform, tau: f64) -> Result<Complex64> {
    let rdot = MINUS_I * eval_field(internal, tau)?;
    Ok(-0.5 * K_INTERNAL * rdot)
}

/// H_π(t) in units of ħω: (n + ½) on the diagonal and the linear drive
/// −(k/2)(Ṙ*a + Ṙa†) on the first off-diagonals.
pub fn pi_sector_hamiltonian(sys: &PhysicalSystem, w: &FieldWaveform, t: f64, n: usize) -> Result<TruncatedOperator> {
    w.validate()?;
    w.check_domain(t)?;
    if n < 2 {
        return Err(Error::InvalidArgument(format!("dimension must be at least 2, got {n}")));
    }
    let internal = w.to_internal(sys);
    let g = coupling(&internal, sys.to_internal_time(t))?;
    let mut h = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        h[[j, j]] = Complex64::new(j as f64 + 0.5, 0.0);
    }
    for j in 0..n - 1 {
        let lower = g * ((j + 1) as f64).sqrt();
        h[[j + 1, j]] = lower;
        h[[j, j + 1]] = lower.conj();
    }
    TruncatedOperator::from_matrix(h)
}

/// Step boundaries: every breakpoint is hit exactly, and no step exceeds dt.
fn step_nodes(internal: &FieldWaveform, start: f64, tau: f64, dt: f64) -> Vec<f64> {
    let mut nodes = vec![start];
    let mut edges: Vec<f64> = internal.breakpoints().into_iter().filter(|&b| b > start && b < tau).collect();
    edges.push(tau);
    let mut lo = start;
    for hi in edges {
        if hi <= lo {
            continue;
        }
        let steps = ((hi - lo) / dt).ceil().max(1.0) as usize;
        let h = (hi - lo) / steps as f64;
        for j in 1..steps {
            nodes.push(lo + h * j as f64);
        }
        nodes.push(hi);
        lo = hi;
    }
    nodes
}

/// y ← y + c·(tridiagonal drive)·x for the interaction-picture generator,
/// whose lower entries are g·√(j+1)·e^{iτ}.
fn drive_apply(lower: Complex64, x: &Array2<Complex64>, out: &mut Array2<Complex64>) {
    let n = x.nrows();
    let upper = lower.conj();
    for col in 0..x.ncols() {
        for j in 0..n {
            let mut acc = ZERO;
            if j > 0 {
                acc += lower * (j as f64).sqrt() * x[[j - 1, col]];
            }
            if j + 1 < n {
                acc += upper * ((j + 1) as f64).sqrt() * x[[j + 1, col]];
            }
            out[[j, col]] = acc;
        }
    }
}

fn rk4(internal: &FieldWaveform, nodes: &[f64], n: usize) -> Result<Array2<Complex64>> {
    let mut v = Array2::<Complex64>::eye(n);
    let mut k = Array2::<Complex64>::zeros((n, n));
    // dV/dτ = −i·H_I(τ)·V with H_I,{j+1,j} = g(τ)√(j+1)e^{iτ}
    let lower_at = |tau: f64| -> Result<Complex64> { Ok(coupling(internal, tau)? * Complex64::from_polar(1.0, tau)) };
    for step in nodes.windows(2) {
        let (a, b) = (step[0], step[1]);
        let h = b - a;
        let (la, lm, lb) = (lower_at(a)?, lower_at(0.5 * (a + b))?, lower_at(b)?);
        let mut acc = v.clone();
        drive_apply(la, &v, &mut k);
        k.mapv_inplace(|z| MINUS_I * z);
        acc.scaled_add(Complex64::new(h / 6.0, 0.0), &k);
        let mut stage = v.clone();
        stage.scaled_add(Complex64::new(0.5 * h, 0.0), &k);
        drive_apply(lm, &stage, &mut k);
        k.mapv_inplace(|z| MINUS_I * z);
        acc.scaled_add(Complex64::new(h / 3.0, 0.0), &k);
        stage.assign(&v);
        stage.scaled_add(Complex64::new(0.5 * h, 0.0), &k);
        drive_apply(lm, &stage, &mut k);
        k.mapv_inplace(|z| MINUS_I * z);
        acc.scaled_add(Complex64::new(h / 3.0, 0.0), &k);
        stage.assign(&v);
        stage.scaled_add(Complex64::new(h, 0.0), &k);
        drive_apply(lb, &stage, &mut k);
        k.mapv_inplace(|z| MINUS_I * z);
        acc.scaled_add(Complex64::new(h / 6.0, 0.0), &k);
        v = acc;
    }
    // back to the Schrödinger picture: U = e^{−iH₀τ}V
    let tau = *nodes.last().unwrap();
    for (j, mut row) in v.rows_mut().into_iter().enumerate() {
        let phase = Complex64::from_polar(1.0, -(j as f64 + 0.5) * tau);
        row.mapv_inplace(|z| z * phase);
    }
    Ok(v)
}

fn midpoint_exponential(internal: &FieldWaveform, nodes: &[f64], n: usize) -> Result<Array2<Complex64>> {
    let mut u = Array2::<Complex64>::eye(n);
    let mut term = Array2::<Complex64>::zeros((n, n));
    let mut next = Array2::<Complex64>::zeros((n, n));
    for step in nodes.windows(2) {
        let (a, b) = (step[0], step[1]);
        let h = b - a;
        let g = coupling(internal, 0.5 * (a + b))?;
        // exp(−iHh)·U by its Taylor series; ‖Hh‖ ≤ (N + 2|g|√N)h stays O(1)
        let scale = (u.iter().map(|z| z.norm()).fold(0.0, f64::max)).max(1.0);
        let mut sum = u.clone();
        term.assign(&u);
        for order in 1..80 {
            drive_apply(g, &term, &mut next);
            for j in 0..n {
                let diag = j as f64 + 0.5;
                for col in 0..n {
                    next[[j, col]] += diag * term[[j, col]];
                }
            }
            let factor = MINUS_I * (h / order as f64);
            next.mapv_inplace(|z| z * factor);
            std::mem::swap(&mut term, &mut next);
            sum += &term;
            let size = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if size < 1e-18 * scale {
                break;
            }
        }
        u = sum;
    }
    Ok(u)
}

fn integrate_raw(sys: &PhysicalSystem, w: &FieldWaveform, t_final: f64, cfg: &IntegratorConfig) -> Result<TruncatedOperator> {
    cfg.validate()?;
    w.validate()?;
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be finite and non-negative, got {t_final}")));
    }
    w.check_domain(0.0)?;
    w.check_domain(t_final)?;
    let internal = w.to_internal(sys);
    let tau = sys.to_internal_time(t_final);
    let n = cfg.truncation;
    let u = if tau == 0.0 {
        Array2::eye(n)
    } else {
        let nodes = step_nodes(&internal, 0.0, tau, cfg.dt);
        match cfg.scheme {
            Scheme::Rk4 => rk4(&internal, &nodes, n)?,
            Scheme::MidpointExponential => midpoint_exponential(&internal, &nodes, n)?,
        }
    };
    if u.iter().any(|z| !z.is_finite()) {
        return Err(Error::Accuracy { what: "integrated propagator".into(), achieved: f64::INFINITY, requested: cfg.tolerance });
    }
    TruncatedOperator::from_matrix(u)
}

fn check_health(op: &TruncatedOperator, block: usize, tolerance: f64) -> Result<()> {
    let defect = op.unitarity_defect(block);
    if defect > tolerance {
        return Err(Error::Accuracy { what: "unitarity of integrated propagator".into(), achieved: defect, requested: tolerance });
    }
    let edge = edge_population(op, block);
    if edge > tolerance {
        return Err(Error::Accuracy { what: "population at truncation edge".into(), achieved: edge, requested: tolerance });
    }
    Ok(())
}

/// Numerical U(t, 0) on the π sector, solving i dU/dτ = H_π U from U(0) = I.
/// Fails when the trusted block is not unitary to `cfg.tolerance` or leaks
/// into the last quarter of the basis.
pub fn integrate_schrodinger(
    sys: &PhysicalSystem,
    w: &FieldWaveform,
    t_final: f64,
    cfg: &IntegratorConfig,
) -> Result<TruncatedOperator> {
    let op = integrate_raw(sys, w, t_final, cfg)?;
    check_health(&op, oracle_block(cfg.truncation), cfg.tolerance)?;
    Ok(op)
}

/// Columns the oracle vouches for: the leading half of the basis it leaves
/// after setting aside its headroom.
pub fn oracle_block(n: usize) -> usize {
    n.saturating_sub(HEADROOM).max(2) / 2
}

/// Largest population any of the leading `block` columns places in the last
/// quarter of the basis.
pub fn edge_population(op: &TruncatedOperator, block: usize) -> f64 {
    let n = op.dim();
    let start = n - n / 4;
    (0..block.min(n))
        .map(|col| (start..n).map(|row| op.get(row, col).norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Gauss–Legendre nodes and weights on [−1, 1] by Newton iteration.
fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let nf = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for j in 2..=order {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let wgt = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = wgt;
        weights[order - 1 - i] = wgt;
    }
    (nodes, weights)
}

/// c(τ) = i·e^{−iτ}∫₀^τ e^{is}Ṙ(s) ds = e^{−iτ}∫₀^τ e^{is}E(s) ds in internal
/// units, by composite Gauss–Legendre on panels of width ≤ ¼.
fn heisenberg_scalar(internal: &FieldWaveform, tau: f64) -> Result<Complex64> {
    let (x, wts) = gauss_legendre(12);
    let mut total = ZERO;
    for (a, b) in step_nodes(internal, 0.0, tau, 0.25).windows(2).map(|p| (p[0], p[1])) {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (xi, wi) in x.iter().zip(&wts) {
            let s = mid + half * xi;
            total += eval_field(internal, s)? * Complex64::from_polar(wi * half, s);
        }
    }
    Ok(total * Complex64::from_polar(1.0, -tau))
}

/// max |U†(k·a)U − (k·a·e^{−iτ} + c(τ)·I)| over the leading `block` states.
/// The kinematical momentum π = π₁ + iπ₂ is ħk·a; units are ħ/l_B.
pub fn heisenberg_residual(u: &TruncatedOperator, sys: &PhysicalSystem, w: &FieldWaveform, t: f64, block: usize) -> Result<f64> {
    w.validate()?;
    w.check_domain(0.0)?;
    w.check_domain(t)?;
    let internal = w.to_internal(sys);
    let tau = sys.to_internal_time(t);
    let c = heisenberg_scalar(&internal, tau)?;
    let n = u.dim();
    let block = block.min(n);
    let m = u.matrix();
    let rot = Complex64::from_polar(K_INTERNAL, -tau);
    let mut worst = 0.0_f64;
    for col in 0..block {
        // (k·a)·U column: row j gets k√(j+1)·U[j+1, col]
        let au: Vec<Complex64> = (0..n)
            .map(|j| if j + 1 < n { K_INTERNAL * ((j + 1) as f64).sqrt() * m[[j + 1, col]] } else { ZERO })
            .collect();
        for row in 0..block {
            let mut acc = ZERO;
            for j in 0..n {
                acc += m[[j, row]].conj() * au[j];
            }
            let mut expected = if row + 1 == col { rot * (col as f64).sqrt() } else { ZERO };
            if row == col {
                expected += c;
            }
            worst = worst.max((acc - expected).norm());
        }
    }
    Ok(worst)
}

/// Integrates ẇ = iṘ = E with RK4 through every point of `t_grid` (user
/// time) and returns the largest deviation from i·R(t), in units of l_B.
pub fn guiding_center_residual(sys: &PhysicalSystem, w: &FieldWaveform, t_grid: &[f64], dt: f64) -> Result<f64> {
    w.validate()?;
    if !(dt > 0.0 && dt <= MAX_STEP) {
        return Err(Error::InvalidArgument(format!("dt must lie in (0, {MAX_STEP}], got {dt}")));
    }
    if t_grid.is_empty() || t_grid[0] < 0.0 || t_grid.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InvalidArgument("time grid must be non-empty, non-negative and non-decreasing".into()));
    }
    w.check_domain(0.0)?;
    w.check_domain(*t_grid.last().unwrap())?;
    let internal = w.to_internal(sys);
    let i = Complex64::new(0.0, 1.0);
    let mut state = ZERO;
    let mut now = 0.0;
    let mut worst = 0.0_f64;
    for &t in t_grid {
        let tau = sys.to_internal_time(t);
        if tau > now {
            for step in step_nodes(&internal, now, tau, dt).windows(2) {
                let (a, b) = (step[0], step[1]);
                let h = b - a;
                let k1 = eval_field(&internal, a)?;
                let k2 = eval_field(&internal, 0.5 * (a + b))?;
                let k4 = eval_field(&internal, b)?;
                state += (k1 + 4.0 * k2 + k4) * (h / 6.0);
            }
            now = tau;
        }
        let r = sys.to_internal_length(guiding_center_path(sys, w, t)?);
        worst = worst.max((state - i * r).norm());
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tamper {
    #[default]
    None,
    /// Builds J from +u*k instead of −u*k.
    NegateAlpha,
}

/// D(t)·J for the propagator, optionally with a deliberately wrong amplitude.
pub fn factorized_pi_sector(p: &FactorizedPropagator, tamper: Tamper) -> Result<Array2<Complex64>> {
    match tamper {
        Tamper::None => Ok(p.pi_sector_matrix()),
        Tamper::NegateAlpha => {
            let wrong = displacement_matrix(CoherentAmplitude(-p.alpha().0), p.dimension())?
                .scale(Complex64::from_polar(1.0, p.coherent_phase()));
            let mut m = wrong.into_matrix();
            for (n, mut row) in m.rows_mut().into_iter().enumerate() {
                let phase = Complex64::from_polar(1.0, p.dynamical_phase(n));
                row.mapv_inplace(|z| z * phase);
            }
            Ok(m)
        }
    }
}

/// max |a − b| over the leading block.
pub fn block_distance(a: &Array2<Complex64>, b: &Array2<Complex64>, block: usize) -> f64 {
    let block = block.min(a.nrows()).min(b.nrows());
    let mut worst = 0.0_f64;
    for m in 0..block {
        for n in 0..block {
            worst = worst.max((a[[m, n]] - b[[m, n]]).norm());
        }
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationCheck {
    pub residual: f64,
    pub block: usize,
    pub propagator_dimension: usize,
    pub oracle_dimension: usize,
}

/// ‖U_num − D(t)·J‖ on the leading half of the propagator's basis.
pub fn factorization_residual(
    sys: &PhysicalSystem,
    w: &FieldWaveform,
    t: f64,
    n: usize,
    cfg: &IntegratorConfig,
    tamper: Tamper,
) -> Result<FactorizationCheck> {
    cfg.check_headroom(n)?;
    let p = assemble(sys, w, t, Some(n), &QuadratureOptions::default())?;
    let u = integrate_schrodinger(sys, w, t, cfg)?;
    let dj = factorized_pi_sector(&p, tamper)?;
    let block = n / 2;
    Ok(FactorizationCheck {
        residual: block_distance(u.matrix(), &dj, block),
        block,
        propagator_dimension: n,
        oracle_dimension: cfg.truncation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusCase {
    pub name: String,
    pub waveform: FieldWaveform,
    pub t: f64,
}

/// The fixed validation corpus, in natural units (ω = l_B = 1).
pub fn validation_corpus() -> Vec<CorpusCase> {
    let t = 10.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let samples: Vec<[f64; 3]> = (0..=(2.0 * t) as usize + 2)
        .map(|j| [0.5 * j as f64, rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2)])
        .collect();
    let case = |name: &str, waveform: FieldWaveform| CorpusCase { name: name.into(), waveform, t };
    vec![
        case("zero", FieldWaveform::Zero),
        case("constant", FieldWaveform::Constant { e1: 0.3, e2: -0.2 }),
        case(
            "linear_sinusoid",
            FieldWaveform::LinearSinusoid { amplitude: 0.4, direction: 0.6, frequency: 0.5, phase: 0.3 },
        ),
        case("rotating_off_resonance", FieldWaveform::Rotating { amplitude: 0.2, frequency: 0.7, phase: 0.0 }),
        case("rotating_near_resonance", FieldWaveform::Rotating { amplitude: 0.1, frequency: 0.95, phase: 0.0 }),
        case("rotating_resonance", FieldWaveform::Rotating { amplitude: 0.1, frequency: 1.0, phase: 0.0 }),
        case("random_sampled", FieldWaveform::sampled(samples).expect("corpus samples are valid")),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub name: String,
    pub factorization: f64,
    pub heisenberg_factorized: f64,
    pub heisenberg_numeric: f64,
    pub guiding_center: f64,
    pub unitarity: f64,
    pub drive_strength: f64,
}

impl CaseReport {
    pub fn failures(&self, tol: &Tolerances) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(self.factorization < tol.factorization) {
            out.push("factorization");
        }
        if !(self.heisenberg_factorized < tol.heisenberg) || !(self.heisenberg_numeric < tol.heisenberg) {
            out.push("heisenberg");
        }
        if !(self.guiding_center < tol.guiding_center) {
            out.push("guiding_center");
        }
        if !(self.unitarity < tol.unitarity) {
            out.push("unitarity");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub factorization: f64,
    pub heisenberg: f64,
    pub guiding_center: f64,
    pub unitarity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { factorization: 1e-6, heisenberg: 1e-6, guiding_center: 1e-9, unitarity: 1e-7 }
    }
}

/// Runs every oracle check for one case on a natural-unit system.
pub fn validate_case(
    sys: &PhysicalSystem,
    case: &CorpusCase,
    n: usize,
    cfg: &IntegratorConfig,
    tamper: Tamper,
) -> Result<CaseReport> {
    cfg.check_headroom(n)?;
    let p = assemble(sys, &case.waveform, case.t, Some(n), &QuadratureOptions::default())?;
    let u = integrate_schrodinger(sys, &case.waveform, case.t, cfg)?;
    let dj = factorized_pi_sector(&p, tamper)?;
    let block = n / 2;
    let dj_op = TruncatedOperator::from_matrix(dj.clone())?;
    let grid: Vec<f64> = (0..=20).map(|j| case.t * j as f64 / 20.0).collect();
    Ok(CaseReport {
        name: case.name.clone(),
        factorization: block_distance(u.matrix(), &dj, block),
        heisenberg_factorized: heisenberg_residual(&dj_op, sys, &case.waveform, case.t, block / 2)?,
        heisenberg_numeric: heisenberg_residual(&u, sys, &case.waveform, case.t, block)?,
        guiding_center: guiding_center_residual(sys, &case.waveform, &grid, cfg.dt)?,
        unitarity: u.unitarity_defect(block),
        drive_strength: p.drive_strength(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    pub dt: f64,
    pub residuals: [f64; 3],
    /// residual(2dt)/residual(dt) and residual(4dt)/residual(2dt).
    pub ratios: [f64; 2],
}

/// Factorization residual at dt, 2dt and 4dt.
pub fn convergence_check(
    sys: &PhysicalSystem,
    w: &FieldWaveform,
    t: f64,
    n: usize,
    cfg: &IntegratorConfig,
) -> Result<ConvergenceCheck> {
    let mut residuals = [0.0; 3];
    for (j, r) in residuals.iter_mut().enumerate() {
        // coarse steps are expected to miss the fine tolerance
        let c = IntegratorConfig { dt: cfg.dt * (1 << j) as f64, tolerance: cfg.tolerance.max(1e-3), ..*cfg };
        *r = factorization_residual(sys, w, t, n, &c, Tamper::None)?.residual;
    }
    Ok(ConvergenceCheck {
        dt: cfg.dt,
        residuals,
        ratios: [residuals[1] / residuals[0], residuals[2] / residuals[1]],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResonanceCheck {
    pub amplitude: f64,
    pub t: f64,
    pub oracle_survival: f64,
    /// e^{−|uk|²}.
    pub survival: f64,
    /// The same law with the exponent prefactor 2 in place of ½.
    pub literal_prefactor_two: f64,
    pub error: f64,
    pub literal_error: f64,
}

/// Ground-state survival at exact resonance from the integrator, next to both
/// closed-form candidates.
pub fn resonance_check(sys: &PhysicalSystem, e0: f64, t: f64, cfg: &IntegratorConfig) -> Result<ResonanceCheck> {
    let omega = sys.cyclotron_frequency();
    // the co-rotating sense flips with the sign of the charge
    let frequency = if sys.is_reflected() { -omega } else { omega };
    let w = FieldWaveform::Rotating { amplitude: e0, frequency, phase: 0.0 };
    let u = integrate_raw(sys, &w, t, cfg)?;
    check_health(&u, 1, cfg.tolerance)?;
    let oracle_survival = u.get(0, 0).norm_sqr();
    let r = crate::propagator::resonance_survival(sys, e0, t)?;
    Ok(ResonanceCheck {
        amplitude: e0,
        t,
        oracle_survival,
        survival: r.survival,
        literal_prefactor_two: r.literal_prefactor_two,
        error: (oracle_survival - r.survival).abs(),
        literal_error: (oracle_survival - r.literal_prefactor_two).abs(),
    })
}

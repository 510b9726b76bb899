//! Command-line front end. A JSON run configuration goes in; CSV tables and
//! JSON reports come out. Data files carry no timing so identical configs give
//! identical bytes; wall-clock time goes to `meta.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_model::{FieldWaveform, PhysicalSystem, UnitSystem};
use crate::fock_algebra::default_truncation;
use crate::oracle::{self, CaseReport, ConvergenceCheck, IntegratorConfig, ResonanceCheck, Scheme, Tamper, Tolerances};
use crate::path_integrals::{build_drive_path, QuadratureOptions};
use crate::propagator::{self, assemble, coherent_amplitude};

#[derive(Debug, Parser)]
#[command(name = "landau", version, about = "Landau levels driven by a time-dependent in-plane electric field")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,

    /// Accepted for compatibility; runs are deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Per-sample R, β, u, γ and level populations.
    Simulate,
    /// Final-time survival over a grid of one parameter.
    Sweep,
    /// Brute-force checks of the factorized propagator.
    Validate,
    /// β, γ and the signed areas only.
    Phases,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Simulate,
    Sweep,
    Validate,
    Phases,
}

impl From<Command> for Task {
    fn from(c: Command) -> Self {
        match c {
            Command::Simulate => Task::Simulate,
            Command::Sweep => Task::Sweep,
            Command::Validate => Task::Validate,
            Command::Phases => Task::Phases,
        }
    }
}

/// Charge in multiples of e, mass in electron masses; the field is in tesla
/// (SI), gauss (Gaussian) or raw (natural).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub units: UnitSystem,
    pub charge: f64,
    pub field: f64,
    pub mass: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { units: UnitSystem::Natural, charge: 1.0, field: 1.0, mass: 1.0 }
    }
}

impl SystemConfig {
    pub fn build(&self) -> Result<PhysicalSystem> {
        let u = self.units;
        PhysicalSystem::new(self.charge * u.elementary_charge(), self.field, self.mass * u.electron_mass(), u)
            .map_err(|e| Error::Config(format!("system: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    /// Final time in the unit system's time unit.
    pub t_final: f64,
    /// Output samples, evenly spaced from 0 to t_final inclusive.
    pub samples: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { t_final: 10.0, samples: 101 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericConfig {
    /// Fock-space dimension; chosen from the drive strength when absent.
    pub truncation: Option<usize>,
    pub quadrature_tol: f64,
    pub force_quadrature: bool,
    /// Integrator step in units of 1/ω.
    pub dt: f64,
    pub initial_level: usize,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self { truncation: None, quadrature_tol: 1e-10, force_quadrature: false, dt: 0.01, initial_level: 0 }
    }
}

impl NumericConfig {
    pub fn quadrature(&self) -> QuadratureOptions {
        QuadratureOptions { abs_tol: self.quadrature_tol, force_quadrature: self.force_quadrature, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// ν/ω for a rotating field, co-rotating with the cyclotron motion.
    FrequencyRatio,
    /// Field amplitude, keeping the waveform's shape.
    Amplitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: SweepParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepConfig {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|j| if j + 1 == self.steps { self.stop } else { self.start + h * j as f64 })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Propagator dimension; the oracle adds its headroom on top.
    pub truncation: usize,
    /// Dimension for the resonance survival runs.
    pub resonance_truncation: usize,
    pub scheme: Scheme,
    pub tolerances: Tolerances,
    /// Deliberate corruption for negative-control runs.
    pub tamper: Tamper,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            truncation: 64,
            resonance_truncation: 96,
            scheme: Scheme::Rk4,
            tolerances: Tolerances::default(),
            tamper: Tamper::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
    /// Also write a gnuplot script next to the tables.
    pub gnuplot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: Format::Csv, gnuplot: false }
    }
}

fn zero_field() -> FieldWaveform {
    FieldWaveform::Zero
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default = "zero_field")]
    pub waveform: FieldWaveform,
    #[serde(default)]
    pub time: TimeConfig,
    #[serde(default)]
    pub numeric: NumericConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: None,
            system: SystemConfig::default(),
            waveform: FieldWaveform::Zero,
            time: TimeConfig::default(),
            numeric: NumericConfig::default(),
            sweep: None,
            validate: ValidateConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fixes the task and checks every knob; the result is what reports echo.
    pub fn resolve(mut self, task: Task) -> Result<Self> {
        if let Some(t) = self.task {
            if t != task {
                return Err(Error::Config(format!("config declares task {t:?} but {task:?} was requested")));
            }
        }
        self.task = Some(task);
        self.system.build()?;
        self.waveform.validate().map_err(|e| Error::Config(format!("waveform: {e}")))?;
        let t = &self.time;
        if !(t.t_final.is_finite() && t.t_final > 0.0) {
            return Err(Error::Config(format!("time.t_final must be positive, got {}", t.t_final)));
        }
        if t.samples < 2 {
            return Err(Error::Config(format!("time.samples must be at least 2, got {}", t.samples)));
        }
        let n = &self.numeric;
        if let Some(dim) = n.truncation {
            if !(4..=1024).contains(&dim) {
                return Err(Error::Config(format!("numeric.truncation must lie in [4, 1024], got {dim}")));
            }
            if n.initial_level >= dim / 2 {
                return Err(Error::Config(format!(
                    "numeric.initial_level {} must lie in the leading half of the basis ({dim})",
                    n.initial_level
                )));
            }
        }
        if !(n.quadrature_tol > 0.0 && n.quadrature_tol.is_finite()) {
            return Err(Error::Config(format!("numeric.quadrature_tol must be positive, got {}", n.quadrature_tol)));
        }
        if !(n.dt > 0.0 && n.dt <= oracle::MAX_STEP) {
            return Err(Error::Config(format!("numeric.dt must lie in (0, {}], got {}", oracle::MAX_STEP, n.dt)));
        }
        if task == Task::Sweep {
            let s = self.sweep.ok_or_else(|| Error::Config("sweep task needs a sweep block".into()))?;
            if s.steps == 0 || !s.start.is_finite() || !s.stop.is_finite() {
                return Err(Error::Config("sweep needs finite start/stop and at least one step".into()));
            }
            match s.parameter {
                SweepParameter::FrequencyRatio if !matches!(self.waveform, FieldWaveform::Rotating { .. }) => {
                    return Err(Error::Config("frequency_ratio sweeps need a rotating waveform".into()));
                }
                SweepParameter::Amplitude
                    if matches!(self.waveform, FieldWaveform::Sampled { .. } | FieldWaveform::Sum { .. }) =>
                {
                    return Err(Error::Config("amplitude sweeps need a single analytic waveform".into()));
                }
                SweepParameter::Amplitude if s.start < 0.0 || s.stop < 0.0 => {
                    return Err(Error::Config("amplitude sweep values must be non-negative".into()));
                }
                _ => {}
            }
        }
        if task == Task::Validate {
            let v = &self.validate;
            if v.truncation < 8 || v.resonance_truncation < 8 {
                return Err(Error::Config("validate truncations must be at least 8".into()));
            }
            let tols = [v.tolerances.factorization, v.tolerances.heisenberg, v.tolerances.guiding_center, v.tolerances.unitarity];
            if tols.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::Config("validate tolerances must be positive".into()));
            }
        }
        Ok(self)
    }

    pub fn time_grid(&self) -> Vec<f64> {
        let n = self.time.samples;
        (0..n)
            .map(|j| if j + 1 == n { self.time.t_final } else { self.time.t_final * j as f64 / (n - 1) as f64 })
            .collect()
    }
}

/// Scales and conversion constants echoed into every report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub units: UnitSystem,
    pub hbar: f64,
    pub light_factor: f64,
    pub elementary_charge: f64,
    pub electron_mass: f64,
    pub cyclotron_frequency: f64,
    pub magnetic_length: f64,
    pub ladder_scale: f64,
    pub field_scale: f64,
}

impl Constants {
    pub fn of(sys: &PhysicalSystem) -> Self {
        let u = sys.units();
        Self {
            units: u,
            hbar: u.hbar(),
            light_factor: u.light_factor(),
            elementary_charge: u.elementary_charge(),
            electron_mass: u.electron_mass(),
            cyclotron_frequency: sys.cyclotron_frequency(),
            magnetic_length: sys.magnetic_length(),
            ladder_scale: sys.ladder_scale(),
            field_scale: sys.field_scale(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRecord {
    pub t: f64,
    pub displacement: Complex64,
    pub magnetic_phase: f64,
    pub amplitude: Complex64,
    pub coherent_phase: f64,
    pub drive_strength: f64,
    pub survival: f64,
    pub populations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Health {
    pub truncation: usize,
    /// Samples whose population sum misses 1 by more than 1e-8.
    pub population_sum_failures: usize,
    pub largest_population_defect: f64,
    /// Samples where the initial level sits outside the trusted block.
    pub truncation_warnings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationReport {
    pub config: RunConfig,
    pub constants: Constants,
    pub health: Health,
    pub records: Vec<SampleRecord>,
}

fn resolve_truncation(cfg: &RunConfig, sys: &PhysicalSystem, opts: &QuadratureOptions, grid: &[f64]) -> Result<usize> {
    if let Some(n) = cfg.numeric.truncation {
        return Ok(n);
    }
    let path = build_drive_path(sys, &cfg.waveform, grid, opts)?;
    let strongest = path
        .amplitude
        .iter()
        .map(|&u| default_truncation(coherent_amplitude(sys.to_internal_length(u))))
        .max()
        .unwrap_or(32);
    Ok(strongest + 2 * cfg.numeric.initial_level)
}

fn sample(
    sys: &PhysicalSystem,
    w: &FieldWaveform,
    t: f64,
    n: usize,
    level: usize,
    opts: &QuadratureOptions,
) -> Result<(SampleRecord, bool)> {
    let p = assemble(sys, w, t, Some(n), opts)?;
    let healthy = level < p.healthy_block();
    // the column is still exact; the flag marks it as untrusted
    let populations: Vec<f64> = p.j_matrix().matrix().column(level).iter().map(|z| z.norm_sqr()).collect();
    Ok((
        SampleRecord {
            t,
            displacement: p.displacement(),
            magnetic_phase: p.magnetic_phase(),
            amplitude: p.amplitude(),
            coherent_phase: p.coherent_phase(),
            drive_strength: p.drive_strength(),
            survival: populations[level],
            populations,
        },
        healthy,
    ))
}

pub fn run_simulate(cfg: &RunConfig) -> Result<SimulationReport> {
    let sys = cfg.system.build()?;
    let opts = cfg.numeric.quadrature();
    let grid = cfg.time_grid();
    let n = resolve_truncation(cfg, &sys, &opts, &grid)?;
    let level = cfg.numeric.initial_level;
    let rows: Vec<(SampleRecord, bool)> = grid
        .par_iter()
        .map(|&t| sample(&sys, &cfg.waveform, t, n, level, &opts))
        .collect::<Result<_>>()?;
    let mut health = Health { truncation: n, ..Default::default() };
    let mut records = Vec::with_capacity(rows.len());
    for (r, healthy) in rows {
        let defect = (r.populations.iter().sum::<f64>() - 1.0).abs();
        health.largest_population_defect = health.largest_population_defect.max(defect);
        if defect > 1e-8 {
            health.population_sum_failures += 1;
        }
        if !healthy {
            health.truncation_warnings += 1;
        }
        records.push(r);
    }
    Ok(SimulationReport { config: cfg.clone(), constants: Constants::of(&sys), health, records })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub survival: f64,
    pub amplitude_modulus: f64,
    pub magnetic_phase: f64,
    pub coherent_phase: f64,
    pub drive_strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub constants: Constants,
    pub rows: Vec<SweepRow>,
}

/// The configured waveform with the swept parameter set to `value`.
pub fn swept_waveform(sys: &PhysicalSystem, w: &FieldWaveform, parameter: SweepParameter, value: f64) -> Result<FieldWaveform> {
    Ok(match (parameter, w) {
        (SweepParameter::FrequencyRatio, FieldWaveform::Rotating { amplitude, phase, .. }) => {
            // co-rotating with the cyclotron motion for either sign of charge
            let sense = if sys.is_reflected() { -1.0 } else { 1.0 };
            FieldWaveform::Rotating { amplitude: *amplitude, frequency: sense * value * sys.cyclotron_frequency(), phase: *phase }
        }
        (SweepParameter::Amplitude, FieldWaveform::Zero) => FieldWaveform::Zero,
        (SweepParameter::Amplitude, FieldWaveform::Constant { e1, e2 }) => {
            let e = Complex64::new(*e1, *e2);
            let dir = if e.norm() > 0.0 { e / e.norm() } else { Complex64::new(1.0, 0.0) };
            FieldWaveform::Constant { e1: value * dir.re, e2: value * dir.im }
        }
        (SweepParameter::Amplitude, FieldWaveform::Rotating { frequency, phase, .. }) => {
            FieldWaveform::Rotating { amplitude: value, frequency: *frequency, phase: *phase }
        }
        (SweepParameter::Amplitude, FieldWaveform::LinearSinusoid { direction, frequency, phase, .. }) => {
            FieldWaveform::LinearSinusoid { amplitude: value, direction: *direction, frequency: *frequency, phase: *phase }
        }
        _ => return Err(Error::Config(format!("cannot sweep {parameter:?} on this waveform"))),
    })
}

pub fn run_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let sys = cfg.system.build()?;
    let opts = cfg.numeric.quadrature();
    let sweep = cfg.sweep.ok_or_else(|| Error::Config("sweep task needs a sweep block".into()))?;
    let level = cfg.numeric.initial_level;
    let t = cfg.time.t_final;
    let values = sweep.values();
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let w = swept_waveform(&sys, &cfg.waveform, sweep.parameter, value)?;
            let probe = assemble(&sys, &w, t, Some(4), &opts)?;
            let n = cfg.numeric.truncation.unwrap_or(default_truncation(probe.alpha()) + 2 * level);
            let p = assemble(&sys, &w, t, Some(n), &opts)?;
            let survival = p.j_matrix().get(level, level).norm_sqr();
            Ok(SweepRow {
                index,
                value,
                survival,
                amplitude_modulus: p.amplitude().norm(),
                magnetic_phase: p.magnetic_phase(),
                coherent_phase: p.coherent_phase(),
                drive_strength: p.drive_strength(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport { config: cfg.clone(), constants: Constants::of(&sys), rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub t: f64,
    pub magnetic_phase: f64,
    pub coherent_phase: f64,
    pub path_area: f64,
    pub amplitude_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasesReport {
    pub config: RunConfig,
    pub constants: Constants,
    pub rows: Vec<PhaseRow>,
}

pub fn run_phases(cfg: &RunConfig) -> Result<PhasesReport> {
    let sys = cfg.system.build()?;
    let p = build_drive_path(&sys, &cfg.waveform, &cfg.time_grid(), &cfg.numeric.quadrature())?;
    let rows = (0..p.len())
        .map(|j| PhaseRow {
            t: p.times[j],
            magnetic_phase: p.magnetic_phase[j],
            coherent_phase: p.coherent_phase[j],
            path_area: p.path_area[j],
            amplitude_area: p.amplitude_area[j],
        })
        .collect();
    Ok(PhasesReport { config: cfg.clone(), constants: Constants::of(&sys), rows })
}

/// Worked numbers for an electron at 15 T in 1000 V/m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkedExample {
    pub coefficient: f64,
    pub quoted_coefficient: f64,
    pub coefficient_relative_error: f64,
    pub duration: f64,
    pub quoted_duration: f64,
    /// True when the quoted duration is off by more than a factor of two.
    pub duration_discrepancy: bool,
}

pub fn worked_example() -> Result<WorkedExample> {
    let sys = PhysicalSystem::electron_si(15.0)?;
    let coefficient = propagator::adiabatic_bound_coefficient(&sys, 1000.0);
    let duration = propagator::adiabatic_duration(&sys, 1000.0);
    let (quoted_coefficient, quoted_duration) = (1.46e-5, 1.71e-3);
    let ratio = duration / quoted_duration;
    Ok(WorkedExample {
        coefficient,
        quoted_coefficient,
        coefficient_relative_error: (coefficient - quoted_coefficient).abs() / quoted_coefficient,
        duration,
        quoted_duration,
        duration_discrepancy: !(0.5..=2.0).contains(&ratio),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceVerdict {
    pub checks: Vec<ResonanceCheck>,
    /// The oracle agrees with e^{−|uk|²} within the factorization tolerance.
    pub half_prefactor_confirmed: bool,
    /// The oracle rules out the prefactor-2 variant.
    pub literal_prefactor_rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub config: RunConfig,
    pub cases: Vec<CaseReport>,
    pub failures: Vec<String>,
    pub convergence: ConvergenceCheck,
    pub convergence_ok: bool,
    pub resonance: ResonanceVerdict,
    pub worked_example: WorkedExample,
    pub passed: bool,
}

pub fn run_validate(cfg: &RunConfig) -> Result<ValidationReport> {
    let v = cfg.validate;
    let sys = PhysicalSystem::natural();
    let integ = IntegratorConfig {
        dt: cfg.numeric.dt,
        truncation: v.truncation + oracle::HEADROOM,
        scheme: v.scheme,
        tolerance: v.tolerances.unitarity.max(v.tolerances.factorization),
    };
    let corpus = oracle::validation_corpus();
    let cases: Vec<CaseReport> = corpus
        .par_iter()
        .map(|c| oracle::validate_case(&sys, c, v.truncation, &integ, v.tamper))
        .collect::<Result<_>>()?;
    let mut failures = Vec::new();
    for c in &cases {
        for f in c.failures(&v.tolerances) {
            failures.push(format!("{}: {f}", c.name));
        }
    }
    let reference = &corpus[3];
    let convergence = oracle::convergence_check(&sys, &reference.waveform, reference.t, v.truncation, &integ)?;
    let convergence_ok = match v.scheme {
        Scheme::Rk4 => convergence.ratios.iter().all(|r| (12.0..=20.0).contains(r)),
        Scheme::MidpointExponential => convergence.ratios.iter().all(|r| (3.0..=5.0).contains(r)),
    };
    if !convergence_ok {
        failures.push(format!("convergence ratios {:?}", convergence.ratios));
    }
    let res_cfg = IntegratorConfig { truncation: v.resonance_truncation, ..integ };
    let e0 = 0.1;
    let checks: Vec<ResonanceCheck> = [0.5_f64, 1.0, 2.0, 4.0]
        .par_iter()
        .map(|&x| oracle::resonance_check(&sys, e0, (2.0 * x).sqrt() / e0, &res_cfg))
        .collect::<Result<_>>()?;
    let resonance = ResonanceVerdict {
        half_prefactor_confirmed: checks.iter().all(|c| c.error < v.tolerances.factorization),
        literal_prefactor_rejected: checks.iter().all(|c| c.literal_error > 1e3 * v.tolerances.factorization),
        checks,
    };
    if !resonance.half_prefactor_confirmed {
        failures.push("resonance survival".into());
    }
    let worked_example = worked_example()?;
    if worked_example.coefficient_relative_error > 0.02 {
        failures.push("worked example coefficient".into());
    }
    Ok(ValidationReport {
        config: cfg.clone(),
        cases,
        passed: failures.is_empty(),
        failures,
        convergence,
        convergence_ok,
        resonance,
        worked_example,
    })
}

fn num(x: f64) -> String {
    // drop the sign of negative zero
    format!("{}", x + 0.0)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Writes the simulate tables: samples.csv, populations.csv and optionally
/// plot.gp; report.json holds the records only in JSON mode.
pub fn write_simulation(report: &SimulationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let out = &report.config.output;
    if out.format == Format::Csv {
        let header = strings(&[
            "t", "R_re", "R_im", "beta", "u_re", "u_im", "gamma", "drive_strength", "survival",
        ]);
        let path = dir.join("samples.csv");
        write_csv(
            &path,
            &header,
            report.records.iter().map(|r| {
                vec![
                    num(r.t),
                    num(r.displacement.re),
                    num(r.displacement.im),
                    num(r.magnetic_phase),
                    num(r.amplitude.re),
                    num(r.amplitude.im),
                    num(r.coherent_phase),
                    num(r.drive_strength),
                    num(r.survival),
                ]
            }),
        )?;
        written.push(path);
        let mut header = vec!["t".to_string()];
        header.extend((0..report.health.truncation).map(|m| format!("P{m}")));
        let path = dir.join("populations.csv");
        write_csv(
            &path,
            &header,
            report.records.iter().map(|r| {
                let mut row = vec![num(r.t)];
                row.extend(r.populations.iter().map(|&p| num(p)));
                row
            }),
        )?;
        written.push(path);
        let path = dir.join("report.json");
        let summary = serde_json::json!({
            "config": report.config,
            "constants": report.constants,
            "health": report.health,
        });
        write_json(&path, &summary)?;
        written.push(path);
    } else {
        let path = dir.join("report.json");
        write_json(&path, report)?;
        written.push(path);
    }
    if out.gnuplot {
        let path = dir.join("plot.gp");
        let script = "set datafile separator ','\n\
                      set key autotitle columnhead\n\
                      set xlabel 't'\n\
                      set ylabel 'survival'\n\
                      plot 'samples.csv' using 1:9 with lines\n";
        fs::write(&path, script).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let out = &report.config.output;
    if out.format == Format::Csv {
        let header = strings(&["index", "value", "survival", "abs_u", "beta", "gamma", "drive_strength"]);
        let path = dir.join("sweep.csv");
        write_csv(
            &path,
            &header,
            report.rows.iter().map(|r| {
                vec![
                    r.index.to_string(),
                    num(r.value),
                    num(r.survival),
                    num(r.amplitude_modulus),
                    num(r.magnetic_phase),
                    num(r.coherent_phase),
                    num(r.drive_strength),
                ]
            }),
        )?;
        written.push(path);
    } else {
        let path = dir.join("sweep.json");
        write_json(&path, report)?;
        written.push(path);
    }
    if out.gnuplot {
        let path = dir.join("plot.gp");
        let script = "set datafile separator ','\n\
                      set key autotitle columnhead\n\
                      set xlabel 'parameter'\n\
                      set ylabel 'survival'\n\
                      plot 'sweep.csv' using 2:3 with linespoints\n";
        fs::write(&path, script).map_err(|e| io_err(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

pub fn write_phases(report: &PhasesReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let path = if report.config.output.format == Format::Csv {
        let p = dir.join("phases.csv");
        let header = strings(&["t", "beta", "gamma", "S_R", "S_u"]);
        write_csv(
            &p,
            &header,
            report.rows.iter().map(|r| {
                vec![num(r.t), num(r.magnetic_phase), num(r.coherent_phase), num(r.path_area), num(r.amplitude_area)]
            }),
        )?;
        p
    } else {
        let p = dir.join("phases.json");
        write_json(&p, report)?;
        p
    };
    Ok(vec![path])
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Config = 1,
    Numeric = 2,
}

impl From<&Error> for Exit {
    fn from(e: &Error) -> Self {
        if e.is_config() {
            Exit::Config
        } else {
            Exit::Numeric
        }
    }
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    command: &'a str,
    version: &'a str,
    elapsed_seconds: f64,
    files: Vec<String>,
}

/// Runs one parsed invocation; messages go to stderr.
pub fn execute(cli: &Cli) -> Exit {
    match execute_inner(cli) {
        Ok(exit) => exit,
        Err(e) => {
            eprintln!("error: {e}");
            Exit::from(&e)
        }
    }
}

fn execute_inner(cli: &Cli) -> Result<Exit> {
    let start = Instant::now();
    if cli.seed.is_some() {
        eprintln!("warning: --seed is ignored; runs are deterministic");
    }
    let task = Task::from(cli.command);
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None if task == Task::Validate => RunConfig::default(),
        None => return Err(Error::Config("--config is required".into())),
    };
    let mut cfg = cfg.resolve(task)?;
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let (name, files, exit) = match task {
        Task::Simulate => {
            let r = run_simulate(&cfg)?;
            let exit = if r.health.population_sum_failures > 0 { Exit::Numeric } else { Exit::Success };
            if r.health.truncation_warnings > 0 {
                eprintln!("warning: {} samples have the initial level outside the trusted block", r.health.truncation_warnings);
            }
            ("simulate", write_simulation(&r, &dir)?, exit)
        }
        Task::Sweep => ("sweep", write_sweep(&run_sweep(&cfg)?, &dir)?, Exit::Success),
        Task::Phases => ("phases", write_phases(&run_phases(&cfg)?, &dir)?, Exit::Success),
        Task::Validate => {
            let r = run_validate(&cfg)?;
            let path = dir.join("validation.json");
            write_json(&path, &r)?;
            for c in &r.cases {
                eprintln!(
                    "{:<24} factorization {:.2e}  heisenberg {:.2e}/{:.2e}  guiding-center {:.2e}",
                    c.name, c.factorization, c.heisenberg_factorized, c.heisenberg_numeric, c.guiding_center
                );
            }
            eprintln!("convergence ratios {:.2} {:.2}", r.convergence.ratios[0], r.convergence.ratios[1]);
            eprintln!(
                "resonance: exp(-|uk|^2) confirmed {}, prefactor-2 variant rejected {}",
                r.resonance.half_prefactor_confirmed, r.resonance.literal_prefactor_rejected
            );
            if r.worked_example.duration_discrepancy {
                eprintln!(
                    "flag: quoted sweep duration {:e} s differs from recomputed {:e} s",
                    r.worked_example.quoted_duration, r.worked_example.duration
                );
            }
            for f in &r.failures {
                eprintln!("FAIL {f}");
            }
            let exit = if r.passed { Exit::Success } else { Exit::Numeric };
            ("validate", vec![path], exit)
        }
    };
    let meta = Meta {
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        elapsed_seconds: start.elapsed().as_secs_f64(),
        files: files.iter().map(|p| p.display().to_string()).collect(),
    };
    write_json(&dir.join("meta.json"), &meta)?;
    Ok(exit)
}

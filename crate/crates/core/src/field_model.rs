//! Physical system, electric-field waveforms and the guiding-center path.
//!
//! All user-facing quantities are expressed in the unit system chosen when the
//! [`PhysicalSystem`] is built. Internally every computation runs in natural
//! units where ħ = m = 1 and qB/c = 1, so that the cyclotron frequency and the
//! magnetic length are both 1 and the ladder scale is √2. Time is measured in
//! units of 1/ω, lengths in units of l_B and the electric field is carried as
//! the drift velocity cE/B in units of l_B·ω.
//!
//! For a negative charge the frame is reflected (e₂ → −e₂) so that the
//! internal formulas always see qB > 0. Complex field and path values are
//! conjugated on the way in and on the way out.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod constants {
    pub const HBAR_SI: f64 = 1.054_571_817e-34;
    pub const ELEMENTARY_CHARGE_SI: f64 = 1.602_176_634e-19;
    pub const ELECTRON_MASS_SI: f64 = 9.109_383_701_5e-31;

    pub const HBAR_CGS: f64 = 1.054_571_817e-27;
    pub const SPEED_OF_LIGHT_CGS: f64 = 2.997_924_58e10;
    pub const ELEMENTARY_CHARGE_CGS: f64 = 4.803_204_712_570_263e-10;
    pub const ELECTRON_MASS_CGS: f64 = 9.109_383_701_5e-28;

    /// Gauss per tesla.
    pub const GAUSS_PER_TESLA: f64 = 1.0e4;
    /// statvolt/cm per V/m.
    pub const STATVOLT_PER_CM_PER_VOLT_PER_M: f64 = 1.0e6 / 2.997_924_58e10;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitSystem {
    /// Coulomb, tesla, kilogram, second, metre, V/m.
    Si,
    /// statcoulomb, gauss, gram, second, centimetre, statvolt/cm.
    Gaussian,
    /// ħ = c = 1; a unit charge in a unit field with unit mass has ω = l_B = 1.
    Natural,
}

impl UnitSystem {
    pub fn hbar(self) -> f64 {
        match self {
            UnitSystem::Si => constants::HBAR_SI,
            UnitSystem::Gaussian => constants::HBAR_CGS,
            UnitSystem::Natural => 1.0,
        }
    }

    /// The factor that multiplies E/B in the drift velocity (c in Gaussian
    /// units, 1 in SI).
    pub fn light_factor(self) -> f64 {
        match self {
            UnitSystem::Si => 1.0,
            UnitSystem::Gaussian => constants::SPEED_OF_LIGHT_CGS,
            UnitSystem::Natural => 1.0,
        }
    }

    pub fn elementary_charge(self) -> f64 {
        match self {
            UnitSystem::Si => constants::ELEMENTARY_CHARGE_SI,
            UnitSystem::Gaussian => constants::ELEMENTARY_CHARGE_CGS,
            UnitSystem::Natural => 1.0,
        }
    }

    pub fn electron_mass(self) -> f64 {
        match self {
            UnitSystem::Si => constants::ELECTRON_MASS_SI,
            UnitSystem::Gaussian => constants::ELECTRON_MASS_CGS,
            UnitSystem::Natural => 1.0,
        }
    }
}

/// A charged particle of mass `mass` in a uniform field `magnetic_field`
/// along e₃.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalSystem {
    charge: f64,
    magnetic_field: f64,
    mass: f64,
    units: UnitSystem,
    cyclotron_frequency: f64,
    magnetic_length: f64,
    ladder_scale: f64,
    reflected: bool,
}

impl PhysicalSystem {
    pub fn new(charge: f64, magnetic_field: f64, mass: f64, units: UnitSystem) -> Result<Self> {
        if !charge.is_finite() || charge == 0.0 {
            return Err(Error::InvalidSystem(format!("charge must be finite and nonzero, got {charge}")));
        }
        if !magnetic_field.is_finite() || magnetic_field <= 0.0 {
            return Err(Error::InvalidSystem(format!(
                "magnetic field must be finite and positive, got {magnetic_field}"
            )));
        }
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::InvalidSystem(format!("mass must be finite and positive, got {mass}")));
        }
        let c = units.light_factor();
        let hbar = units.hbar();
        let qb = charge.abs() * magnetic_field;
        let cyclotron_frequency = qb / (mass * c);
        let magnetic_length = (hbar * c / qb).sqrt();
        let ladder_scale = (2.0 * qb / (hbar * c)).sqrt();
        if !(cyclotron_frequency.is_finite() && magnetic_length.is_finite() && ladder_scale.is_finite())
            || cyclotron_frequency == 0.0
            || magnetic_length == 0.0
        {
            return Err(Error::InvalidSystem("derived scales are not representable".into()));
        }
        Ok(Self {
            charge,
            magnetic_field,
            mass,
            units,
            cyclotron_frequency,
            magnetic_length,
            ladder_scale,
            reflected: charge < 0.0,
        })
    }

    /// Unit charge, unit field, unit mass in natural units: ω = l_B = 1.
    pub fn natural() -> Self {
        Self::new(1.0, 1.0, 1.0, UnitSystem::Natural).expect("natural system is valid")
    }

    /// Charge in multiples of e, field in tesla, mass in electron masses.
    pub fn si(charge_in_e: f64, field_tesla: f64, mass_in_me: f64) -> Result<Self> {
        Self::new(
            charge_in_e * constants::ELEMENTARY_CHARGE_SI,
            field_tesla,
            mass_in_me * constants::ELECTRON_MASS_SI,
            UnitSystem::Si,
        )
    }

    pub fn electron_si(field_tesla: f64) -> Result<Self> {
        Self::si(-1.0, field_tesla, 1.0)
    }

    pub fn charge(&self) -> f64 {
        self.charge
    }

    pub fn magnetic_field(&self) -> f64 {
        self.magnetic_field
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    /// ω = |q|B/(mc), in rad per user time unit.
    pub fn cyclotron_frequency(&self) -> f64 {
        self.cyclotron_frequency
    }

    /// l_B = √(ħc/|q|B).
    pub fn magnetic_length(&self) -> f64 {
        self.magnetic_length
    }

    /// k = √(2|q|B/ħc).
    pub fn ladder_scale(&self) -> f64 {
        self.ladder_scale
    }

    /// True when the internal frame is the mirror image of the user frame.
    pub fn is_reflected(&self) -> bool {
        self.reflected
    }

    /// Signed qB/(ħc) in user units, the factor relating phases to areas.
    pub fn flux_coupling(&self) -> f64 {
        self.charge * self.magnetic_field / (self.units.hbar() * self.units.light_factor())
    }

    pub fn to_internal_time(&self, t: f64) -> f64 {
        t * self.cyclotron_frequency
    }

    pub fn from_internal_time(&self, tau: f64) -> f64 {
        tau / self.cyclotron_frequency
    }

    /// Internal field units per user field unit.
    pub fn field_scale(&self) -> f64 {
        self.units.light_factor() / (self.magnetic_field * self.magnetic_length * self.cyclotron_frequency)
    }

    /// Drift velocity (c/B)E in internal units. In the reflected frame the
    /// field is conjugated and B changes sign, hence the extra minus.
    pub fn to_internal_field(&self, e: Complex64) -> Complex64 {
        let e = if self.reflected { -e.conj() } else { e };
        e * self.field_scale()
    }

    pub fn from_internal_field(&self, e: Complex64) -> Complex64 {
        let e = e / self.field_scale();
        if self.reflected {
            -e.conj()
        } else {
            e
        }
    }

    pub fn from_internal_length(&self, z: Complex64) -> Complex64 {
        self.orient(z) * self.magnetic_length
    }

    pub fn to_internal_length(&self, z: Complex64) -> Complex64 {
        self.orient(z / self.magnetic_length)
    }

    /// Signed areas flip under the frame reflection.
    pub fn from_internal_area(&self, s: f64) -> f64 {
        let s = s * self.magnetic_length * self.magnetic_length;
        if self.reflected {
            -s
        } else {
            s
        }
    }

    fn orient(&self, z: Complex64) -> Complex64 {
        if self.reflected {
            z.conj()
        } else {
            z
        }
    }
}

/// Sampled field values (t, E1, E2) with linear interpolation between nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 3]>", into = "Vec<[f64; 3]>")]
pub struct SampledField {
    times: Vec<f64>,
    values: Vec<Complex64>,
    // running integral of the interpolant from the first node
    cumulative: Vec<Complex64>,
}

impl SampledField {
    pub fn new(samples: Vec<[f64; 3]>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidWaveform("sampled waveform needs at least two samples".into()));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWaveform("sampled waveform contains non-finite values".into()));
        }
        if samples.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(Error::InvalidWaveform("sample times must be strictly increasing".into()));
        }
        let times: Vec<f64> = samples.iter().map(|s| s[0]).collect();
        let values: Vec<Complex64> = samples.iter().map(|s| Complex64::new(s[1], s[2])).collect();
        let mut cumulative = Vec::with_capacity(times.len());
        cumulative.push(Complex64::new(0.0, 0.0));
        for j in 1..times.len() {
            let h = times[j] - times[j - 1];
            let prev = cumulative[j - 1];
            cumulative.push(prev + (values[j] + values[j - 1]) * (0.5 * h));
        }
        Ok(Self { times, values, cumulative })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().unwrap())
    }

    fn check(&self, t: f64) -> Result<()> {
        let (start, end) = self.domain();
        if !(t >= start && t <= end) {
            return Err(Error::Domain { t, start, end });
        }
        Ok(())
    }

    fn segment(&self, t: f64) -> usize {
        // index j with times[j] <= t <= times[j + 1]
        let idx = self.times.partition_point(|&x| x <= t);
        idx.saturating_sub(1).min(self.times.len() - 2)
    }

    pub fn eval(&self, t: f64) -> Result<Complex64> {
        self.check(t)?;
        let j = self.segment(t);
        let (t0, t1) = (self.times[j], self.times[j + 1]);
        let s = (t - t0) / (t1 - t0);
        Ok(self.values[j] * (1.0 - s) + self.values[j + 1] * s)
    }

    /// Exact integral of the interpolant from the first node to `t`.
    fn integral_from_start(&self, t: f64) -> Result<Complex64> {
        self.check(t)?;
        let j = self.segment(t);
        let t0 = self.times[j];
        let h = t - t0;
        let e0 = self.values[j];
        let e = self.eval(t)?;
        Ok(self.cumulative[j] + (e0 + e) * (0.5 * h))
    }

    pub fn integral(&self, a: f64, b: f64) -> Result<Complex64> {
        Ok(self.integral_from_start(b)? - self.integral_from_start(a)?)
    }

    fn map(&self, time_scale: f64, f: impl Fn(Complex64) -> Complex64) -> Self {
        let samples = self
            .times
            .iter()
            .zip(&self.values)
            .map(|(&t, &v)| {
                let v = f(v);
                [t * time_scale, v.re, v.im]
            })
            .collect();
        Self::new(samples).expect("mapping preserves validity")
    }
}

impl TryFrom<Vec<[f64; 3]>> for SampledField {
    type Error = Error;

    fn try_from(samples: Vec<[f64; 3]>) -> Result<Self> {
        Self::new(samples)
    }
}

impl From<SampledField> for Vec<[f64; 3]> {
    fn from(s: SampledField) -> Self {
        s.times.iter().zip(&s.values).map(|(&t, v)| [t, v.re, v.im]).collect()
    }
}

/// The in-plane electric field E(t) = E1(t) + iE2(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FieldWaveform {
    Zero,
    Constant {
        e1: f64,
        e2: f64,
    },
    /// E(t) = amplitude · e^{i phase} · e^{−i frequency t}.
    Rotating {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// E(t) = amplitude · e^{i direction} · cos(frequency t + phase).
    LinearSinusoid {
        amplitude: f64,
        direction: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Sampled {
        samples: SampledField,
    },
    Sum {
        terms: Vec<FieldWaveform>,
    },
}

/// One term a·e^{−iνt} of a multi-tone field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub amplitude: Complex64,
    pub frequency: f64,
}

impl FieldWaveform {
    pub fn rotating(amplitude: f64, frequency: f64) -> Self {
        FieldWaveform::Rotating { amplitude, frequency, phase: 0.0 }
    }

    pub fn sampled(samples: Vec<[f64; 3]>) -> Result<Self> {
        Ok(FieldWaveform::Sampled { samples: SampledField::new(samples)? })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidWaveform(format!("{name} must be finite, got {v}")))
            }
        };
        match self {
            FieldWaveform::Zero | FieldWaveform::Sampled { .. } => Ok(()),
            FieldWaveform::Constant { e1, e2 } => {
                finite("e1", *e1)?;
                finite("e2", *e2)
            }
            FieldWaveform::Rotating { amplitude, frequency, phase } => {
                finite("amplitude", *amplitude)?;
                finite("frequency", *frequency)?;
                finite("phase", *phase)?;
                if *amplitude < 0.0 {
                    return Err(Error::InvalidWaveform(format!(
                        "rotating amplitude must be non-negative, got {amplitude}"
                    )));
                }
                Ok(())
            }
            FieldWaveform::LinearSinusoid { amplitude, direction, frequency, phase } => {
                finite("amplitude", *amplitude)?;
                finite("direction", *direction)?;
                finite("frequency", *frequency)?;
                finite("phase", *phase)
            }
            FieldWaveform::Sum { terms } => terms.iter().try_for_each(|w| w.validate()),
        }
    }

    /// Closed interval on which the waveform is defined.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            FieldWaveform::Sampled { samples } => samples.domain(),
            FieldWaveform::Sum { terms } => terms.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |acc, w| {
                let (a, b) = w.domain();
                (acc.0.max(a), acc.1.min(b))
            }),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn check_domain(&self, t: f64) -> Result<()> {
        let (start, end) = self.domain();
        if !(t >= start && t <= end) {
            return Err(Error::Domain { t, start, end });
        }
        Ok(())
    }

    /// Times where the waveform has a kink (sample nodes), sorted.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_breakpoints(&mut out);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn collect_breakpoints(&self, out: &mut Vec<f64>) {
        match self {
            FieldWaveform::Sampled { samples } => out.extend_from_slice(samples.times()),
            FieldWaveform::Sum { terms } => terms.iter().for_each(|w| w.collect_breakpoints(out)),
            _ => {}
        }
    }

    /// Decomposition into tones when the waveform is a finite sum of
    /// complex exponentials; `None` if any part is sampled.
    pub fn tones(&self) -> Option<Vec<Tone>> {
        match self {
            FieldWaveform::Zero => Some(Vec::new()),
            FieldWaveform::Constant { e1, e2 } => {
                Some(vec![Tone { amplitude: Complex64::new(*e1, *e2), frequency: 0.0 }])
            }
            FieldWaveform::Rotating { amplitude, frequency, phase } => Some(vec![Tone {
                amplitude: Complex64::from_polar(*amplitude, *phase),
                frequency: *frequency,
            }]),
            FieldWaveform::LinearSinusoid { amplitude, direction, frequency, phase } => {
                let half = 0.5 * amplitude;
                Some(vec![
                    Tone { amplitude: Complex64::from_polar(half, direction + phase), frequency: -frequency },
                    Tone { amplitude: Complex64::from_polar(half, direction - phase), frequency: *frequency },
                ])
            }
            FieldWaveform::Sampled { .. } => None,
            FieldWaveform::Sum { terms } => {
                let mut all = Vec::new();
                for w in terms {
                    all.extend(w.tones()?);
                }
                Some(all)
            }
        }
    }

    /// Largest angular frequency present, 0 for sampled or static fields.
    pub fn max_frequency(&self) -> f64 {
        self.tones()
            .map(|t| t.iter().fold(0.0_f64, |m, tone| m.max(tone.frequency.abs())))
            .unwrap_or_else(|| match self {
                FieldWaveform::Sum { terms } => terms.iter().fold(0.0_f64, |m, w| m.max(w.max_frequency())),
                _ => 0.0,
            })
    }

    /// The same waveform expressed in internal units for `sys`.
    pub fn to_internal(&self, sys: &PhysicalSystem) -> FieldWaveform {
        let scale = sys.field_scale();
        let omega = sys.cyclotron_frequency();
        let reflected = sys.is_reflected();
        // −conj(e^{iθ}) = e^{i(π−θ)}
        let angle = |theta: f64| if reflected { PI - theta } else { theta };
        match self {
            FieldWaveform::Zero => FieldWaveform::Zero,
            FieldWaveform::Constant { e1, e2 } => {
                let e = sys.to_internal_field(Complex64::new(*e1, *e2));
                FieldWaveform::Constant { e1: e.re, e2: e.im }
            }
            FieldWaveform::Rotating { amplitude, frequency, phase } => FieldWaveform::Rotating {
                amplitude: amplitude * scale,
                frequency: if reflected { -frequency / omega } else { frequency / omega },
                phase: angle(*phase),
            },
            FieldWaveform::LinearSinusoid { amplitude, direction, frequency, phase } => {
                FieldWaveform::LinearSinusoid {
                    amplitude: amplitude * scale,
                    direction: angle(*direction),
                    frequency: frequency / omega,
                    phase: *phase,
                }
            }
            FieldWaveform::Sampled { samples } => FieldWaveform::Sampled {
                samples: samples.map(omega, |v| sys.to_internal_field(v)),
            },
            FieldWaveform::Sum { terms } => FieldWaveform::Sum {
                terms: terms.iter().map(|w| w.to_internal(sys)).collect(),
            },
        }
    }
}

/// E(t) = E1(t) + iE2(t).
pub fn eval_field(w: &FieldWaveform, t: f64) -> Result<Complex64> {
    Ok(match w {
        FieldWaveform::Zero => Complex64::new(0.0, 0.0),
        FieldWaveform::Constant { e1, e2 } => Complex64::new(*e1, *e2),
        FieldWaveform::Rotating { amplitude, frequency, phase } => {
            Complex64::from_polar(*amplitude, phase - frequency * t)
        }
        FieldWaveform::LinearSinusoid { amplitude, direction, frequency, phase } => {
            Complex64::from_polar(*amplitude, *direction) * (frequency * t + phase).cos()
        }
        FieldWaveform::Sampled { samples } => samples.eval(t)?,
        FieldWaveform::Sum { terms } => {
            let mut acc = Complex64::new(0.0, 0.0);
            for w in terms {
                acc += eval_field(w, t)?;
            }
            acc
        }
    })
}

/// ∫₀ᵗ e^{iλs} ds without cancellation for small λt.
pub(crate) fn exp_integral(lambda: f64, t: f64) -> Complex64 {
    let x = lambda * t;
    if x.abs() < 1e-3 {
        // t·(1 + ix/2 − x²/6 − ix³/24 + x⁴/120)
        let ix = Complex64::new(0.0, x);
        let series = Complex64::new(1.0, 0.0) + ix / 2.0 + ix * ix / 6.0 + ix * ix * ix / 24.0 + ix.powi(4) / 120.0;
        return series * t;
    }
    let half = 0.5 * x;
    let em1 = Complex64::new(-2.0 * half.sin() * half.sin(), x.sin());
    em1 / Complex64::new(0.0, lambda)
}

/// Guiding-center displacement in internal units: Ṙ = −iE, R(0) = 0.
pub(crate) fn internal_path(w: &FieldWaveform, tau: f64) -> Result<Complex64> {
    let minus_i = Complex64::new(0.0, -1.0);
    Ok(match w {
        FieldWaveform::Sampled { samples } => minus_i * samples.integral(0.0, tau)?,
        FieldWaveform::Sum { terms } => {
            let mut acc = Complex64::new(0.0, 0.0);
            for w in terms {
                acc += internal_path(w, tau)?;
            }
            acc
        }
        other => {
            let tones = other.tones().expect("non-sampled waveforms have tones");
            tones
                .iter()
                .map(|tone| minus_i * tone.amplitude * exp_integral(-tone.frequency, tau))
                .sum()
        }
    })
}

/// R(t) = (c/B)∫₀ᵗ (E2 e₁ − E1 e₂) ds as the complex number R1 + iR2, in user
/// length units.
pub fn guiding_center_path(sys: &PhysicalSystem, w: &FieldWaveform, t: f64) -> Result<Complex64> {
    w.validate()?;
    if t < 0.0 {
        return Err(Error::InvalidArgument(format!("time must be non-negative, got {t}")));
    }
    w.check_domain(0.0)?;
    w.check_domain(t)?;
    let internal = w.to_internal(sys);
    let r = internal_path(&internal, sys.to_internal_time(t))?;
    Ok(sys.from_internal_length(r))
}

/// Radius of the circle traced by R(t) for a rotating field, c|E0|/(|ν|B).
pub fn rotating_radius(sys: &PhysicalSystem, amplitude: f64, frequency: f64) -> f64 {
    sys.units().light_factor() * amplitude / (frequency.abs() * sys.magnetic_field())
}

//! Windy-air channel: Gaussian puff (transient) and plume (steady) mean
//! concentration fields with ground reflection.
//!
//! Coordinates are source-local with `x` along the horizontal wind; heights
//! are absolute and the ground is `z = 0`. Only mean fields are modelled.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::scenario::Environment;

/// Travel distance below which sigmas are held constant.
pub const MIN_TRAVEL: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    A,
    B,
    C,
    D,
    E,
    F,
}

/// `σ(x) = a · x^b · (1 + c·x)^(−p)`, `x` and `σ` in metres.
///
/// Pure power laws have `c = 0`; the shipped tables use `b = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaLaw {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub p: f64,
}

impl SigmaLaw {
    pub const fn power(a: f64, b: f64) -> Self {
        Self { a, b, c: 0.0, p: 0.0 }
    }

    const fn briggs(a: f64, c: f64, p: f64) -> Self {
        Self { a, b: 1.0, c, p }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.a * x.powf(self.b) * (1.0 + self.c * x).powf(-self.p)
    }

    /// True when `σ` is positive and strictly increasing for all `x > 0`.
    pub fn is_valid(&self) -> bool {
        self.a > 0.0 && self.b > 0.0 && self.b < 1.5 && self.c >= 0.0 && self.p >= 0.0
            && (self.c == 0.0 || self.p <= self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "DispersionInput")]
pub struct DispersionParams {
    pub stability_class: StabilityClass,
    pub sigma_y: SigmaLaw,
    pub sigma_z: SigmaLaw,
}

impl DispersionParams {
    /// Open-country coefficients (Briggs) for a Pasquill class.
    pub fn for_class(class: StabilityClass) -> Self {
        use StabilityClass::*;
        let (sy, sz) = match class {
            A => (SigmaLaw::briggs(0.22, 1e-4, 0.5), SigmaLaw::power(0.20, 1.0)),
            B => (SigmaLaw::briggs(0.16, 1e-4, 0.5), SigmaLaw::power(0.12, 1.0)),
            C => (SigmaLaw::briggs(0.11, 1e-4, 0.5), SigmaLaw::briggs(0.08, 2e-4, 0.5)),
            D => (SigmaLaw::briggs(0.08, 1e-4, 0.5), SigmaLaw::briggs(0.06, 1.5e-3, 0.5)),
            E => (SigmaLaw::briggs(0.06, 1e-4, 0.5), SigmaLaw::briggs(0.03, 3e-4, 1.0)),
            F => (SigmaLaw::briggs(0.04, 1e-4, 0.5), SigmaLaw::briggs(0.016, 3e-4, 1.0)),
        };
        Self {
            stability_class: class,
            sigma_y: sy,
            sigma_z: sz,
        }
    }
}

/// A stability class, optionally with replacement sigma laws.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DispersionInput {
    stability_class: StabilityClass,
    sigma_y: Option<SigmaLaw>,
    sigma_z: Option<SigmaLaw>,
}

impl Default for DispersionInput {
    fn default() -> Self {
        Self {
            stability_class: StabilityClass::D,
            sigma_y: None,
            sigma_z: None,
        }
    }
}

impl From<DispersionInput> for DispersionParams {
    fn from(i: DispersionInput) -> Self {
        let table = Self::for_class(i.stability_class);
        Self {
            stability_class: i.stability_class,
            sigma_y: i.sigma_y.unwrap_or(table.sigma_y),
            sigma_z: i.sigma_z.unwrap_or(table.sigma_z),
        }
    }
}

impl Default for DispersionParams {
    fn default() -> Self {
        Self::for_class(StabilityClass::D)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sigmas {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Dispersion widths at downwind distance `x`; `σ_x = σ_y`.
pub fn dispersion_sigmas(downwind_x: f64, params: &DispersionParams) -> Result<Sigmas> {
    if !(downwind_x > 0.0) {
        return Err(Error::domain(format!(
            "downwind distance must be positive, got {downwind_x}"
        )));
    }
    let y = params.sigma_y.eval(downwind_x);
    Ok(Sigmas {
        x: y,
        y,
        z: params.sigma_z.eval(downwind_x),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointSource {
    pub position: Vec3,
    /// Droplets for a puff, droplets/s for a plume.
    pub strength: f64,
    pub release_time: f64,
}

struct WindFrame {
    along: Vec3,
    across: Vec3,
    speed: f64,
}

impl WindFrame {
    fn new(env: &Environment) -> Self {
        let w = env.wind_velocity;
        let speed = w.horizontal_norm();
        let along = if speed > 0.0 {
            Vec3::new(w.x / speed, w.y / speed, 0.0)
        } else {
            Vec3::X
        };
        Self {
            along,
            across: Vec3::new(-along.y, along.x, 0.0),
            speed,
        }
    }

    fn local(&self, src: Vec3, point: Vec3) -> (f64, f64) {
        let d = point - src;
        (d.dot(self.along), d.dot(self.across))
    }
}

fn vertical_term(z: f64, h: f64, sigma_z: f64) -> f64 {
    let s2 = 2.0 * sigma_z * sigma_z;
    (-(z - h).powi(2) / s2).exp() + (-(z + h).powi(2) / s2).exp()
}

/// Concentration (droplets/m³) at `point` and time `t` from an instantaneous release.
pub fn puff_concentration(
    src: &PointSource,
    env: &Environment,
    point: Vec3,
    t: f64,
    params: &DispersionParams,
) -> Result<f64> {
    let age = t - src.release_time;
    if !(age > 0.0) {
        return Err(Error::domain(format!(
            "puff evaluated at t = {t} s, not after its release at {} s",
            src.release_time
        )));
    }
    if src.strength == 0.0 {
        return Ok(0.0);
    }
    let frame = WindFrame::new(env);
    let travel = frame.speed * age;
    let s = dispersion_sigmas(travel.max(MIN_TRAVEL), params)?;
    let (x, y) = frame.local(src.position, point);
    let mass = src.strength * (-env.pathogen_decay_rate * age).exp();
    let norm = (2.0 * PI).powf(1.5) * s.x * s.y * s.z;
    Ok(mass / norm
        * (-(x - travel).powi(2) / (2.0 * s.x * s.x)).exp()
        * (-y * y / (2.0 * s.y * s.y)).exp()
        * vertical_term(point.z, src.position.z, s.z))
}

/// Steady-state concentration (droplets/m³) from a continuous source.
///
/// Points at or upwind of the source receive nothing. Pathogen decay is not
/// applied to the steady plume.
pub fn plume_concentration(
    src: &PointSource,
    env: &Environment,
    point: Vec3,
    params: &DispersionParams,
) -> Result<f64> {
    let frame = WindFrame::new(env);
    if !(frame.speed > 0.0) {
        return Err(Error::domain(
            "plume undefined in still air; use cloud or puff",
        ));
    }
    let (x, y) = frame.local(src.position, point);
    if x <= 0.0 || src.strength == 0.0 {
        return Ok(0.0);
    }
    let s = dispersion_sigmas(x, params)?;
    Ok(src.strength / (2.0 * PI * frame.speed * s.y * s.z)
        * (-y * y / (2.0 * s.y * s.y)).exp()
        * vertical_term(point.z, src.position.z, s.z))
}

/// Trapezoidal integral of `breathing_rate · C(t)`.
pub fn inhaled_dose(concentration_series: &[(f64, f64)], breathing_rate: f64) -> Result<f64> {
    if concentration_series
        .windows(2)
        .any(|w| !(w[1].0 >= w[0].0))
    {
        return Err(Error::domain("concentration series is not time-ordered"));
    }
    Ok(concentration_series
        .windows(2)
        .map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0))
        .sum::<f64>()
        * breathing_rate)
}

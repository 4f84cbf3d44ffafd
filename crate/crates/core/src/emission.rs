//! Transmitter: respiratory activities and the droplets they release.
//!
//! Initial speeds for coughing (10 m/s) and breathing (2.4 m/s) are measured
//! values. Sneeze and speech speeds, droplet counts and the lognormal size
//! distribution are configurable defaults, not measurements.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Sampled diameters are truncated to this band.
pub const MIN_DIAMETER: f64 = 0.5e-6;
pub const MAX_DIAMETER: f64 = 1000e-6;

/// Aerosol / large-droplet boundary.
pub const DEFAULT_CLASS_CUTOFF: f64 = 10e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Cough,
    Sneeze,
    Speak,
    Breathe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmissionKind {
    Impulsive,
    Continuous,
}

impl Activity {
    pub fn kind(self) -> EmissionKind {
        match self {
            Activity::Cough | Activity::Sneeze => EmissionKind::Impulsive,
            Activity::Speak | Activity::Breathe => EmissionKind::Continuous,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Cough => "cough",
            Activity::Sneeze => "sneeze",
            Activity::Speak => "speak",
            Activity::Breathe => "breathe",
        }
    }
}

/// Lognormal droplet size distribution: `median` in metres, geometric standard deviation `gsd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeDistribution {
    pub log_median: f64,
    pub log_gsd: f64,
}

impl Default for SizeDistribution {
    fn default() -> Self {
        Self {
            log_median: 16e-6,
            log_gsd: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityProfile {
    pub activity: Activity,
    pub initial_speed: f64,
    pub droplet_count_mean: u32,
    pub size_distribution: SizeDistribution,
    /// Repetition period of continuous activities, seconds.
    pub period: Option<f64>,
}

impl ActivityProfile {
    pub fn cough() -> Self {
        Self::new(Activity::Cough, 10.0, 1000, None)
    }

    /// The sneeze speed is a placeholder; no measured value is shipped.
    pub fn sneeze() -> Self {
        Self::new(Activity::Sneeze, 20.0, 10_000, None)
    }

    /// One second of speech. Speed is a placeholder.
    pub fn speak() -> Self {
        Self::new(Activity::Speak, 3.9, 50, Some(1.0))
    }

    pub fn breathe() -> Self {
        Self::new(Activity::Breathe, 2.4, 10, Some(4.0))
    }

    pub fn for_activity(activity: Activity) -> Self {
        match activity {
            Activity::Cough => Self::cough(),
            Activity::Sneeze => Self::sneeze(),
            Activity::Speak => Self::speak(),
            Activity::Breathe => Self::breathe(),
        }
    }

    fn new(activity: Activity, initial_speed: f64, count: u32, period: Option<f64>) -> Self {
        Self {
            activity,
            initial_speed,
            droplet_count_mean: count,
            size_distribution: SizeDistribution::default(),
            period,
        }
    }

    /// Human-readable invariant violations, empty when the profile is usable.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.initial_speed >= 0.0 && self.initial_speed.is_finite()) {
            out.push("initial speed must be non-negative".to_string());
        }
        let d = &self.size_distribution;
        if !(MIN_DIAMETER..=MAX_DIAMETER).contains(&d.log_median) {
            out.push(format!(
                "size median must lie in [{MIN_DIAMETER}, {MAX_DIAMETER}] m"
            ));
        }
        if !(d.log_gsd > 1.0 && d.log_gsd.is_finite()) {
            out.push("geometric standard deviation must exceed 1".to_string());
        }
        match (self.activity.kind(), self.period) {
            (EmissionKind::Continuous, None) => {
                out.push("continuous activities need a period".to_string())
            }
            (_, Some(p)) if !(p > 0.0 && p.is_finite()) => {
                out.push("period must be positive".to_string())
            }
            _ => {}
        }
        out
    }
}

/// One respiratory release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionEvent {
    pub time: f64,
    pub origin: Vec3,
    /// Unit vector.
    pub direction: Vec3,
    pub initial_speed: f64,
    pub diameters: Vec<f64>,
    pub activity: Activity,
    pub kind: EmissionKind,
    /// Identifier of the emitting transmitter.
    pub source: u32,
}

impl EmissionEvent {
    pub fn droplet_count(&self) -> usize {
        self.diameters.len()
    }

    pub fn initial_velocity(&self) -> Vec3 {
        self.direction * self.initial_speed
    }

    /// Count of (aerosols, large droplets).
    pub fn class_counts(&self, cutoff: f64) -> Result<(usize, usize)> {
        let mut aerosols = 0;
        for &d in &self.diameters {
            if classify_droplet(d, cutoff)? == DropletClass::Aerosol {
                aerosols += 1;
            }
        }
        Ok((aerosols, self.diameters.len() - aerosols))
    }
}

pub fn make_emission<R: Rng + ?Sized>(
    profile: &ActivityProfile,
    time: f64,
    origin: Vec3,
    direction: Vec3,
    source: u32,
    rng: &mut R,
) -> Result<EmissionEvent> {
    let direction = direction
        .normalized()
        .ok_or_else(|| Error::domain("emission direction must be non-zero"))?;
    let diameters = sample_droplet_diameters(
        profile.droplet_count_mean as usize,
        profile.size_distribution,
        rng,
    );
    Ok(EmissionEvent {
        time,
        origin,
        direction,
        initial_speed: profile.initial_speed,
        diameters,
        activity: profile.activity,
        kind: profile.activity.kind(),
        source,
    })
}

/// Draws `count` i.i.d. diameters from the truncated lognormal distribution.
///
/// Draws outside `[MIN_DIAMETER, MAX_DIAMETER]` are rejected and redrawn.
pub fn sample_droplet_diameters<R: Rng + ?Sized>(
    count: usize,
    dist: SizeDistribution,
    rng: &mut R,
) -> Vec<f64> {
    let ln_gsd = dist.log_gsd.max(1.0).ln();
    (0..count)
        .map(|_| {
            for _ in 0..1000 {
                let z: f64 = rng.sample(StandardNormal);
                let d = dist.log_median * (ln_gsd * z).exp();
                if (MIN_DIAMETER..=MAX_DIAMETER).contains(&d) {
                    return d;
                }
            }
            dist.log_median.clamp(MIN_DIAMETER, MAX_DIAMETER)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DropletClass {
    Aerosol,
    LargeDroplet,
}

/// Aerosol iff `diameter < cutoff`.
pub fn classify_droplet(diameter: f64, cutoff: f64) -> Result<DropletClass> {
    if !(diameter > 0.0) {
        return Err(Error::domain(format!(
            "droplet diameter must be positive, got {diameter}"
        )));
    }
    if !(cutoff > 0.0) {
        return Err(Error::domain(format!(
            "class cutoff must be positive, got {cutoff}"
        )));
    }
    Ok(if diameter < cutoff {
        DropletClass::Aerosol
    } else {
        DropletClass::LargeDroplet
    })
}

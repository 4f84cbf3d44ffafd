//! Scenario configuration: environment, sources, receivers, network and outputs.
//!
//! All quantities are SI. Temperatures may be given in °C through the
//! `*_c` keys and are converted to kelvin on load.

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cloud::CloudModel;
use crate::emission::{make_emission, Activity, ActivityProfile, EmissionEvent, SizeDistribution};
use crate::error::Result;
use crate::geom::{Region, Vec3};
use crate::mohanet::{EpidemicParams, WaypointParams};
use crate::plume::DispersionParams;
use crate::rng::stream;

pub const CELSIUS_OFFSET: f64 = 273.15;

/// Mouth height of a standing adult, used when an emission gives no origin.
pub const DEFAULT_ORIGIN_HEIGHT: f64 = 1.7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EnvironmentInput")]
pub struct Environment {
    /// K
    pub temperature_ambient: f64,
    /// K
    pub temperature_exhaled: f64,
    pub relative_humidity: f64,
    /// kg/m³
    pub air_density: f64,
    /// Pa·s
    pub air_dynamic_viscosity: f64,
    pub wind_velocity: Vec3,
    pub gravity: f64,
    /// Pathogen inactivation rate λ, 1/s.
    pub pathogen_decay_rate: f64,
}

impl Default for Environment {
    fn default() -> Self {
        Self {
            temperature_ambient: 293.15,
            temperature_exhaled: 308.15,
            relative_humidity: 0.5,
            air_density: 1.204,
            air_dynamic_viscosity: 1.81e-5,
            wind_velocity: Vec3::ZERO,
            gravity: 9.81,
            pathogen_decay_rate: 5f64.ln() / 60.0,
        }
    }
}

impl Environment {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.temperature_ambient > 0.0) {
            out.push("temperature_ambient must be positive".into());
        }
        if !(self.temperature_exhaled > 0.0) {
            out.push("temperature_exhaled must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.relative_humidity) {
            out.push("relative_humidity must lie in [0, 1]".into());
        }
        if !(self.air_density > 0.0) {
            out.push("air_density must be positive".into());
        }
        if !(self.air_dynamic_viscosity > 0.0) {
            out.push("air_dynamic_viscosity must be positive".into());
        }
        if !self.wind_velocity.is_finite() {
            out.push("wind_velocity must be finite".into());
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) {
            out.push("gravity must be non-negative".into());
        }
        if !(self.pathogen_decay_rate >= 0.0 && self.pathogen_decay_rate.is_finite()) {
            out.push("pathogen_decay_rate must be non-negative".into());
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EnvironmentInput {
    temperature_ambient: Option<f64>,
    temperature_ambient_c: Option<f64>,
    temperature_exhaled: Option<f64>,
    temperature_exhaled_c: Option<f64>,
    relative_humidity: f64,
    air_density: f64,
    air_dynamic_viscosity: f64,
    wind_velocity: Vec3,
    gravity: f64,
    pathogen_decay_rate: f64,
}

impl Default for EnvironmentInput {
    fn default() -> Self {
        let d = Environment::default();
        Self {
            temperature_ambient: None,
            temperature_ambient_c: None,
            temperature_exhaled: None,
            temperature_exhaled_c: None,
            relative_humidity: d.relative_humidity,
            air_density: d.air_density,
            air_dynamic_viscosity: d.air_dynamic_viscosity,
            wind_velocity: d.wind_velocity,
            gravity: d.gravity,
            pathogen_decay_rate: d.pathogen_decay_rate,
        }
    }
}

fn kelvin(k: Option<f64>, c: Option<f64>, name: &str, default: f64) -> Result<f64, String> {
    match (k, c) {
        (Some(_), Some(_)) => Err(format!("give either {name} or {name}_c, not both")),
        (Some(k), None) => Ok(k),
        (None, Some(c)) => Ok(c + CELSIUS_OFFSET),
        (None, None) => Ok(default),
    }
}

impl TryFrom<EnvironmentInput> for Environment {
    type Error = String;

    fn try_from(i: EnvironmentInput) -> Result<Self, String> {
        let d = Environment::default();
        Ok(Self {
            temperature_ambient: kelvin(
                i.temperature_ambient,
                i.temperature_ambient_c,
                "temperature_ambient",
                d.temperature_ambient,
            )?,
            temperature_exhaled: kelvin(
                i.temperature_exhaled,
                i.temperature_exhaled_c,
                "temperature_exhaled",
                d.temperature_exhaled,
            )?,
            relative_humidity: i.relative_humidity,
            air_density: i.air_density,
            air_dynamic_viscosity: i.air_dynamic_viscosity,
            wind_velocity: i.wind_velocity,
            gravity: i.gravity,
            pathogen_decay_rate: i.pathogen_decay_rate,
        })
    }
}

/// Receiver facial disk. The disk faces the `-x` direction, so its plane is
/// `x = center.x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RxGeometry {
    pub id: u32,
    pub center: Vec3,
    pub radius: f64,
    /// Dose threshold γ, droplets.
    pub threshold: f64,
    /// m³/s
    pub breathing_rate: f64,
}

impl Default for RxGeometry {
    fn default() -> Self {
        Self {
            id: 0,
            center: Vec3::new(1.5, 0.0, DEFAULT_ORIGIN_HEIGHT),
            radius: 0.1,
            threshold: 80.0,
            breathing_rate: 8e-5,
        }
    }
}

impl RxGeometry {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.radius > 0.0) {
            out.push("radius must be positive".into());
        }
        if !(self.threshold >= 0.0) {
            out.push("threshold must be non-negative".into());
        }
        if !(self.breathing_rate > 0.0) {
            out.push("breathing_rate must be positive".into());
        }
        if !self.center.is_finite() {
            out.push("center must be finite".into());
        }
        out
    }
}

/// A source entry in the scenario; expands to one or more emission events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionTemplate {
    pub activity: Activity,
    #[serde(default)]
    pub source: u32,
    #[serde(default)]
    pub time: f64,
    #[serde(default = "default_origin")]
    pub origin: Vec3,
    #[serde(default = "default_direction")]
    pub direction: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_speed: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub droplet_count: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_distribution: Option<SizeDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    /// Number of events, `period` apart.
    #[serde(default = "one")]
    pub repeat: u32,
}

fn default_origin() -> Vec3 {
    Vec3::new(0.0, 0.0, DEFAULT_ORIGIN_HEIGHT)
}

fn default_direction() -> Vec3 {
    Vec3::X
}

fn one() -> u32 {
    1
}

impl EmissionTemplate {
    pub fn new(activity: Activity) -> Self {
        Self {
            activity,
            source: 0,
            time: 0.0,
            origin: default_origin(),
            direction: default_direction(),
            initial_speed: None,
            droplet_count: None,
            size_distribution: None,
            period: None,
            repeat: 1,
        }
    }

    pub fn profile(&self) -> ActivityProfile {
        let mut p = ActivityProfile::for_activity(self.activity);
        if let Some(v) = self.initial_speed {
            p.initial_speed = v;
        }
        if let Some(n) = self.droplet_count {
            p.droplet_count_mean = n;
        }
        if let Some(d) = self.size_distribution {
            p.size_distribution = d;
        }
        if self.period.is_some() {
            p.period = self.period;
        }
        p
    }

    /// Droplets per second when the source is treated as continuous.
    pub fn release_rate(&self) -> f64 {
        let p = self.profile();
        p.droplet_count_mean as f64 / p.period.unwrap_or(1.0)
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = self.profile().violations();
        if self.direction.normalized().is_none() {
            out.push("direction must be non-zero".into());
        }
        if !(self.time.is_finite() && self.origin.is_finite()) {
            out.push("time and origin must be finite".into());
        }
        if self.repeat == 0 {
            out.push("repeat must be at least 1".into());
        }
        if self.repeat > 1 && self.profile().period.is_none() {
            out.push("repeated emissions need a period".into());
        }
        out
    }

    /// Samples the events of template `index` from its own stream.
    pub fn events(&self, seed: u64, index: usize) -> Result<Vec<EmissionEvent>> {
        let profile = self.profile();
        let period = profile.period.unwrap_or(0.0);
        let mut rng = stream(seed, "source", index as u64);
        (0..self.repeat)
            .map(|k| {
                let t = self.time + k as f64 * period;
                make_emission(&profile, t, self.origin, self.direction, self.source, &mut rng)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    #[default]
    Cloud,
    Puff,
    Plume,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkKind {
    TrajectoryCsv,
    DoseCsv,
    FieldCsv,
    TimeseriesCsv,
    SnapshotsJsonl,
    EventsJsonl,
    KernelCsv,
    SummaryJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSink {
    pub kind: SinkKind,
    pub path: PathBuf,
}

/// `count` evenly spaced values from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.min],
            n => (0..n)
                .map(|k| self.min + (self.max - self.min) * k as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Lattice for concentration field exports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldLattice {
    pub x: Axis,
    pub y: Axis,
    pub z: Axis,
    /// Sample times for the puff channel; the plume is steady and uses the first.
    pub t: Vec<f64>,
}

/// Distances tabulated from the cloud channel, and the cloud run used for each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub distances: Vec<f64>,
    #[serde(default = "default_kernel_duration")]
    pub duration: f64,
    #[serde(default = "default_kernel_dt")]
    pub dt: f64,
}

fn default_kernel_duration() -> f64 {
    10.0
}

fn default_kernel_dt() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum MobilitySpec {
    #[default]
    Static,
    RandomWaypoint(WaypointParams),
    /// CSV `t,node_id,x,y`; relative paths resolve against the scenario file.
    Trace { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub population: usize,
    #[serde(default = "one_usize")]
    pub initial_infected: usize,
    pub region: Region,
    /// Seconds between node snapshots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_interval: Option<f64>,
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub channel: Channel,
    pub duration: f64,
    pub dt: f64,
    #[serde(default)]
    pub environment: Environment,
    #[serde(default)]
    pub emissions: Vec<EmissionTemplate>,
    #[serde(default)]
    pub receivers: Vec<RxGeometry>,
    #[serde(default)]
    pub cloud: CloudModel,
    #[serde(default)]
    pub dispersion: DispersionParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<FieldLattice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub mobility: MobilitySpec,
    #[serde(default)]
    pub epidemic: EpidemicParams,
    #[serde(default)]
    pub outputs: Vec<OutputSink>,
}

impl ScenarioConfig {
    /// Minimal valid scenario: one cough, one receiver at the default position.
    pub fn new(duration: f64, dt: f64) -> Self {
        Self {
            seed: 0,
            channel: Channel::Cloud,
            duration,
            dt,
            environment: Environment::default(),
            emissions: vec![EmissionTemplate::new(Activity::Cough)],
            receivers: vec![RxGeometry::default()],
            cloud: CloudModel::default(),
            dispersion: DispersionParams::default(),
            field: None,
            kernel: None,
            network: None,
            mobility: MobilitySpec::Static,
            epidemic: EpidemicParams::default(),
            outputs: Vec::new(),
        }
    }

    /// All emission events, ordered by template then repetition.
    pub fn emission_events(&self) -> Result<Vec<EmissionEvent>> {
        let mut out = Vec::new();
        for (i, t) in self.emissions.iter().enumerate() {
            out.extend(t.events(self.seed, i)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Dotted path of the offending key.
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn messages(&self) -> impl Iterator<Item = &str> {
        self.violations.iter().map(|v| v.message.as_str())
    }

    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            field: field.into(),
            message: message.into(),
        });
    }

    fn extend(&mut self, field: &str, messages: Vec<String>) {
        for m in messages {
            self.push(field, m);
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

pub fn validate_scenario(config: &ScenarioConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    if !(config.dt > 0.0) {
        r.push("dt", "dt must be positive");
    }
    if !(config.duration > 0.0 && config.duration.is_finite()) {
        r.push("duration", "duration must be positive");
    } else if config.dt > config.duration {
        r.push("dt", "dt must not exceed duration");
    }
    r.extend("environment", config.environment.violations());
    r.extend("cloud", config.cloud.violations());
    if !(config.dispersion.sigma_y.is_valid() && config.dispersion.sigma_z.is_valid()) {
        r.push("dispersion", "sigma laws must be positive and increasing");
    }
    for (i, e) in config.emissions.iter().enumerate() {
        r.extend(&format!("emissions[{i}]"), e.violations());
    }
    for (i, rx) in config.receivers.iter().enumerate() {
        for m in rx.violations() {
            let key = m.split_whitespace().next().unwrap_or_default();
            r.push(format!("receivers[{i}].{key}"), m);
        }
    }
    let mut ids: Vec<u32> = config.receivers.iter().map(|r| r.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        r.push("receivers", "receiver ids must be unique");
    }
    if let Some(field) = &config.field {
        for (name, axis) in [("x", field.x), ("y", field.y), ("z", field.z)] {
            if axis.count == 0 || !(axis.max >= axis.min) {
                r.push(format!("field.{name}"), "axis needs count ≥ 1 and max ≥ min");
            }
        }
        if field.t.is_empty() {
            r.push("field.t", "at least one sample time is required");
        }
    }
    if let Some(k) = &config.kernel {
        if k.distances.is_empty()
            || k.distances.iter().any(|&d| !(d >= 0.0))
            || k.distances.windows(2).any(|w| !(w[1] > w[0]))
        {
            r.push(
                "kernel.distances",
                "kernel distances must be non-empty, non-negative and strictly increasing",
            );
        }
        if !(k.dt > 0.0 && k.duration >= k.dt) {
            r.push("kernel.dt", "kernel dt must be positive and at most its duration");
        }
    }
    if let Some(net) = &config.network {
        if net.population == 0 {
            r.push("network.population", "population must be positive");
        }
        if net.initial_infected > net.population {
            r.push("network.initial_infected", "initial_infected exceeds population");
        }
        if !(net.region.width > 0.0 && net.region.height > 0.0) {
            r.push("network.region", "region must have positive width and height");
        }
        if net.snapshot_interval.is_some_and(|s| !(s > 0.0)) {
            r.push("network.snapshot_interval", "snapshot_interval must be positive");
        }
    }
    if let MobilitySpec::RandomWaypoint(p) = &config.mobility {
        r.extend("mobility", p.violations());
    }
    for m in config.epidemic.violations() {
        let key = m.split_whitespace().next().unwrap_or_default();
        r.push(format!("epidemic.{key}"), m);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_scenario_is_valid() {
        assert!(validate_scenario(&ScenarioConfig::new(10.0, 0.01)).is_empty());
    }

    #[test]
    fn boundary_violations() {
        let mut c = ScenarioConfig::new(10.0, 0.0);
        c.receivers[0].threshold = -1.0;
        let r = validate_scenario(&c);
        let msgs: Vec<_> = r.messages().collect();
        assert!(msgs.contains(&"dt must be positive"));
        assert!(msgs.contains(&"threshold must be non-negative"));
        assert_eq!(r, validate_scenario(&c));
    }

    #[test]
    fn celsius_keys_convert() {
        let env: Environment =
            serde_yaml::from_str("temperature_ambient_c: 20\ntemperature_exhaled_c: 35\n").unwrap();
        assert!((env.temperature_ambient - 293.15).abs() < 1e-12);
        assert!((env.temperature_exhaled - 308.15).abs() < 1e-12);
        assert!(serde_yaml::from_str::<Environment>("temperature_ambient: 290\ntemperature_ambient_c: 20\n").is_err());
    }

    #[test]
    fn viable_fraction_default_rate() {
        let env = Environment::default();
        assert!(((-env.pathogen_decay_rate * 60.0).exp() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn template_expands_repeats() {
        let mut t = EmissionTemplate::new(Activity::Breathe);
        t.repeat = 3;
        let ev = t.events(5, 0).unwrap();
        assert_eq!(ev.iter().map(|e| e.time).collect::<Vec<_>>(), vec![0.0, 4.0, 8.0]);
        assert_eq!(ev, t.events(5, 0).unwrap());
        assert_ne!(ev[0].diameters, ev[1].diameters);
    }

    #[test]
    fn mobility_spec_is_tagged() {
        let m: MobilitySpec = serde_yaml::from_str("model: random_waypoint\nspeed_max: 2\n").unwrap();
        assert_eq!(
            m,
            MobilitySpec::RandomWaypoint(WaypointParams { speed_max: 2.0, ..WaypointParams::default() })
        );
        assert!(serde_yaml::from_str::<MobilitySpec>("model: random_waypoint\nsped: 2\n").is_err());
        let s: MobilitySpec = serde_yaml::from_str("model: static\n").unwrap();
        assert_eq!(s, MobilitySpec::Static);
    }
}

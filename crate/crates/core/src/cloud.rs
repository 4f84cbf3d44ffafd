//! Still-air channel: an exhaled puff modelled as a two-phase cloud.
//!
//! The cloud is a sphere of radius `r` that entrains ambient air as it moves
//! (`dr/ds = α`). Cloud mass scales with `r³`, so momentum conservation gives
//! `v ∝ r⁻³` horizontally; vertically the cloud also feels buoyancy
//! `g·ΔT/T_amb`, and the excess temperature is diluted the same way.
//!
//! Droplets are tracked as log-spaced diameter bins. Each bin shrinks by the
//! d²-law towards a residue floor and falls relative to the cloud at its Stokes
//! velocity; a bin leaves the cloud once its accumulated fall exceeds the cloud
//! radius. Counts are real-valued means. Pathogen viability decays
//! exponentially with cloud age.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::reception::PlaneCrossing;
use crate::scenario::{Environment, RxGeometry};

/// Droplet density, water at body temperature (kg/m³).
pub const DROPLET_DENSITY: f64 = 993.0;

/// Upper end of the Stokes regime guard.
pub const MAX_STOKES_DIAMETER: f64 = 1e-3;

const BIN_LOW: f64 = crate::emission::MIN_DIAMETER;
const BIN_HIGH: f64 = crate::emission::MAX_DIAMETER;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudModel {
    /// Radius growth per metre travelled.
    pub entrainment: f64,
    pub initial_radius: f64,
    /// d²-law evaporation constant at RH = 0 (m²/s).
    pub evaporation_rate: f64,
    /// Non-volatile residue diameter as a fraction of the initial diameter.
    pub residue_fraction: f64,
    pub bins: usize,
    pub stop_speed: f64,
    pub stop_excess_temperature: f64,
}

impl Default for CloudModel {
    fn default() -> Self {
        Self {
            entrainment: 0.1,
            initial_radius: 0.05,
            evaporation_rate: 1.0e-9,
            residue_fraction: 0.3,
            bins: 32,
            stop_speed: 1e-3,
            stop_excess_temperature: 1e-3,
        }
    }
}

impl CloudModel {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.entrainment > 0.0) {
            out.push("entrainment must be positive".into());
        }
        if !(self.initial_radius > 0.0) {
            out.push("initial radius must be positive".into());
        }
        if !(self.evaporation_rate >= 0.0) {
            out.push("evaporation rate must be non-negative".into());
        }
        if !(self.residue_fraction > 0.0 && self.residue_fraction <= 1.0) {
            out.push("residue fraction must lie in (0, 1]".into());
        }
        if self.bins == 0 {
            out.push("bin count must be positive".into());
        }
        if !(self.stop_speed >= 0.0 && self.stop_excess_temperature >= 0.0) {
            out.push("stop tolerances must be non-negative".into());
        }
        out
    }
}

/// Stokes terminal velocity, positive downwards.
pub fn settling_velocity(diameter: f64, env: &Environment) -> Result<f64> {
    if !(diameter >= 0.0) {
        return Err(Error::domain(format!(
            "diameter must be non-negative, got {diameter}"
        )));
    }
    if diameter > MAX_STOKES_DIAMETER {
        return Err(Error::domain(format!(
            "diameter {diameter} m is outside the Stokes regime (max {MAX_STOKES_DIAMETER} m)"
        )));
    }
    Ok(stokes_constant(env) * diameter * diameter)
}

fn stokes_constant(env: &Environment) -> f64 {
    DROPLET_DENSITY * env.gravity / (18.0 * env.air_dynamic_viscosity)
}

fn shrink_rate(env: &Environment, model: &CloudModel) -> f64 {
    model.evaporation_rate * (1.0 - env.relative_humidity)
}

/// Diameter after `t` seconds of d²-law evaporation, floored at the residue size.
pub fn evaporated_diameter(d0: f64, t: f64, env: &Environment, model: &CloudModel) -> f64 {
    let floor = model.residue_fraction * d0;
    (d0 * d0 - shrink_rate(env, model) * t)
        .max(floor * floor)
        .sqrt()
}

/// Distance a droplet of initial diameter `d0` has fallen relative to the
/// cloud after `t` seconds: the exact integral of the Stokes velocity along
/// the evaporation history.
pub fn settling_displacement(d0: f64, t: f64, env: &Environment, model: &CloudModel) -> f64 {
    let k = shrink_rate(env, model);
    let sq0 = d0 * d0;
    let floor = model.residue_fraction * d0;
    let sq_floor = floor * floor;
    let integral = if k <= 0.0 {
        sq0 * t
    } else {
        let t_floor = (sq0 - sq_floor) / k;
        if t <= t_floor {
            sq0 * t - 0.5 * k * t * t
        } else {
            sq0 * t_floor - 0.5 * k * t_floor * t_floor + sq_floor * (t - t_floor)
        }
    };
    stokes_constant(env) * integral
}

/// Fraction of pathogens still viable after `t` seconds.
pub fn viable_fraction(t: f64, decay_rate: f64) -> f64 {
    (-decay_rate * t).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DropletBin {
    pub initial_diameter: f64,
    /// Current (evaporated) diameter.
    pub diameter: f64,
    pub count: f64,
    /// Settling displacement relative to the cloud centre.
    pub fall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CloudState {
    pub time: f64,
    /// Seconds since emission.
    pub age: f64,
    pub center: Vec3,
    pub velocity: Vec3,
    pub radius: f64,
    pub excess_temperature: f64,
    pub total_droplets: f64,
    pub viable_droplets: f64,
    pub bins: Vec<DropletBin>,
    /// Cumulative droplets lost by settling.
    pub settled: f64,
    /// Cumulative droplets removed at the receiver plane, viable or not.
    pub delivered: f64,
    /// Cumulative viable droplets removed at the receiver plane.
    pub received: f64,
}

impl CloudState {
    pub fn initial(
        emission: &crate::emission::EmissionEvent,
        env: &Environment,
        model: &CloudModel,
    ) -> Result<Self> {
        if let Some(&d) = emission
            .diameters
            .iter()
            .find(|&&d| !(d > 0.0 && d <= MAX_STOKES_DIAMETER))
        {
            return Err(Error::domain(format!(
                "droplet diameter {d} m outside (0, {MAX_STOKES_DIAMETER}] m"
            )));
        }
        let bins = bin_diameters(&emission.diameters, model.bins);
        let total: f64 = bins.iter().map(|b| b.count).sum();
        Ok(Self {
            time: emission.time,
            age: 0.0,
            center: emission.origin,
            velocity: emission.initial_velocity(),
            radius: model.initial_radius,
            excess_temperature: env.temperature_exhaled - env.temperature_ambient,
            total_droplets: total,
            viable_droplets: total,
            bins,
            settled: 0.0,
            delivered: 0.0,
            received: 0.0,
        })
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    pub fn diameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.bins.iter().map(|b| b.diameter)
    }

    fn kinematics(&self) -> Kinematics {
        Kinematics {
            center: self.center,
            velocity: self.velocity,
            radius: self.radius,
            excess_temperature: self.excess_temperature,
        }
    }

    /// RK4 step of the kinematic state; fails if the step diverged.
    fn advanced(&self, env: &Environment, model: &CloudModel, dt: f64) -> Result<Kinematics> {
        let k = self.kinematics().rk4(env, model, dt);
        let ok = k.center.is_finite()
            && k.velocity.is_finite()
            && k.excess_temperature.is_finite()
            && k.radius.is_finite()
            && k.radius >= self.radius;
        if ok {
            Ok(k)
        } else {
            Err(Error::domain(format!(
                "cloud integration diverged after t = {} s; reduce dt (currently {dt} s)",
                self.time
            )))
        }
    }

    fn set_kinematics(&mut self, k: Kinematics) {
        self.center = k.center;
        self.velocity = k.velocity;
        self.radius = k.radius;
        self.excess_temperature = k.excess_temperature;
    }

    /// Evaporates and settles every bin at the current age.
    fn update_droplets(&mut self, env: &Environment, model: &CloudModel) {
        for bin in self.bins.iter_mut().filter(|b| b.count > 0.0) {
            bin.diameter = evaporated_diameter(bin.initial_diameter, self.age, env, model);
            bin.fall = settling_displacement(bin.initial_diameter, self.age, env, model);
            if bin.fall > self.radius {
                self.settled += bin.count;
                bin.count = 0.0;
            }
        }
        self.total_droplets = self.bins.iter().map(|b| b.count).sum();
        self.viable_droplets =
            self.total_droplets * viable_fraction(self.age, env.pathogen_decay_rate);
    }

    fn scale_droplets(&mut self, keep: f64) {
        for bin in &mut self.bins {
            bin.count *= keep;
        }
    }
}

/// Groups diameters into log-spaced bins; each bin is represented by the
/// RMS diameter of its members, which preserves the mean Stokes velocity.
fn bin_diameters(diameters: &[f64], n_bins: usize) -> Vec<DropletBin> {
    let n_bins = n_bins.max(1);
    let mut count = vec![0.0f64; n_bins];
    let mut sum_sq = vec![0.0f64; n_bins];
    let span = (BIN_HIGH / BIN_LOW).ln();
    for &d in diameters {
        let pos = ((d / BIN_LOW).ln() / span * n_bins as f64).floor();
        let i = (pos.max(0.0) as usize).min(n_bins - 1);
        count[i] += 1.0;
        sum_sq[i] += d * d;
    }
    count
        .iter()
        .zip(&sum_sq)
        .filter(|(&c, _)| c > 0.0)
        .map(|(&c, &s)| {
            let d = (s / c).sqrt();
            DropletBin {
                initial_diameter: d,
                diameter: d,
                count: c,
                fall: 0.0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Kinematics {
    center: Vec3,
    velocity: Vec3,
    radius: f64,
    excess_temperature: f64,
}

impl Kinematics {
    fn derivative(&self, env: &Environment, model: &CloudModel) -> Kinematics {
        let radius_rate = model.entrainment * self.velocity.norm();
        let dilution = 3.0 * radius_rate / self.radius;
        let buoyancy = env.gravity * self.excess_temperature / env.temperature_ambient;
        Kinematics {
            center: self.velocity,
            velocity: Vec3::new(0.0, 0.0, buoyancy) - self.velocity * dilution,
            radius: radius_rate,
            excess_temperature: -dilution * self.excess_temperature,
        }
    }

    fn offset(&self, d: &Kinematics, h: f64) -> Kinematics {
        Kinematics {
            center: self.center + d.center * h,
            velocity: self.velocity + d.velocity * h,
            radius: self.radius + d.radius * h,
            excess_temperature: self.excess_temperature + d.excess_temperature * h,
        }
    }

    fn rk4(&self, env: &Environment, model: &CloudModel, dt: f64) -> Kinematics {
        let k1 = self.derivative(env, model);
        let k2 = self.offset(&k1, 0.5 * dt).derivative(env, model);
        let k3 = self.offset(&k2, 0.5 * dt).derivative(env, model);
        let k4 = self.offset(&k3, dt).derivative(env, model);
        let w = dt / 6.0;
        Kinematics {
            center: self.center
                + (k1.center + k2.center * 2.0 + k3.center * 2.0 + k4.center) * w,
            velocity: self.velocity
                + (k1.velocity + k2.velocity * 2.0 + k3.velocity * 2.0 + k4.velocity) * w,
            radius: self.radius + (k1.radius + 2.0 * k2.radius + 2.0 * k3.radius + k4.radius) * w,
            excess_temperature: self.excess_temperature
                + (k1.excess_temperature
                    + 2.0 * k2.excess_temperature
                    + 2.0 * k3.excess_temperature
                    + k4.excess_temperature)
                    * w,
        }
    }
}

/// Advances the cloud by one RK4 step of `dt` seconds.
pub fn step_cloud(
    state: &CloudState,
    env: &Environment,
    model: &CloudModel,
    dt: f64,
) -> Result<CloudState> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    let mut next = state.clone();
    next.set_kinematics(state.advanced(env, model, dt)?);
    next.time = state.time + dt;
    next.age = state.age + dt;
    next.update_droplets(env, model);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    DurationElapsed,
    CloudStopped,
    AllSettled,
}

#[derive(Debug, Clone, Serialize)]
pub struct CloudTrajectory {
    pub states: Vec<CloudState>,
    pub emission: crate::emission::EmissionEvent,
    pub termination: Termination,
    /// Receiver whose plane depleted the cloud, if any.
    pub receiver: Option<u32>,
}

impl CloudTrajectory {
    pub fn last(&self) -> &CloudState {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// First sample time at which the centre reaches `x`.
    pub fn crossing_time(&self, x: f64) -> Option<f64> {
        self.states.iter().find(|s| s.center.x >= x).map(|s| s.time)
    }
}

/// Number of `dt` steps covering `duration`, at least one.
pub fn step_count(duration: f64, dt: f64) -> usize {
    ((duration / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Integrates a cloud from `emission` for `duration` seconds.
///
/// With a receiver, droplets swept through its plane inside the facial disk
/// are removed from the cloud as they are delivered, so a trajectory and the
/// dose computed from it never count a droplet twice.
pub fn simulate_cloud(
    emission: &crate::emission::EmissionEvent,
    env: &Environment,
    model: &CloudModel,
    rx: Option<&RxGeometry>,
    duration: f64,
    dt: f64,
) -> Result<CloudTrajectory> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    if !(duration >= dt) {
        return Err(Error::domain(format!(
            "duration {duration} s must be at least dt {dt} s"
        )));
    }
    let mut state = CloudState::initial(emission, env, model)?;
    let initial_count = state.total_droplets;
    let mut crossing = rx.map(|rx| (rx, PlaneCrossing::new(&state, rx)));
    let n = step_count(duration, dt);
    let mut states = Vec::with_capacity(n + 1);
    states.push(state.clone());
    let mut termination = Termination::DurationElapsed;

    for k in 1..=n {
        let mut next = state.clone();
        next.set_kinematics(state.advanced(env, model, dt)?);
        next.time = emission.time + k as f64 * dt;
        next.age = k as f64 * dt;
        if let Some((rx, tracker)) = crossing.as_mut() {
            let f = tracker.advance(&next, rx);
            if f > 0.0 {
                next.delivered += f * state.total_droplets;
                next.received += f * state.viable_droplets;
                next.scale_droplets(1.0 - f);
            }
        }
        next.update_droplets(env, model);
        state = next;
        states.push(state.clone());

        if state.speed() < model.stop_speed
            && state.excess_temperature.abs() < model.stop_excess_temperature
        {
            termination = Termination::CloudStopped;
            break;
        }
        if initial_count > 0.0 && state.total_droplets <= 0.0 {
            termination = Termination::AllSettled;
            break;
        }
    }

    Ok(CloudTrajectory {
        states,
        emission: emission.clone(),
        termination,
        receiver: rx.map(|r| r.id),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emission::{make_emission, ActivityProfile, EmissionEvent};
    use crate::rng::stream;

    fn env() -> Environment {
        Environment::default()
    }

    fn cough() -> EmissionEvent {
        make_emission(
            &ActivityProfile::cough(),
            0.0,
            Vec3::new(0.0, 0.0, 1.7),
            Vec3::X,
            0,
            &mut stream(42, "emission", 0),
        )
        .unwrap()
    }

    #[test]
    fn stokes_velocity_values() {
        // ρ g d² / (18 μ) evaluated by hand: 993·9.81·1e-8 / 3.258e-4
        let e = env();
        let v100 = settling_velocity(100e-6, &e).unwrap();
        assert!((v100 - 0.299_005).abs() < 1e-5, "{v100}");
        let v10 = settling_velocity(10e-6, &e).unwrap();
        assert!((v10 / v100 - 0.01).abs() < 1e-12);
        assert!(settling_velocity(1e-12, &e).unwrap() < 1e-15);
        assert!(settling_velocity(2e-3, &e).is_err());
    }

    #[test]
    fn evaporation_values() {
        let e = env();
        let m = CloudModel::default();
        assert_eq!(evaporated_diameter(50e-6, 0.0, &e, &m), 50e-6);
        let d = evaporated_diameter(50e-6, 2.0, &e, &m);
        assert!((d - 1.5e-9f64.sqrt()).abs() < 1e-12);
        assert!((d - 38.73e-6).abs() < 0.01e-6);
        let humid = Environment {
            relative_humidity: 1.0,
            ..e
        };
        for t in [0.0, 1.0, 100.0, 1e6] {
            assert_eq!(evaporated_diameter(50e-6, t, &humid, &m), 50e-6);
        }
        // residue floor
        assert!((evaporated_diameter(50e-6, 1e6, &e, &m) - 15e-6).abs() < 1e-18);
    }

    #[test]
    fn settling_displacement_matches_quadrature() {
        let e = env();
        let m = CloudModel::default();
        for d0 in [5e-6, 30e-6, 80e-6] {
            let t_end = 6.0;
            let n = 200_000;
            let h = t_end / n as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let t = (i as f64 + 0.5) * h;
                acc += settling_velocity(evaporated_diameter(d0, t, &e, &m), &e).unwrap() * h;
            }
            let exact = settling_displacement(d0, t_end, &e, &m);
            assert!((acc - exact).abs() <= 1e-7 * exact, "{acc} vs {exact}");
        }
    }

    #[test]
    fn survival_calibration() {
        let lambda = Environment::default().pathogen_decay_rate;
        assert_eq!(viable_fraction(0.0, lambda), 1.0);
        assert!((viable_fraction(60.0, lambda) - 0.20).abs() <= 1e-12);
        assert_eq!(viable_fraction(1e4, 0.0), 1.0);
    }

    #[test]
    fn equilibrium_state_is_fixed() {
        let e = env();
        let m = CloudModel::default();
        let still = EmissionEvent {
            initial_speed: 0.0,
            diameters: vec![],
            ..cough()
        };
        let mut s = CloudState::initial(&still, &e, &m).unwrap();
        s.excess_temperature = 0.0;
        let next = step_cloud(&s, &e, &m, 0.01).unwrap();
        assert_eq!(next.center, s.center);
        assert_eq!(next.velocity, s.velocity);
        assert_eq!(next.radius, s.radius);
        assert_eq!(next.excess_temperature, 0.0);
        assert_eq!(next.time, s.time + 0.01);
    }

    #[test]
    fn entrainment_decelerates() {
        let e = env();
        let m = CloudModel::default();
        let s = CloudState::initial(&cough(), &e, &m).unwrap();
        let next = step_cloud(&s, &e, &m, 0.01).unwrap();
        assert!(next.velocity.horizontal_norm() < s.velocity.horizontal_norm());
        assert!(next.radius > s.radius);
        assert!(step_cloud(&s, &e, &m, 0.0).is_err());
        assert!(step_cloud(&s, &e, &m, -1.0).is_err());
    }

    #[test]
    fn duration_equal_to_dt_gives_two_samples() {
        let t = simulate_cloud(&cough(), &env(), &CloudModel::default(), None, 0.01, 0.01).unwrap();
        assert_eq!(t.states.len(), 2);
        assert!(simulate_cloud(&cough(), &env(), &CloudModel::default(), None, 0.005, 0.01).is_err());
    }

    #[test]
    fn cough_crosses_receiver_distance() {
        let t = simulate_cloud(&cough(), &env(), &CloudModel::default(), None, 10.0, 0.01).unwrap();
        let crossing = t.crossing_time(1.5).expect("cloud reaches 1.5 m");
        assert!(crossing > 0.0 && crossing < 10.0);
        assert_eq!(t.termination, Termination::DurationElapsed);
        assert_eq!(t.states.len(), 1001);
    }

    #[test]
    fn trajectory_monotonicity() {
        let rx = RxGeometry::default();
        let t = simulate_cloud(&cough(), &env(), &CloudModel::default(), Some(&rx), 10.0, 0.01)
            .unwrap();
        for w in t.states.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(b.time > a.time);
            assert!(b.radius >= a.radius);
            assert!(b.total_droplets <= a.total_droplets);
            assert!(b.viable_droplets <= a.viable_droplets);
            assert!(b.viable_droplets <= b.total_droplets);
            assert!(b.velocity.horizontal_norm() <= a.velocity.horizontal_norm());
        }
    }

    #[test]
    fn nothing_lost_without_sinks() {
        let e = Environment {
            pathogen_decay_rate: 0.0,
            ..env()
        };
        let m = CloudModel {
            evaporation_rate: 0.0,
            ..CloudModel::default()
        };
        let ev = EmissionEvent {
            diameters: vec![1e-9; 500],
            ..cough()
        };
        let t = simulate_cloud(&ev, &e, &m, None, 10.0, 0.01).unwrap();
        for s in &t.states {
            assert_eq!(s.total_droplets, 500.0);
            assert_eq!(s.viable_droplets, 500.0);
        }
    }

    #[test]
    fn mirrored_emission_mirrors_trajectory() {
        let e = env();
        let m = CloudModel::default();
        let dir = Vec3::new(0.8, 0.6, 0.0);
        let a = EmissionEvent {
            direction: dir,
            ..cough()
        };
        let b = EmissionEvent {
            direction: Vec3::new(dir.x, -dir.y, dir.z),
            ..cough()
        };
        let ta = simulate_cloud(&a, &e, &m, None, 5.0, 0.01).unwrap();
        let tb = simulate_cloud(&b, &e, &m, None, 5.0, 0.01).unwrap();
        for (sa, sb) in ta.states.iter().zip(&tb.states) {
            assert_eq!(sa.center.x, sb.center.x);
            assert_eq!(sa.center.y, -sb.center.y);
            assert_eq!(sa.center.z, sb.center.z);
            assert_eq!(sa.velocity.y, -sb.velocity.y);
            assert_eq!(sa.radius, sb.radius);
            assert_eq!(sa.total_droplets, sb.total_droplets);
        }
    }

    #[test]
    fn oversize_droplets_rejected() {
        let ev = EmissionEvent {
            diameters: vec![2e-3],
            ..cough()
        };
        assert!(simulate_cloud(&ev, &env(), &CloudModel::default(), None, 1.0, 0.01).is_err());
    }

    #[test]
    fn bins_preserve_counts() {
        let ev = cough();
        let bins = bin_diameters(&ev.diameters, 32);
        assert!(bins.len() <= 32);
        let total: f64 = bins.iter().map(|b| b.count).sum();
        assert_eq!(total, 1000.0);
    }
}

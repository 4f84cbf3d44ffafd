//! Mobile human ad hoc network: S/E/I/R agents exchanging droplets on contact.

pub mod contacts;
pub mod kernel;
pub mod mobility;
pub mod ode;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Region, Vec2};
use crate::rng::{stream, Stream};

pub use contacts::{find_contacts, Contact, ContactGrid};
pub use kernel::{build_kernel, transmission_dose, DoseKernel, KernelRun};
pub use mobility::{advance_waypoint, load_mobility_trace, MobilityTrace, Waypoint, WaypointParams};
pub use ode::{final_size, sir_ode, OdePoint, OdeRates};

/// Timers count in steps of `dt`; this absorbs accumulated rounding.
const TIMER_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EpiState {
    S,
    E,
    I,
    R,
}

impl EpiState {
    pub fn as_str(self) -> &'static str {
        match self {
            EpiState::S => "S",
            EpiState::E => "E",
            EpiState::I => "I",
            EpiState::R => "R",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpiModel {
    #[default]
    Sir,
    Seir,
    Sirs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DurationMode {
    #[default]
    Fixed,
    Exponential,
}

/// How received droplets turn into infections.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransmissionRule {
    /// Infected once the accumulated dose reaches the node's threshold.
    #[default]
    Threshold,
    /// Each emission infects each contacted susceptible with `probability`.
    PerContact { probability: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpidemicParams {
    pub model: EpiModel,
    /// E→I, seconds.
    pub incubation_duration: f64,
    /// I→R, seconds.
    pub infectious_duration: f64,
    /// R→S under SIRS, seconds.
    pub immunity_duration: f64,
    pub duration_mode: DurationMode,
    pub contact_range: f64,
    /// Mean time between emissions of an infectious node, seconds.
    pub mean_emission_interval: f64,
    pub transmission: TransmissionRule,
    /// Dose threshold γ, droplets.
    pub threshold: f64,
    /// Half-life of accumulated dose; `None` keeps it forever.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dose_half_life: Option<f64>,
    pub dose_kernel: DoseKernel,
}

impl Default for EpidemicParams {
    fn default() -> Self {
        Self {
            model: EpiModel::Sir,
            incubation_duration: 2.0 * 86_400.0,
            infectious_duration: 5.0 * 86_400.0,
            immunity_duration: 30.0 * 86_400.0,
            duration_mode: DurationMode::Fixed,
            contact_range: 2.0,
            mean_emission_interval: 30.0,
            transmission: TransmissionRule::Threshold,
            threshold: 80.0,
            dose_half_life: None,
            dose_kernel: DoseKernel::default(),
        }
    }
}

impl EpidemicParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.infectious_duration) {
            out.push("infectious_duration must be positive".into());
        }
        if self.model == EpiModel::Seir && !positive(self.incubation_duration) {
            out.push("incubation_duration must be positive".into());
        }
        if self.model == EpiModel::Sirs && !positive(self.immunity_duration) {
            out.push("immunity_duration must be positive".into());
        }
        if !(self.contact_range >= 0.0) {
            out.push("contact_range must be non-negative".into());
        }
        if !positive(self.mean_emission_interval) {
            out.push("mean_emission_interval must be positive".into());
        }
        if !(self.threshold >= 0.0) {
            out.push("threshold must be non-negative".into());
        }
        if let Some(h) = self.dose_half_life {
            if !(h > 0.0) {
                out.push("dose_half_life must be positive".into());
            }
        }
        if let TransmissionRule::PerContact { probability } = self.transmission {
            if !(0.0..=1.0).contains(&probability) {
                out.push("transmission probability must lie in [0, 1]".into());
            }
        }
        out.extend(self.dose_kernel.violations());
        if self.contact_range > 0.0 && transmission_dose(self.contact_range, &self.dose_kernel) > 0.0 {
            out.push("dose kernel must vanish at contact_range".into());
        }
        out
    }

    /// Basic reproduction number when every node contacts every other:
    /// `p (N - 1) D / m` for the per-contact rule, zero otherwise.
    pub fn full_mixing_r0(&self, population: usize) -> f64 {
        match self.transmission {
            TransmissionRule::PerContact { probability } => {
                probability * population.saturating_sub(1) as f64 * self.infectious_duration
                    / self.mean_emission_interval
            }
            TransmissionRule::Threshold => 0.0,
        }
    }

    fn stage_duration(&self, state: EpiState) -> f64 {
        match state {
            EpiState::E => self.incubation_duration,
            EpiState::I => self.infectious_duration,
            EpiState::R if self.model == EpiModel::Sirs => self.immunity_duration,
            _ => f64::INFINITY,
        }
    }
}

/// Resolved node movement.
#[derive(Debug, Clone, PartialEq)]
pub enum Mobility {
    Static,
    RandomWaypoint(WaypointParams),
    Trace(MobilityTrace),
}

/// Everything `run_epidemic` needs besides the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct EpidemicSetup {
    pub population: usize,
    pub initial_infected: usize,
    pub region: Region,
    pub mobility: Mobility,
    pub params: EpidemicParams,
    pub duration: f64,
    pub dt: f64,
    /// Seconds between spatial snapshots; `None` records none.
    pub snapshot_interval: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: u32,
    pub position: Vec2,
    pub waypoint: Waypoint,
    pub epi_state: EpiState,
    pub cumulative_dose: f64,
    /// Dose threshold γ.
    pub gamma: f64,
    /// Time spent in the current state.
    pub state_timer: f64,
    /// Length of the current stage, drawn on entry.
    pub state_duration: f64,
    /// Absolute time of the next emission while infectious.
    pub next_emission: f64,
}

/// Moves `node` one step under the random waypoint model.
pub fn step_random_waypoint<R: Rng + ?Sized>(
    node: &mut Node,
    region: &Region,
    params: &WaypointParams,
    dt: f64,
    rng: &mut R,
) {
    let (p, w) = advance_waypoint(node.position, node.waypoint, region, params, dt, rng);
    node.position = p;
    node.waypoint = w;
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpiEvent {
    pub t: f64,
    pub node: u32,
    pub from: EpiState,
    pub to: EpiState,
    /// Infectious nodes that delivered dose in the infecting step.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Counts {
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "E")]
    pub e: usize,
    #[serde(rename = "I")]
    pub i: usize,
    #[serde(rename = "R")]
    pub r: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.s + self.e + self.i + self.r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub t: f64,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotRecord {
    pub t: f64,
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub state: EpiState,
}

struct NodeStreams {
    mobility: Stream,
    emission: Stream,
    infection: Stream,
    duration: Stream,
}

pub struct WorldState {
    pub time: f64,
    pub region: Region,
    pub nodes: Vec<Node>,
    pub events: Vec<EpiEvent>,
    /// S→E/I transitions since the start.
    pub new_infections: usize,
    pub initial_susceptible: usize,
    start: f64,
    steps: u64,
    mobility: Mobility,
    streams: Vec<NodeStreams>,
}

impl WorldState {
    /// Places `setup.population` nodes and seeds the initial infections.
    pub fn new(setup: &EpidemicSetup, seed: u64) -> Result<Self> {
        let violations = setup.params.violations();
        if let Some(v) = violations.first() {
            return Err(Error::domain(v.clone()));
        }
        if setup.initial_infected > setup.population {
            return Err(Error::domain("initial_infected exceeds population"));
        }
        let wp_params = match &setup.mobility {
            Mobility::RandomWaypoint(p) => *p,
            _ => WaypointParams::default(),
        };
        let mut nodes = Vec::with_capacity(setup.population);
        let mut streams = Vec::with_capacity(setup.population);
        for i in 0..setup.population {
            let id = i as u32;
            let mut s = NodeStreams {
                mobility: stream(seed, "mobility", i as u64),
                emission: stream(seed, "emission", i as u64),
                infection: stream(seed, "infection", i as u64),
                duration: stream(seed, "duration", i as u64),
            };
            let position = match &setup.mobility {
                Mobility::Trace(trace) => trace.position(id, 0.0).ok_or_else(|| {
                    Error::domain(format!("mobility trace has no records for node {id}"))
                })?,
                _ => mobility::uniform_point(&setup.region, &mut s.mobility),
            };
            let waypoint = Waypoint::draw(&setup.region, &wp_params, &mut s.mobility);
            nodes.push(Node {
                id,
                position,
                waypoint,
                epi_state: EpiState::S,
                cumulative_dose: 0.0,
                gamma: setup.params.threshold,
                state_timer: 0.0,
                state_duration: f64::INFINITY,
                next_emission: f64::INFINITY,
            });
            streams.push(s);
        }

        let mut world = Self {
            time: 0.0,
            region: setup.region,
            nodes,
            events: Vec::new(),
            new_infections: 0,
            initial_susceptible: setup.population - setup.initial_infected,
            start: 0.0,
            steps: 0,
            mobility: setup.mobility.clone(),
            streams,
        };
        let mut pick = stream(seed, "initial", 0);
        let mut ids: Vec<usize> = (0..setup.population).collect();
        for k in 0..setup.initial_infected {
            let j = pick.random_range(k..ids.len());
            ids.swap(k, j);
            world.enter(ids[k], EpiState::I, &setup.params);
        }
        Ok(world)
    }

    pub fn counts(&self) -> Counts {
        let mut c = Counts { s: 0, e: 0, i: 0, r: 0 };
        for n in &self.nodes {
            match n.epi_state {
                EpiState::S => c.s += 1,
                EpiState::E => c.e += 1,
                EpiState::I => c.i += 1,
                EpiState::R => c.r += 1,
            }
        }
        c
    }

    pub fn snapshot(&self) -> impl Iterator<Item = SnapshotRecord> + '_ {
        self.nodes.iter().map(|n| SnapshotRecord {
            t: self.time,
            id: n.id,
            x: n.position.x,
            y: n.position.y,
            state: n.epi_state,
        })
    }

    fn draw_duration(&mut self, i: usize, mean: f64, mode: DurationMode) -> f64 {
        match mode {
            _ if !mean.is_finite() => f64::INFINITY,
            DurationMode::Fixed => mean,
            DurationMode::Exponential => {
                Exp::new(1.0 / mean).map_or(mean, |d| d.sample(&mut self.streams[i].duration))
            }
        }
    }

    fn draw_gap(&mut self, i: usize, mean: f64) -> f64 {
        Exp::new(1.0 / mean).map_or(mean, |d| d.sample(&mut self.streams[i].emission))
    }

    fn enter(&mut self, i: usize, state: EpiState, params: &EpidemicParams) {
        let duration = self.draw_duration(i, params.stage_duration(state), params.duration_mode);
        let gap = if state == EpiState::I {
            self.draw_gap(i, params.mean_emission_interval)
        } else {
            f64::INFINITY
        };
        let now = self.time;
        let node = &mut self.nodes[i];
        node.epi_state = state;
        node.state_timer = 0.0;
        node.state_duration = duration;
        node.next_emission = now + gap;
        if state == EpiState::S {
            node.cumulative_dose = 0.0;
        }
    }

    fn transition(&mut self, i: usize, to: EpiState, sources: Vec<u32>, params: &EpidemicParams) {
        let from = self.nodes[i].epi_state;
        self.enter(i, to, params);
        self.events.push(EpiEvent {
            t: self.time,
            node: self.nodes[i].id,
            from,
            to,
            sources,
        });
    }
}

/// Advances the world by `dt`: mobility, emissions, dose delivery, infection,
/// stage timers, event log, in that order.
pub fn step_epidemic(world: &mut WorldState, params: &EpidemicParams, dt: f64) -> Result<()> {
    if !(dt > 0.0) {
        return Err(Error::domain(format!("dt must be positive, got {dt}")));
    }
    world.steps += 1;
    world.time = world.start + world.steps as f64 * dt;
    let now = world.time;

    match &world.mobility {
        Mobility::Static => {}
        Mobility::RandomWaypoint(wp) => {
            for (node, s) in world.nodes.iter_mut().zip(&mut world.streams) {
                step_random_waypoint(node, &world.region, wp, dt, &mut s.mobility);
            }
        }
        Mobility::Trace(trace) => {
            for node in &mut world.nodes {
                if let Some(p) = trace.position(node.id, now) {
                    node.position = p;
                }
            }
        }
    }

    let mut emitters: Vec<(usize, u32)> = Vec::new();
    for i in 0..world.nodes.len() {
        if world.nodes[i].epi_state != EpiState::I {
            continue;
        }
        let mut count = 0;
        while world.nodes[i].next_emission <= now {
            count += 1;
            let gap = world.draw_gap(i, params.mean_emission_interval);
            world.nodes[i].next_emission += gap;
        }
        if count > 0 {
            emitters.push((i, count));
        }
    }

    if let Some(h) = params.dose_half_life {
        let keep = 0.5f64.powf(dt / h);
        for n in world.nodes.iter_mut().filter(|n| n.epi_state == EpiState::S) {
            n.cumulative_dose *= keep;
        }
    }

    let mut exposed: Vec<Option<Vec<u32>>> = vec![None; world.nodes.len()];
    let mut hit = vec![false; world.nodes.len()];
    if !emitters.is_empty() && params.contact_range > 0.0 {
        let grid = ContactGrid::new(
            params.contact_range,
            world
                .nodes
                .iter()
                .enumerate()
                .filter(|(_, n)| n.epi_state == EpiState::S)
                .map(|(i, n)| (i, n.position)),
        );
        for &(e, count) in &emitters {
            let src = world.nodes[e].position;
            let src_id = world.nodes[e].id;
            let mut partners: Vec<usize> = grid
                .candidates(src)
                .filter(|&j| world.nodes[j].position.distance(src) <= params.contact_range)
                .collect();
            partners.sort_unstable();
            for j in partners {
                let d = world.nodes[j].position.distance(src);
                let dose = transmission_dose(d, &params.dose_kernel) * count as f64;
                let infected = match params.transmission {
                    TransmissionRule::Threshold => false,
                    TransmissionRule::PerContact { probability } => (0..count)
                        .fold(false, |hit, _| world.streams[j].infection.random::<f64>() < probability || hit),
                };
                let node = &mut world.nodes[j];
                node.cumulative_dose += dose;
                if dose > 0.0 || infected {
                    exposed[j].get_or_insert_with(Vec::new).push(src_id);
                }
                hit[j] |= infected;
            }
        }
    }

    let entry = if params.model == EpiModel::Seir { EpiState::E } else { EpiState::I };
    let mut moved = vec![false; world.nodes.len()];
    for (j, sources) in exposed.into_iter().enumerate() {
        let Some(sources) = sources else { continue };
        let n = &world.nodes[j];
        let infected = match params.transmission {
            TransmissionRule::Threshold => n.cumulative_dose > 0.0 && n.cumulative_dose >= n.gamma,
            TransmissionRule::PerContact { .. } => hit[j],
        };
        if infected {
            world.transition(j, entry, sources, params);
            world.new_infections += 1;
            moved[j] = true;
        }
    }

    for (i, &skip) in moved.iter().enumerate() {
        if skip {
            continue;
        }
        let n = &mut world.nodes[i];
        n.state_timer += dt;
        if n.state_timer + TIMER_EPS < n.state_duration {
            continue;
        }
        let next = match (n.epi_state, params.model) {
            (EpiState::E, _) => EpiState::I,
            (EpiState::I, _) => EpiState::R,
            (EpiState::R, EpiModel::Sirs) => EpiState::S,
            _ => continue,
        };
        world.transition(i, next, Vec::new(), params);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpidemicRun {
    pub series: Vec<SeriesPoint>,
    pub snapshots: Vec<SnapshotRecord>,
    pub events: Vec<EpiEvent>,
    pub new_infections: usize,
    /// New infections over initially susceptible nodes.
    pub attack_rate: f64,
    pub peak_infected: usize,
    pub peak_time: f64,
}

pub fn run_epidemic(setup: &EpidemicSetup, seed: u64) -> Result<EpidemicRun> {
    if !(setup.dt > 0.0) {
        return Err(Error::domain("dt must be positive"));
    }
    if !(setup.duration >= 0.0) {
        return Err(Error::domain("duration must be non-negative"));
    }
    let mut world = WorldState::new(setup, seed)?;
    let steps = (setup.duration / setup.dt - 1e-9).ceil().max(0.0) as u64;
    let snapshot_every = setup
        .snapshot_interval
        .map(|s| ((s / setup.dt).round() as u64).max(1));

    let mut series = Vec::with_capacity(steps as usize + 1);
    let mut snapshots = Vec::new();
    let mut record = |world: &WorldState, k: u64, series: &mut Vec<SeriesPoint>| {
        series.push(SeriesPoint { t: world.time, counts: world.counts() });
        if snapshot_every.is_some_and(|m| k.is_multiple_of(m)) {
            snapshots.extend(world.snapshot());
        }
    };
    record(&world, 0, &mut series);
    for k in 1..=steps {
        step_epidemic(&mut world, &setup.params, setup.dt)?;
        record(&world, k, &mut series);
    }

    let (peak_time, peak_infected) = series
        .iter()
        .map(|p| (p.t, p.counts.i))
        .fold((0.0, 0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let attack_rate = if world.initial_susceptible > 0 {
        world.new_infections as f64 / world.initial_susceptible as f64
    } else {
        0.0
    };
    Ok(EpidemicRun {
        series,
        snapshots,
        events: world.events,
        new_infections: world.new_infections,
        attack_rate,
        peak_infected,
        peak_time,
    })
}

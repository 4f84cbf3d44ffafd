use std::fs::File;
use std::path::Path;

use serde_json::{json, Map, Value};

use mohanet_core::cloud::{simulate_cloud, step_count, CloudTrajectory};
use mohanet_core::emission::{ActivityProfile, EmissionEvent};
use mohanet_core::error::{Error, Result};
use mohanet_core::geom::{Vec2, Vec3};
use mohanet_core::io::{self, suffixed, write_file};
use mohanet_core::mohanet::{
    build_kernel, final_size, load_mobility_trace, run_epidemic, sir_ode, transmission_dose,
    DoseKernel, EpidemicSetup, KernelRun, Mobility, OdePoint, OdeRates, TransmissionRule,
};
use mohanet_core::plume::{plume_concentration, puff_concentration, PointSource};
use mohanet_core::reception::{
    detect_infection, inhalation_timeline, receive_cloud_crossing, superpose_doses, DoseTimeline,
};
use mohanet_core::rng::{replication_seed, stream};
use mohanet_core::scenario::{Channel, KernelSpec, MobilitySpec, RxGeometry, ScenarioConfig, SinkKind};

use crate::sinks::Sinks;
use crate::{Command, EpidemicArgs, ScenarioArgs, SirOdeArgs, ValidateArgs, EXIT_DOMAIN, EXIT_INVALID};

pub struct Failure {
    pub code: i32,
    pub error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::Syntax { .. } | Error::UnknownKey { .. } | Error::Invalid(_) | Error::Trace { .. } => {
                EXIT_INVALID
            }
            _ => EXIT_DOMAIN,
        };
        Self { code, error }
    }
}

type CmdResult = std::result::Result<(), Failure>;

pub fn dispatch(command: Command) -> CmdResult {
    match command {
        Command::Cloud(a) => channel_command(&a, "cloud", Some(Channel::Cloud)),
        Command::Puff(a) => channel_command(&a, "puff", Some(Channel::Puff)),
        Command::Plume(a) => channel_command(&a, "plume", Some(Channel::Plume)),
        Command::Dose(a) => channel_command(&a, "dose", None),
        Command::Kernel(a) => kernel_command(&a),
        Command::Epidemic(a) => epidemic_command(&a),
        Command::SirOde(a) => sir_ode_command(&a),
        Command::Validate(a) => validate_command(&a),
    }
}

/// Seconds from `90`, `90s`, `15m`, `2h` or `100d`.
pub fn parse_duration(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let (num, unit) = match s.char_indices().last() {
        Some((i, c)) if c.is_ascii_alphabetic() => (&s[..i], c),
        _ => (s, 's'),
    };
    let scale = match unit {
        's' => 1.0,
        'm' => 60.0,
        'h' => 3600.0,
        'd' => 86_400.0,
        _ => return Err(format!("unknown duration unit `{unit}` (use s, m, h or d)")),
    };
    let v: f64 = num.trim().parse().map_err(|_| format!("invalid duration `{s}`"))?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(format!("duration must be positive, got `{s}`"));
    }
    Ok(v * scale)
}

fn load(args: &ScenarioArgs) -> std::result::Result<(ScenarioConfig, Sinks), Failure> {
    let mut config = io::parse_scenario(&args.scenario).map_err(|error| Failure {
        code: EXIT_INVALID,
        error,
    })?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let sinks = Sinks::new(args.out_dir.clone(), &config.outputs);
    Ok((config, sinks))
}

fn write_summary(sinks: &Sinks, command: &str, seed: u64, config: Value, metrics: Value) -> Result<()> {
    let summary = json!({
        "command": command,
        "seed": seed,
        "config": config,
        "metrics": metrics,
    });
    if let Some(p) = sinks.path(SinkKind::SummaryJson, "summary.json") {
        write_file(&p, |w| io::write_summary_json(w, &summary))?;
    }
    Ok(())
}

fn config_value(config: &ScenarioConfig) -> Result<Value> {
    serde_json::to_value(config).map_err(|e| Error::domain(e.to_string()))
}

fn channel_command(args: &ScenarioArgs, name: &str, channel: Option<Channel>) -> CmdResult {
    let (config, sinks) = load(args)?;
    let channel = channel.unwrap_or(config.channel);
    let with_trajectories = name == "cloud";
    let mut metrics = Map::new();
    let doses = match channel {
        Channel::Cloud => cloud_doses(&config, &sinks, with_trajectories, &mut metrics)?,
        Channel::Puff => puff_doses(&config, &sinks, name != "dose")?,
        Channel::Plume => plume_doses(&config, &sinks, name != "dose")?,
        Channel::Kernel => kernel_doses(&config)?,
    };

    let thresholds: Vec<f64> = config.receivers.iter().map(|r| r.threshold).collect();
    if let Some(p) = sinks.path(SinkKind::DoseCsv, "dose.csv") {
        write_file(&p, |w| io::write_dose_csv(w, &doses, &thresholds))?;
    }
    let receivers: Vec<Value> = config
        .receivers
        .iter()
        .zip(&doses)
        .map(|(rx, d)| receiver_metrics(rx, d))
        .collect();
    let infected: u64 = doses
        .iter()
        .zip(&thresholds)
        .map(|(d, &g)| u64::from(detect_infection(d.total(), g)))
        .sum();
    metrics.insert("channel".into(), json!(channel));
    metrics.insert("infected".into(), json!(infected));
    metrics.insert("receivers".into(), Value::Array(receivers));
    write_summary(&sinks, name, config.seed, config_value(&config)?, Value::Object(metrics))?;
    Ok(())
}

fn receiver_metrics(rx: &RxGeometry, dose: &DoseTimeline) -> Value {
    let mut m = json!({
        "id": rx.id,
        "threshold": rx.threshold,
        "dose": dose.total(),
        "infected": detect_infection(dose.total(), rx.threshold),
    });
    if let Some(t) = dose.detection_time(rx.threshold) {
        m["detection_time"] = json!(t);
    }
    m
}

fn events_of(config: &ScenarioConfig) -> Result<Vec<EmissionEvent>> {
    let events = config.emission_events()?;
    if events.is_empty() {
        return Err(Error::domain("scenario has no emissions"));
    }
    Ok(events)
}

fn superpose_all(config: &ScenarioConfig, per_rx: Vec<Vec<DoseTimeline>>) -> Result<Vec<DoseTimeline>> {
    config
        .receivers
        .iter()
        .zip(per_rx)
        .map(|(rx, tls)| {
            if tls.is_empty() {
                Ok(DoseTimeline::empty(rx.id))
            } else {
                superpose_doses(&tls)
            }
        })
        .collect()
}

fn cloud_doses(
    config: &ScenarioConfig,
    sinks: &Sinks,
    with_trajectories: bool,
    metrics: &mut Map<String, Value>,
) -> Result<Vec<DoseTimeline>> {
    let events = events_of(config)?;
    let traj_path = sinks
        .path(SinkKind::TrajectoryCsv, "trajectory.csv")
        .filter(|_| with_trajectories);
    let mut per_rx = vec![Vec::new(); config.receivers.len()];
    let mut summaries = Vec::new();
    for (k, e) in events.iter().enumerate() {
        let remaining = config.duration - e.time;
        if remaining < config.dt {
            continue;
        }
        let run = |rx: Option<&RxGeometry>| {
            simulate_cloud(e, &config.environment, &config.cloud, rx, remaining, config.dt)
        };
        let primary = run(config.receivers.first())?;
        if let Some(p) = &traj_path {
            let p = if events.len() > 1 { suffixed(p, &format!("_e{k}")) } else { p.clone() };
            write_file(&p, |w| io::write_trajectory_csv(w, &primary))?;
        }
        summaries.push(trajectory_metrics(&primary, config.receivers.first()));
        for (j, rx) in config.receivers.iter().enumerate() {
            let dose = if j == 0 {
                receive_cloud_crossing(&primary, rx)
            } else {
                receive_cloud_crossing(&run(Some(rx))?, rx)
            };
            per_rx[j].push(dose);
        }
    }
    metrics.insert("trajectories".into(), Value::Array(summaries));
    superpose_all(config, per_rx)
}

fn trajectory_metrics(traj: &CloudTrajectory, rx: Option<&RxGeometry>) -> Value {
    let first = &traj.states[0];
    let last = traj.last();
    let mut m = json!({
        "source": traj.emission.source,
        "emission_time": traj.emission.time,
        "termination": traj.termination,
        "initial_droplets": first.total_droplets,
        "remaining_droplets": last.total_droplets,
        "viable_droplets": last.viable_droplets,
        "settled": last.settled,
        "received": last.received,
        "inactivated": (last.total_droplets - last.viable_droplets) + (last.delivered - last.received),
        "final_position": last.center,
    });
    if let Some(t) = rx.and_then(|rx| traj.crossing_time(rx.center.x)) {
        m["crossing_time"] = json!(t);
    }
    m
}

fn sample_times(config: &ScenarioConfig) -> Vec<f64> {
    let n = step_count(config.duration, config.dt);
    (0..=n).map(|k| k as f64 * config.dt).collect()
}

fn puff_sources(events: &[EmissionEvent]) -> Vec<PointSource> {
    events
        .iter()
        .map(|e| PointSource {
            position: e.origin,
            strength: e.droplet_count() as f64,
            release_time: e.time,
        })
        .collect()
}

fn puff_at(config: &ScenarioConfig, src: &PointSource, p: Vec3, t: f64) -> Result<f64> {
    if t <= src.release_time {
        return Ok(0.0);
    }
    puff_concentration(src, &config.environment, p, t, &config.dispersion)
}

fn puff_doses(config: &ScenarioConfig, sinks: &Sinks, with_field: bool) -> Result<Vec<DoseTimeline>> {
    let events = events_of(config)?;
    let sources = puff_sources(&events);
    let times = sample_times(config);
    let mut per_rx = vec![Vec::new(); config.receivers.len()];
    for (j, rx) in config.receivers.iter().enumerate() {
        for (e, src) in events.iter().zip(&sources) {
            let series = times
                .iter()
                .map(|&t| Ok((t, puff_at(config, src, rx.center, t)?)))
                .collect::<Result<Vec<_>>>()?;
            per_rx[j].push(inhalation_timeline(rx, e.source, &series)?);
        }
    }
    if with_field {
        write_field(config, sinks, |p, t| {
            sources.iter().map(|s| puff_at(config, s, p, t)).sum()
        })?;
    }
    superpose_all(config, per_rx)
}

fn plume_sources(config: &ScenarioConfig) -> Result<Vec<(u32, f64, PointSource)>> {
    if config.emissions.is_empty() {
        return Err(Error::domain("scenario has no emissions"));
    }
    Ok(config
        .emissions
        .iter()
        .map(|t| {
            let src = PointSource {
                position: t.origin,
                strength: t.release_rate(),
                release_time: t.time,
            };
            (t.source, t.time, src)
        })
        .collect())
}

fn plume_doses(config: &ScenarioConfig, sinks: &Sinks, with_field: bool) -> Result<Vec<DoseTimeline>> {
    let sources = plume_sources(config)?;
    let times = sample_times(config);
    let mut per_rx = vec![Vec::new(); config.receivers.len()];
    for (j, rx) in config.receivers.iter().enumerate() {
        for (id, start, src) in &sources {
            let c = plume_concentration(src, &config.environment, rx.center, &config.dispersion)?;
            let series: Vec<(f64, f64)> = times
                .iter()
                .map(|&t| (t, if t >= *start { c } else { 0.0 }))
                .collect();
            per_rx[j].push(inhalation_timeline(rx, *id, &series)?);
        }
    }
    if with_field {
        write_field(config, sinks, |p, _| {
            sources
                .iter()
                .map(|(_, _, s)| plume_concentration(s, &config.environment, p, &config.dispersion))
                .sum()
        })?;
    }
    superpose_all(config, per_rx)
}

fn write_field(
    config: &ScenarioConfig,
    sinks: &Sinks,
    conc: impl Fn(Vec3, f64) -> Result<f64>,
) -> Result<()> {
    let (Some(lattice), Some(path)) = (&config.field, sinks.path(SinkKind::FieldCsv, "field.csv")) else {
        return Ok(());
    };
    let (xs, ys, zs) = (lattice.x.values(), lattice.y.values(), lattice.z.values());
    let mut rows = Vec::with_capacity(lattice.t.len() * xs.len() * ys.len() * zs.len());
    for &t in &lattice.t {
        for &x in &xs {
            for &y in &ys {
                for &z in &zs {
                    rows.push([x, y, z, t, conc(Vec3::new(x, y, z), t)?]);
                }
            }
        }
    }
    write_file(&path, |w| io::write_field_csv(w, &rows))
}

fn kernel_spec(config: &ScenarioConfig) -> Result<&KernelSpec> {
    config
        .kernel
        .as_ref()
        .ok_or_else(|| Error::domain("kernel runs need a `kernel` section"))
}

fn kernel_run<'a>(config: &'a ScenarioConfig, spec: &KernelSpec, rx: &'a RxGeometry) -> KernelRun<'a> {
    KernelRun {
        env: &config.environment,
        model: &config.cloud,
        rx,
        duration: spec.duration,
        dt: spec.dt,
    }
}

fn first_profile(config: &ScenarioConfig) -> ActivityProfile {
    config
        .emissions
        .first()
        .map_or_else(ActivityProfile::cough, |t| t.profile())
}

fn kernel_doses(config: &ScenarioConfig) -> Result<Vec<DoseTimeline>> {
    let spec = kernel_spec(config)?;
    let default_rx = RxGeometry::default();
    let shape = config.receivers.first().unwrap_or(&default_rx);
    let mut per_rx = vec![Vec::new(); config.receivers.len()];
    for (i, template) in config.emissions.iter().enumerate() {
        let kernel = build_kernel(
            &template.profile(),
            &kernel_run(config, spec, shape),
            &spec.distances,
            &mut stream(config.seed, "kernel", i as u64),
        )?;
        for e in template.events(config.seed, i)? {
            for (j, rx) in config.receivers.iter().enumerate() {
                let d = Vec2::new(e.origin.x, e.origin.y).distance(Vec2::new(rx.center.x, rx.center.y));
                let dose = transmission_dose(d, &kernel);
                let sources = if dose > 0.0 { vec![e.source] } else { Vec::new() };
                per_rx[j].push(DoseTimeline::from_increments(rx.id, [(e.time, dose, sources)]));
            }
        }
    }
    superpose_all(config, per_rx)
}

fn kernel_command(args: &ScenarioArgs) -> CmdResult {
    let (config, sinks) = load(args)?;
    let spec = kernel_spec(&config)?;
    let default_rx = RxGeometry::default();
    let rx = config.receivers.first().unwrap_or(&default_rx);
    let kernel = build_kernel(
        &first_profile(&config),
        &kernel_run(&config, spec, rx),
        &spec.distances,
        &mut stream(config.seed, "kernel", 0),
    )?;
    if let Some(p) = sinks.path(SinkKind::KernelCsv, "kernel.csv") {
        write_file(&p, |w| io::write_kernel_csv(w, &kernel))?;
    }
    let metrics = json!({ "knots": kernel.knots, "reach": kernel.reach() });
    write_summary(&sinks, "kernel", config.seed, config_value(&config)?, metrics)?;
    Ok(())
}

/// Cloud-channel kernel for the network, closed with a zero knot at `contact_range`.
fn network_kernel(config: &ScenarioConfig, contact_range: f64) -> Result<DoseKernel> {
    let spec = kernel_spec(config)?;
    if spec.distances.last().is_some_and(|&d| d >= contact_range) {
        return Err(Error::domain("kernel distances must lie below contact_range"));
    }
    let default_rx = RxGeometry::default();
    let rx = config.receivers.first().unwrap_or(&default_rx);
    let mut kernel = build_kernel(
        &first_profile(config),
        &kernel_run(config, spec, rx),
        &spec.distances,
        &mut stream(config.seed, "kernel", 0),
    )?;
    kernel.knots.push((contact_range, 0.0));
    DoseKernel::new(kernel.knots)
}

fn epidemic_command(args: &EpidemicArgs) -> CmdResult {
    let (config, sinks) = load(&args.common)?;
    let net = config
        .network
        .as_ref()
        .ok_or_else(|| Error::domain("epidemic runs need a `network` section"))?;
    let mobility = match &config.mobility {
        MobilitySpec::Static => Mobility::Static,
        MobilitySpec::RandomWaypoint(p) => Mobility::RandomWaypoint(*p),
        MobilitySpec::Trace { path } => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            Mobility::Trace(load_mobility_trace(file, Some(&net.region))?)
        }
    };
    let mut params = config.epidemic.clone();
    if params.transmission == TransmissionRule::Threshold
        && params.dose_kernel.knots.is_empty()
        && config.kernel.is_some()
    {
        params.dose_kernel = network_kernel(&config, params.contact_range)?;
    }
    let setup = EpidemicSetup {
        population: net.population,
        initial_infected: net.initial_infected,
        region: net.region,
        mobility,
        params,
        duration: config.duration,
        dt: config.dt,
        snapshot_interval: net.snapshot_interval,
    };

    let count = args.replications.unwrap_or(1);
    let mut runs = Vec::new();
    let mut attack_sum = 0.0;
    for k in 0..count {
        let (seed, suffix) = match args.replications {
            Some(_) => (replication_seed(config.seed, k.into()), format!("_r{k}")),
            None => (config.seed, String::new()),
        };
        let run = run_epidemic(&setup, seed)?;
        let path = |kind, default: &str| sinks.path(kind, default).map(|p| suffixed(&p, &suffix));
        if let Some(p) = path(SinkKind::TimeseriesCsv, "timeseries.csv") {
            write_file(&p, |w| io::write_timeseries_csv(w, &run.series))?;
        }
        if let Some(p) = path(SinkKind::SnapshotsJsonl, "snapshots.jsonl") {
            write_file(&p, |w| io::write_snapshots_jsonl(w, &run.snapshots))?;
        }
        if let Some(p) = path(SinkKind::EventsJsonl, "events.jsonl") {
            write_file(&p, |w| io::write_events_jsonl(w, &run.events))?;
        }
        attack_sum += run.attack_rate;
        let last = run.series.last().map(|p| p.counts);
        runs.push(json!({
            "replication": k,
            "seed": seed,
            "attack_rate": run.attack_rate,
            "new_infections": run.new_infections,
            "peak_infected": run.peak_infected,
            "peak_time": run.peak_time,
            "final": last,
        }));
    }
    let mut metrics = json!({
        "replications": runs,
        "mean_attack_rate": attack_sum / count.max(1) as f64,
    });
    let r0 = setup.params.full_mixing_r0(setup.population);
    if r0 > 0.0 {
        metrics["full_mixing_r0"] = json!(r0);
        metrics["final_size"] = json!(final_size(r0));
    }
    let mut config_json = config_value(&config)?;
    config_json["epidemic"]["dose_kernel"] = json!(setup.params.dose_kernel);
    write_summary(&sinks, "epidemic", config.seed, config_json, metrics)?;
    Ok(())
}

fn sir_ode_command(args: &SirOdeArgs) -> CmdResult {
    let gamma_r = 1.0 / args.infectious_period;
    let rates = OdeRates {
        beta: args.r0 * gamma_r,
        gamma_r,
        sigma_e: args.incubation_period.map(|p| 1.0 / p),
    };
    let init = OdePoint {
        t: 0.0,
        s: 1.0 - args.i0,
        e: 0.0,
        i: args.i0,
        r: 0.0,
    };
    let curves = sir_ode(&rates, init, args.duration, args.dt)?;
    let sinks = Sinks::new(args.out_dir.clone(), &[]);
    if let Some(p) = sinks.path(SinkKind::TimeseriesCsv, "curves.csv") {
        write_file(&p, |w| io::write_curves_csv(w, &curves))?;
    }
    let peak = curves.iter().fold(init, |best, p| if p.i > best.i { *p } else { best });
    let end = curves.last().copied().unwrap_or(init);
    let config = json!({
        "r0": args.r0,
        "rates": rates,
        "initial": init,
        "duration": args.duration,
        "dt": args.dt,
    });
    let metrics = json!({
        "peak_i": peak.i,
        "peak_time": peak.t,
        "final_r": end.r,
        "final_size": final_size(args.r0),
    });
    write_summary(&sinks, "sir-ode", 0, config, metrics)?;
    Ok(())
}

fn validate_command(args: &ValidateArgs) -> CmdResult {
    match io::parse_scenario(&args.scenario) {
        Ok(_) => {
            println!("{}: valid", display(&args.scenario));
            Ok(())
        }
        Err(error) => Err(Failure {
            code: EXIT_INVALID,
            error,
        }),
    }
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

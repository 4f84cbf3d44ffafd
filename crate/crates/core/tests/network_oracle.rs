//! Network layer against brute-force and direct-simulation oracles.

use std::collections::BTreeSet;

use mohanet_core::cloud::{simulate_cloud, CloudModel};
use mohanet_core::emission::{make_emission, ActivityProfile};
use mohanet_core::geom::{Region, Vec2, Vec3};
use mohanet_core::mohanet::{
    advance_waypoint, build_kernel, find_contacts, load_mobility_trace, run_epidemic,
    transmission_dose, EpidemicParams, EpidemicSetup, KernelRun, Mobility,
    Waypoint, WaypointParams,
};
use mohanet_core::mohanet::mobility::uniform_point;
use mohanet_core::reception::receive_cloud_crossing;
use mohanet_core::rng::stream;
use mohanet_core::scenario::{Environment, RxGeometry};
use proptest::prelude::*;
use rand::Rng;

fn all_pairs(nodes: &[(u32, Vec2, bool, bool)], range: f64) -> BTreeSet<(u32, u32)> {
    let mut out = BTreeSet::new();
    for a in nodes.iter().filter(|n| n.2) {
        for b in nodes.iter().filter(|n| n.3 && n.0 != a.0) {
            let d = ((a.1.x - b.1.x).powi(2) + (a.1.y - b.1.y).powi(2)).sqrt();
            if d <= range {
                out.insert((a.0, b.0));
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn grid_search_equals_all_pairs(
        seed in any::<u64>(),
        n in 2usize..400,
        side in 5.0f64..200.0,
        range in 0.1f64..10.0,
        infectious in 0.05f64..0.6,
    ) {
        let mut rng = stream(seed, "test", 0);
        let nodes: Vec<_> = (0..n as u32)
            .map(|id| {
                let p = Vec2::new(rng.random::<f64>() * side - side / 2.0, rng.random::<f64>() * side);
                let i = rng.random::<f64>() < infectious;
                (id, p, i, !i)
            })
            .collect();
        let found = find_contacts(&nodes, range);
        let pairs: BTreeSet<_> = found.iter().map(|c| (c.infectious, c.susceptible)).collect();
        prop_assert_eq!(pairs.len(), found.len());
        prop_assert_eq!(pairs, all_pairs(&nodes, range));
        for c in &found {
            prop_assert!(c.distance <= range);
        }
    }
}

#[test]
fn random_waypoint_favours_the_centre() {
    let region = Region::new(100.0, 100.0);
    let params = WaypointParams { speed_min: 1.0, speed_max: 2.0, pause_max: 5.0 };
    let mut rng = stream(3, "mobility", 0);
    let mut p = uniform_point(&region, &mut rng);
    let mut wp = Waypoint::draw(&region, &params, &mut rng);
    let steps = 1_000_000;
    let mut central = 0usize;
    for _ in 0..steps {
        (p, wp) = advance_waypoint(p, wp, &region, &params, 1.0, &mut rng);
        assert!(region.contains(p));
        if (25.0..=75.0).contains(&p.x) && (25.0..=75.0).contains(&p.y) {
            central += 1;
        }
    }
    let share = central as f64 / steps as f64;
    assert!(share > 0.25, "{share}");
}

#[test]
fn kernel_matches_direct_cloud_run() {
    let env = Environment::default();
    let model = CloudModel::default();
    let rx = RxGeometry::default();
    let run = KernelRun { env: &env, model: &model, rx: &rx, duration: 10.0, dt: 0.01 };
    let kernel = build_kernel(&ActivityProfile::cough(), &run, &[1.5], &mut stream(9, "kernel", 0)).unwrap();

    let emission = make_emission(
        &ActivityProfile::cough(),
        0.0,
        Vec3::new(0.0, 0.0, rx.center.z),
        Vec3::X,
        0,
        &mut stream(9, "kernel", 0),
    )
    .unwrap();
    let at = RxGeometry { center: Vec3::new(1.5, 0.0, rx.center.z), ..rx.clone() };
    let traj = simulate_cloud(&emission, &env, &model, Some(&at), 10.0, 0.01).unwrap();
    let direct = receive_cloud_crossing(&traj, &at).total();
    assert!(direct > 0.0);
    assert!((transmission_dose(1.5, &kernel) - direct).abs() <= 1e-6, "{kernel:?} vs {direct}");
}

#[test]
fn trace_mobility_is_replayed() {
    let csv = "t,node_id,x,y\n0,0,1,1\n10,0,11,1\n0,1,5,5\n20,1,5,25\n";
    let region = Region::new(30.0, 30.0);
    let trace = load_mobility_trace(csv.as_bytes(), Some(&region)).unwrap();
    let setup = EpidemicSetup {
        population: 2,
        initial_infected: 0,
        region,
        mobility: Mobility::Trace(trace.clone()),
        params: EpidemicParams::default(),
        duration: 30.0,
        dt: 1.0,
        snapshot_interval: Some(5.0),
    };
    let run = run_epidemic(&setup, 1).unwrap();
    assert!(run.snapshots.len() >= 12);
    for s in &run.snapshots {
        let expect = trace.position(s.id, s.t).unwrap();
        assert!((s.x - expect.x).abs() < 1e-12 && (s.y - expect.y).abs() < 1e-12, "{s:?}");
    }
    let end: Vec<_> = run.snapshots.iter().filter(|s| s.t == 30.0).map(|s| (s.x, s.y)).collect();
    assert_eq!(end, vec![(11.0, 1.0), (5.0, 25.0)]);
}

#[test]
fn missing_trace_node_is_an_error() {
    let trace = load_mobility_trace("t,node_id,x,y\n0,0,1,1\n".as_bytes(), None).unwrap();
    let setup = EpidemicSetup {
        population: 2,
        initial_infected: 0,
        region: Region::new(10.0, 10.0),
        mobility: Mobility::Trace(trace),
        params: EpidemicParams::default(),
        duration: 1.0,
        dt: 1.0,
        snapshot_interval: None,
    };
    assert!(run_epidemic(&setup, 1).is_err());
}

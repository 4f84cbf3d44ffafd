//! Mass and flux of the Gaussian fields by direct numerical quadrature.

use mohanet_core::geom::Vec3;
use mohanet_core::plume::{
    dispersion_sigmas, plume_concentration, puff_concentration, DispersionParams, PointSource,
    StabilityClass,
};
use mohanet_core::scenario::Environment;

fn windy(u: f64) -> Environment {
    Environment {
        wind_velocity: Vec3::new(u, 0.0, 0.0),
        pathogen_decay_rate: 0.0,
        ..Environment::default()
    }
}

/// Composite Simpson nodes and weights on `[a, b]` with `n` (even) intervals.
fn simpson(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            (a + k as f64 * h, w * h / 3.0)
        })
        .collect()
}

fn source(h: f64, q: f64) -> PointSource {
    PointSource {
        position: Vec3::new(0.0, 0.0, h),
        strength: q,
        release_time: 0.0,
    }
}

#[test]
fn puff_mass_is_recovered() {
    let q = 1000.0;
    let u = 2.0;
    let env = windy(u);
    for class in [StabilityClass::B, StabilityClass::D, StabilityClass::F] {
        let params = DispersionParams::for_class(class);
        for age in [2.0, 10.0] {
            let travel = u * age;
            let s = dispersion_sigmas(travel, &params).unwrap();
            let src = source(1.7, q);
            let xs = simpson(travel - 7.0 * s.x, travel + 7.0 * s.x, 120);
            let ys = simpson(-7.0 * s.y, 7.0 * s.y, 120);
            let zs = simpson(0.0, 1.7 + 7.0 * s.z, 160);
            let mut mass = 0.0;
            for &(x, wx) in &xs {
                for &(y, wy) in &ys {
                    for &(z, wz) in &zs {
                        let c = puff_concentration(&src, &env, Vec3::new(x, y, z), age, &params).unwrap();
                        mass += wx * wy * wz * c;
                    }
                }
            }
            assert!((mass / q - 1.0).abs() < 0.01, "{class:?} age {age}: {mass}");
        }
    }
}

#[test]
fn plume_crosswind_flux_is_q_over_u() {
    let q = 50.0;
    for (u, class) in [(1.0, StabilityClass::A), (3.0, StabilityClass::D), (5.0, StabilityClass::E)] {
        let env = windy(u);
        let params = DispersionParams::for_class(class);
        for x in [2.0, 20.0] {
            let s = dispersion_sigmas(x, &params).unwrap();
            let src = source(1.5, q);
            let ys = simpson(-8.0 * s.y, 8.0 * s.y, 200);
            let zs = simpson(0.0, 1.5 + 8.0 * s.z, 300);
            let mut flux = 0.0;
            for &(y, wy) in &ys {
                for &(z, wz) in &zs {
                    flux += wy * wz * plume_concentration(&src, &env, Vec3::new(x, y, z), &params).unwrap();
                }
            }
            assert!((flux * u / q - 1.0).abs() < 0.01, "{class:?} u {u} x {x}: {flux}");
        }
    }
}

#[test]
fn dense_puff_train_approaches_the_plume() {
    let q = 10.0;
    let u = 2.0;
    let env = windy(u);
    let params = DispersionParams::for_class(StabilityClass::D);
    let gap = 0.01;
    let now = 40.0;
    for point in [Vec3::new(10.0, 0.0, 1.7), Vec3::new(20.0, 0.5, 1.2)] {
        let mut train = 0.0;
        let mut k = 0;
        while (k as f64) * gap < now {
            let src = PointSource {
                release_time: k as f64 * gap,
                ..source(1.7, q * gap)
            };
            train += puff_concentration(&src, &env, point, now, &params).unwrap();
            k += 1;
        }
        let plume = plume_concentration(&source(1.7, q), &env, point, &params).unwrap();
        assert!((train / plume - 1.0).abs() < 0.02, "{point:?}: {train} vs {plume}");
    }
}

//! Compartmental solver and final-size relation against analytic oracles.

use mohanet_core::mohanet::{final_size, sir_ode, OdePoint, OdeRates};
use proptest::prelude::*;

const DAY: f64 = 86_400.0;

fn sir(r0: f64, period: f64) -> OdeRates {
    OdeRates { beta: r0 / period, gamma_r: 1.0 / period, sigma_e: None }
}

fn start(i0: f64) -> OdePoint {
    OdePoint { t: 0.0, s: 1.0 - i0, e: 0.0, i: i0, r: 0.0 }
}

/// Plain fixed-point iteration of `a = 1 - exp(-r0 a)` from `a = 1`.
fn fixed_point(r0: f64) -> f64 {
    let mut a = 1.0f64;
    for _ in 0..100_000 {
        let next = 1.0 - (-r0 * a).exp();
        if (next - a).abs() < 1e-15 {
            return next;
        }
        a = next;
    }
    a
}

#[test]
fn sir_peak_matches_conserved_quantity() {
    let (r0, i0) = (2.0, 1e-4);
    let curve = sir_ode(&sir(r0, 5.0 * DAY), start(i0), 100.0 * DAY, 3600.0).unwrap();
    let peak = curve.iter().map(|p| p.i).fold(0.0, f64::max);
    let s0 = 1.0 - i0;
    let oracle = s0 + i0 - (1.0 + r0.ln()) / r0 - s0.ln() / r0;
    assert!((peak - oracle).abs() < 1e-5, "{peak} vs {oracle}");
    assert!((peak - 0.1534).abs() < 1e-3);
    let invariant = |p: &OdePoint| p.s + p.i - p.s.ln() / r0;
    let v0 = invariant(&curve[0]);
    assert!(curve.iter().all(|p| (invariant(p) - v0).abs() < 1e-9));
}

#[test]
fn sir_tail_approaches_final_size() {
    let r0 = 1.5;
    let curve = sir_ode(&sir(r0, 4.0 * DAY), start(1e-7), 800.0 * DAY, 3600.0).unwrap();
    let last = curve.last().unwrap();
    assert!(last.i < 1e-6);
    assert!((last.r - final_size(r0)).abs() < 1e-3, "{} vs {}", last.r, final_size(r0));
}

#[test]
fn seir_peaks_later_with_same_final_size() {
    let rates = OdeRates { sigma_e: Some(1.0 / (2.0 * DAY)), ..sir(2.0, 5.0 * DAY) };
    let seir = sir_ode(&rates, start(1e-4), 200.0 * DAY, 3600.0).unwrap();
    let plain = sir_ode(&sir(2.0, 5.0 * DAY), start(1e-4), 200.0 * DAY, 3600.0).unwrap();
    let peak_t = |c: &[OdePoint]| c.iter().max_by(|a, b| a.i.total_cmp(&b.i)).unwrap().t;
    assert!(peak_t(&seir) > peak_t(&plain));
    let last = seir.last().unwrap();
    assert!((last.r - plain.last().unwrap().r).abs() < 1e-3);
}

#[test]
fn final_size_examples() {
    assert!((final_size(2.0) - fixed_point(2.0)).abs() < 1e-6);
    assert!((final_size(1.5) - fixed_point(1.5)).abs() < 1e-6);
    assert!((final_size(2.0) - 0.7968).abs() < 5e-5);
    assert!((final_size(1.5) - 0.5828).abs() < 5e-5);
    for r0 in [0.0, 0.5, 1.0] {
        assert_eq!(final_size(r0), 0.0);
    }
}

proptest! {
    #[test]
    fn final_size_solves_its_equation(r0 in 1.01f64..20.0, bump in 0.01f64..1.0) {
        let a = final_size(r0);
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!((1.0 - a - (-r0 * a).exp()).abs() < 1e-10);
        prop_assert!(final_size(r0 + bump) > a);
    }
}

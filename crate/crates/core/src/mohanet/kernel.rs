//! Distance → dose tables bridging the cloud channel and the network layer.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::{simulate_cloud, CloudModel};
use crate::emission::{make_emission, ActivityProfile};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::reception::receive_cloud_crossing;
use crate::scenario::{Environment, RxGeometry};

/// Piecewise-linear dose per emission (droplets) against distance (m).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DoseKernel {
    pub knots: Vec<(f64, f64)>,
}

impl DoseKernel {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        let k = Self { knots };
        match k.violations().first() {
            Some(v) => Err(Error::domain(v.clone())),
            None => Ok(k),
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.knots.iter().any(|&(d, v)| !(d >= 0.0 && v >= 0.0 && d.is_finite() && v.is_finite())) {
            out.push("kernel distances and doses must be finite and non-negative".into());
        }
        if self.knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            out.push("kernel distances must be strictly increasing".into());
        }
        if self.knots.windows(2).any(|w| w[1].1 > w[0].1) {
            out.push("kernel doses must be non-increasing with distance".into());
        }
        out
    }

    /// Largest distance with a positive dose.
    pub fn reach(&self) -> f64 {
        self.knots
            .iter()
            .rev()
            .find(|k| k.1 > 0.0)
            .map_or(0.0, |k| k.0)
    }
}

/// Dose delivered at `distance`: linear between knots, flat before the first
/// knot, zero beyond the last.
pub fn transmission_dose(distance: f64, kernel: &DoseKernel) -> f64 {
    let knots = &kernel.knots;
    let Some(&(first_d, first_v)) = knots.first() else {
        return 0.0;
    };
    let (last_d, _) = knots[knots.len() - 1];
    if distance > last_d {
        return 0.0;
    }
    if distance <= first_d {
        return first_v;
    }
    let i = knots.partition_point(|k| k.0 < distance);
    let (d1, v1) = knots[i];
    if d1 == distance {
        return v1;
    }
    let (d0, v0) = knots[i - 1];
    v0 + (v1 - v0) * (distance - d0) / (d1 - d0)
}

/// Settings for tabulating a kernel from the cloud channel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRun<'a> {
    pub env: &'a Environment,
    pub model: &'a CloudModel,
    /// Receiver shape; its centre is moved to each tabulated distance.
    pub rx: &'a RxGeometry,
    pub duration: f64,
    pub dt: f64,
}

/// Runs the cloud channel once per distance and tabulates the plateau dose.
///
/// One emission is sampled from `rng` and reused for every distance. Values
/// are clamped so the table never increases with distance.
pub fn build_kernel<R: Rng + ?Sized>(
    profile: &ActivityProfile,
    run: &KernelRun<'_>,
    distances: &[f64],
    rng: &mut R,
) -> Result<DoseKernel> {
    if distances.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("kernel distances must be strictly increasing"));
    }
    let height = run.rx.center.z;
    let emission = make_emission(profile, 0.0, Vec3::new(0.0, 0.0, height), Vec3::X, 0, rng)?;
    let mut knots = Vec::with_capacity(distances.len());
    let mut ceiling = f64::INFINITY;
    for &d in distances {
        let rx = RxGeometry {
            center: Vec3::new(d, 0.0, height),
            ..run.rx.clone()
        };
        let traj = simulate_cloud(&emission, run.env, run.model, Some(&rx), run.duration, run.dt)?;
        let dose = receive_cloud_crossing(&traj, &rx).total().min(ceiling);
        ceiling = dose;
        knots.push((d, dose));
    }
    Ok(DoseKernel { knots })
}

//! Outer reception: droplets captured by the receiver's facial disk, dose
//! accumulation across sources, and threshold detection.
//!
//! The receiver plane is `x = rx.center.x`; transmitters face `+x`.

use serde::Serialize;

use crate::cloud::{CloudState, CloudTrajectory};
use crate::error::{Error, Result};
use crate::geom::{disk_overlap_area, Vec3};
use crate::scenario::RxGeometry;

/// Fraction of the cloud cross-section covered by the receiver disk.
///
/// Both disks are projected onto the plane normal to the cloud velocity
/// (the `x` axis when the cloud is at rest).
pub fn capture_fraction(cloud: &CloudState, rx: &RxGeometry) -> f64 {
    if !(cloud.radius > 0.0) {
        return 0.0;
    }
    let normal = cloud.velocity.normalized().unwrap_or(Vec3::X);
    let offset = rx.center - cloud.center;
    let lateral = offset - normal * offset.dot(normal);
    let overlap = disk_overlap_area(cloud.radius, rx.radius, lateral.norm());
    let section = std::f64::consts::PI * cloud.radius * cloud.radius;
    (overlap / section).clamp(0.0, 1.0)
}

/// Fraction of the cloud sphere's volume lying beyond the receiver plane.
pub fn swept_fraction(cloud: &CloudState, rx: &RxGeometry) -> f64 {
    let r = cloud.radius;
    let h = (cloud.center.x + r - rx.center.x).clamp(0.0, 2.0 * r);
    (h * h * (3.0 * r - h) / (4.0 * r * r * r)).min(1.0)
}

/// Tracks how much of a cloud has already passed a receiver plane.
///
/// The swept fraction is kept as a running maximum, so a cloud that grows in
/// place never "un-crosses" the plane.
#[derive(Debug, Clone, Copy)]
pub struct PlaneCrossing {
    swept: f64,
}

impl PlaneCrossing {
    pub fn new(initial: &CloudState, rx: &RxGeometry) -> Self {
        Self {
            swept: swept_fraction(initial, rx),
        }
    }

    /// Fraction of the cloud's droplets delivered while moving to `next`:
    /// newly swept volume times the captured share of the cross-section.
    pub fn advance(&mut self, next: &CloudState, rx: &RxGeometry) -> f64 {
        let swept = swept_fraction(next, rx).max(self.swept);
        let delta = swept - self.swept;
        self.swept = swept;
        if delta > 0.0 {
            delta * capture_fraction(next, rx)
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoseSample {
    pub t: f64,
    pub increment: f64,
    pub cumulative: f64,
    pub sources: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoseTimeline {
    pub receiver: u32,
    pub samples: Vec<DoseSample>,
}

impl DoseTimeline {
    pub fn empty(receiver: u32) -> Self {
        Self {
            receiver,
            samples: Vec::new(),
        }
    }

    /// Builds a timeline from `(t, increment, sources)` triples in time order.
    pub fn from_increments(
        receiver: u32,
        increments: impl IntoIterator<Item = (f64, f64, Vec<u32>)>,
    ) -> Self {
        let mut cumulative = 0.0;
        let samples = increments
            .into_iter()
            .map(|(t, increment, sources)| {
                cumulative += increment;
                DoseSample {
                    t,
                    increment,
                    cumulative,
                    sources,
                }
            })
            .collect();
        Self { receiver, samples }
    }

    pub fn total(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.cumulative)
    }

    pub fn detection_time(&self, threshold: f64) -> Option<f64> {
        self.samples
            .iter()
            .find(|s| detect_infection(s.cumulative, threshold) == 1)
            .map(|s| s.t)
    }
}

/// Dose a receiver takes from a cloud trajectory.
///
/// The trajectory should come from `simulate_cloud` with the same receiver so
/// that delivered droplets were already removed from the cloud.
pub fn receive_cloud_crossing(trajectory: &CloudTrajectory, rx: &RxGeometry) -> DoseTimeline {
    let source = trajectory.emission.source;
    let Some(first) = trajectory.states.first() else {
        return DoseTimeline::empty(rx.id);
    };
    let mut crossing = PlaneCrossing::new(first, rx);
    let head = std::iter::once((first.time, 0.0, Vec::new()));
    let steps = trajectory.states.windows(2).map(|w| {
        let f = crossing.advance(&w[1], rx);
        let increment = f * w[0].viable_droplets;
        let sources = if increment > 0.0 {
            vec![source]
        } else {
            Vec::new()
        };
        (w[1].time, increment, sources)
    });
    DoseTimeline::from_increments(rx.id, head.chain(steps))
}

/// Per-interval trapezoidal inhaled dose from a sampled concentration series.
pub fn inhalation_timeline(
    rx: &RxGeometry,
    source: u32,
    series: &[(f64, f64)],
) -> Result<DoseTimeline> {
    if series.windows(2).any(|w| !(w[1].0 >= w[0].0)) {
        return Err(Error::domain("concentration series is not time-ordered"));
    }
    let head = series.first().map(|&(t, _)| (t, 0.0, Vec::new()));
    let steps = series.windows(2).map(|w| {
        let inc = 0.5 * rx.breathing_rate * (w[0].1 + w[1].1) * (w[1].0 - w[0].0);
        let sources = if inc > 0.0 { vec![source] } else { Vec::new() };
        (w[1].0, inc, sources)
    });
    Ok(DoseTimeline::from_increments(rx.id, head.into_iter().chain(steps)))
}

/// Symbol 1 (infected) iff `cumulative_dose ≥ threshold`.
pub fn detect_infection(cumulative_dose: f64, threshold: f64) -> u8 {
    u8::from(cumulative_dose >= threshold)
}

/// Merges timelines of one receiver; increments at equal times add.
///
/// Increments sharing a timestamp are summed in sorted order, so the result
/// does not depend on the order of `timelines`.
pub fn superpose_doses(timelines: &[DoseTimeline]) -> Result<DoseTimeline> {
    let receiver = timelines
        .first()
        .ok_or_else(|| Error::domain("no timelines to superpose"))?
        .receiver;
    if let Some(other) = timelines.iter().find(|t| t.receiver != receiver) {
        return Err(Error::domain(format!(
            "cannot superpose timelines of receivers {receiver} and {}",
            other.receiver
        )));
    }
    if timelines.len() == 1 {
        return Ok(timelines[0].clone());
    }
    let mut all: Vec<&DoseSample> = timelines.iter().flat_map(|t| &t.samples).collect();
    all.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.increment.total_cmp(&b.increment)));

    let mut merged = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let t = all[i].t;
        let mut increment = 0.0;
        let mut sources = Vec::new();
        while i < all.len() && all[i].t == t {
            increment += all[i].increment;
            sources.extend_from_slice(&all[i].sources);
            i += 1;
        }
        sources.sort_unstable();
        sources.dedup();
        merged.push((t, increment, sources));
    }
    Ok(DoseTimeline::from_increments(receiver, merged))
}

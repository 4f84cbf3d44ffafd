//! Node mobility: static placement, random waypoint, or replayed traces.

use std::collections::BTreeMap;
use std::io::Read;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Region, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaypointParams {
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_max: f64,
}

impl Default for WaypointParams {
    fn default() -> Self {
        Self {
            speed_min: 0.5,
            speed_max: 1.5,
            pause_max: 30.0,
        }
    }
}

impl WaypointParams {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.speed_min > 0.0) {
            out.push("speed_min must be positive".into());
        }
        if !(self.speed_max >= self.speed_min) {
            out.push("speed_max must be at least speed_min".into());
        }
        if !(self.pause_max >= 0.0) {
            out.push("pause_max must be non-negative".into());
        }
        out
    }
}

/// Random-waypoint state carried by a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Waypoint {
    pub target: Vec2,
    pub speed: f64,
    pub pause_remaining: f64,
}

impl Waypoint {
    pub fn draw<R: Rng + ?Sized>(region: &Region, params: &WaypointParams, rng: &mut R) -> Self {
        Self {
            target: uniform_point(region, rng),
            speed: draw_speed(params, rng),
            pause_remaining: 0.0,
        }
    }
}

pub fn uniform_point<R: Rng + ?Sized>(region: &Region, rng: &mut R) -> Vec2 {
    Vec2::new(
        rng.random::<f64>() * region.width,
        rng.random::<f64>() * region.height,
    )
}

fn draw_speed<R: Rng + ?Sized>(params: &WaypointParams, rng: &mut R) -> f64 {
    if params.speed_max > params.speed_min {
        rng.random_range(params.speed_min..=params.speed_max)
    } else {
        params.speed_min
    }
}

/// Advances one node by `dt` under the random waypoint model.
///
/// A paused node only counts down its pause. A moving node travels towards
/// its target and stops there if it would overshoot; on arrival it draws a
/// pause, a new target and a new speed.
pub fn advance_waypoint<R: Rng + ?Sized>(
    position: Vec2,
    waypoint: Waypoint,
    region: &Region,
    params: &WaypointParams,
    dt: f64,
    rng: &mut R,
) -> (Vec2, Waypoint) {
    let mut wp = waypoint;
    if wp.pause_remaining > 0.0 {
        wp.pause_remaining = (wp.pause_remaining - dt).max(0.0);
        return (position, wp);
    }
    let dx = wp.target.x - position.x;
    let dy = wp.target.y - position.y;
    let dist = dx.hypot(dy);
    let travel = wp.speed * dt;
    if travel < dist {
        let k = travel / dist;
        return (Vec2::new(position.x + dx * k, position.y + dy * k), wp);
    }
    let arrived = wp.target;
    wp.pause_remaining = rng.random::<f64>() * params.pause_max;
    wp.target = uniform_point(region, rng);
    wp.speed = draw_speed(params, rng);
    (arrived, wp)
}

/// Recorded positions per node, time-sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MobilityTrace {
    pub tracks: BTreeMap<u32, Vec<(f64, Vec2)>>,
}

impl MobilityTrace {
    /// Piecewise-linear position at `t`; clamps to the first and last record.
    pub fn position(&self, node: u32, t: f64) -> Option<Vec2> {
        let track = self.tracks.get(&node)?;
        let first = track.first()?;
        if t <= first.0 {
            return Some(first.1);
        }
        let i = track.partition_point(|&(tt, _)| tt <= t);
        if i >= track.len() {
            return Some(track[track.len() - 1].1);
        }
        let (t0, p0) = track[i - 1];
        let (t1, p1) = track[i];
        let w = (t - t0) / (t1 - t0);
        Some(Vec2::new(p0.x + (p1.x - p0.x) * w, p0.y + (p1.y - p0.y) * w))
    }

    pub fn record_count(&self) -> usize {
        self.tracks.values().map(Vec::len).sum()
    }
}

/// Parses a `t,node_id,x,y` CSV trace (header required).
///
/// Records must be time-sorted per node and, when `region` is given, lie inside it.
pub fn load_mobility_trace<R: Read>(source: R, region: Option<&Region>) -> Result<MobilityTrace> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader
        .headers()
        .map_err(|e| Error::Trace {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let expected = ["t", "node_id", "x", "y"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Trace {
            line: 1,
            message: format!("expected header `t,node_id,x,y`, found `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        });
    }

    let mut trace = MobilityTrace::default();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Trace {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64> {
            record
                .get(i)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Trace {
                    line,
                    message: format!("invalid `{name}` value"),
                })
        };
        let t = field(0, "t")?;
        let node: u32 = record
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Trace {
                line,
                message: "invalid `node_id` value".into(),
            })?;
        let p = Vec2::new(field(2, "x")?, field(3, "y")?);
        if let Some(region) = region {
            if !region.contains(p) {
                return Err(Error::Trace {
                    line,
                    message: format!("position ({}, {}) outside the region", p.x, p.y),
                });
            }
        }
        let track = trace.tracks.entry(node).or_default();
        if let Some(&(last, _)) = track.last() {
            if !(t > last) {
                return Err(Error::Trace {
                    line,
                    message: format!("node {node}: time {t} not after previous record {last}"),
                });
            }
        }
        track.push((t, p));
    }
    if trace.tracks.is_empty() {
        return Err(Error::Trace {
            line: 1,
            message: "no records".into(),
        });
    }
    Ok(trace)
}

//! Scenario files and output writers.
//!
//! Scenarios are YAML. Numbers are written in Rust's shortest round-trip
//! decimal form so repeated runs are byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cloud::CloudTrajectory;
use crate::error::{Error, Result};
use crate::mohanet::{DoseKernel, EpiEvent, OdePoint, SeriesPoint, SnapshotRecord};
use crate::reception::{detect_infection, DoseTimeline};
use crate::scenario::{validate_scenario, MobilitySpec, ScenarioConfig};

/// Reads, resolves and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut config = parse_scenario_str(&text, &path.display().to_string())?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut report = validate_scenario(&config);
    if let MobilitySpec::Trace { path: trace } = &mut config.mobility {
        if trace.is_relative() {
            *trace = base.join(&*trace);
        }
        if !trace.is_file() {
            report.push(
                "mobility.path",
                format!("trace file {} does not exist", trace.display()),
            );
        }
    }
    if report.is_empty() {
        Ok(config)
    } else {
        Err(Error::Invalid(report))
    }
}

/// Parses scenario text without validating it. `name` labels errors.
pub fn parse_scenario_str(text: &str, name: &str) -> Result<ScenarioConfig> {
    serde_yaml::from_str(text).map_err(|e| {
        let msg = e.to_string();
        if let Some(key) = unknown_key(&msg) {
            return Error::UnknownKey {
                path: name.to_string(),
                key,
            };
        }
        let (line, column) = e.location().map_or((0, 0), |l| (l.line(), l.column()));
        let message = msg
            .split(" at line ")
            .next()
            .unwrap_or(&msg)
            .to_string();
        Error::Syntax {
            path: name.to_string(),
            line,
            column,
            message,
        }
    })
}

fn unknown_key(msg: &str) -> Option<String> {
    let rest = msg.split_once("unknown field `")?.1;
    Some(rest.split_once('`')?.0.to_string())
}

/// Opens `path` for writing, creating parent directories.
pub fn create_sink(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(file))
}

/// Writes a whole sink, flushing on success.
pub fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut w = create_sink(path)?;
    body(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Inserts `suffix` before the extension: `out/ts.csv` → `out/ts_r3.csv`.
pub fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let name = match path.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    path.with_file_name(name)
}

struct Table<'a> {
    sink: &'static str,
    out: &'a mut dyn Write,
}

impl<'a> Table<'a> {
    fn new(sink: &'static str, out: &'a mut dyn Write, header: &str) -> Result<Self> {
        let mut t = Self { sink, out };
        t.line(header)?;
        Ok(t)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").map_err(|e| Error::io(self.sink, e))
    }

    fn row(&mut self, cells: &[Cell]) -> Result<()> {
        let mut s = String::new();
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            match *c {
                Cell::F(v) if !v.is_finite() => return Err(Error::NonFinite(self.sink.into())),
                Cell::F(v) => s.push_str(&v.to_string()),
                Cell::U(v) => s.push_str(&v.to_string()),
            }
        }
        self.line(&s)
    }
}

enum Cell {
    F(f64),
    U(u64),
}

use Cell::{F, U};

pub fn write_trajectory_csv(out: &mut dyn Write, trajectory: &CloudTrajectory) -> Result<()> {
    let mut t = Table::new("trajectory_csv", out, "t,x,y,z,vx,vy,vz,radius,dT,N,Nv")?;
    for s in &trajectory.states {
        t.row(&[
            F(s.time),
            F(s.center.x),
            F(s.center.y),
            F(s.center.z),
            F(s.velocity.x),
            F(s.velocity.y),
            F(s.velocity.z),
            F(s.radius),
            F(s.excess_temperature),
            F(s.total_droplets),
            F(s.viable_droplets),
        ])?;
    }
    Ok(())
}

/// One row per sample, receivers in the given order; `thresholds[k]` is γ of `timelines[k]`.
pub fn write_dose_csv(out: &mut dyn Write, timelines: &[DoseTimeline], thresholds: &[f64]) -> Result<()> {
    let mut t = Table::new("dose_csv", out, "t,receiver_id,increment,cumulative,infected_flag")?;
    for (tl, &gamma) in timelines.iter().zip(thresholds) {
        for s in &tl.samples {
            t.row(&[
                F(s.t),
                U(tl.receiver.into()),
                F(s.increment),
                F(s.cumulative),
                U(detect_infection(s.cumulative, gamma).into()),
            ])?;
        }
    }
    Ok(())
}

/// Rows of `(x, y, z, t, C)`.
pub fn write_field_csv(out: &mut dyn Write, rows: &[[f64; 5]]) -> Result<()> {
    let mut t = Table::new("field_csv", out, "x,y,z,t,C")?;
    for r in rows {
        t.row(&r.map(F))?;
    }
    Ok(())
}

pub fn write_timeseries_csv(out: &mut dyn Write, series: &[SeriesPoint]) -> Result<()> {
    let mut t = Table::new("timeseries_csv", out, "t,S,E,I,R")?;
    for p in series {
        let c = p.counts;
        t.row(&[F(p.t), U(c.s as u64), U(c.e as u64), U(c.i as u64), U(c.r as u64)])?;
    }
    Ok(())
}

pub fn write_kernel_csv(out: &mut dyn Write, kernel: &DoseKernel) -> Result<()> {
    let mut t = Table::new("kernel_csv", out, "distance,dose")?;
    for &(d, v) in &kernel.knots {
        t.row(&[F(d), F(v)])?;
    }
    Ok(())
}

pub fn write_curves_csv(out: &mut dyn Write, curves: &[OdePoint]) -> Result<()> {
    let mut t = Table::new("curves_csv", out, "t,s,e,i,r")?;
    for p in curves {
        t.row(&[F(p.t), F(p.s), F(p.e), F(p.i), F(p.r)])?;
    }
    Ok(())
}

fn write_jsonl<T: Serialize>(
    sink: &'static str,
    out: &mut dyn Write,
    records: &[T],
    finite: impl Fn(&T) -> bool,
) -> Result<()> {
    for r in records {
        if !finite(r) {
            return Err(Error::NonFinite(sink.into()));
        }
        let line = serde_json::to_string(r).map_err(|e| Error::io(sink, e.into()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(sink, e))?;
    }
    Ok(())
}

pub fn write_snapshots_jsonl(out: &mut dyn Write, records: &[SnapshotRecord]) -> Result<()> {
    write_jsonl("snapshots_jsonl", out, records, |r| {
        r.t.is_finite() && r.x.is_finite() && r.y.is_finite()
    })
}

pub fn write_events_jsonl(out: &mut dyn Write, events: &[EpiEvent]) -> Result<()> {
    write_jsonl("events_jsonl", out, events, |e| e.t.is_finite())
}

/// Pretty JSON followed by a newline. Rejects non-finite numbers.
pub fn write_summary_json<T: Serialize>(out: &mut dyn Write, summary: &T) -> Result<()> {
    let value = serde_json::to_value(summary).map_err(|e| Error::io("summary_json", e.into()))?;
    let text = serde_json::to_string_pretty(&value).map_err(|e| Error::io("summary_json", e.into()))?;
    if text.contains("null") && has_null_number(&value) {
        return Err(Error::NonFinite("summary_json".into()));
    }
    writeln!(out, "{text}").map_err(|e| Error::io("summary_json", e))
}

/// serde_json maps NaN and infinities to `null`; metric objects never hold a real null.
fn has_null_number(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Null => true,
        serde_json::Value::Array(a) => a.iter().any(has_null_number),
        serde_json::Value::Object(o) => o.values().any(has_null_number),
        _ => false,
    }
}

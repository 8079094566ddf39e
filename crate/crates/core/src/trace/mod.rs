//! Time-indexed kinematic states of every vehicle and pedestrian.
//!
//! Frames sit on a uniform step grid and are addressed by integer ticks;
//! seconds are always derived from the tick with [`tick_to_seconds`].

mod synthetic;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::TraceError;
use crate::geometry::{Heading, Point};

pub use synthetic::{generate_synthetic, sample_max_speed_factor, GridLayout, SyntheticParams};

pub const DEFAULT_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    #[serde(rename = "V")]
    Vehicle,
    #[serde(rename = "P")]
    Pedestrian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityState {
    pub id: String,
    pub kind: EntityKind,
    pub pos: Point,
    pub heading: Heading,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub tick: u64,
    pub t: f64,
    /// Keyed by id, so iteration is always in id order.
    pub states: BTreeMap<String, EntityState>,
}

impl Frame {
    pub fn get(&self, id: &str) -> Option<&EntityState> {
        self.states.get(id)
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &EntityState> {
        self.states.values().filter(|s| s.kind == EntityKind::Vehicle)
    }

    pub fn pedestrians(&self) -> impl Iterator<Item = &EntityState> {
        self.states.values().filter(|s| s.kind == EntityKind::Pedestrian)
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// First and last tick at which an entity is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lifetime {
    pub kind: EntityKind,
    pub entry_tick: u64,
    pub exit_tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSequence {
    step: f64,
    frames: Vec<Frame>,
    lifetimes: BTreeMap<String, Lifetime>,
}

impl TraceSequence {
    /// Validates and wraps frames that must already be on consecutive ticks.
    pub fn new(step: f64, frames: Vec<Frame>) -> Result<Self, TraceError> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(TraceError::InvalidStep(step));
        }
        let mut lifetimes: BTreeMap<String, Lifetime> = BTreeMap::new();
        for (i, frame) in frames.iter().enumerate() {
            if i > 0 {
                let prev = frames[i - 1].tick;
                if frame.tick <= prev {
                    return Err(TraceError::Unordered { t: frame.t });
                }
                if frame.tick != prev + 1 {
                    return Err(TraceError::NonUniformStep {
                        expected: step,
                        found: (frame.tick - prev) as f64 * step,
                        at: frame.t,
                    });
                }
            }
            for (id, s) in &frame.states {
                if !(s.pos.is_finite() && s.speed.is_finite()) {
                    return Err(TraceError::NonFinite { id: id.clone(), t: frame.t });
                }
                if s.speed < 0.0 {
                    return Err(TraceError::NegativeSpeed { id: id.clone(), speed: s.speed, t: frame.t });
                }
                match lifetimes.get_mut(id) {
                    None => {
                        lifetimes.insert(id.clone(), Lifetime { kind: s.kind, entry_tick: frame.tick, exit_tick: frame.tick });
                    }
                    Some(life) => {
                        if life.kind != s.kind {
                            return Err(TraceError::KindChanged { id: id.clone(), t: frame.t });
                        }
                        if life.exit_tick + 1 != frame.tick {
                            return Err(TraceError::ReusedId { id: id.clone(), t: frame.t });
                        }
                        life.exit_tick = frame.tick;
                    }
                }
            }
        }
        Ok(Self { step, frames, lifetimes })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn lifetimes(&self) -> &BTreeMap<String, Lifetime> {
        &self.lifetimes
    }

    pub fn seconds(&self, tick: u64) -> f64 {
        tick_to_seconds(tick, self.step)
    }

    pub fn first_tick(&self) -> Option<u64> {
        self.frames.first().map(|f| f.tick)
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.frames.last().map(|f| f.tick)
    }

    pub fn vehicle_count(&self) -> usize {
        self.lifetimes.values().filter(|l| l.kind == EntityKind::Vehicle).count()
    }

    pub fn pedestrian_count(&self) -> usize {
        self.lifetimes.values().filter(|l| l.kind == EntityKind::Pedestrian).count()
    }

    /// Maps a time in seconds to its tick, rejecting off-grid values.
    pub fn tick_of(&self, t: f64) -> Result<u64, TraceError> {
        tick_on_grid(t, self.step)
    }

    pub fn frame_at(&self, t: f64) -> Result<&Frame, TraceError> {
        let tick = self.tick_of(t)?;
        let first = self.first_tick().ok_or(TraceError::OutOfHorizon { t })?;
        if tick < first {
            return Err(TraceError::OutOfHorizon { t });
        }
        self.frames.get((tick - first) as usize).ok_or(TraceError::OutOfHorizon { t })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TraceError> {
        let decimals = step_decimals(self.step);
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| TraceError::Parse { line: 0, message: e.to_string() };
        w.write_record(["t", "id", "kind", "x", "y", "heading_deg", "speed"]).map_err(io)?;
        let (first, last) = (self.first_tick(), self.last_tick());
        for f in &self.frames {
            // A gap inside the trace cannot be represented by rows.
            if f.is_empty() && Some(f.tick) != first && Some(f.tick) != last {
                return Err(TraceError::EmptyFrame { t: f.t });
            }
            let t = format!("{:.*}", decimals, f.t);
            for s in f.states.values() {
                let kind = match s.kind {
                    EntityKind::Vehicle => "V",
                    EntityKind::Pedestrian => "P",
                };
                w.write_record([
                    t.as_str(),
                    s.id.as_str(),
                    kind,
                    &s.pos.x.to_string(),
                    &s.pos.y.to_string(),
                    &s.heading.degrees().to_string(),
                    &s.speed.to_string(),
                ])
                .map_err(io)?;
            }
        }
        w.flush().map_err(|e| TraceError::Parse { line: 0, message: e.to_string() })?;
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|source| TraceError::Io { path: path.into(), source })?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Parses the CSV trace format. The step is inferred from the first two
    /// frame times, defaulting to 0.1 s for single-frame traces.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, TraceError> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut rows: Vec<(u64, Row)> = Vec::new();
        for result in rdr.deserialize::<Row>() {
            let row = result.map_err(|e| TraceError::Parse {
                line: e.position().map(|p| p.line()).unwrap_or(0),
                message: e.to_string(),
            })?;
            let line = rows.len() as u64 + 2;
            rows.push((line, row));
        }
        // Group rows by distinct time value, preserving file order.
        let mut times: Vec<f64> = Vec::new();
        for (_, r) in &rows {
            match times.last() {
                Some(&last) if r.t == last => {}
                Some(&last) if r.t < last => return Err(TraceError::Unordered { t: r.t }),
                _ => times.push(r.t),
            }
        }
        let step = if times.len() >= 2 { times[1] - times[0] } else { DEFAULT_STEP };
        if !(step > 0.0) {
            return Err(TraceError::InvalidStep(step));
        }
        let step = snap_step(step);
        let mut frames: Vec<Frame> = Vec::with_capacity(times.len());
        for (line, row) in rows {
            let tick = tick_on_grid(row.t, step)?;
            if frames.last().map(|f| f.tick) != Some(tick) {
                if let Some(prev) = frames.last() {
                    if tick != prev.tick + 1 {
                        return Err(TraceError::NonUniformStep {
                            expected: step,
                            found: row.t - prev.t,
                            at: row.t,
                        });
                    }
                }
                frames.push(Frame { tick, t: tick_to_seconds(tick, step), states: BTreeMap::new() });
            }
            let frame = frames.last_mut().expect("frame pushed above");
            if !(row.x.is_finite() && row.y.is_finite() && row.heading_deg.is_finite()) {
                return Err(TraceError::Parse { line, message: format!("non-finite value for `{}`", row.id) });
            }
            let state = EntityState {
                id: row.id.clone(),
                kind: row.kind,
                pos: Point::new(row.x, row.y),
                heading: Heading::from_degrees(row.heading_deg),
                speed: row.speed,
            };
            if frame.states.insert(row.id.clone(), state).is_some() {
                return Err(TraceError::DuplicateId { id: row.id, t: frame.t });
            }
        }
        Self::new(step, frames)
    }
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<TraceSequence, TraceError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| TraceError::Io { path: path.into(), source })?;
    TraceSequence::read_csv(std::io::BufReader::new(file))
}

pub fn frame_at(trace: &TraceSequence, t: f64) -> Result<&Frame, TraceError> {
    trace.frame_at(t)
}

#[derive(Debug, Deserialize)]
struct Row {
    t: f64,
    id: String,
    kind: EntityKind,
    x: f64,
    y: f64,
    heading_deg: f64,
    speed: f64,
}

/// Seconds at `tick`. When the step divides one second the result is the
/// correctly rounded `tick / ticks_per_second`, so 3 ticks of 0.1 s give
/// exactly `0.3`.
pub fn tick_to_seconds(tick: u64, step: f64) -> f64 {
    let per_second = (1.0 / step).round();
    if per_second >= 1.0 && (per_second * step - 1.0).abs() <= 1e-9 {
        tick as f64 / per_second
    } else {
        tick as f64 * step
    }
}

fn grid_tolerance(step: f64) -> f64 {
    step * 1e-6
}

pub(crate) fn tick_on_grid(t: f64, step: f64) -> Result<u64, TraceError> {
    if !t.is_finite() || t < -grid_tolerance(step) {
        return Err(TraceError::OffGrid { t, step });
    }
    let k = (t / step).round();
    if (k * step - t).abs() > grid_tolerance(step) {
        return Err(TraceError::OffGrid { t, step });
    }
    Ok(k.max(0.0) as u64)
}

/// Removes decimal-parse noise from an inferred step (0.1 parsed from
/// "0.1" and "0.2" differences is not exactly 0.1).
fn snap_step(step: f64) -> f64 {
    let d = step_decimals(step);
    let scale = 10f64.powi(d as i32);
    let snapped = (step * scale).round() / scale;
    if (snapped - step).abs() <= grid_tolerance(step) {
        snapped
    } else {
        step
    }
}

/// Number of decimals needed to print grid times for this step.
/// Decimal places that print every multiple of `step` exactly.
pub fn step_decimals(step: f64) -> usize {
    (0..=9)
        .find(|&d| {
            let scaled = step * 10f64.powi(d as i32);
            (scaled - scaled.round()).abs() <= 1e-6 * scaled.max(1.0)
        })
        .unwrap_or(9)
}

//! Per-vehicle alert logic: the four trigger conditions, the per-pedestrian
//! alert state with its confirmation timer, and the alert lifecycle log.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::Beacon;
use crate::error::ConfigError;
use crate::geometry::{distance, distance_to_segment, is_in_front, Point};
use crate::scenario::{Crossing, ScenarioMap};
use crate::trace::{tick_to_seconds, EntityState, Frame};

/// Alert trigger rule, from the plain distance check (0) to the most
/// selective crossing-aware rule (3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Algorithm {
    /// Pedestrian closer than the alert distance.
    Distance = 0,
    /// ... and the vehicle is near some crossing.
    NearCrossing = 1,
    /// ... and that crossing is in front of the vehicle.
    CrossingAhead = 2,
    /// ... and the pedestrian is in front too, and near the same crossing.
    PedestrianAtCrossing = 3,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] =
        [Algorithm::Distance, Algorithm::NearCrossing, Algorithm::CrossingAhead, Algorithm::PedestrianAtCrossing];

    pub fn index(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Algorithm {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Algorithm::ALL.get(v as usize).copied().ok_or_else(|| format!("unknown algorithm {v}, expected 0..=3"))
    }
}

impl From<Algorithm> for u8 {
    fn from(a: Algorithm) -> u8 {
        a.index()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    /// Alert distance threshold, meters.
    pub th_ad: f64,
    /// Pedestrian safety threshold, meters; only the crossing-aware rule uses it.
    pub th_ps: f64,
    /// Seconds without a confirming beacon before an alert is dropped.
    pub expiry: f64,
}

impl AlgorithmConfig {
    pub fn new(algorithm: Algorithm, th_ad: f64, th_ps: f64) -> Self {
        Self { algorithm, th_ad, th_ps, expiry: 1.0 }
    }

    pub fn validate(&self, beacon_period: f64) -> Result<(), ConfigError> {
        if !(self.th_ad > 0.0 && self.th_ad.is_finite()) {
            return Err(ConfigError::invalid("th_ad", format!("must be positive, got {}", self.th_ad)));
        }
        if !(self.th_ps > 0.0 && self.th_ps.is_finite()) {
            return Err(ConfigError::invalid("th_ps", format!("must be positive, got {}", self.th_ps)));
        }
        if !(self.expiry >= beacon_period) {
            return Err(ConfigError::invalid(
                "expiry",
                format!("{} s is shorter than the {} s beacon period", self.expiry, beacon_period),
            ));
        }
        Ok(())
    }
}

/// Crossing satisfying every crossing clause of the most selective rule,
/// with its distance to the pedestrian. Picks the crossing nearest the
/// pedestrian when several qualify.
fn qualifying_crossing<'m>(
    cfg: &AlgorithmConfig,
    vehicle: &EntityState,
    ped_pos: Point,
    map: &'m ScenarioMap,
) -> Option<(&'m Crossing, f64)> {
    map.crossings_within(vehicle.pos, cfg.th_ad)
        .into_iter()
        .filter(|(_, d)| *d < cfg.th_ad)
        .filter(|(c, _)| is_in_front(vehicle.pos, vehicle.heading, c.span.closest_point(vehicle.pos)))
        .map(|(c, _)| (c, distance_to_segment(ped_pos, &c.span)))
        .filter(|(_, dp)| *dp < cfg.th_ps)
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id)))
}

/// Whether a beacon from `ped_pos` triggers (or confirms) an alert in `vehicle`.
pub fn condition(cfg: &AlgorithmConfig, vehicle: &EntityState, ped_pos: Point, map: &ScenarioMap) -> bool {
    if !(distance(vehicle.pos, ped_pos) < cfg.th_ad) {
        return false;
    }
    let near = || map.crossings_within(vehicle.pos, cfg.th_ad).into_iter().filter(|(_, d)| *d < cfg.th_ad);
    match cfg.algorithm {
        Algorithm::Distance => true,
        Algorithm::NearCrossing => near().next().is_some(),
        Algorithm::CrossingAhead => {
            near().any(|(c, _)| is_in_front(vehicle.pos, vehicle.heading, c.span.closest_point(vehicle.pos)))
        }
        Algorithm::PedestrianAtCrossing => {
            is_in_front(vehicle.pos, vehicle.heading, ped_pos) && qualifying_crossing(cfg, vehicle, ped_pos, map).is_some()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndCause {
    Expired,
    VehicleExit,
    PedestrianExit,
    SimulationEnd,
}

impl fmt::Display for EndCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EndCause::Expired => "expired",
            EndCause::VehicleExit => "vehicle_exit",
            EndCause::PedestrianExit => "pedestrian_exit",
            EndCause::SimulationEnd => "simulation_end",
        })
    }
}

/// A currently active alert.
#[derive(Debug, Clone, PartialEq)]
pub struct AlertState {
    pub vehicle_id: String,
    pub pedestrian_id: String,
    pub active_since: u64,
    pub last_confirm: u64,
    pub trigger_distance: f64,
    pub trigger_vehicle_speed: f64,
    pub trigger_ped_crossing_distance: f64,
    pub entry_adjacent: bool,
}

/// A finished alert. Active over `[t_trigger, t_end)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlertRecord {
    pub vehicle_id: String,
    pub pedestrian_id: String,
    pub algorithm: Algorithm,
    pub t_trigger: f64,
    pub t_end: f64,
    pub end_cause: EndCause,
    pub trigger_distance: f64,
    pub trigger_vehicle_speed: f64,
    pub trigger_ped_crossing_distance: f64,
    pub entry_adjacent: bool,
    #[serde(skip)]
    pub trigger_tick: u64,
    #[serde(skip)]
    pub end_tick: u64,
}

impl AlertRecord {
    pub fn duration(&self) -> f64 {
        self.t_end - self.t_trigger
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AlertEventKind {
    Activated,
    Confirmed,
    Deactivated(EndCause),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertEvent {
    pub vehicle_id: String,
    pub pedestrian_id: String,
    pub tick: u64,
    pub kind: AlertEventKind,
}

/// Alert store for one algorithm configuration over one run.
#[derive(Debug, Clone)]
pub struct AlertEngine {
    cfg: AlgorithmConfig,
    step: f64,
    max_silent_ticks: u64,
    entry_window_ticks: u64,
    active: BTreeMap<(String, String), AlertState>,
    first_seen: HashMap<String, u64>,
    log: Vec<AlertRecord>,
}

/// Triggers this soon after either party appears count as entry alerts.
pub const ENTRY_WINDOW: f64 = 1.0;

impl AlertEngine {
    pub fn new(cfg: AlgorithmConfig, step: f64) -> Self {
        let ticks = |secs: f64| (secs / step + 1e-9).floor() as u64;
        Self {
            cfg,
            step,
            max_silent_ticks: ticks(cfg.expiry),
            entry_window_ticks: ticks(ENTRY_WINDOW),
            active: BTreeMap::new(),
            first_seen: HashMap::new(),
            log: Vec::new(),
        }
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.cfg
    }

    pub fn active(&self) -> impl Iterator<Item = &AlertState> {
        self.active.values()
    }

    pub fn is_active(&self, vehicle_id: &str, pedestrian_id: &str) -> bool {
        self.active.contains_key(&(vehicle_id.to_string(), pedestrian_id.to_string()))
    }

    /// Closes alerts whose timer ran out or whose vehicle or pedestrian left,
    /// then applies this frame's delivered beacons.
    pub fn process_frame(&mut self, frame: &Frame, delivered: &[(Beacon, String)], map: &ScenarioMap) -> Vec<AlertEvent> {
        let tick = frame.tick;
        for id in frame.states.keys() {
            if !self.first_seen.contains_key(id) {
                self.first_seen.insert(id.clone(), tick);
            }
        }
        let mut events = Vec::new();
        let mut ended = Vec::new();
        for (key, state) in &self.active {
            let cause = if tick - state.last_confirm > self.max_silent_ticks {
                Some(EndCause::Expired)
            } else if !frame.states.contains_key(&key.0) {
                Some(EndCause::VehicleExit)
            } else if !frame.states.contains_key(&key.1) {
                Some(EndCause::PedestrianExit)
            } else {
                None
            };
            if let Some(cause) = cause {
                ended.push((key.clone(), cause));
            }
        }
        for (key, cause) in ended {
            let state = self.active.remove(&key).expect("key collected from active set");
            self.close(state, tick, cause);
            events.push(event(&key, tick, AlertEventKind::Deactivated(cause)));
        }
        for (beacon, vehicle_id) in delivered {
            let Some(vehicle) = frame.get(vehicle_id) else { continue };
            if !condition(&self.cfg, vehicle, beacon.pos, map) {
                continue;
            }
            let key = (vehicle_id.clone(), beacon.pedestrian_id.clone());
            if let Some(state) = self.active.get_mut(&key) {
                state.last_confirm = tick;
                events.push(event(&key, tick, AlertEventKind::Confirmed));
                continue;
            }
            let ped_crossing = match self.cfg.algorithm {
                Algorithm::PedestrianAtCrossing => qualifying_crossing(&self.cfg, vehicle, beacon.pos, map).map(|(_, d)| d),
                _ => map.nearest_crossing(beacon.pos).map(|(_, d)| d),
            };
            let entered = self.first_seen[vehicle_id].max(*self.first_seen.get(&beacon.pedestrian_id).unwrap_or(&tick));
            self.active.insert(
                key.clone(),
                AlertState {
                    vehicle_id: key.0.clone(),
                    pedestrian_id: key.1.clone(),
                    active_since: tick,
                    last_confirm: tick,
                    trigger_distance: distance(vehicle.pos, beacon.pos),
                    trigger_vehicle_speed: vehicle.speed,
                    trigger_ped_crossing_distance: ped_crossing.unwrap_or(f64::INFINITY),
                    entry_adjacent: tick - entered <= self.entry_window_ticks,
                },
            );
            events.push(event(&key, tick, AlertEventKind::Activated));
        }

        events.sort_by(|a, b| (&a.vehicle_id, &a.pedestrian_id).cmp(&(&b.vehicle_id, &b.pedestrian_id)));
        events
    }

    fn close(&mut self, s: AlertState, end_tick: u64, cause: EndCause) {
        self.log.push(AlertRecord {
            vehicle_id: s.vehicle_id,
            pedestrian_id: s.pedestrian_id,
            algorithm: self.cfg.algorithm,
            t_trigger: tick_to_seconds(s.active_since, self.step),
            t_end: tick_to_seconds(end_tick, self.step),
            end_cause: cause,
            trigger_distance: s.trigger_distance,
            trigger_vehicle_speed: s.trigger_vehicle_speed,
            trigger_ped_crossing_distance: s.trigger_ped_crossing_distance,
            entry_adjacent: s.entry_adjacent,
            trigger_tick: s.active_since,
            end_tick,
        });
    }

    /// Closes every remaining alert at `end_tick` and returns the full log,
    /// ordered by trigger time, then vehicle and pedestrian id.
    pub fn finish(mut self, end_tick: u64) -> Vec<AlertRecord> {
        let remaining = std::mem::take(&mut self.active);
        for (_, state) in remaining {
            self.close(state, end_tick, EndCause::SimulationEnd);
        }
        let mut log = self.log;
        log.sort_by(|a, b| {
            a.trigger_tick
                .cmp(&b.trigger_tick)
                .then_with(|| a.vehicle_id.cmp(&b.vehicle_id))
                .then_with(|| a.pedestrian_id.cmp(&b.pedestrian_id))
        });
        log
    }
}

fn event(key: &(String, String), tick: u64, kind: AlertEventKind) -> AlertEvent {
    AlertEvent { vehicle_id: key.0.clone(), pedestrian_id: key.1.clone(), tick, kind }
}

/// Merged `[start, end)` intervals during which `vehicle_id` has at least
/// one active alert.
pub fn alert_condition_intervals(log: &[AlertRecord], vehicle_id: &str) -> Vec<(f64, f64)> {
    let mut spans: Vec<(f64, f64)> =
        log.iter().filter(|r| r.vehicle_id == vehicle_id).map(|r| (r.t_trigger, r.t_end)).collect();
    merge_intervals(&mut spans)
}

pub(crate) fn merge_intervals(spans: &mut [(f64, f64)]) -> Vec<(f64, f64)> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for &(s, e) in spans.iter() {
        if e <= s {
            continue;
        }
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

pub fn total_length(intervals: &[(f64, f64)]) -> f64 {
    intervals.iter().map(|(s, e)| e - s).sum()
}

/// Writes the alert log CSV.
pub fn write_alert_log<W: Write>(log: &[AlertRecord], out: W, decimals: usize) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "vehicle_id",
        "pedestrian_id",
        "algorithm",
        "t_trigger",
        "t_end",
        "end_cause",
        "trigger_distance_m",
        "trigger_vehicle_speed_mps",
        "trigger_ped_crossing_distance_m",
        "entry_adjacent",
    ])?;
    for r in log {
        w.write_record([
            r.vehicle_id.clone(),
            r.pedestrian_id.clone(),
            r.algorithm.to_string(),
            format!("{:.*}", decimals, r.t_trigger),
            format!("{:.*}", decimals, r.t_end),
            r.end_cause.to_string(),
            r.trigger_distance.to_string(),
            r.trigger_vehicle_speed.to_string(),
            r.trigger_ped_crossing_distance.to_string(),
            r.entry_adjacent.to_string(),
        ])?;
    }
    w.flush()
}

//! The per-tick loop tying trace, channel, alert engines and the danger
//! oracle together.

use serde::Serialize;
use sha2::{Digest, Sha256};

use rand::Rng;

use crate::alert::{AlertEngine, AlertRecord, AlgorithmConfig};
use crate::channel::{beacons_due, deliver, ChannelConfig, PhaseMap};
use crate::error::Error;
use crate::oracle::{coalesce, detect_danger, DangerEvent};
use crate::rng::SeedStream;
use crate::scenario::ScenarioMap;
use crate::trace::TraceSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmRun {
    pub config: AlgorithmConfig,
    pub log: Vec<AlertRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    /// SHA-256 over the channel and algorithm configs and the seed.
    pub config_hash: String,
    pub step: f64,
    /// Ticks `[first_tick, end_tick)` were simulated; every log covers them.
    pub first_tick: u64,
    pub end_tick: u64,
    pub runs: Vec<AlgorithmRun>,
    pub danger_events: Vec<DangerEvent>,
    pub beacons_sent: u64,
    pub beacons_delivered: u64,
}

impl RunResult {
    pub fn log_for(&self, cfg: &AlgorithmConfig) -> Option<&[AlertRecord]> {
        self.runs.iter().find(|r| &r.config == cfg).map(|r| r.log.as_slice())
    }
}

pub fn config_hash(channel: &ChannelConfig, algorithms: &[AlgorithmConfig], seed: u64) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        channel: &'a ChannelConfig,
        algorithms: &'a [AlgorithmConfig],
        seed: u64,
    }
    let json = serde_json::to_vec(&Key { channel, algorithms, seed }).expect("plain data serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every algorithm configuration over the trace with one shared set
/// of channel outcomes.
pub fn simulate(
    trace: &TraceSequence,
    map: &ScenarioMap,
    channel: &ChannelConfig,
    algorithms: &[AlgorithmConfig],
    seed: u64,
) -> Result<RunResult, Error> {
    let step = trace.step();
    channel.validate(step)?;
    let period_ticks = channel.period_ticks(step)?;
    for a in algorithms {
        a.validate(channel.period)?;
    }
    let seeds = SeedStream::new(seed);
    let mut channel_rng = seeds.substream("channel", "loss");
    let mut phases = PhaseMap::new();
    let mut engines: Vec<AlertEngine> = algorithms.iter().map(|a| AlertEngine::new(*a, step)).collect();
    let mut flags = Vec::new();
    let mut beacons_sent = 0;
    let mut beacons_delivered = 0;

    let frames = trace.frames();
    for (i, frame) in frames.iter().enumerate() {
        for ped in frame.pedestrians() {
            if !phases.contains_key(&ped.id) {
                let phase = seeds.substream("phase", &ped.id).random_range(0..period_ticks);
                phases.insert(ped.id.clone(), phase);
            }
        }
        let mut delivered = Vec::new();
        for beacon in beacons_due(frame, period_ticks, step, &phases)? {
            beacons_sent += 1;
            for vehicle in frame.vehicles() {
                if deliver(&beacon, vehicle, map, channel, &mut channel_rng) {
                    delivered.push((beacon.clone(), vehicle.id.clone()));
                }
            }
        }
        beacons_delivered += delivered.len() as u64;
        for engine in &mut engines {
            engine.process_frame(frame, &delivered, map);
        }
        if i > 0 {
            let found = detect_danger(&frames[i - 1], frame, map);
            if !found.is_empty() {
                flags.push((frame.tick, found));
            }
        }
    }

    let first_tick = trace.first_tick().unwrap_or(0);
    let end_tick = trace.last_tick().map_or(first_tick, |t| t + 1);
    let runs = algorithms
        .iter()
        .zip(engines)
        .map(|(cfg, engine)| AlgorithmRun { config: *cfg, log: engine.finish(end_tick) })
        .collect();
    Ok(RunResult {
        seed,
        config_hash: config_hash(channel, algorithms, seed),
        step,
        first_tick,
        end_tick,
        runs,
        danger_events: coalesce(&flags, step),
        beacons_sent,
        beacons_delivered,
    })
}

//! Pedestrian beacons: when they are sent and whether a vehicle hears them.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geometry::{distance, Point};
use crate::scenario::ScenarioMap;
use crate::trace::{tick_to_seconds, EntityKind, EntityState, Frame};

#[derive(Debug, Clone, PartialEq)]
pub struct Beacon {
    pub pedestrian_id: String,
    /// Position the pedestrian reports; currently its true position.
    pub pos: Point,
    pub tick: u64,
    pub t_sent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Seconds between beacons of one pedestrian.
    pub period: f64,
    /// Maximum sender-receiver distance, meters, inclusive.
    pub range: f64,
    /// Independent probability that an in-range, in-sight beacon is lost.
    pub loss_prob: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { period: 0.3, range: 100.0, loss_prob: 0.0 }
    }
}

impl ChannelConfig {
    /// Beacon period in simulation ticks.
    pub fn period_ticks(&self, step: f64) -> Result<u64, ConfigError> {
        if !(self.period > 0.0) {
            return Err(ConfigError::invalid("period", "must be positive"));
        }
        let k = (self.period / step).round();
        if k < 1.0 || (k * step - self.period).abs() > step * 1e-6 {
            return Err(ConfigError::invalid(
                "period",
                format!("{} s is not a positive multiple of the {} s step", self.period, step),
            ));
        }
        Ok(k as u64)
    }

    pub fn validate(&self, step: f64) -> Result<(), ConfigError> {
        self.period_ticks(step)?;
        if !(self.range > 0.0) {
            return Err(ConfigError::invalid("range", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(ConfigError::invalid("loss_prob", "must be within [0, 1]"));
        }
        Ok(())
    }
}

/// Per-pedestrian beacon phase, in ticks within `[0, period_ticks)`.
pub type PhaseMap = BTreeMap<String, u64>;

/// Beacons emitted in `frame`, in pedestrian-id order.
pub fn beacons_due(frame: &Frame, period_ticks: u64, step: f64, phases: &PhaseMap) -> Result<Vec<Beacon>, ConfigError> {
    let mut out = Vec::new();
    for ped in frame.pedestrians() {
        let phase = *phases.get(&ped.id).ok_or_else(|| ConfigError::MissingPhase(ped.id.clone()))?;
        if frame.tick >= phase && (frame.tick - phase).is_multiple_of(period_ticks) {
            out.push(Beacon { pedestrian_id: ped.id.clone(), pos: ped.pos, tick: frame.tick, t_sent: tick_to_seconds(frame.tick, step) });
        }
    }
    Ok(out)
}

/// Range and line-of-sight test, then a loss draw. Randomness is consumed
/// only when a draw can change the outcome.
pub fn deliver<R: Rng + ?Sized>(
    beacon: &Beacon,
    vehicle: &EntityState,
    map: &ScenarioMap,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> bool {
    debug_assert_eq!(vehicle.kind, EntityKind::Vehicle);
    if distance(beacon.pos, vehicle.pos) > cfg.range {
        return false;
    }
    if !map.line_of_sight(beacon.pos, vehicle.pos) {
        return false;
    }
    if cfg.loss_prob <= 0.0 {
        true
    } else if cfg.loss_prob >= 1.0 {
        false
    } else {
        rng.random::<f64>() >= cfg.loss_prob
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Heading, Polygon};
    use crate::scenario::{Bounds, Building};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn state(id: &str, kind: EntityKind, x: f64, y: f64) -> EntityState {
        EntityState { id: id.into(), kind, pos: Point::new(x, y), heading: Heading::from_degrees(0.0), speed: 0.0 }
    }

    fn frame(tick: u64, states: Vec<EntityState>) -> Frame {
        Frame { tick, t: tick as f64 * 0.1, states: states.into_iter().map(|s| (s.id.clone(), s)).collect() }
    }

    fn open_map(buildings: Vec<Building>) -> ScenarioMap {
        ScenarioMap::new(Bounds { min_x: -200.0, min_y: -200.0, max_x: 200.0, max_y: 200.0 }, vec![], buildings).unwrap()
    }

    fn beacon_at(x: f64, y: f64) -> Beacon {
        Beacon { pedestrian_id: "p".into(), pos: Point::new(x, y), tick: 0, t_sent: 0.0 }
    }

    #[test]
    fn beacon_schedule_phase_zero() {
        let phases: PhaseMap = [("p".to_string(), 0)].into();
        let sent: Vec<u64> = (0..7)
            .filter(|&k| {
                let f = frame(k, vec![state("p", EntityKind::Pedestrian, 0.0, 0.0)]);
                !beacons_due(&f, 3, 0.1, &phases).unwrap().is_empty()
            })
            .collect();
        assert_eq!(sent, vec![0, 3, 6]);
    }

    #[test]
    fn beacon_schedule_with_phase() {
        let phases: PhaseMap = [("p".to_string(), 1)].into();
        let f = frame(4, vec![state("p", EntityKind::Pedestrian, 0.0, 0.0)]);
        assert_eq!(beacons_due(&f, 3, 0.1, &phases).unwrap().len(), 1);
        let f = frame(0, vec![state("p", EntityKind::Pedestrian, 0.0, 0.0)]);
        assert!(beacons_due(&f, 3, 0.1, &phases).unwrap().is_empty());
    }

    #[test]
    fn empty_frame_and_missing_phase() {
        assert!(beacons_due(&frame(0, vec![]), 3, 0.1, &PhaseMap::new()).unwrap().is_empty());
        let f = frame(0, vec![state("q", EntityKind::Pedestrian, 0.0, 0.0)]);
        assert_eq!(beacons_due(&f, 3, 0.1, &PhaseMap::new()), Err(ConfigError::MissingPhase("q".into())));
    }

    #[test]
    fn period_must_fit_step() {
        assert_eq!(ChannelConfig::default().period_ticks(0.1), Ok(3));
        assert!(ChannelConfig { period: 0.25, ..Default::default() }.period_ticks(0.1).is_err());
        assert!(ChannelConfig { loss_prob: 1.5, ..Default::default() }.validate(0.1).is_err());
    }

    #[test]
    fn range_is_inclusive() {
        let map = open_map(vec![]);
        let cfg = ChannelConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = state("v", EntityKind::Vehicle, 100.0, 0.0);
        assert!(deliver(&beacon_at(0.0, 0.0), &v, &map, &cfg, &mut rng));
        let v = state("v", EntityKind::Vehicle, 101.0, 0.0);
        assert!(!deliver(&beacon_at(0.0, 0.0), &v, &map, &cfg, &mut rng));
        let v = state("v", EntityKind::Vehicle, 100.0 + 1e-9, 0.0);
        assert!(!deliver(&beacon_at(0.0, 0.0), &v, &map, &cfg, &mut rng));
    }

    #[test]
    fn building_blocks_beacon() {
        let wall = Building { id: "b".into(), footprint: Polygon::rect(Point::new(20.0, -10.0), Point::new(30.0, 10.0)).unwrap() };
        let map = open_map(vec![wall]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let v = state("v", EntityKind::Vehicle, 50.0, 0.0);
        assert!(!deliver(&beacon_at(0.0, 0.0), &v, &map, &ChannelConfig::default(), &mut rng));
    }

    #[test]
    fn zero_loss_consumes_no_randomness() {
        let map = open_map(vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let untouched = rng.clone();
        let v = state("v", EntityKind::Vehicle, 10.0, 0.0);
        assert!(deliver(&beacon_at(0.0, 0.0), &v, &map, &ChannelConfig::default(), &mut rng));
        assert_eq!(rng, untouched);
    }

    #[test]
    fn total_loss_drops_everything() {
        let map = open_map(vec![]);
        let cfg = ChannelConfig { loss_prob: 1.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = state("v", EntityKind::Vehicle, 1.0, 0.0);
        assert!((0..100).all(|_| !deliver(&beacon_at(0.0, 0.0), &v, &map, &cfg, &mut rng)));
    }

    #[test]
    fn symmetric_without_loss() {
        let wall = Building { id: "b".into(), footprint: Polygon::rect(Point::new(20.0, 5.0), Point::new(30.0, 10.0)).unwrap() };
        let map = open_map(vec![wall]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = ChannelConfig::default();
        for (a, b) in [((0.0, 0.0), (50.0, 12.0)), ((0.0, 0.0), (50.0, 0.0)), ((-40.0, 8.0), (60.0, 7.0))] {
            let fwd = deliver(&beacon_at(a.0, a.1), &state("v", EntityKind::Vehicle, b.0, b.1), &map, &cfg, &mut rng);
            let back = deliver(&beacon_at(b.0, b.1), &state("v", EntityKind::Vehicle, a.0, a.1), &map, &cfg, &mut rng);
            assert_eq!(fwd, back);
        }
    }
}

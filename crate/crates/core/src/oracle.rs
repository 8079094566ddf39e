//! Ground-truth danger detection from true positions, used to count alerts
//! that should have fired but did not.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::alert::AlertRecord;
use crate::geometry::{distance, distance_to_segment};
use crate::scenario::ScenarioMap;
use crate::trace::{tick_to_seconds, Frame};

/// Pedestrian must be this close to a crossing span, meters.
pub const ON_CROSSING: f64 = 1.0;
/// Vehicle-pedestrian distance below which an approach is dangerous, meters.
pub const DANGER_DISTANCE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DangerFlag {
    pub vehicle_id: String,
    pub pedestrian_id: String,
    pub distance: f64,
}

/// Pairs in `cur` that are dangerous: pedestrian on a crossing, vehicle
/// within 5 m and strictly closer than in `prev`. Pairs absent from `prev`
/// are never flagged. Output is in (vehicle, pedestrian) id order.
pub fn detect_danger(prev: &Frame, cur: &Frame, map: &ScenarioMap) -> Vec<DangerFlag> {
    let mut out = Vec::new();
    let on_crossing: Vec<_> = cur
        .pedestrians()
        .filter(|p| {
            map.crossings_within(p.pos, ON_CROSSING)
                .iter()
                .any(|(c, _)| distance_to_segment(p.pos, &c.span) <= ON_CROSSING)
        })
        .collect();
    if on_crossing.is_empty() {
        return out;
    }
    for v in cur.vehicles() {
        let Some(v_prev) = prev.get(&v.id) else { continue };
        for p in &on_crossing {
            let Some(p_prev) = prev.get(&p.id) else { continue };
            let d = distance(v.pos, p.pos);
            if d < DANGER_DISTANCE && d < distance(v_prev.pos, p_prev.pos) {
                out.push(DangerFlag { vehicle_id: v.id.clone(), pedestrian_id: p.id.clone(), distance: d });
            }
        }
    }
    out
}

/// A maximal run of consecutive flagged ticks for one pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DangerEvent {
    pub vehicle_id: String,
    pub pedestrian_id: String,
    pub t_start: f64,
    pub t_end: f64,
    #[serde(rename = "min_distance_m")]
    pub min_distance: f64,
    #[serde(skip)]
    pub start_tick: u64,
    #[serde(skip)]
    pub end_tick: u64,
}

/// Merges per-tick flags into events. Flags on consecutive ticks extend an
/// event; any gap starts a new one. Output is ordered by start tick, then
/// vehicle and pedestrian id.
pub fn coalesce(flags: &[(u64, Vec<DangerFlag>)], step: f64) -> Vec<DangerEvent> {
    let mut open: BTreeMap<(String, String), DangerEvent> = BTreeMap::new();
    let mut done = Vec::new();
    let mut sorted: Vec<&(u64, Vec<DangerFlag>)> = flags.iter().collect();
    sorted.sort_by_key(|(t, _)| *t);
    for (tick, tick_flags) in sorted {
        for f in tick_flags {
            let key = (f.vehicle_id.clone(), f.pedestrian_id.clone());
            match open.get_mut(&key) {
                Some(ev) if ev.end_tick + 1 == *tick => {
                    ev.end_tick = *tick;
                    ev.t_end = tick_to_seconds(*tick, step);
                    ev.min_distance = ev.min_distance.min(f.distance);
                }
                Some(ev) if ev.end_tick == *tick => ev.min_distance = ev.min_distance.min(f.distance),
                _ => {
                    let ev = DangerEvent {
                        vehicle_id: key.0.clone(),
                        pedestrian_id: key.1.clone(),
                        t_start: tick_to_seconds(*tick, step),
                        t_end: tick_to_seconds(*tick, step),
                        min_distance: f.distance,
                        start_tick: *tick,
                        end_tick: *tick,
                    };
                    if let Some(old) = open.insert(key, ev) {
                        done.push(old);
                    }
                }
            }
        }
    }
    done.extend(open.into_values());
    done.sort_by(|a, b| {
        a.start_tick
            .cmp(&b.start_tick)
            .then_with(|| a.vehicle_id.cmp(&b.vehicle_id))
            .then_with(|| a.pedestrian_id.cmp(&b.pedestrian_id))
    });
    done
}

/// Whether some alert for the same pair was active at any instant of the
/// event. Alerts cover `[t_trigger, t_end)`, events cover `[t_start, t_end]`.
pub fn is_covered(event: &DangerEvent, log: &[AlertRecord]) -> bool {
    log.iter().any(|a| {
        a.vehicle_id == event.vehicle_id
            && a.pedestrian_id == event.pedestrian_id
            && a.trigger_tick <= event.end_tick
            && a.end_tick > event.start_tick
    })
}

/// Danger events no alert covered: the false negatives.
pub fn coverage_check<'e>(events: &'e [DangerEvent], log: &[AlertRecord]) -> Vec<&'e DangerEvent> {
    let mut by_pair: BTreeMap<(&str, &str), Vec<&AlertRecord>> = BTreeMap::new();
    for a in log {
        by_pair.entry((&a.vehicle_id, &a.pedestrian_id)).or_default().push(a);
    }
    events
        .iter()
        .filter(|e| {
            !by_pair
                .get(&(e.vehicle_id.as_str(), e.pedestrian_id.as_str()))
                .is_some_and(|alerts| alerts.iter().any(|a| a.trigger_tick <= e.end_tick && a.end_tick > e.start_tick))
        })
        .collect()
}

pub fn write_danger_events<W: Write>(events: &[DangerEvent], out: W, decimals: usize) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["vehicle_id", "pedestrian_id", "t_start", "t_end", "min_distance_m"])?;
    for e in events {
        w.write_record([
            e.vehicle_id.clone(),
            e.pedestrian_id.clone(),
            format!("{:.*}", decimals, e.t_start),
            format!("{:.*}", decimals, e.t_end),
            e.min_distance.to_string(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alert::{Algorithm, EndCause};
    use crate::geometry::{Heading, Point, Segment};
    use crate::scenario::{Bounds, Crossing};
    use crate::trace::{EntityKind, EntityState};

    fn map() -> ScenarioMap {
        let c = Crossing { id: "c".into(), span: Segment::new(Point::new(0.0, -3.0), Point::new(0.0, 3.0)) };
        ScenarioMap::new(Bounds { min_x: -100.0, min_y: -100.0, max_x: 100.0, max_y: 100.0 }, vec![c], vec![]).unwrap()
    }

    fn frame(tick: u64, v: (f64, f64), p: (f64, f64)) -> Frame {
        let s = |id: &str, kind, (x, y): (f64, f64)| EntityState {
            id: id.into(),
            kind,
            pos: Point::new(x, y),
            heading: Heading::from_degrees(0.0),
            speed: 1.0,
        };
        let states = [s("v", EntityKind::Vehicle, v), s("p", EntityKind::Pedestrian, p)]
            .into_iter()
            .map(|e| (e.id.clone(), e))
            .collect();
        Frame { tick, t: tick_to_seconds(tick, 0.1), states }
    }

    #[test]
    fn approaching_vehicle_flags() {
        let m = map();
        let flags = detect_danger(&frame(0, (-5.0, 0.0), (0.0, 0.0)), &frame(1, (-4.0, 0.0), (0.0, 0.0)), &m);
        assert_eq!(flags.len(), 1);
        assert_eq!(flags[0].distance, 4.0);
    }

    #[test]
    fn receding_or_off_crossing_does_not_flag() {
        let m = map();
        assert!(detect_danger(&frame(0, (4.0, 0.0), (0.0, 0.0)), &frame(1, (4.5, 0.0), (0.0, 0.0)), &m).is_empty());
        // Stationary relative distance is not an approach.
        assert!(detect_danger(&frame(0, (4.0, 0.0), (0.0, 0.0)), &frame(1, (4.0, 0.0), (0.0, 0.0)), &m).is_empty());
        // Pedestrian 2 m from the span.
        assert!(detect_danger(&frame(0, (-5.0, 0.0), (-2.0, 0.0)), &frame(1, (-4.0, 0.0), (-2.0, 0.0)), &m).is_empty());
        // Exactly 1 m from the span is still on the crossing.
        assert_eq!(detect_danger(&frame(0, (-5.0, 0.0), (-1.0, 0.0)), &frame(1, (-4.0, 0.0), (-1.0, 0.0)), &m).len(), 1);
    }

    fn flag(d: f64) -> DangerFlag {
        DangerFlag { vehicle_id: "v".into(), pedestrian_id: "p".into(), distance: d }
    }

    #[test]
    fn consecutive_flags_coalesce() {
        let flags = vec![(10, vec![flag(4.0)]), (11, vec![flag(3.0)]), (12, vec![flag(2.5)])];
        let ev = coalesce(&flags, 0.1);
        assert_eq!(ev.len(), 1);
        assert_eq!((ev[0].start_tick, ev[0].end_tick), (10, 12));
        assert_eq!(ev[0].t_start, 1.0);
        assert_eq!(ev[0].t_end, 1.2);
        assert_eq!(ev[0].min_distance, 2.5);
    }

    #[test]
    fn gap_splits_events() {
        let flags = vec![(10, vec![flag(4.0)]), (11, vec![flag(3.0)]), (13, vec![flag(2.0)])];
        let ev = coalesce(&flags, 0.1);
        assert_eq!(ev.len(), 2);
        assert_eq!((ev[1].start_tick, ev[1].end_tick), (13, 13));
    }

    fn alert(start: u64, end: u64) -> AlertRecord {
        AlertRecord {
            vehicle_id: "v".into(),
            pedestrian_id: "p".into(),
            algorithm: Algorithm::Distance,
            t_trigger: start as f64 / 10.0,
            t_end: end as f64 / 10.0,
            end_cause: EndCause::Expired,
            trigger_distance: 1.0,
            trigger_vehicle_speed: 1.0,
            trigger_ped_crossing_distance: 1.0,
            entry_adjacent: false,
            trigger_tick: start,
            end_tick: end,
        }
    }

    #[test]
    fn coverage_uses_interval_overlap() {
        let ev = coalesce(&[(10, vec![flag(4.0)]), (11, vec![flag(3.0)])], 0.1);
        assert_eq!(coverage_check(&ev, &[]).len(), 1);
        assert!(coverage_check(&ev, &[alert(0, 11)]).is_empty());
        // Alert ending exactly when the event starts is not active then.
        assert_eq!(coverage_check(&ev, &[alert(0, 10)]).len(), 1);
        // Alert starting at the last flagged tick still overlaps.
        assert!(coverage_check(&ev, &[alert(11, 20)]).is_empty());
        assert_eq!(coverage_check(&ev, &[alert(12, 20)]).len(), 1);
        let mut other = alert(0, 100);
        other.pedestrian_id = "q".into();
        assert_eq!(coverage_check(&ev, &[other]).len(), 1);
        assert!(is_covered(&ev[0], &[alert(5, 12)]));
    }

    #[test]
    fn danger_csv() {
        let ev = coalesce(&[(10, vec![flag(4.0)])], 0.1);
        let mut out = Vec::new();
        write_danger_events(&ev, &mut out, 1).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "vehicle_id,pedestrian_id,t_start,t_end,min_distance_m\nv,p,1.0,1.0,4\n");
    }
}

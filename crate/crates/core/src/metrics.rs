//! Per-run evaluation quantities and cross-run aggregation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::alert::{alert_condition_intervals, total_length, AlertRecord, AlgorithmConfig};
use crate::error::MetricsError;
use crate::oracle::{coverage_check, DangerEvent};
use crate::trace::{EntityKind, TraceSequence};

/// Braking rate needed after an alert, or `Infeasible` when even an
/// instant full stop after the reaction time cannot help.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deceleration {
    Feasible(f64),
    Infeasible,
}

impl Deceleration {
    pub fn value(self) -> Option<f64> {
        match self {
            Deceleration::Feasible(v) => Some(v),
            Deceleration::Infeasible => None,
        }
    }
}

/// Rate that stops the vehicle short of the pedestrian's current position,
/// or `None` when the reaction distance alone already reaches it.
pub fn stop_before_pedestrian(s: f64, d_vp: f64, tr: f64) -> Option<f64> {
    let gap = d_vp - tr * s;
    (gap > 0.0).then(|| 0.5 * s * s / gap)
}

/// Rate that brings the vehicle to rest before a pedestrian `d_pc` meters
/// away reaches the crossing, or `None` when that happens within the
/// reaction time.
pub fn stop_before_arrival(s: f64, d_pc: f64, s_ped: f64, tr: f64) -> Option<f64> {
    let t_pc = d_pc / s_ped;
    (t_pc - tr > 0.0).then(|| s / (t_pc - tr))
}

/// Smaller of [`stop_before_pedestrian`] and [`stop_before_arrival`]:
/// either suffices to avoid the collision.
///
/// `s_ped` is the configured maximum pedestrian speed.
pub fn required_deceleration(s: f64, d_vp: f64, d_pc: f64, s_ped: f64, tr: f64) -> Deceleration {
    if s == 0.0 {
        return Deceleration::Feasible(0.0);
    }
    match (stop_before_pedestrian(s, d_vp, tr), stop_before_arrival(s, d_pc, s_ped, tr)) {
        (Some(a), Some(b)) => Deceleration::Feasible(a.min(b)),
        (Some(a), None) | (None, Some(a)) => Deceleration::Feasible(a),
        (None, None) => Deceleration::Infeasible,
    }
}

/// Driver reaction time and pedestrian speed used by the deceleration
/// analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecelParams {
    pub reaction_time: f64,
    pub ped_max_speed: f64,
}

impl Default for DecelParams {
    fn default() -> Self {
        Self { reaction_time: 0.5, ped_max_speed: 1.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub alerts_per_vehicle: f64,
    /// Seconds with at least one active alert, averaged over vehicles.
    pub alert_condition_time_per_vehicle: f64,
    /// Zero when there were no alerts.
    pub mean_trigger_distance: f64,
    pub decel_per_alert: Vec<f64>,
    pub decel_infeasible: usize,
    pub false_negatives: usize,
    pub danger_events: usize,
    pub vehicles: usize,
    pub alerts: usize,
}

impl RunMetrics {
    pub fn max_decel(&self) -> f64 {
        self.decel_per_alert.iter().copied().fold(0.0, f64::max)
    }
}

pub fn run_metrics(
    log: &[AlertRecord],
    events: &[DangerEvent],
    trace: &TraceSequence,
    cfg: &AlgorithmConfig,
    decel: &DecelParams,
) -> Result<RunMetrics, MetricsError> {
    debug_assert!(log.iter().all(|a| a.trigger_distance < cfg.th_ad), "trigger beyond th_ad");
    let vehicle_ids: Vec<&String> =
        trace.lifetimes().iter().filter(|(_, l)| l.kind == EntityKind::Vehicle).map(|(id, _)| id).collect();
    if vehicle_ids.is_empty() {
        return Err(MetricsError::NoVehicles);
    }
    let n = vehicle_ids.len() as f64;
    let condition_time: f64 = vehicle_ids.iter().map(|id| total_length(&alert_condition_intervals(log, id))).sum();
    let mean_trigger_distance =
        if log.is_empty() { 0.0 } else { log.iter().map(|a| a.trigger_distance).sum::<f64>() / log.len() as f64 };
    let mut decel_per_alert = Vec::new();
    let mut decel_infeasible = 0;
    for a in log.iter().filter(|a| !a.entry_adjacent) {
        match required_deceleration(
            a.trigger_vehicle_speed,
            a.trigger_distance,
            a.trigger_ped_crossing_distance,
            decel.ped_max_speed,
            decel.reaction_time,
        ) {
            Deceleration::Feasible(v) => decel_per_alert.push(v),
            Deceleration::Infeasible => decel_infeasible += 1,
        }
    }
    Ok(RunMetrics {
        alerts_per_vehicle: log.len() as f64 / n,
        alert_condition_time_per_vehicle: condition_time / n,
        mean_trigger_distance,
        decel_per_alert,
        decel_infeasible,
        false_negatives: coverage_check(events, log).len(),
        danger_events: events.len(),
        vehicles: vehicle_ids.len(),
        alerts: log.len(),
    })
}

/// Mean and two-sided 95% Student-t halfwidth over runs. The halfwidth is
/// `None` for a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub ci95_halfwidth: Option<f64>,
    pub n: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    // Summing in sorted order makes the result independent of run order.
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if n == 0 {
        return Summary { mean: f64::NAN, ci95_halfwidth: None, n };
    }
    let mean = sorted.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Summary { mean, ci95_halfwidth: None, n };
    }
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("dof >= 1").inverse_cdf(0.975);
    Summary { mean, ci95_halfwidth: Some(t * var.sqrt() / (n as f64).sqrt()), n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub runs: usize,
    pub alerts_per_vehicle: Summary,
    pub alert_condition_time_per_vehicle: Summary,
    pub mean_trigger_distance: Summary,
    pub max_decel: Summary,
    pub decel_infeasible: Summary,
    pub false_negatives: Summary,
    pub danger_events: Summary,
    pub vehicles: Summary,
}

/// Like [`aggregate`] but accepts a single run, leaving the CI unset.
pub fn aggregate_lenient(runs: &[RunMetrics]) -> AggregateMetrics {
    let s = |f: &dyn Fn(&RunMetrics) -> f64| summarize(&runs.iter().map(f).collect::<Vec<_>>());
    AggregateMetrics {
        runs: runs.len(),
        alerts_per_vehicle: s(&|r| r.alerts_per_vehicle),
        alert_condition_time_per_vehicle: s(&|r| r.alert_condition_time_per_vehicle),
        mean_trigger_distance: s(&|r| r.mean_trigger_distance),
        max_decel: s(&|r| r.max_decel()),
        decel_infeasible: s(&|r| r.decel_infeasible as f64),
        false_negatives: s(&|r| r.false_negatives as f64),
        danger_events: s(&|r| r.danger_events as f64),
        vehicles: s(&|r| r.vehicles as f64),
    }
}

pub fn aggregate(runs: &[RunMetrics]) -> Result<AggregateMetrics, MetricsError> {
    if runs.len() < 2 {
        return Err(MetricsError::TooFewRuns(runs.len()));
    }
    Ok(aggregate_lenient(runs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alert::{Algorithm, EndCause};
    use crate::geometry::{Heading, Point};
    use crate::trace::{EntityState, Frame};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn worked_example() {
        // Hand arithmetic: t_pc = 10/1.6 = 6.25; term1 = 0.5*16.67^2/(40-8.335)
        // = 138.94445/31.665 = 4.3879; term2 = 16.67/5.75 = 2.8991.
        let t_pc: f64 = 10.0 / 1.6;
        let term1 = 0.5 * 16.67 * 16.67 / (40.0 - 0.5 * 16.67);
        let term2 = 16.67 / (t_pc - 0.5);
        assert!(close(term1, 4.388, 5e-4));
        assert!(close(term2, 2.899, 5e-4));
        let got = required_deceleration(16.67, 40.0, 10.0, 1.6, 0.5).value().unwrap();
        assert!(close(got, 2.899, 5e-4));
    }

    #[test]
    fn stationary_and_far_pedestrian() {
        assert_eq!(required_deceleration(0.0, 20.0, 3.0, 1.6, 0.5), Deceleration::Feasible(0.0));
        let far = required_deceleration(10.0, 30.0, 1e9, 1.6, 0.5).value().unwrap();
        assert!(far < 1e-6);
        assert_eq!(required_deceleration(10.0, 30.0, f64::INFINITY, 1.6, 0.5), Deceleration::Feasible(0.0));
    }

    #[test]
    fn infeasible_only_when_both_terms_fail() {
        // d_vp <= tr*s and t_pc <= tr.
        assert_eq!(required_deceleration(10.0, 5.0, 0.5, 1.6, 0.5), Deceleration::Infeasible);
        // Term1 alone infeasible: fall back to term2.
        let d = required_deceleration(10.0, 5.0, 16.0, 1.6, 0.5).value().unwrap();
        assert!(close(d, 10.0 / 9.5, 1e-12));
        // Term2 alone infeasible: fall back to term1.
        let d = required_deceleration(10.0, 15.0, 0.0, 1.6, 0.5).value().unwrap();
        assert!(close(d, 5.0, 1e-12));
    }

    proptest! {
        #[test]
        fn never_exceeds_term1(s in 0.1f64..30.0, d_vp in 0.0f64..120.0, d_pc in 0.0f64..50.0, tr in 0.0f64..1.5) {
            let gap = d_vp - tr * s;
            prop_assume!(gap > 0.0);
            let term1 = 0.5 * s * s / gap;
            let d = required_deceleration(s, d_vp, d_pc, 1.6, tr).value().unwrap();
            prop_assert!(d <= term1);
            prop_assert!(d >= 0.0);
        }

        #[test]
        fn aggregate_ignores_run_order(values in prop::collection::vec(0.0f64..100.0, 2..8), rot in 0usize..8) {
            let runs: Vec<RunMetrics> = values.iter().map(|&v| metrics_with(v)).collect();
            let mut rotated = runs.clone();
            let k = rot % rotated.len();
            rotated.rotate_left(k);
            rotated.reverse();
            prop_assert_eq!(aggregate(&runs).unwrap(), aggregate(&rotated).unwrap());
        }
    }

    fn metrics_with(v: f64) -> RunMetrics {
        RunMetrics {
            alerts_per_vehicle: v,
            alert_condition_time_per_vehicle: v * 2.0,
            mean_trigger_distance: v / 3.0,
            decel_per_alert: vec![v],
            decel_infeasible: 0,
            false_negatives: 0,
            danger_events: 3,
            vehicles: 10,
            alerts: 1,
        }
    }

    #[test]
    fn t_interval_on_one_to_five() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.mean, 3.0);
        // Textbook: t(0.975, 4) = 2.7764, sd = sqrt(2.5) = 1.5811.
        let oracle = 2.7764 * 2.5f64.sqrt() / 5f64.sqrt();
        assert!(close(s.ci95_halfwidth.unwrap(), oracle, 1e-3));
        assert!(close(s.ci95_halfwidth.unwrap(), 1.963, 1e-3));
    }

    #[test]
    fn identical_runs_have_zero_halfwidth() {
        let agg = aggregate(&[metrics_with(4.0), metrics_with(4.0), metrics_with(4.0)]).unwrap();
        assert_eq!(agg.alerts_per_vehicle.mean, 4.0);
        assert_eq!(agg.alerts_per_vehicle.ci95_halfwidth, Some(0.0));
    }

    #[test]
    fn single_run_is_an_error() {
        assert!(matches!(aggregate(&[metrics_with(1.0)]), Err(MetricsError::TooFewRuns(1))));
        let lenient = aggregate_lenient(&[metrics_with(1.0)]);
        assert_eq!(lenient.alerts_per_vehicle.ci95_halfwidth, None);
    }

    fn trace_with_vehicles(n: usize) -> TraceSequence {
        let states: BTreeMap<String, EntityState> = (0..n)
            .map(|i| {
                let id = format!("v{i}");
                (id.clone(), EntityState { id, kind: EntityKind::Vehicle, pos: Point::new(0.0, 0.0), heading: Heading::from_degrees(0.0), speed: 1.0 })
            })
            .collect();
        let frames = (0..100).map(|tick| Frame { tick, t: tick as f64 / 10.0, states: states.clone() }).collect();
        TraceSequence::new(0.1, frames).unwrap()
    }

    fn alert(v: &str, start: f64, end: f64, d: f64) -> AlertRecord {
        AlertRecord {
            vehicle_id: v.into(),
            pedestrian_id: "p".into(),
            algorithm: Algorithm::Distance,
            t_trigger: start,
            t_end: end,
            end_cause: EndCause::Expired,
            trigger_distance: d,
            trigger_vehicle_speed: 10.0,
            trigger_ped_crossing_distance: 5.0,
            entry_adjacent: false,
            trigger_tick: (start * 10.0).round() as u64,
            end_tick: (end * 10.0).round() as u64,
        }
    }

    fn event(start: u64) -> DangerEvent {
        DangerEvent {
            vehicle_id: "v0".into(),
            pedestrian_id: "p".into(),
            t_start: start as f64 / 10.0,
            t_end: start as f64 / 10.0,
            min_distance: 3.0,
            start_tick: start,
            end_tick: start,
        }
    }

    #[test]
    fn empty_log() {
        let cfg = AlgorithmConfig::new(Algorithm::Distance, 40.0, 10.0);
        let m = run_metrics(&[], &[event(5), event(50)], &trace_with_vehicles(10), &cfg, &DecelParams::default()).unwrap();
        assert_eq!(m.vehicles, 10);
        assert_eq!(m.alerts_per_vehicle, 0.0);
        assert_eq!(m.alert_condition_time_per_vehicle, 0.0);
        assert_eq!(m.mean_trigger_distance, 0.0);
        assert_eq!(m.false_negatives, 2);
        assert_eq!(m.danger_events, 2);
    }

    #[test]
    fn overlapping_alerts_for_one_vehicle() {
        let cfg = AlgorithmConfig::new(Algorithm::Distance, 40.0, 10.0);
        let log = vec![alert("v0", 0.0, 5.0, 30.0), alert("v0", 3.0, 8.0, 36.5)];
        let m = run_metrics(&log, &[event(10)], &trace_with_vehicles(1), &cfg, &DecelParams::default()).unwrap();
        assert_eq!(m.alerts_per_vehicle, 2.0);
        assert_eq!(m.alert_condition_time_per_vehicle, 8.0);
        assert_eq!(m.mean_trigger_distance, 33.25);
        assert_eq!(m.false_negatives, 0);
        assert_eq!(m.decel_per_alert.len(), 2);
    }

    #[test]
    fn entry_alerts_skip_decel_and_infeasible_is_counted() {
        let cfg = AlgorithmConfig::new(Algorithm::Distance, 40.0, 10.0);
        let mut a = alert("v0", 0.0, 1.0, 36.5);
        a.entry_adjacent = true;
        let mut b = alert("v0", 2.0, 3.0, 2.0);
        b.trigger_ped_crossing_distance = 0.0;
        let m = run_metrics(&[a, b], &[], &trace_with_vehicles(1), &cfg, &DecelParams::default()).unwrap();
        assert!(m.decel_per_alert.is_empty());
        assert_eq!(m.decel_infeasible, 1);
        assert_eq!(m.mean_trigger_distance, (36.5 + 2.0) / 2.0);
    }

    #[test]
    fn no_vehicles_is_an_error() {
        let cfg = AlgorithmConfig::new(Algorithm::Distance, 40.0, 10.0);
        let empty = TraceSequence::new(0.1, vec![]).unwrap();
        assert!(matches!(run_metrics(&[], &[], &empty, &cfg, &DecelParams::default()), Err(MetricsError::NoVehicles)));
    }
}

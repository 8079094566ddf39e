//! The `run` command: simulate every (seed, algorithm, threshold) cell,
//! write per-seed logs and one report.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use pedwarn_core::alert::write_alert_log;
use pedwarn_core::metrics::{aggregate_lenient, Deceleration};
use pedwarn_core::oracle::write_danger_events;
use pedwarn_core::scenario::load_scenario;
use pedwarn_core::trace::{generate_synthetic, load_trace, step_decimals};
use pedwarn_core::{
    required_deceleration, run_metrics, simulate, AggregateMetrics, Algorithm, AlgorithmConfig, RunMetrics, RunResult,
    ScenarioMap, TraceSequence,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub result: RunResult,
    /// Parallel to `result.runs`.
    pub metrics: Vec<RunMetrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub config_hash: String,
    pub alerts: usize,
    pub vehicles: usize,
    pub alerts_per_vehicle: f64,
    pub alert_condition_time_per_vehicle: f64,
    pub mean_trigger_distance: f64,
    pub max_decel: f64,
    pub decel_infeasible: usize,
    pub danger_events: usize,
    pub false_negatives: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub algorithm: Algorithm,
    pub th_ad: f64,
    pub aggregate: AggregateMetrics,
    pub runs: Vec<SeedMetrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: RunConfig,
    pub cells: Vec<CellReport>,
}

fn load_input(cfg: &RunConfig) -> Result<Option<(ScenarioMap, TraceSequence)>> {
    match (&cfg.scenario, &cfg.trace) {
        (Some(s), Some(t)) => Ok(Some((load_scenario(s)?, load_trace(t)?))),
        _ => Ok(None),
    }
}

fn simulate_seed(cfg: &RunConfig, shared: Option<&(ScenarioMap, TraceSequence)>, seed: u64) -> Result<SeedOutcome> {
    let generated;
    let (map, trace) = match shared {
        Some((m, t)) => (m, t),
        None => {
            let mut params = cfg.synthetic.clone().expect("resolved config has an input");
            params.seed = seed;
            generated = generate_synthetic(&params).with_context(|| format!("generating city for seed {seed}"))?;
            (&generated.0, &generated.1)
        }
    };
    let algs = cfg.algorithm_configs();
    let result = simulate(trace, map, &cfg.channel, &algs, seed).with_context(|| format!("simulating seed {seed}"))?;
    let decel = cfg.decel_params();
    let metrics = result
        .runs
        .iter()
        .map(|r| run_metrics(&r.log, &result.danger_events, trace, &r.config, &decel))
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("metrics for seed {seed}"))?;
    Ok(SeedOutcome { result, metrics })
}

/// Simulates every seed; the output is ordered by seed whatever order the
/// threads finish in.
pub fn simulate_all(cfg: &RunConfig) -> Result<Vec<SeedOutcome>> {
    let shared = load_input(cfg)?;
    let mut outcomes: Vec<SeedOutcome> =
        cfg.seeds.par_iter().map(|&seed| simulate_seed(cfg, shared.as_ref(), seed)).collect::<Result<_>>()?;
    outcomes.sort_by_key(|o| o.result.seed);
    Ok(outcomes)
}

pub fn build_report(cfg: &RunConfig, outcomes: &[SeedOutcome]) -> Report {
    let cells = cfg
        .algorithm_configs()
        .into_iter()
        .enumerate()
        .map(|(i, ac)| {
            let metrics: Vec<RunMetrics> = outcomes.iter().map(|o| o.metrics[i].clone()).collect();
            let runs = outcomes
                .iter()
                .zip(&metrics)
                .map(|(o, m)| SeedMetrics {
                    seed: o.result.seed,
                    config_hash: o.result.config_hash.clone(),
                    alerts: m.alerts,
                    vehicles: m.vehicles,
                    alerts_per_vehicle: m.alerts_per_vehicle,
                    alert_condition_time_per_vehicle: m.alert_condition_time_per_vehicle,
                    mean_trigger_distance: m.mean_trigger_distance,
                    max_decel: m.max_decel(),
                    decel_infeasible: m.decel_infeasible,
                    danger_events: m.danger_events,
                    false_negatives: m.false_negatives,
                })
                .collect();
            CellReport { algorithm: ac.algorithm, th_ad: ac.th_ad, aggregate: aggregate_lenient(&metrics), runs }
        })
        .collect();
    Report { config: cfg.clone(), cells }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn cell_tag(ac: &AlgorithmConfig) -> String {
    format!("a{}_th{}", ac.algorithm.index(), ac.th_ad)
}

fn write_decel(path: &Path, ac: &AlgorithmConfig, cfg: &RunConfig, outcomes: &[SeedOutcome], decimals: usize) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "seed,vehicle_id,pedestrian_id,t_trigger,trigger_distance_m,trigger_vehicle_speed_mps,trigger_ped_crossing_distance_m,required_decel_mps2")?;
    let decel = cfg.decel_params();
    for o in outcomes {
        let log = o.result.log_for(ac).unwrap_or_default();
        for a in log.iter().filter(|a| !a.entry_adjacent) {
            let value = match required_deceleration(
                a.trigger_vehicle_speed,
                a.trigger_distance,
                a.trigger_ped_crossing_distance,
                decel.ped_max_speed,
                decel.reaction_time,
            ) {
                Deceleration::Feasible(v) => v.to_string(),
                Deceleration::Infeasible => "infeasible".to_string(),
            };
            writeln!(
                out,
                "{},{},{},{:.*},{},{},{},{}",
                o.result.seed,
                a.vehicle_id,
                a.pedestrian_id,
                decimals,
                a.t_trigger,
                a.trigger_distance,
                a.trigger_vehicle_speed,
                a.trigger_ped_crossing_distance,
                value
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Writes alert logs, danger events, deceleration tables and `report.json`
/// into `out_dir`.
pub fn write_outputs(cfg: &RunConfig, outcomes: &[SeedOutcome], report: &Report, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for o in outcomes {
        let decimals = step_decimals(o.result.step);
        let seed = o.result.seed;
        let mut w = create(&out_dir.join(format!("danger_s{seed}.csv")))?;
        write_danger_events(&o.result.danger_events, &mut w, decimals)?;
        w.flush()?;
        for run in &o.result.runs {
            let mut w = create(&out_dir.join(format!("alerts_{}_s{seed}.csv", cell_tag(&run.config))))?;
            write_alert_log(&run.log, &mut w, decimals)?;
            w.flush()?;
        }
    }
    let decimals = outcomes.first().map_or(1, |o| step_decimals(o.result.step));
    for ac in cfg.algorithm_configs() {
        write_decel(&out_dir.join(format!("decel_{}.csv", cell_tag(&ac))), &ac, cfg, outcomes, decimals)?;
    }
    let mut w = create(&out_dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Resolves, simulates and writes everything. Returns the report.
pub fn cmd_run(cfg: RunConfig, out_dir: &Path) -> Result<Report> {
    let cfg = cfg.resolve()?;
    let outcomes = simulate_all(&cfg)?;
    let report = build_report(&cfg, &outcomes);
    write_outputs(&cfg, &outcomes, &report, out_dir)?;
    Ok(report)
}

//! Command implementations behind the `pedwarn` binary.

pub mod config;
pub mod run;

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use pedwarn_core::calibration::{min_alert_distance, min_pedestrian_safety_threshold, CalibrationInputs};
use pedwarn_core::trace::generate_synthetic;
use pedwarn_core::tracktest::{replicate_tracktests, TrackOutcome};
use pedwarn_core::{Algorithm, SyntheticParams};

pub use config::RunConfig;
pub use run::{cmd_run, Report};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub th_ad: f64,
    pub th_ps: f64,
}

pub fn cmd_calibrate(inputs: &CalibrationInputs) -> Result<Thresholds> {
    Ok(Thresholds { th_ad: min_alert_distance(inputs)?, th_ps: min_pedestrian_safety_threshold(inputs)? })
}

pub fn format_thresholds(t: &Thresholds) -> String {
    format!("th_ad_min_m = {:.3}\nth_ps_min_m = {:.3}\n", t.th_ad, t.th_ps)
}

fn alg_set(set: &std::collections::BTreeSet<Algorithm>) -> String {
    let items: Vec<String> = set.iter().map(|a| a.to_string()).collect();
    format!("{{{}}}", items.join(","))
}

/// Runs the built-in track scenarios. The table lists expected and observed
/// activations and per-algorithm alert-condition seconds.
pub fn cmd_replicate_tracktests(seed: u64) -> Result<(Vec<TrackOutcome>, String)> {
    let outcomes = replicate_tracktests(seed)?;
    let mut table = String::from("config  ped_offset_m  expected   activated  dur_a0  dur_a1  dur_a2  dur_a3  result\n");
    for o in &outcomes {
        let d = o.durations;
        writeln!(
            table,
            "{:<6}  {:>12.1}  {:<9}  {:<9}  {:>6.1}  {:>6.1}  {:>6.1}  {:>6.1}  {}",
            o.config.number,
            o.config.ped_offset,
            alg_set(&o.config.expected),
            alg_set(&o.activated),
            d[0],
            d[1],
            d[2],
            d[3],
            if o.passed() { "PASS" } else { "FAIL" }
        )
        .expect("writing to a String");
    }
    Ok((outcomes, table))
}

/// Generates a synthetic city and writes `scenario.json` and `trace.csv`.
pub fn cmd_gen(params: Option<&Path>, seed: u64, out_dir: &Path) -> Result<()> {
    let mut p = match params {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading params {}", path.display()))?;
            serde_json::from_str::<SyntheticParams>(&text).with_context(|| format!("parsing params {}", path.display()))?
        }
        None => SyntheticParams::default(),
    };
    p.seed = seed;
    let (map, trace) = generate_synthetic(&p)?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    map.write(out_dir.join("scenario.json"))?;
    trace.write(out_dir.join("trace.csv"))?;
    Ok(())
}

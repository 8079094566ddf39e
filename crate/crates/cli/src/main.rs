use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use pedwarn_cli::{cmd_calibrate, cmd_gen, cmd_replicate_tracktests, cmd_run, format_thresholds, RunConfig};
use pedwarn_core::calibration::CalibrationInputs;
use pedwarn_core::Algorithm;

#[derive(Parser)]
#[command(name = "pedwarn", version, about = "Pedestrian-to-vehicle warning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured grid and write logs and a report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `out` in the config, default `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_algorithm)]
        algorithms: Option<Vec<Algorithm>>,
        #[arg(long = "th-ad", value_delimiter = ',')]
        th_ad: Option<Vec<f64>>,
        #[arg(long = "th-ps")]
        th_ps: Option<f64>,
        #[arg(long)]
        expiry: Option<f64>,
        #[arg(long = "loss-prob")]
        loss_prob: Option<f64>,
    },
    /// Run the straight-road scenarios and compare activations.
    ReplicateTracktests {
        /// Picks the beacon phase.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the smallest thresholds for the given braking inputs.
    Calibrate {
        /// Reaction time, s.
        #[arg(long, default_value_t = 0.5)]
        reaction: f64,
        /// Vehicle speed, m/s. Defaults to 60 km/h.
        #[arg(long, default_value_t = 60.0 / 3.6)]
        speed: f64,
        /// Pedestrian speed, m/s.
        #[arg(long = "ped-speed", default_value_t = 1.6)]
        ped_speed: f64,
        /// Deceleration, m/s².
        #[arg(long, default_value_t = 5.0)]
        decel: f64,
    },
    /// Generate a synthetic city: scenario.json and trace.csv.
    Gen {
        /// Generator parameters as JSON; defaults apply to missing fields.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    let n: u8 = s.parse().map_err(|_| format!("not an algorithm number: {s}"))?;
    Algorithm::try_from(n).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, out, seeds, algorithms, th_ad, th_ps, expiry, loss_prob } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(v) = seeds {
                cfg.seeds = v;
            }
            if let Some(v) = algorithms {
                cfg.algorithms = v;
            }
            if let Some(v) = th_ad {
                cfg.th_ad = v;
            }
            if let Some(v) = th_ps {
                cfg.th_ps = v;
            }
            if let Some(v) = expiry {
                cfg.expiry = v;
            }
            if let Some(v) = loss_prob {
                cfg.channel.loss_prob = v;
            }
            if out.is_some() {
                cfg.out = out;
            }
            let out_dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let report = cmd_run(cfg, &out_dir)?;
            for cell in &report.cells {
                let a = &cell.aggregate;
                println!(
                    "alg {} th_ad {:>5}: alerts/veh {:.3}  cond time/veh {:.2} s  trigger dist {:.2} m  false neg {}",
                    cell.algorithm,
                    cell.th_ad,
                    a.alerts_per_vehicle.mean,
                    a.alert_condition_time_per_vehicle.mean,
                    a.mean_trigger_distance.mean,
                    a.false_negatives.mean
                );
            }
            println!("wrote {}", out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::ReplicateTracktests { seed } => {
            let (outcomes, table) = cmd_replicate_tracktests(seed)?;
            print!("{table}");
            Ok(if outcomes.iter().all(|o| o.passed()) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Calibrate { reaction, speed, ped_speed, decel } => {
            let t = cmd_calibrate(&CalibrationInputs { tr: reaction, s_iveh: speed, s_ped: ped_speed, decel })?;
            print!("{}", format_thresholds(&t));
            Ok(ExitCode::SUCCESS)
        }
        Command::Gen { params, seed, out } => {
            cmd_gen(params.as_deref(), seed, &out)?;
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

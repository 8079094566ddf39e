//! Run configuration file and its resolution.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pedwarn_core::metrics::DecelParams;
use pedwarn_core::{Algorithm, AlgorithmConfig, ChannelConfig, SyntheticParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scenario JSON; requires `trace`.
    pub scenario: Option<PathBuf>,
    /// Trace CSV; requires `scenario`.
    pub trace: Option<PathBuf>,
    /// Generate a city per seed instead of reading files.
    pub synthetic: Option<SyntheticParams>,
    pub algorithms: Vec<Algorithm>,
    pub th_ad: Vec<f64>,
    pub th_ps: f64,
    pub expiry: f64,
    pub channel: ChannelConfig,
    pub seeds: Vec<u64>,
    pub reaction_time: f64,
    pub ped_max_speed: f64,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            trace: None,
            synthetic: None,
            algorithms: Algorithm::ALL.to_vec(),
            th_ad: vec![40.0, 70.0, 100.0],
            th_ps: 10.0,
            expiry: 1.0,
            channel: ChannelConfig::default(),
            seeds: vec![1, 2, 3, 4, 5],
            reaction_time: 0.5,
            ped_max_speed: 1.6,
            out: None,
        }
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.scenario, &mut cfg.trace, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Checks invariants and puts list fields in canonical order.
    pub fn resolve(mut self) -> Result<Self> {
        match (&self.scenario, &self.trace, &self.synthetic) {
            (Some(_), Some(_), None) | (None, None, Some(_)) => {}
            (None, None, None) => bail!("config: give either `scenario` and `trace`, or `synthetic`"),
            (Some(_), None, _) | (None, Some(_), _) => bail!("config: `scenario` and `trace` must be given together"),
            (Some(_), Some(_), Some(_)) => bail!("config: `synthetic` cannot be combined with `scenario`/`trace`"),
        }
        if let Some(p) = &self.synthetic {
            p.validate().context("config field `synthetic`")?;
        }
        if self.algorithms.is_empty() {
            bail!("config field `algorithms`: need at least one algorithm");
        }
        if self.seeds.is_empty() {
            bail!("config field `seeds`: need at least one seed");
        }
        if self.th_ad.is_empty() {
            bail!("config field `th_ad`: need at least one threshold");
        }
        let seeds: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if seeds.len() != self.seeds.len() {
            bail!("config field `seeds`: duplicate seed");
        }
        self.seeds = seeds.into_iter().collect();
        let algs: BTreeSet<Algorithm> = self.algorithms.iter().copied().collect();
        self.algorithms = algs.into_iter().collect();
        self.th_ad.sort_by(f64::total_cmp);
        self.th_ad.dedup();
        for cfg in self.algorithm_configs() {
            cfg.validate(self.channel.period).with_context(|| format!("config for algorithm {}", cfg.algorithm))?;
        }
        if !(self.reaction_time >= 0.0) {
            bail!("config field `reaction_time`: must be non-negative");
        }
        if !(self.ped_max_speed > 0.0) {
            bail!("config field `ped_max_speed`: must be positive");
        }
        Ok(self)
    }

    /// One entry per (threshold, algorithm) cell, thresholds outermost.
    pub fn algorithm_configs(&self) -> Vec<AlgorithmConfig> {
        let mut out = Vec::new();
        for &th_ad in &self.th_ad {
            for &algorithm in &self.algorithms {
                out.push(AlgorithmConfig { algorithm, th_ad, th_ps: self.th_ps, expiry: self.expiry });
            }
        }
        out
    }

    pub fn decel_params(&self) -> DecelParams {
        DecelParams { reaction_time: self.reaction_time, ped_max_speed: self.ped_max_speed }
    }
}

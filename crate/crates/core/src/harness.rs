//! Monte Carlo orchestration.
//!
//! Trial `t` draws its topology, models, assignment, noise profile and data
//! from `rng::trial_seed(config.seed, t)`, so trials are independent of each
//! other and of the order in which they run.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Mode};
use crate::error::{Error, Result};
use crate::metrics::percentile;
use crate::models::{assign_agents, generate_models};
use crate::network::generate_topology;
use crate::record::RunRecord;
use crate::rng;
use crate::sim::{NoObserver, RoundObserver, Simulation};

pub const SCHEMA_VERSION: u32 = 1;

/// Builds the simulation for trial `trial` of `config`.
pub fn build_trial(config: &ExperimentConfig, trial: usize) -> Result<Simulation> {
    let seed = rng::trial_seed(config.seed, trial);
    let models = assign_agents(&generate_models(&config.model_params(), seed), config.n_agents, seed);
    match config.mode {
        Mode::Decide => {
            let topo = generate_topology(&config.topology_params(), seed)?;
            Simulation::decide(config, topo, models, seed)
        }
        Mode::Follow => {
            let topo = generate_topology(&config.topology_params(), seed)?;
            let target = config
                .target_index()
                .ok_or_else(|| Error::Config("follow mode needs target_agent".into()))?;
            Simulation::follow(config, topo, models, target, seed)
        }
        Mode::Mobile => Simulation::mobile(config, models, seed),
    }
}

/// Runs one trial. Divergence ends the trial as a failure instead of an error.
pub fn run_trial(config: &ExperimentConfig, trial: usize) -> Result<RunRecord> {
    run_trial_observed(config, trial, &mut NoObserver)
}

pub fn run_trial_observed(
    config: &ExperimentConfig,
    trial: usize,
    observer: &mut dyn RoundObserver,
) -> Result<RunRecord> {
    let mut sim = build_trial(config, trial)?;
    match sim.run(observer) {
        Ok(r) => Ok(r),
        Err(e @ Error::Divergence { .. }) => {
            let mut r = sim.finish();
            r.error = Some(e.to_string());
            r.success = false;
            r.decision_success = false;
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

/// Per-iteration statistics of one quantity across trials. Entries are
/// `None` where no trial has a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub mean: Vec<Option<f64>>,
    pub p10: Vec<Option<f64>>,
    pub p50: Vec<Option<f64>>,
    pub p90: Vec<Option<f64>>,
    /// Trials contributing at each iteration.
    pub count: Vec<usize>,
}

impl Band {
    fn from_columns(columns: Vec<Vec<f64>>) -> Self {
        let mut band = Band {
            mean: Vec::with_capacity(columns.len()),
            p10: Vec::with_capacity(columns.len()),
            p50: Vec::with_capacity(columns.len()),
            p90: Vec::with_capacity(columns.len()),
            count: Vec::with_capacity(columns.len()),
        };
        for mut col in columns {
            band.count.push(col.len());
            if col.is_empty() {
                band.mean.push(None);
                band.p10.push(None);
                band.p50.push(None);
                band.p90.push(None);
                continue;
            }
            band.mean.push(Some(col.iter().sum::<f64>() / col.len() as f64));
            col.sort_by(f64::total_cmp);
            band.p10.push(Some(percentile(&col, 0.1)));
            band.p50.push(Some(percentile(&col, 0.5)));
            band.p90.push(Some(percentile(&col, 0.9)));
        }
        band
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub schema_version: u32,
    pub mode: Mode,
    pub master_seed: u64,
    pub n_trials: usize,
    pub n_agents: usize,
    pub n_models: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub decision_successes: usize,
    /// Mobile runs whose agents all ended near one source.
    pub captures: usize,
    pub divergences: usize,
    /// Trials agreeing on each model, one-based model order.
    pub label_counts: Vec<usize>,
    /// `MSD_j` per model, aligned by iteration.
    pub msd: Vec<Band>,
    /// `MSD_d`, over the trials in full agreement at each iteration.
    pub msd_d: Band,
    /// Anchor coverage (follow mode).
    pub coverage: Option<Band>,
    pub mean_switches: f64,
}

impl AggregateSummary {
    pub fn from_records(config: &ExperimentConfig, records: &[RunRecord]) -> Self {
        let iters = records.iter().map(|r| r.rows.len()).max().unwrap_or(0);
        let c = config.n_models;
        let column = |f: &dyn Fn(&RunRecord, usize) -> Option<f64>| -> Vec<Vec<f64>> {
            (0..iters)
                .map(|t| records.iter().filter_map(|r| f(r, t)).collect())
                .collect()
        };
        let msd = (0..c)
            .map(|j| Band::from_columns(column(&|r, t| r.rows.get(t).and_then(|row| row.msd[j]))))
            .collect();
        let msd_d = Band::from_columns(column(&|r, t| r.rows.get(t).and_then(|row| row.msd_d)));
        let coverage = (config.mode == Mode::Follow).then(|| {
            Band::from_columns(column(&|r, t| {
                r.rows.get(t).and_then(|row| row.coverage).map(|x| x as f64)
            }))
        });
        let mut label_counts = vec![0; c];
        for r in records {
            if let Some(l) = r.final_label.filter(|_| r.decision_success) {
                label_counts[l - 1] += 1;
            }
        }
        let n = records.len();
        let successes = records.iter().filter(|r| r.success).count();
        AggregateSummary {
            schema_version: SCHEMA_VERSION,
            mode: config.mode,
            master_seed: config.seed,
            n_trials: n,
            n_agents: config.n_agents,
            n_models: c,
            successes,
            success_rate: if n == 0 { 0.0 } else { successes as f64 / n as f64 },
            decision_successes: records.iter().filter(|r| r.decision_success).count(),
            captures: records.iter().filter(|r| r.captured.is_some()).count(),
            divergences: records.iter().filter(|r| r.error.is_some()).count(),
            label_counts,
            msd,
            msd_d,
            coverage,
            mean_switches: if n == 0 {
                0.0
            } else {
                records.iter().map(|r| r.total_switches() as f64).sum::<f64>() / n as f64
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonteCarloOutput {
    pub summary: AggregateSummary,
    /// In trial order.
    pub records: Vec<RunRecord>,
}

/// Runs `config.n_trials` trials, in parallel when `parallel` is set. The
/// output does not depend on `parallel`.
pub fn run_monte_carlo(config: &ExperimentConfig, parallel: bool) -> Result<MonteCarloOutput> {
    config.validate()?;
    let records: Vec<RunRecord> = if parallel {
        (0..config.n_trials)
            .into_par_iter()
            .map(|t| run_trial(config, t))
            .collect::<Result<_>>()?
    } else {
        (0..config.n_trials)
            .map(|t| run_trial(config, t))
            .collect::<Result<_>>()?
    };
    Ok(MonteCarloOutput {
        summary: AggregateSummary::from_records(config, &records),
        records,
    })
}

/// Monte Carlo runs over several model counts.
pub fn sweep(
    config: &ExperimentConfig,
    n_models: &[usize],
    parallel: bool,
) -> Result<Vec<(usize, MonteCarloOutput)>> {
    n_models
        .iter()
        .map(|&c| {
            let cfg = ExperimentConfig {
                n_models: c,
                ..config.clone()
            };
            run_monte_carlo(&cfg, parallel).map(|out| (c, out))
        })
        .collect()
}

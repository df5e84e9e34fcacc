//! Seeded Monte Carlo over simulated logs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use galins::simulator::{synthesize, SensorConfig, SimLog};
use galins::FilterError;
use log::info;
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::HarnessError;
use crate::io::{self, GnssRecord, InitialEstimate, TruthRow};
use crate::runner::{run_filter, RunOutcome, TruthTrack};
use crate::summary::{median_curve, summarize, ScenarioSummary};

pub const THREADS_ENV: &str = "GALINS_THREADS";

/// Worker count from `GALINS_THREADS`, defaulting to the available cores.
pub fn worker_count() -> Result<usize, HarnessError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(HarnessError::Config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub(crate) fn filter_error(e: FilterError) -> HarnessError {
    match e {
        FilterError::InvalidConfig(_) | FilterError::Buffer(_) => HarnessError::Config(e.to_string()),
        _ => HarnessError::Divergence(e.to_string()),
    }
}

pub fn gnss_records(log: &SimLog) -> Vec<GnssRecord> {
    log.gnss.iter().map(|g| GnssRecord { t_arrival: g.t_arrival(), pos: g.pos }).collect()
}

pub fn truth_track(log: &SimLog) -> TruthTrack {
    TruthTrack { navs: log.truth.iter().map(|t| Some(t.navigation())).collect(), with_bias: true }
}

/// Writes `imu.csv`, `gnss.csv`, `truth.csv` and `initial.json`.
pub fn write_log(dir: &Path, log: &SimLog) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    io::write_imu(&dir.join("imu.csv"), &log.imu)?;
    io::write_gnss(&dir.join("gnss.csv"), &gnss_records(log))?;
    let truth: Vec<TruthRow> = log.truth.iter().map(TruthRow::from).collect();
    io::write_truth(&dir.join("truth.csv"), &truth)?;
    io::write_json(&dir.join("initial.json"), &InitialEstimate::from(&log.initial_estimate))
}

pub fn write_estimates(dir: &Path, outcome: &RunOutcome) -> Result<(), HarnessError> {
    let path = dir.join(format!("estimate_{}.csv", outcome.filter.file_tag()));
    io::write_estimates(&path, &outcome.estimates)
}

/// Runs every configured filter over one simulated log.
pub fn run_log(cfg: &RunConfig, log: &SimLog) -> Result<Vec<(RunOutcome, f64)>, HarnessError> {
    let gnss = gnss_records(log);
    let truth = truth_track(log);
    let noise = cfg.filter_noise();
    cfg.filters
        .iter()
        .map(|&kind| {
            let start = Instant::now();
            let out = run_filter(
                kind,
                &log.imu,
                &gnss,
                Some(&truth),
                &log.initial_estimate,
                &noise,
                &cfg.prior,
                &cfg.driver,
                log.seed,
            )
            .map_err(filter_error)?;
            Ok((out, start.elapsed().as_secs_f64()))
        })
        .collect()
}

pub struct ScenarioResult {
    pub delay_ms: f64,
    pub seeds: Vec<u64>,
    /// Indexed by run, then by filter.
    pub runs: Vec<Vec<RunOutcome>>,
    /// Per filter, summed over runs.
    pub wall_time_s: Vec<f64>,
    pub duration: f64,
}

impl ScenarioResult {
    pub fn outcomes(&self, filter_index: usize) -> Vec<&RunOutcome> {
        self.runs.iter().map(|r| &r[filter_index]).collect()
    }

    pub fn summary(&self, cfg: &RunConfig) -> ScenarioSummary {
        ScenarioSummary {
            delay_ms: Some(self.delay_ms),
            seeds: self.seeds.clone(),
            filters: cfg
                .filters
                .iter()
                .enumerate()
                .map(|(i, &kind)| summarize(kind, &self.outcomes(i), self.duration, cfg.final_window, self.wall_time_s[i]))
                .collect(),
        }
    }
}

pub fn scenario_dir(out: &Path, delay_ms: f64) -> PathBuf {
    out.join(format!("delay_{delay_ms}ms"))
}

/// `cfg.n_runs` runs at one delay on `threads` workers. Run `k` uses seed
/// `cfg.base_seed + k`, so the result does not depend on the worker count.
pub fn run_scenario(cfg: &RunConfig, delay_ms: f64, threads: usize) -> Result<ScenarioResult, HarnessError> {
    let sensor = SensorConfig { delay: delay_ms * 1e-3, ..cfg.sensor.clone() };
    let seeds: Vec<u64> = (0..cfg.n_runs as u64).map(|k| cfg.base_seed.wrapping_add(k)).collect();
    let run_dir = scenario_dir(&cfg.output_dir, delay_ms);
    let one = |seed: u64| -> Result<Vec<(RunOutcome, f64)>, HarnessError> {
        let log = synthesize(&cfg.trajectory, &SensorConfig { seed, ..sensor.clone() })
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        let mut outs = run_log(cfg, &log)?;
        if cfg.write_runs {
            let dir = run_dir.join(format!("run_{seed}"));
            write_log(&dir, &log)?;
            for (o, _) in &outs {
                write_estimates(&dir, o)?;
            }
        }
        // The summaries only need the error series.
        for (o, _) in &mut outs {
            o.estimates = Vec::new();
        }
        Ok(outs)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let results: Vec<Vec<(RunOutcome, f64)>> =
        pool.install(|| seeds.par_iter().map(|&s| one(s)).collect::<Result<_, _>>())?;

    let mut wall_time_s = vec![0.0; cfg.filters.len()];
    let runs = results
        .into_iter()
        .map(|per_filter| {
            per_filter
                .into_iter()
                .enumerate()
                .map(|(i, (o, w))| {
                    wall_time_s[i] += w;
                    o
                })
                .collect()
        })
        .collect();
    info!("delay {delay_ms} ms: {} runs done", cfg.n_runs);
    Ok(ScenarioResult { delay_ms, seeds, runs, wall_time_s, duration: cfg.trajectory.duration })
}

/// Writes the per-instant median curves of every filter.
pub fn write_median_curves(cfg: &RunConfig, res: &ScenarioResult) -> Result<(), HarnessError> {
    let dir = scenario_dir(&cfg.output_dir, res.delay_ms);
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::io(&dir, e))?;
    for (i, kind) in cfg.filters.iter().enumerate() {
        let curve = median_curve(&res.outcomes(i));
        let path = dir.join(format!("median_{}.csv", kind.file_tag()));
        io::write_table(&path, &["t", "are", "ave", "ape", "ade", "nees"], curve.iter().map(|r| r.to_vec()))?;
    }
    Ok(())
}

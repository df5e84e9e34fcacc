//! Aggregate statistics over runs.

use std::collections::BTreeMap;

use galins::metrics::{median, quantile, step_errors, ErrorRecord, ErrorSeries};
use serde::{Deserialize, Serialize};

use crate::config::{FilterKind, RunConfig};
use crate::io::{EstimateRow, GnssRecord, TruthRow};
use crate::runner::RunOutcome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterSummary {
    pub filter: String,
    /// Dimension N of the NEES normalization.
    pub nees_dim: usize,
    pub runs: usize,
    pub divergences: usize,
    /// Pooled over every step of the runs that did not diverge.
    pub rmse_rot_deg: Option<f64>,
    pub rmse_vel: Option<f64>,
    pub rmse_pos: Option<f64>,
    pub rmse_delay_ms: Option<f64>,
    /// Median over the final window of the per-instant median across runs,
    /// sampled at GNSS updates.
    pub nees_median: Option<f64>,
    /// Quantiles of all final-window NEES samples.
    pub nees_q05: Option<f64>,
    pub nees_q95: Option<f64>,
    /// Same statistic as `nees_median`, for the delay error at every step.
    pub ade_median_ms: Option<f64>,
    pub innovation_nees_median: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    /// Simulated delay.
    pub delay_ms: Option<f64>,
    pub seeds: Vec<u64>,
    pub filters: Vec<FilterSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultSummary {
    pub command: String,
    pub config: RunConfig,
    pub scenarios: Vec<ScenarioSummary>,
    pub wall_time_s: f64,
}

impl ResultSummary {
    /// JSON with every wall-time field zeroed, for byte comparisons.
    pub fn without_wall_time(&self) -> Self {
        let mut s = self.clone();
        s.wall_time_s = 0.0;
        for f in s.scenarios.iter_mut().flat_map(|sc| sc.filters.iter_mut()) {
            f.wall_time_s = 0.0;
        }
        s
    }
}

fn key(t: f64) -> i64 {
    (t * 1e6).round() as i64
}

/// Median over time of the per-instant median across runs, for instants at
/// or after `from`.
pub fn median_of_medians(
    series: &[&ErrorSeries],
    from: f64,
    pick: impl Fn(&ErrorRecord) -> Option<f64>,
) -> Option<f64> {
    let mut by_time: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for s in series {
        for r in s.records.iter().filter(|r| r.t >= from - 1e-9) {
            if let Some(v) = pick(r) {
                by_time.entry(key(r.t)).or_default().push(v);
            }
        }
    }
    let mut meds: Vec<f64> = by_time.values_mut().filter_map(|v| median(v)).collect();
    median(&mut meds)
}

fn pooled_rmse(series: &[&ErrorSeries], pick: impl Fn(&ErrorRecord) -> f64) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for r in series.iter().flat_map(|s| s.records.iter()) {
        sum += pick(r).powi(2);
        n += 1;
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

/// Summary of one filter over a set of runs ending at `t_end`.
pub fn summarize(
    kind: FilterKind,
    runs: &[&RunOutcome],
    t_end: f64,
    final_window: f64,
    wall_time_s: f64,
) -> FilterSummary {
    let from = t_end - final_window;
    let kept: Vec<&ErrorSeries> = runs.iter().filter(|r| !r.diverged()).filter_map(|r| r.series.as_ref()).collect();
    let all: Vec<&ErrorSeries> = runs.iter().filter_map(|r| r.series.as_ref()).collect();
    let mut pooled: Vec<f64> = all
        .iter()
        .flat_map(|s| s.records.iter())
        .filter(|r| r.gnss && r.t >= from - 1e-9)
        .filter_map(|r| r.nees)
        .collect();
    let mut innov: Vec<f64> = runs.iter().flat_map(|r| r.innovation_nees.iter().copied()).collect();
    FilterSummary {
        filter: kind.to_string(),
        nees_dim: kind.dim(),
        runs: runs.len(),
        divergences: runs.iter().filter(|r| r.diverged()).count(),
        rmse_rot_deg: pooled_rmse(&kept, |r| r.errors.are.to_degrees()),
        rmse_vel: pooled_rmse(&kept, |r| r.errors.ave),
        rmse_pos: pooled_rmse(&kept, |r| r.errors.ape),
        rmse_delay_ms: pooled_rmse(&kept, |r| r.errors.ade * 1e3),
        nees_median: median_of_medians(&all, from, |r| if r.gnss { r.nees } else { None }),
        nees_q05: quantile(&mut pooled, 0.05),
        nees_q95: quantile(&mut pooled, 0.95),
        ade_median_ms: median_of_medians(&all, from, |r| Some(r.errors.ade * 1e3)),
        innovation_nees_median: median(&mut innov),
        wall_time_s,
    }
}

/// Per-instant medians across runs: `(t, are, ave, ape, ade, nees)`.
pub fn median_curve(runs: &[&RunOutcome]) -> Vec<[f64; 6]> {
    let mut by_time: BTreeMap<i64, (f64, [Vec<f64>; 5])> = BTreeMap::new();
    for r in runs.iter().filter_map(|r| r.series.as_ref()).flat_map(|s| s.records.iter()) {
        let e = by_time.entry(key(r.t)).or_insert_with(|| (r.t, Default::default()));
        e.1[0].push(r.errors.are);
        e.1[1].push(r.errors.ave);
        e.1[2].push(r.errors.ape);
        e.1[3].push(r.errors.ade);
        if let Some(n) = r.nees {
            e.1[4].push(n);
        }
    }
    by_time
        .into_values()
        .map(|(t, mut cols)| {
            let mut row = [t, 0.0, 0.0, 0.0, 0.0, f64::NAN];
            for (i, c) in cols.iter_mut().enumerate() {
                row[i + 1] = median(c).unwrap_or(f64::NAN);
            }
            row
        })
        .collect()
}

/// Rebuilds a run from its estimate CSV, the truth CSV and the GNSS arrivals,
/// marking the same update instants as the driver. A run whose estimates stop
/// before the truth does is counted as diverged.
pub fn outcome_from_csv(
    kind: FilterKind,
    estimates: Vec<EstimateRow>,
    truth: &[TruthRow],
    gnss: &[GnssRecord],
) -> RunOutcome {
    let mut series = ErrorSeries::new(kind.to_string(), kind.dim(), 0);
    let t0 = estimates.first().map_or(0.0, |e| e.t);
    let mut next_fix = gnss.partition_point(|g| g.t_arrival <= t0 + 1e-9);
    let mut j = 0;
    for (k, e) in estimates.iter().enumerate() {
        let mut gnss_step = false;
        while k > 0 && next_fix < gnss.len() && gnss[next_fix].t_arrival <= e.t + 1e-9 {
            gnss_step = true;
            next_fix += 1;
        }
        while j + 1 < truth.len() && truth[j].t < e.t - 1e-9 {
            j += 1;
        }
        if let Some(tr) = truth.get(j).filter(|tr| (tr.t - e.t).abs() <= 1e-9) {
            let errors = step_errors(&tr.navigation(), &e.nav);
            series.records.push(ErrorRecord { t: e.t, errors, nees: e.nees, gnss: gnss_step });
        }
    }
    let last_truth = truth.last().map_or(f64::NEG_INFINITY, |t| t.t);
    let last_est = estimates.last().map_or(f64::NEG_INFINITY, |e| e.t);
    RunOutcome {
        filter: kind,
        estimates,
        series: Some(series),
        innovation_nees: Vec::new(),
        divergence: (last_est < last_truth - 1e-9).then(|| "estimates end early".to_string()),
    }
}

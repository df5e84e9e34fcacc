//! Command-line front end.

use std::ffi::OsString;
use std::path::Path;
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};
use galins::simulator::{synthesize, SensorConfig};
use galins::twobody::run_twobody;
use log::warn;
use serde_json::Value;

use crate::config::{apply_override, from_value, leaves, FilterKind, RunConfig, Scenario};
use crate::error::HarnessError;
use crate::io::{self, ingest_log, read_estimates, read_gnss, read_truth};
use crate::montecarlo::{
    filter_error, gnss_records, run_scenario, truth_track, worker_count, write_estimates, write_log,
    write_median_curves,
};
use crate::runner::{run_filter, RunOutcome, TruthTrack};
use crate::summary::{outcome_from_csv, summarize, FilterSummary, ResultSummary, ScenarioSummary};

/// Short spellings for frequently used flags.
const ALIASES: [(&str, &str); 6] = [
    ("n-runs", "runs"),
    ("base-seed", "seed"),
    ("output-dir", "out"),
    ("log-dir", "log"),
    ("delays-ms", "delay-ms"),
    ("filters", "filter"),
];

fn command() -> Command {
    let defaults = serde_json::to_value(RunConfig::default()).expect("config serializes");
    let mut common = vec![
        Arg::new("config").long("config").value_name("FILE").help("JSON configuration file"),
        Arg::new("print-config")
            .long("print-config")
            .action(ArgAction::SetTrue)
            .help("Print the effective configuration and exit"),
    ];
    for leaf in leaves() {
        let default = leaf.path.iter().fold(&defaults, |v, k| &v[k.as_str()]);
        let mut arg = Arg::new(leaf.flag.clone())
            .long(leaf.flag.clone())
            .value_name("VALUE")
            .allow_hyphen_values(true)
            .help(format!("default: {default}"));
        for (flag, alias) in ALIASES {
            if flag == leaf.flag {
                arg = arg.visible_alias(alias);
            }
        }
        common.push(arg);
    }
    let sub = |name: &'static str, about: &'static str| Command::new(name).about(about).args(common.clone());
    Command::new("galins")
        .about("Delay-aware GNSS/INS filtering: simulation, replay and Monte Carlo evaluation")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(sub("simulate", "Write a simulated log (imu.csv, gnss.csv, truth.csv, initial.json)"))
        .subcommand(sub("run", "Run the configured filters over one simulated or recorded log"))
        .subcommand(sub("montecarlo", "Seeded Monte Carlo over every configured delay and filter"))
        .subcommand(sub("metrics", "Recompute summaries from estimate and truth CSVs"))
}

fn load_config(m: &ArgMatches) -> Result<RunConfig, HarnessError> {
    let mut doc = match m.get_one::<String>("config") {
        Some(path) => {
            let path = Path::new(path);
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            serde_json::from_str::<Value>(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
        }
        None => serde_json::to_value(RunConfig::default()).expect("config serializes"),
    };
    for leaf in leaves() {
        if let Some(raw) = m.get_one::<String>(&leaf.flag) {
            apply_override(&mut doc, &leaf, raw)?;
        }
    }
    from_value(doc)
}

/// Runs the CLI and returns the process exit code: 0 on success, 1 on a
/// configuration error, 2 on filter divergence, 3 on an I/O error.
pub fn cli_run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("galins: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(matches: &ArgMatches) -> Result<(), HarnessError> {
    let (name, m) = matches.subcommand().expect("subcommand is required");
    let cfg = load_config(m)?;
    if m.get_flag("print-config") {
        println!("{}", cfg.to_json());
        return Ok(());
    }
    match name {
        "simulate" => simulate(&cfg),
        "run" => run(&cfg),
        "montecarlo" => montecarlo(&cfg),
        "metrics" => metrics(&cfg),
        _ => unreachable!("unknown subcommand {name}"),
    }
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

/// The sensor configuration of a single simulated log; its seed is `base_seed`.
fn single_sensor(cfg: &RunConfig) -> SensorConfig {
    SensorConfig { seed: cfg.base_seed, ..cfg.sensor.clone() }
}

pub fn simulate(cfg: &RunConfig) -> Result<(), HarnessError> {
    let log = synthesize(&cfg.trajectory, &single_sensor(cfg)).map_err(|e| HarnessError::Config(e.to_string()))?;
    write_log(&cfg.output_dir, &log)?;
    println!(
        "wrote {} IMU samples and {} GNSS fixes to {}",
        log.imu.len(),
        log.gnss.len(),
        cfg.output_dir.display()
    );
    Ok(())
}

fn print_summary(sc: &ScenarioSummary) {
    let opt = |v: Option<f64>, p: usize| v.map_or("-".to_string(), |x| format!("{x:.p$}"));
    if let Some(d) = sc.delay_ms {
        println!("delay {d} ms");
    }
    println!(
        "  {:<16} {:>9} {:>9} {:>9} {:>10} {:>9} {:>10} {:>9}",
        "filter", "rot[deg]", "vel[m/s]", "pos[m]", "delay[ms]", "NEES", "ADE[ms]", "diverged"
    );
    for f in &sc.filters {
        println!(
            "  {:<16} {:>9} {:>9} {:>9} {:>10} {:>9} {:>10} {:>6}/{}",
            f.filter,
            opt(f.rmse_rot_deg, 3),
            opt(f.rmse_vel, 3),
            opt(f.rmse_pos, 3),
            opt(f.rmse_delay_ms, 2),
            opt(f.nees_median.or(f.innovation_nees_median), 2),
            opt(f.ade_median_ms, 2),
            f.divergences,
            f.runs
        );
    }
}

fn divergence_error(outcomes: &[RunOutcome]) -> Result<(), HarnessError> {
    let failed: Vec<String> = outcomes
        .iter()
        .filter_map(|o| o.divergence.as_ref().map(|d| format!("{}: {d}", o.filter)))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(HarnessError::Divergence(failed.join("; ")))
    }
}

/// One run per configured filter. Scenario `simulate` synthesizes a log
/// (written next to the estimates), a configured `log_dir` replays a
/// recorded one, and `twobody` runs the two-body observer instead.
pub fn run(cfg: &RunConfig) -> Result<(), HarnessError> {
    if cfg.scenario == Scenario::Twobody {
        return twobody(cfg);
    }
    let started = Instant::now();
    create_dir(&cfg.output_dir)?;
    let noise = cfg.filter_noise();
    let (imu, gnss, truth, init, t_end, delay_ms, seed) = match &cfg.log_dir {
        Some(dir) => {
            let data = ingest_log(dir)?;
            let rows: Vec<(f64, _)> = data.truth.iter().flatten().map(|r| (r.t, r.navigation())).collect();
            let init = match (data.initial, rows.first()) {
                (Some(i), _) => i,
                (None, Some((_, n))) => {
                    warn!("no initial.json; starting from the first truth row");
                    *n
                }
                (None, None) => {
                    return Err(HarnessError::Config("replay needs initial.json or truth.csv to initialize".into()))
                }
            };
            let truth = data.truth.as_ref().map(|_| TruthTrack::align(&data.imu, &rows, false));
            let t_end = data.imu.last().map_or(0.0, |s| s.t);
            (data.imu, data.gnss, truth, init, t_end, None, cfg.base_seed)
        }
        None => {
            let log = synthesize(&cfg.trajectory, &single_sensor(cfg)).map_err(|e| HarnessError::Config(e.to_string()))?;
            write_log(&cfg.output_dir, &log)?;
            let gnss = gnss_records(&log);
            let truth = Some(truth_track(&log));
            (log.imu, gnss, truth, log.initial_estimate, cfg.trajectory.duration, Some(cfg.sensor.delay * 1e3), log.seed)
        }
    };

    let mut outcomes = Vec::new();
    let mut filters = Vec::new();
    for &kind in &cfg.filters {
        let start = Instant::now();
        let out = run_filter(kind, &imu, &gnss, truth.as_ref(), &init, &noise, &cfg.prior, &cfg.driver, seed)
            .map_err(filter_error)?;
        write_estimates(&cfg.output_dir, &out)?;
        filters.push(summarize(kind, &[&out], t_end, cfg.final_window, start.elapsed().as_secs_f64()));
        outcomes.push(out);
    }
    let scenario = ScenarioSummary { delay_ms, seeds: vec![seed], filters };
    print_summary(&scenario);
    let summary = ResultSummary {
        command: "run".into(),
        config: cfg.clone(),
        scenarios: vec![scenario],
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    io::write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    divergence_error(&outcomes)
}

fn twobody(cfg: &RunConfig) -> Result<(), HarnessError> {
    create_dir(&cfg.output_dir)?;
    let records = run_twobody(&cfg.twobody).map_err(filter_error)?;
    let path = cfg.output_dir.join("twobody.csv");
    io::write_table(&path, &["t", "error", "pose_time"], records.iter().map(|r| vec![r.t, r.error, r.pose_time]))?;
    let last = records.last().ok_or_else(|| HarnessError::Config("two-body run produced no measurements".into()))?;
    println!("two-body observer: final error {:.3e} at t = {:.2} s", last.error, last.t);
    if !last.error.is_finite() {
        return Err(HarnessError::Divergence("two-body observer error is not finite".into()));
    }
    Ok(())
}

/// Every configured delay in turn. Divergences are part of the result, so
/// they are reported in the summary rather than through the exit code.
pub fn montecarlo(cfg: &RunConfig) -> Result<(), HarnessError> {
    let started = Instant::now();
    let threads = worker_count()?;
    create_dir(&cfg.output_dir)?;
    let mut scenarios = Vec::new();
    for &d in &cfg.delays_ms {
        let res = run_scenario(cfg, d, threads)?;
        write_median_curves(cfg, &res)?;
        let sc = res.summary(cfg);
        print_summary(&sc);
        scenarios.push(sc);
    }
    let summary = ResultSummary {
        command: "montecarlo".into(),
        config: cfg.clone(),
        scenarios,
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    io::write_json(&cfg.output_dir.join("summary.json"), &summary)
}

/// Recomputes the summary of every `estimate_*.csv` in `output_dir` against
/// `truth.csv` and `gnss.csv` from `log_dir` (default: `output_dir`), and
/// writes it to `metrics.json`.
pub fn metrics(cfg: &RunConfig) -> Result<(), HarnessError> {
    let summary = recompute(cfg)?;
    print_summary(&summary.scenarios[0]);
    io::write_json(&cfg.output_dir.join("metrics.json"), &summary)
}

pub fn recompute(cfg: &RunConfig) -> Result<ResultSummary, HarnessError> {
    let started = Instant::now();
    let out = &cfg.output_dir;
    let log_dir = cfg.log_dir.as_deref().unwrap_or(out);
    let truth = read_truth(&log_dir.join("truth.csv"))?;
    let gnss = read_gnss(&log_dir.join("gnss.csv"))?;
    let t_end = truth.last().map_or(0.0, |t| t.t);

    let mut entries: Vec<(FilterKind, std::path::PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(out).map_err(|e| HarnessError::io(out, e))? {
        let path = entry.map_err(|e| HarnessError::io(out, e))?.path();
        let Some(tag) = path.file_name().and_then(|n| n.to_str()).and_then(|n| n.strip_prefix("estimate_")) else {
            continue;
        };
        let Some(tag) = tag.strip_suffix(".csv") else { continue };
        let kind: FilterKind = tag.replacen('_', ":", 1).parse().map_err(HarnessError::Config)?;
        entries.push((kind, path));
    }
    if entries.is_empty() {
        return Err(HarnessError::io(out, "no estimate_*.csv files"));
    }
    // Follow the configured filter order, then the name.
    entries.sort_by_key(|(k, _)| (cfg.filters.iter().position(|f| f == k).unwrap_or(usize::MAX), k.to_string()));

    let filters: Vec<FilterSummary> = entries
        .into_iter()
        .map(|(kind, path)| {
            let est = read_estimates(&path)?;
            let outcome = outcome_from_csv(kind, est, &truth, &gnss);
            Ok(summarize(kind, &[&outcome], t_end, cfg.final_window, 0.0))
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(ResultSummary {
        command: "metrics".into(),
        config: cfg.clone(),
        scenarios: vec![ScenarioSummary { delay_ms: None, seeds: vec![], filters }],
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

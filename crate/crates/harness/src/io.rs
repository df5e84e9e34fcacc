//! CSV log schemas.
//!
//! Numbers are written with Rust's shortest round-trip decimal formatting, so
//! a written log reads back bit for bit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use galins::eqf::NavEstimate;
use galins::liegroups::{GalTangent, Rotation, Se23Element};
use galins::preintegration::ImuSample;
use galins::simulator::TruthSample;
use log::warn;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

pub const IMU_HEADER: [&str; 7] = ["t", "wx", "wy", "wz", "ax", "ay", "az"];
pub const GNSS_HEADER: [&str; 4] = ["t_arrival", "px", "py", "pz"];
pub const TRUTH_HEADER: [&str; 12] = ["t", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "px", "py", "pz", "delay"];
pub const ESTIMATE_HEADER: [&str; 13] =
    ["t", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "px", "py", "pz", "delta_hat", "nees"];

/// Largest relative deviation of an IMU step from the nominal step that is
/// still resampled rather than rejected.
const MAX_IMU_JITTER: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GnssRecord {
    pub t_arrival: f64,
    pub pos: Vector3<f64>,
}

/// Truth as stored on disk (no biases).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthRow {
    pub t: f64,
    pub rot: Rotation,
    pub vel: Vector3<f64>,
    pub pos: Vector3<f64>,
    pub delay: f64,
}

impl TruthRow {
    pub fn navigation(&self) -> NavEstimate {
        NavEstimate {
            pose: Se23Element::new(self.rot, self.vel, self.pos),
            delta: self.delay,
            bias: GalTangent::zero(),
        }
    }
}

impl From<&TruthSample> for TruthRow {
    fn from(s: &TruthSample) -> Self {
        Self { t: s.t, rot: s.rot, vel: s.vel, pos: s.pos, delay: s.delay }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateRow {
    pub t: f64,
    pub nav: NavEstimate,
    pub nees: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogData {
    pub imu: Vec<ImuSample>,
    pub gnss: Vec<GnssRecord>,
    pub truth: Option<Vec<TruthRow>>,
    pub initial: Option<NavEstimate>,
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<BufWriter<File>>, HarnessError> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| HarnessError::io(path, e))?;
    Ok(w)
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), HarnessError> {
    let mut w = writer(path, header)?;
    for row in rows {
        w.write_record(&row).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Numeric table with a free-form header. NaN cells are left empty.
pub fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<(), HarnessError> {
    write_rows(
        path,
        header,
        rows.map(|r| r.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }).collect()),
    )
}

fn fmt(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

fn pose_fields(rot: &Rotation, vel: &Vector3<f64>, pos: &Vector3<f64>) -> [f64; 10] {
    let q = rot.to_quaternion();
    [q[0], q[1], q[2], q[3], vel.x, vel.y, vel.z, pos.x, pos.y, pos.z]
}

pub fn write_imu(path: &Path, imu: &[ImuSample]) -> Result<(), HarnessError> {
    write_rows(
        path,
        &IMU_HEADER,
        imu.iter().map(|s| fmt(&[s.t, s.omega.x, s.omega.y, s.omega.z, s.accel.x, s.accel.y, s.accel.z])),
    )
}

pub fn write_gnss(path: &Path, gnss: &[GnssRecord]) -> Result<(), HarnessError> {
    write_rows(path, &GNSS_HEADER, gnss.iter().map(|g| fmt(&[g.t_arrival, g.pos.x, g.pos.y, g.pos.z])))
}

pub fn write_truth(path: &Path, truth: &[TruthRow]) -> Result<(), HarnessError> {
    write_rows(
        path,
        &TRUTH_HEADER,
        truth.iter().map(|s| {
            let mut row = vec![s.t];
            row.extend(pose_fields(&s.rot, &s.vel, &s.pos));
            row.push(s.delay);
            fmt(&row)
        }),
    )
}

pub fn write_estimates(path: &Path, rows: &[EstimateRow]) -> Result<(), HarnessError> {
    write_rows(
        path,
        &ESTIMATE_HEADER,
        rows.iter().map(|r| {
            let p = &r.nav.pose;
            let mut row = vec![r.t];
            row.extend(pose_fields(&p.rot, &p.vel, &p.pos));
            row.push(r.nav.delta);
            let mut out = fmt(&row);
            out.push(r.nees.map(|v| v.to_string()).unwrap_or_default());
            out
        }),
    )
}

/// Starting estimate stored next to a simulated log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialEstimate {
    /// Hamilton quaternion, scalar first.
    pub q: [f64; 4],
    pub vel: [f64; 3],
    pub pos: [f64; 3],
    pub gyro_bias: [f64; 3],
    pub accel_bias: [f64; 3],
    pub delay: f64,
}

impl From<&NavEstimate> for InitialEstimate {
    fn from(n: &NavEstimate) -> Self {
        Self {
            q: n.pose.rot.to_quaternion(),
            vel: n.pose.vel.into(),
            pos: n.pose.pos.into(),
            gyro_bias: n.bias.theta().into(),
            accel_bias: n.bias.nu().into(),
            delay: n.delta,
        }
    }
}

impl InitialEstimate {
    pub fn navigation(&self) -> NavEstimate {
        NavEstimate {
            pose: Se23Element::new(Rotation::from_quaternion(self.q), self.vel.into(), self.pos.into()),
            delta: self.delay,
            bias: GalTangent::new(self.gyro_bias.into(), self.accel_bias.into(), Vector3::zeros(), 0.0),
        }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::io(path, e))?;
    text.push('\n');
    let mut f = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| HarnessError::io(path, e))
}

fn read_rows<const N: usize>(path: &Path, header: &[&str; N]) -> Result<Vec<(u64, [Option<f64>; N])>, HarnessError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| HarnessError::io(path, e))?;
    let found = r.headers().map_err(|e| HarnessError::io(path, e))?.clone();
    if found.iter().map(str::trim).ne(header.iter().copied()) {
        return Err(HarnessError::io(path, format!("expected header {}", header.join(","))));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| HarnessError::io(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != N {
            return Err(HarnessError::io(path, format!("line {line}: expected {N} fields, found {}", rec.len())));
        }
        let mut vals = [None; N];
        for (i, field) in rec.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            vals[i] = Some(field.parse::<f64>().map_err(|_| {
                HarnessError::io(path, format!("line {line}: malformed number '{field}' in column {}", header[i]))
            })?);
        }
        out.push((line, vals));
    }
    Ok(out)
}

fn required<const N: usize>(path: &Path, line: u64, vals: &[Option<f64>; N], header: &[&str; N]) -> Result<[f64; N], HarnessError> {
    let mut out = [0.0; N];
    for i in 0..N {
        out[i] = vals[i].ok_or_else(|| HarnessError::io(path, format!("line {line}: missing {}", header[i])))?;
    }
    Ok(out)
}

fn check_monotone(path: &Path, lines: &[(u64, f64)]) -> Result<(), HarnessError> {
    for pair in lines.windows(2) {
        if !(pair[1].1 > pair[0].1) {
            return Err(HarnessError::io(path, format!("line {}: timestamps not strictly increasing", pair[1].0)));
        }
    }
    Ok(())
}

pub fn read_imu(path: &Path) -> Result<Vec<ImuSample>, HarnessError> {
    let rows = read_rows(path, &IMU_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut times = Vec::with_capacity(rows.len());
    for (line, vals) in &rows {
        let v = required(path, *line, vals, &IMU_HEADER)?;
        times.push((*line, v[0]));
        out.push(ImuSample { t: v[0], omega: Vector3::new(v[1], v[2], v[3]), accel: Vector3::new(v[4], v[5], v[6]) });
    }
    check_monotone(path, &times)?;
    resample_uniform(path, out)
}

/// Leaves a uniform stream untouched, linearly resamples one whose steps are
/// within 1% of the median step, and rejects anything rougher.
fn resample_uniform(path: &Path, imu: Vec<ImuSample>) -> Result<Vec<ImuSample>, HarnessError> {
    if imu.len() < 2 {
        return Err(HarnessError::io(path, "need at least two IMU samples"));
    }
    let mut steps: Vec<f64> = imu.windows(2).map(|w| w[1].t - w[0].t).collect();
    steps.sort_by(f64::total_cmp);
    let dt = steps[steps.len() / 2];
    let worst = steps.iter().map(|s| ((s - dt) / dt).abs()).fold(0.0, f64::max);
    if worst <= 1e-6 {
        return Ok(imu);
    }
    if worst > MAX_IMU_JITTER {
        return Err(HarnessError::io(
            path,
            format!("IMU step jitter {:.2}% exceeds {}%", worst * 100.0, MAX_IMU_JITTER * 100.0),
        ));
    }
    warn!("{}: resampling IMU to a uniform {dt} s grid", path.display());
    let t0 = imu[0].t;
    // The tolerance keeps a span of a whole number of steps from losing its last sample.
    let n = ((imu[imu.len() - 1].t - t0) / dt + 1e-6).floor() as usize + 1;
    let mut j = 0;
    Ok((0..n)
        .map(|k| {
            let t = t0 + k as f64 * dt;
            while j + 2 < imu.len() && imu[j + 1].t < t {
                j += 1;
            }
            let (a, b) = (&imu[j], &imu[j + 1]);
            let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
            ImuSample { t, omega: a.omega.lerp(&b.omega, s), accel: a.accel.lerp(&b.accel, s) }
        })
        .collect())
}

pub fn read_gnss(path: &Path) -> Result<Vec<GnssRecord>, HarnessError> {
    let rows = read_rows(path, &GNSS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut times = Vec::with_capacity(rows.len());
    for (line, vals) in &rows {
        let v = required(path, *line, vals, &GNSS_HEADER)?;
        times.push((*line, v[0]));
        out.push(GnssRecord { t_arrival: v[0], pos: Vector3::new(v[1], v[2], v[3]) });
    }
    check_monotone(path, &times)?;
    Ok(out)
}

pub fn read_truth(path: &Path) -> Result<Vec<TruthRow>, HarnessError> {
    let rows = read_rows(path, &TRUTH_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    let mut times = Vec::with_capacity(rows.len());
    for (line, vals) in &rows {
        let v = required(path, *line, vals, &TRUTH_HEADER)?;
        times.push((*line, v[0]));
        out.push(TruthRow {
            t: v[0],
            rot: Rotation::from_quaternion([v[1], v[2], v[3], v[4]]),
            vel: Vector3::new(v[5], v[6], v[7]),
            pos: Vector3::new(v[8], v[9], v[10]),
            delay: v[11],
        });
    }
    check_monotone(path, &times)?;
    Ok(out)
}

pub fn read_estimates(path: &Path) -> Result<Vec<EstimateRow>, HarnessError> {
    let rows = read_rows(path, &ESTIMATE_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, vals) in &rows {
        let mut head = [None; 12];
        head.copy_from_slice(&vals[..12]);
        let hdr: [&str; 12] = ESTIMATE_HEADER[..12].try_into().expect("12 columns");
        let v = required(path, *line, &head, &hdr)?;
        out.push(EstimateRow {
            t: v[0],
            nav: NavEstimate {
                pose: Se23Element::new(
                    Rotation::from_quaternion([v[1], v[2], v[3], v[4]]),
                    Vector3::new(v[5], v[6], v[7]),
                    Vector3::new(v[8], v[9], v[10]),
                ),
                delta: v[11],
                bias: GalTangent::zero(),
            },
            nees: vals[12],
        });
    }
    Ok(out)
}

/// Reads `imu.csv`, `gnss.csv` and, when present, `truth.csv` and
/// `initial.json` from a log directory. GNSS fixes that arrive before the
/// first IMU sample are dropped.
pub fn ingest_log(dir: &Path) -> Result<LogData, HarnessError> {
    let imu = read_imu(&dir.join("imu.csv"))?;
    let mut gnss = read_gnss(&dir.join("gnss.csv"))?;
    let t0 = imu[0].t;
    let before = gnss.len();
    gnss.retain(|g| g.t_arrival >= t0);
    if gnss.len() < before {
        warn!("dropped {} GNSS fixes arriving before the first IMU sample", before - gnss.len());
    }
    let truth_path = dir.join("truth.csv");
    let truth = if truth_path.exists() { Some(read_truth(&truth_path)?) } else { None };
    let init_path = dir.join("initial.json");
    let initial = if init_path.exists() {
        let text = std::fs::read_to_string(&init_path).map_err(|e| HarnessError::io(&init_path, e))?;
        let init: InitialEstimate = serde_json::from_str(&text).map_err(|e| HarnessError::io(&init_path, e))?;
        Some(init.navigation())
    } else {
        None
    };
    Ok(LogData { imu, gnss, truth, initial })
}

//! Drives one filter over one log.

use galins::ekf::{Ekf, EkfTruth};
use galins::eqf::{Eqf, InputSample, NavEstimate, NoiseConfig, SystemState, UpdateReport};
use galins::metrics::{nees, step_errors, ErrorRecord, ErrorSeries};
use galins::noise::{NoiseParams, PriorSigmas};
use galins::preintegration::{ImuSample, PreintBuffer};
use galins::FilterError;
use log::warn;
use nalgebra::{Vector3, Vector6};

use crate::config::{DriverConfig, FilterKind};
use crate::io::{EstimateRow, GnssRecord};

/// Arrivals within this much of an IMU stamp are processed at that stamp.
const TIME_EPS: f64 = 1e-9;

pub enum AnyFilter {
    Eqf(Box<Eqf>),
    Ekf(Box<Ekf>),
}

impl AnyFilter {
    pub fn new(
        kind: FilterKind,
        init: &NavEstimate,
        noise: &NoiseParams,
        prior: &PriorSigmas,
        dt: f64,
        horizon: f64,
    ) -> Result<Self, FilterError> {
        let buffer = PreintBuffer::new(dt, horizon)?;
        Ok(match kind.ekf_variant() {
            None => AnyFilter::Eqf(Box::new(Eqf::from_navigation(init, prior, NoiseConfig::from(noise), buffer)?)),
            Some(v) => AnyFilter::Ekf(Box::new(Ekf::new(init, v, prior, noise.clone(), buffer)?)),
        })
    }

    pub fn propagate(&mut self, u: &InputSample, dt: f64) -> Result<(), FilterError> {
        match self {
            AnyFilter::Eqf(f) => f.propagate(u, dt),
            AnyFilter::Ekf(f) => f.propagate(u, dt),
        }
    }

    pub fn update(&mut self, y: &Vector3<f64>) -> Result<UpdateReport, FilterError> {
        match self {
            AnyFilter::Eqf(f) => f.update(y),
            AnyFilter::Ekf(f) => f.update(y),
        }
    }

    pub fn navigation(&self) -> NavEstimate {
        match self {
            AnyFilter::Eqf(f) => f.navigation_output(),
            AnyFilter::Ekf(f) => f.navigation_output(),
        }
    }

    /// Full-state NEES against a truth that carries the physical biases.
    pub fn nees(&self, truth: &NavEstimate) -> Option<f64> {
        match self {
            AnyFilter::Eqf(f) => {
                let xi = SystemState::from_navigation(truth, &f.noise().g_n);
                let eps = f.error_coordinates(&xi).ok()?;
                nees(&eps, &f.state().sigma).ok()
            }
            AnyFilter::Ekf(f) => {
                let (bg, ba) = (truth.bias.theta(), truth.bias.nu());
                let t = EkfTruth { t: truth.pose, bias: Vector6::new(bg.x, bg.y, bg.z, ba.x, ba.y, ba.z), delta: truth.delta };
                let eps = f.error_coordinates(&t).ok()?;
                let sigma = &f.state().sigma;
                if f.dim() == 16 {
                    nees(&eps, sigma).ok()
                } else {
                    nees(&eps.fixed_rows::<15>(0).into_owned(), &sigma.fixed_view::<15, 15>(0, 0).into_owned()).ok()
                }
            }
        }
    }
}

/// Truth aligned with the IMU stream.
#[derive(Clone, Debug)]
pub struct TruthTrack {
    /// One entry per IMU sample; `None` where no truth row matches.
    pub navs: Vec<Option<NavEstimate>>,
    /// The bias fields are meaningful, so NEES can be evaluated.
    pub with_bias: bool,
}

impl TruthTrack {
    /// Pairs each IMU stamp with the truth row closest to it, within half a step.
    pub fn align(imu: &[ImuSample], rows: &[(f64, NavEstimate)], with_bias: bool) -> Self {
        let dt = if imu.len() > 1 { imu[1].t - imu[0].t } else { 1.0 };
        let mut j = 0;
        let navs = imu
            .iter()
            .map(|s| {
                while j + 1 < rows.len() && (rows[j + 1].0 - s.t).abs() <= (rows[j].0 - s.t).abs() {
                    j += 1;
                }
                rows.get(j).filter(|r| (r.0 - s.t).abs() <= 0.5 * dt).map(|r| r.1)
            })
            .collect();
        Self { navs, with_bias }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub filter: FilterKind,
    pub estimates: Vec<EstimateRow>,
    /// Present when truth was supplied.
    pub series: Option<ErrorSeries>,
    /// Innovation NEES `rᵀS⁻¹r / 3` of every applied GNSS update.
    pub innovation_nees: Vec<f64>,
    /// Reason the run was stopped early.
    pub divergence: Option<String>,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        self.divergence.is_some()
    }
}

/// Runs `kind` over a log. The filter starts at the first IMU sample from
/// `init` with its delay set to `driver.initial_delay`, and fixes arriving at
/// or before that sample are ignored.
///
/// Each step propagates with the average of consecutive IMU samples, applies
/// every fix that has arrived by the new stamp, then records the estimate.
/// The run stops at the first filter error, non-finite estimate, or position
/// error above `driver.divergence_ape`.
#[allow(clippy::too_many_arguments)]
pub fn run_filter(
    kind: FilterKind,
    imu: &[ImuSample],
    gnss: &[GnssRecord],
    truth: Option<&TruthTrack>,
    init: &NavEstimate,
    noise: &NoiseParams,
    prior: &PriorSigmas,
    driver: &DriverConfig,
    seed: u64,
) -> Result<RunOutcome, FilterError> {
    if imu.len() < 2 {
        return Err(FilterError::InvalidConfig("need at least two IMU samples".into()));
    }
    let dt = imu[1].t - imu[0].t;
    let init = NavEstimate { delta: driver.initial_delay, ..*init };
    let mut filter = AnyFilter::new(kind, &init, noise, prior, dt, driver.horizon)?;
    let mut warned_clamp = false;

    let mut out = RunOutcome {
        filter: kind,
        estimates: Vec::with_capacity(imu.len()),
        series: truth.map(|_| ErrorSeries::new(kind.to_string(), kind.dim(), seed)),
        innovation_nees: Vec::new(),
        divergence: None,
    };
    let mut next_fix = gnss.partition_point(|g| g.t_arrival <= imu[0].t + TIME_EPS);

    let record = |out: &mut RunOutcome, filter: &AnyFilter, k: usize, gnss_step: bool| -> Option<String> {
        let nav = filter.navigation();
        if !nav.pose.to_gal().is_finite() || !nav.delta.is_finite() {
            return Some("non-finite estimate".into());
        }
        let t = imu[k].t;
        let truth_nav = truth.and_then(|tr| tr.navs[k].map(|n| (n, tr.with_bias)));
        let nees = truth_nav.and_then(|(n, with_bias)| if with_bias { filter.nees(&n) } else { None });
        out.estimates.push(EstimateRow { t, nav, nees });
        if let (Some((n, _)), Some(series)) = (truth_nav, out.series.as_mut()) {
            let errors = step_errors(&n, &nav);
            series.records.push(ErrorRecord { t, errors, nees, gnss: gnss_step });
            if errors.ape > driver.divergence_ape {
                return Some(format!("position error {:.1} m at t = {t}", errors.ape));
            }
        }
        None
    };

    out.divergence = record(&mut out, &filter, 0, false);
    for k in 1..imu.len() {
        if out.divergence.is_some() {
            break;
        }
        let (a, b) = (&imu[k - 1], &imu[k]);
        let u = InputSample::imu((a.omega + b.omega) * 0.5, (a.accel + b.accel) * 0.5);
        if let Err(e) = filter.propagate(&u, b.t - a.t) {
            out.divergence = Some(e.to_string());
            break;
        }
        let mut gnss_step = false;
        while next_fix < gnss.len() && gnss[next_fix].t_arrival <= b.t + TIME_EPS {
            match filter.update(&gnss[next_fix].pos) {
                Ok(rep) => {
                    if rep.clamped && !warned_clamp {
                        warn!("{kind}: delay query outside the buffer at t = {:.3} s, clamped (reported once per run)", b.t);
                        warned_clamp = true;
                    }
                    out.innovation_nees.push(rep.innovation_nees / 3.0)
                }
                Err(e) => {
                    out.divergence = Some(e.to_string());
                    break;
                }
            }
            gnss_step = true;
            next_fix += 1;
        }
        if out.divergence.is_some() {
            break;
        }
        out.divergence = record(&mut out, &filter, k, gnss_step);
    }
    Ok(out)
}

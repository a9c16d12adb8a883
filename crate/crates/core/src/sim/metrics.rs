//! Run metrics.

use serde::{Deserialize, Serialize};

use super::log::{Outcome, RunLog};
use super::run::obstacle_clearance;
use crate::error::{Error, Result};
use crate::track::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub variant: String,
    pub outcome: Outcome,
    pub success: bool,
    /// Peak |atan(v_y / v_x)| [rad].
    pub peak_sideslip: f64,
    /// Peak |v_y| [m/s].
    pub peak_vy: f64,
    /// RMS of measured minus nominal front force [N].
    pub rms_dfy_f: f64,
    pub rms_dfy_r: f64,
    /// RMS of measured minus nominal yaw rate [rad/s].
    pub rms_dr: f64,
    /// Smallest clearance to an obstacle grown by the vehicle half-width [m].
    pub min_clearance: f64,
    pub mean_vx: f64,
    pub duration: f64,
    /// Scenario speed when the run succeeded [km/h].
    pub completed_speed_kmh: Option<f64>,
}

pub fn rms(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Metrics of a log. Clearance is recomputed from the plant positions so
/// that the metric depends only on the trajectory and the scenario.
pub fn compute_metrics(log: &RunLog, scenario: &Scenario, half_width: f64) -> Result<Metrics> {
    if log.ticks.is_empty() {
        return Err(Error::InvalidInput("cannot compute metrics of an empty log".into()));
    }
    let t = &log.ticks;
    let min_clearance = if scenario.obstacles.is_empty() {
        f64::MAX
    } else {
        t.iter().map(|k| obstacle_clearance(scenario, k.x, k.y, half_width)).fold(f64::INFINITY, f64::min)
    };
    let success = log.meta.outcome.is_success();
    Ok(Metrics {
        scenario: log.meta.scenario.clone(),
        variant: log.meta.variant.to_string(),
        outcome: log.meta.outcome,
        success,
        peak_sideslip: t.iter().map(|k| k.sideslip().abs()).fold(0.0, f64::max),
        peak_vy: t.iter().map(|k| k.vy.abs()).fold(0.0, f64::max),
        rms_dfy_f: rms(t.iter().map(|k| k.meas_fy_f - k.nom_fy_f)),
        rms_dfy_r: rms(t.iter().map(|k| k.meas_fy_r - k.nom_fy_r)),
        rms_dr: rms(t.iter().map(|k| k.meas_r - k.nom_r)),
        min_clearance,
        mean_vx: t.iter().map(|k| k.vx).sum::<f64>() / t.len() as f64,
        duration: t.len() as f64 * log.meta.dt,
        completed_speed_kmh: success.then_some(scenario.v_ref * 3.6),
    })
}

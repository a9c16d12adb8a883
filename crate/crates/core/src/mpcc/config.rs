use serde::{Deserialize, Serialize};

use super::sqp::SqpSettings;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub e_obs: f64,
    pub e_edg: f64,
    pub d_delta: f64,
    pub d_fx: f64,
    pub e_con: f64,
    pub e_lag: f64,
    pub e_vel: f64,
    pub sigma_vy: f64,
    pub sigma_r: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            e_obs: 500.0,
            e_edg: 200.0,
            d_delta: 50.0,
            d_fx: 1e-6,
            e_con: 1.0,
            e_lag: 10.0,
            e_vel: 0.5,
            sigma_vy: 2000.0,
            sigma_r: 2000.0,
        }
    }
}

impl Weights {
    pub const ZERO: Self = Self {
        e_obs: 0.0,
        e_edg: 0.0,
        d_delta: 0.0,
        d_fx: 0.0,
        e_con: 0.0,
        e_lag: 0.0,
        e_vel: 0.0,
        sigma_vy: 0.0,
        sigma_r: 0.0,
    };

    fn all(&self) -> [f64; 9] {
        [
            self.e_obs,
            self.e_edg,
            self.d_delta,
            self.d_fx,
            self.e_con,
            self.e_lag,
            self.e_vel,
            self.sigma_vy,
            self.sigma_r,
        ]
    }
}

/// Box bounds of the optimal control problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Bounds {
    /// Steering angle [rad].
    pub delta: (f64, f64),
    /// Steering rate [rad/s].
    pub delta_rate: (f64, f64),
    /// Longitudinal force [N].
    pub fx: (f64, f64),
    /// Longitudinal force rate [N/s].
    pub fx_rate: (f64, f64),
    /// Longitudinal speed [m/s].
    pub vx: (f64, f64),
    /// Upper bound of the progress rate as a multiple of the reference speed.
    pub progress_rate_factor: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            delta: (-0.5, 0.5),
            delta_rate: (-0.8, 0.8),
            fx: (-14_715.0, 5_000.0),
            fx_rate: (-30_000.0, 30_000.0),
            vx: (5.0, 50.0),
            progress_rate_factor: 1.5,
        }
    }
}

/// Weight reconfiguration when an obstacle comes close.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrioritySettings {
    /// Predicted clearance [m] below which prioritization switches on.
    pub activate_below: f64,
    /// Prioritization switches off above `activate_below + hysteresis`.
    pub hysteresis: f64,
    /// Factor on the obstacle and edge weights.
    pub obstacle_multiplier: f64,
    /// Factor on the contouring and velocity weights.
    pub tracking_multiplier: f64,
}

impl Default for PrioritySettings {
    fn default() -> Self {
        Self { activate_below: 2.0, hysteresis: 0.5, obstacle_multiplier: 10.0, tracking_multiplier: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcpConfig {
    /// Prediction horizon N [stages].
    pub horizon: usize,
    /// Stages carrying uncertainty cost.
    pub prob_horizon: usize,
    /// Stage length [s].
    pub dt: f64,
    pub weights: Weights,
    pub bounds: Bounds,
    pub priority: PrioritySettings,
    pub solver: SqpSettings,
    /// Width of the quadratic blend at hinge activation [m].
    pub hinge_blend: f64,
    /// Distance the vehicle body should keep from the road edges [m].
    pub edge_margin: f64,
}

impl Default for OcpConfig {
    fn default() -> Self {
        Self {
            horizon: 30,
            prob_horizon: 20,
            dt: 0.05,
            weights: Weights::default(),
            bounds: Bounds::default(),
            priority: PrioritySettings::default(),
            solver: SqpSettings::default(),
            hinge_blend: 0.01,
            edge_margin: 0.25,
        }
    }
}

impl OcpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prob_horizon < 1 || self.horizon < self.prob_horizon {
            return Err(Error::param("horizon", "need horizon >= prob_horizon >= 1"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::param("dt", "must be strictly positive"));
        }
        if !self.weights.all().iter().all(|w| *w >= 0.0 && w.is_finite()) {
            return Err(Error::param("weights", "must be finite and non-negative"));
        }
        let b = &self.bounds;
        let ranges =
            [("delta", b.delta), ("delta_rate", b.delta_rate), ("fx", b.fx), ("fx_rate", b.fx_rate), ("vx", b.vx)];
        for (name, (lo, hi)) in ranges {
            if !(lo <= hi) {
                return Err(Error::InfeasibleBounds(name));
            }
        }
        if !(b.progress_rate_factor > 0.0) {
            return Err(Error::InfeasibleBounds("progress_rate_factor"));
        }
        if !(b.vx.0 > 0.0) {
            return Err(Error::param("bounds.vx", "lower speed bound must be positive"));
        }
        let p = &self.priority;
        if !(p.hysteresis >= 0.0 && p.obstacle_multiplier >= 1.0 && p.tracking_multiplier > 0.0) {
            return Err(Error::param(
                "priority",
                "need hysteresis >= 0, obstacle_multiplier >= 1, tracking_multiplier > 0",
            ));
        }
        if !(self.edge_margin >= 0.0) {
            return Err(Error::param("edge_margin", "must be non-negative"));
        }
        if !(self.hinge_blend > 0.0) {
            return Err(Error::param("hinge_blend", "must be strictly positive"));
        }
        Ok(())
    }

    /// Upper bound on the per-stage uncertainty cost: the obstacle cost of a
    /// fully penetrated obstacle under prioritization.
    pub fn sigma_cost_ceiling(&self) -> f64 {
        self.weights.e_obs * self.priority.obstacle_multiplier
    }
}

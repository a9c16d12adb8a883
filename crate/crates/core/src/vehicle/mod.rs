//! Single-track vehicle models.
//!
//! [`PredictionModel`] is the controller's model: planar single-track
//! dynamics with Fiala tyres and additive mismatch corrections on the axle
//! lateral forces and on the yaw rate that couples into the velocity
//! equations. [`Plant`] is the surrogate "real" vehicle: magic-formula tyres,
//! steering actuator lag and tyre force relaxation.

mod jacobian;
mod model;
mod plant;
pub mod tyre;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use jacobian::{LateralJacobians, StateJacobian};
pub use model::{AxleForces, PredictionModel, StateDerivative};
pub use plant::{Measurement, PacejkaParams, Plant, PlantState, PlantTyres};
pub use tyre::{fiala_lateral_force, pacejka_lateral_force, MagicFormula};

pub const GRAVITY: f64 = 9.81;

/// Default slip-angle guard on `v_x` [m/s].
pub const DEFAULT_V_EPS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    /// [kg]
    pub mass: f64,
    /// [kg m^2]
    pub yaw_inertia: f64,
    /// CoG to front axle [m].
    pub lf: f64,
    /// CoG to rear axle [m].
    pub lr: f64,
    /// `F_drag = drag_coeff * v_x^2` [N s^2/m^2].
    pub drag_coeff: f64,
    /// Share of the commanded longitudinal force applied at the front axle.
    pub fx_front_ratio: f64,
    pub mu: f64,
    /// Body width [m], used for edge and obstacle clearance.
    pub width: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            yaw_inertia: 2500.0,
            lf: 1.1,
            lr: 1.6,
            drag_coeff: 0.5 * 1.225 * 0.3 * 2.2,
            fx_front_ratio: 0.6,
            mu: 1.0,
            width: 1.8,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        positive("yaw_inertia", self.yaw_inertia)?;
        positive("lf", self.lf)?;
        positive("lr", self.lr)?;
        positive("mu", self.mu)?;
        positive("width", self.width)?;
        if !(0.0..=1.0).contains(&self.fx_front_ratio) {
            return Err(Error::param("fx_front_ratio", "must lie in [0, 1]"));
        }
        if !(self.drag_coeff >= 0.0) {
            return Err(Error::param("drag_coeff", "must be non-negative"));
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.lf + self.lr
    }

    /// Static (front, rear) axle loads [N].
    pub fn static_axle_loads(&self) -> (f64, f64) {
        let w = self.mass * GRAVITY;
        (w * self.lr / self.wheelbase(), w * self.lf / self.wheelbase())
    }

    /// Front/rear split of a commanded total longitudinal force.
    pub fn split_fx(&self, fx: f64) -> (f64, f64) {
        (self.fx_front_ratio * fx, (1.0 - self.fx_front_ratio) * fx)
    }
}

/// Planar pose plus body-frame velocities.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub r: f64,
}

impl VehicleState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.psi, self.vx, self.vy, self.r]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { x: a[0], y: a[1], psi: a[2], vx: a[3], vy: a[4], r: a[5] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Sideslip angle `atan(v_y / v_x)`.
    pub fn sideslip(&self) -> f64 {
        (self.vy / self.vx).atan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    /// Road-wheel angle [rad].
    pub delta: f64,
    /// Total longitudinal force [N].
    pub fx: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FialaParams {
    pub c_alpha_f: f64,
    pub c_alpha_r: f64,
    pub fz_f: f64,
    pub fz_r: f64,
}

impl FialaParams {
    /// Cornering stiffnesses with axle loads from the static weight split.
    pub fn from_static_split(vehicle: &VehicleParams, c_alpha_f: f64, c_alpha_r: f64) -> Self {
        let (fz_f, fz_r) = vehicle.static_axle_loads();
        Self { c_alpha_f, c_alpha_r, fz_f, fz_r }
    }

    pub fn validate(&self) -> Result<()> {
        positive("c_alpha_f", self.c_alpha_f)?;
        positive("c_alpha_r", self.c_alpha_r)?;
        positive("fz_f", self.fz_f)?;
        positive("fz_r", self.fz_r)
    }
}

impl Default for FialaParams {
    fn default() -> Self {
        Self::from_static_split(&VehicleParams::default(), 80_000.0, 80_000.0)
    }
}

/// Learned additive corrections to the prediction model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MismatchCorrection {
    /// Front axle lateral force [N].
    pub dfy_f: f64,
    /// Rear axle lateral force [N].
    pub dfy_r: f64,
    /// Yaw rate [rad/s].
    pub dr: f64,
}

impl MismatchCorrection {
    pub const ZERO: Self = Self { dfy_f: 0.0, dfy_r: 0.0, dr: 0.0 };
}

pub(crate) fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be strictly positive, got {v}")))
    }
}

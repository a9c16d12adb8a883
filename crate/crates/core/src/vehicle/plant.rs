//! Surrogate high-fidelity plant.
//!
//! Single-track body with magic-formula tyres, a first-order steering
//! actuator and first-order tyre force relaxation (time constant
//! `relax_length / v_x`). A `Fiala` tyre setting with no lags reproduces the
//! prediction model exactly, which is how zero-mismatch runs are configured.

use serde::{Deserialize, Serialize};

use super::model::single_track_rates;
use super::tyre::{fiala_lateral_force, MagicFormula};
use super::{ControlInput, FialaParams, VehicleParams, VehicleState};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacejkaParams {
    pub front: MagicFormula,
    pub rear: MagicFormula,
    /// Tyre relaxation length [m]; 0 makes forces instantaneous.
    pub relax_length: f64,
    /// Steering actuator time constant [s]; 0 makes steering instantaneous.
    pub steer_tau: f64,
}

impl Default for PacejkaParams {
    fn default() -> Self {
        let (fz_f, fz_r) = VehicleParams::default().static_axle_loads();
        Self {
            front: MagicFormula::with_slope(76_000.0, 1.45, 0.95 * fz_f, -0.3),
            rear: MagicFormula::with_slope(74_000.0, 1.6, 0.88 * fz_r, -0.3),
            relax_length: 0.5,
            steer_tau: 0.06,
        }
    }
}

impl PacejkaParams {
    pub fn validate(&self) -> Result<()> {
        for (name, mf) in [("front.d", self.front), ("rear.d", self.rear)] {
            super::positive(name, mf.d)?;
        }
        if !(self.relax_length >= 0.0) {
            return Err(Error::param("relax_length", "must be non-negative"));
        }
        if !(self.steer_tau >= 0.0) {
            return Err(Error::param("steer_tau", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tyre", rename_all = "snake_case")]
pub enum PlantTyres {
    Pacejka(PacejkaParams),
    /// Same tyres as the prediction model, no lags.
    Fiala(FialaParams),
}

impl Default for PlantTyres {
    fn default() -> Self {
        PlantTyres::Pacejka(PacejkaParams::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub vehicle: VehicleState,
    /// Actual road-wheel angle after the actuator [rad].
    pub delta: f64,
    /// Relaxed axle forces [N]; only evolved when relaxation is enabled.
    pub fy_f: f64,
    pub fy_r: f64,
}

impl PlantState {
    pub fn at_rest_with(vehicle: VehicleState) -> Self {
        Self { vehicle, ..Default::default() }
    }
}

/// What the force-sensing bearings and the gyro report.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Measurement {
    pub fy_f: f64,
    pub fy_r: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub vehicle: VehicleParams,
    pub tyres: PlantTyres,
    /// RK4 substeps per control interval.
    pub substeps: usize,
    pub v_eps: f64,
}

impl Default for Plant {
    fn default() -> Self {
        Self {
            vehicle: VehicleParams::default(),
            tyres: PlantTyres::default(),
            substeps: 5,
            v_eps: super::DEFAULT_V_EPS,
        }
    }
}

const STATE_DIM: usize = 9;

impl Plant {
    /// A plant identical to the prediction model.
    pub fn nominal(vehicle: VehicleParams, fiala: FialaParams) -> Self {
        Self { vehicle, tyres: PlantTyres::Fiala(fiala), ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        match &self.tyres {
            PlantTyres::Pacejka(p) => p.validate()?,
            PlantTyres::Fiala(f) => f.validate()?,
        }
        if self.substeps == 0 {
            return Err(Error::param("substeps", "must be at least 1"));
        }
        Ok(())
    }

    fn steer_tau(&self) -> f64 {
        match &self.tyres {
            PlantTyres::Pacejka(p) => p.steer_tau,
            PlantTyres::Fiala(_) => 0.0,
        }
    }

    fn relax_length(&self) -> f64 {
        match &self.tyres {
            PlantTyres::Pacejka(p) => p.relax_length,
            PlantTyres::Fiala(_) => 0.0,
        }
    }

    /// Steady-state axle forces at the given actual steering angle.
    fn steady_forces(&self, s: &VehicleState, delta: f64) -> Result<(f64, f64)> {
        if s.vx < self.v_eps {
            return Err(Error::Singularity { vx: s.vx, v_eps: self.v_eps });
        }
        let vp = &self.vehicle;
        let alpha_f = ((s.vy + vp.lf * s.r) / s.vx).atan() - delta;
        let alpha_r = ((s.vy - vp.lr * s.r) / s.vx).atan();
        Ok(match &self.tyres {
            PlantTyres::Pacejka(p) => (p.front.lateral_force(alpha_f), p.rear.lateral_force(alpha_r)),
            PlantTyres::Fiala(f) => (
                fiala_lateral_force(alpha_f, f.c_alpha_f, f.fz_f, vp.mu),
                fiala_lateral_force(alpha_r, f.c_alpha_r, f.fz_r, vp.mu),
            ),
        })
    }

    fn pack(s: &PlantState) -> [f64; STATE_DIM] {
        let v = s.vehicle.to_array();
        [v[0], v[1], v[2], v[3], v[4], v[5], s.delta, s.fy_f, s.fy_r]
    }

    fn unpack(a: &[f64; STATE_DIM]) -> PlantState {
        PlantState {
            vehicle: VehicleState::from_array([a[0], a[1], a[2], a[3], a[4], a[5]]),
            delta: a[6],
            fy_f: a[7],
            fy_r: a[8],
        }
    }

    /// Actual steering angle and axle forces for a state under a command.
    fn effective(&self, s: &PlantState, cmd_delta: f64) -> Result<(f64, f64, f64)> {
        let delta = if self.steer_tau() > 0.0 { s.delta } else { cmd_delta };
        if self.relax_length() > 0.0 {
            Ok((delta, s.fy_f, s.fy_r))
        } else {
            let (f, r) = self.steady_forces(&s.vehicle, delta)?;
            Ok((delta, f, r))
        }
    }

    fn rates(&self, a: &[f64; STATE_DIM], cmd: &ControlInput) -> Result<[f64; STATE_DIM]> {
        let s = Self::unpack(a);
        let (delta, fy_f, fy_r) = self.effective(&s, cmd.delta)?;
        let v = &s.vehicle;
        let d = single_track_rates(&self.vehicle, v, delta, cmd.fx, fy_f, fy_r, v.r).to_array();
        let tau = self.steer_tau();
        let delta_rate = if tau > 0.0 { (cmd.delta - s.delta) / tau } else { 0.0 };
        let relax = self.relax_length();
        let (ff_rate, fr_rate) = if relax > 0.0 {
            let (ssf, ssr) = self.steady_forces(v, delta)?;
            let k = v.vx / relax;
            ((ssf - s.fy_f) * k, (ssr - s.fy_r) * k)
        } else {
            (0.0, 0.0)
        };
        Ok([d[0], d[1], d[2], d[3], d[4], d[5], delta_rate, ff_rate, fr_rate])
    }

    /// Noiseless measurement of the current state under a command.
    pub fn measure(&self, s: &PlantState, cmd: &ControlInput) -> Result<Measurement> {
        let (_, fy_f, fy_r) = self.effective(s, cmd.delta)?;
        Ok(Measurement { fy_f, fy_r, r: s.vehicle.r })
    }

    /// Consistent initial plant state: actuator at the command, forces settled.
    pub fn settle(&self, vehicle: VehicleState, cmd: &ControlInput) -> Result<PlantState> {
        let (fy_f, fy_r) = self.steady_forces(&vehicle, cmd.delta)?;
        Ok(PlantState { vehicle, delta: cmd.delta, fy_f, fy_r })
    }

    /// Advance `dt` with a constant command.
    pub fn step(&self, s: &PlantState, cmd: &ControlInput, dt: f64) -> Result<(PlantState, Measurement)> {
        self.step_ramp(s, cmd, cmd, dt)
    }

    /// Advance `dt` with the command interpolated linearly from `from` to `to`.
    pub fn step_ramp(
        &self,
        s: &PlantState,
        from: &ControlInput,
        to: &ControlInput,
        dt: f64,
    ) -> Result<(PlantState, Measurement)> {
        if !(dt >= 0.0) {
            return Err(Error::param("dt", "must be non-negative"));
        }
        let cmd_at = |t: f64| {
            let w = if dt > 0.0 { t / dt } else { 1.0 };
            ControlInput { delta: from.delta + w * (to.delta - from.delta), fx: from.fx + w * (to.fx - from.fx) }
        };
        let h = dt / self.substeps as f64;
        let mut x = Self::pack(s);
        for i in 0..self.substeps {
            let t = i as f64 * h;
            let (c0, c1, c2) = (cmd_at(t), cmd_at(t + 0.5 * h), cmd_at(t + h));
            let k1 = self.rates(&x, &c0)?;
            let k2 = self.rates(&axpy(&x, 0.5 * h, &k1), &c1)?;
            let k3 = self.rates(&axpy(&x, 0.5 * h, &k2), &c1)?;
            let k4 = self.rates(&axpy(&x, h, &k3), &c2)?;
            for j in 0..STATE_DIM {
                x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
        }
        let next = Self::unpack(&x);
        let meas = self.measure(&next, to)?;
        Ok((next, meas))
    }
}

fn axpy(x: &[f64; STATE_DIM], a: f64, y: &[f64; STATE_DIM]) -> [f64; STATE_DIM] {
    std::array::from_fn(|i| x[i] + a * y[i])
}

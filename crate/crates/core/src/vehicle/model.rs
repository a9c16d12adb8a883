use serde::{Deserialize, Serialize};

use super::tyre::fiala_lateral_force;
use super::{ControlInput, FialaParams, MismatchCorrection, VehicleParams, VehicleState};
use crate::error::{Error, Result};

/// Time derivative of a [`VehicleState`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub vx: f64,
    pub vy: f64,
    pub r: f64,
}

impl StateDerivative {
    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.psi, self.vx, self.vy, self.r]
    }
}

/// Axle lateral forces [N].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AxleForces {
    pub fy_f: f64,
    pub fy_r: f64,
}

/// Single-track equations of motion for given axle lateral forces.
///
/// `fy_f`/`fy_r` already include any correction; `r_coupling` is the yaw rate
/// used in the velocity cross-coupling terms.
pub(crate) fn single_track_rates(
    vp: &VehicleParams,
    state: &VehicleState,
    delta: f64,
    fx: f64,
    fy_f: f64,
    fy_r: f64,
    r_coupling: f64,
) -> StateDerivative {
    let (fx_f, fx_r) = vp.split_fx(fx);
    let (sd, cd) = delta.sin_cos();
    let (sp, cp) = state.psi.sin_cos();
    let drag = vp.drag_coeff * state.vx * state.vx;
    StateDerivative {
        x: state.vx * cp - state.vy * sp,
        y: state.vx * sp + state.vy * cp,
        psi: state.r,
        vx: (fx_f * cd - fy_f * sd + fx_r - drag) / vp.mass + r_coupling * state.vy,
        vy: (fx_f * sd + fy_f * cd + fy_r) / vp.mass - r_coupling * state.vx,
        r: (fy_f * cd * vp.lf - fy_r * vp.lr + fx_f * sd * vp.lf) / vp.yaw_inertia,
    }
}

/// The controller's prediction model: single-track dynamics with Fiala tyres
/// and additive mismatch terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionModel {
    pub vehicle: VehicleParams,
    pub fiala: FialaParams,
    /// Lowest admissible `v_x` [m/s].
    pub v_eps: f64,
}

impl Default for PredictionModel {
    fn default() -> Self {
        Self::new(VehicleParams::default(), FialaParams::default())
    }
}

impl PredictionModel {
    pub fn new(vehicle: VehicleParams, fiala: FialaParams) -> Self {
        Self { vehicle, fiala, v_eps: super::DEFAULT_V_EPS }
    }

    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        self.fiala.validate()?;
        super::positive("v_eps", self.v_eps)
    }

    pub(crate) fn check_speed(&self, vx: f64) -> Result<()> {
        if vx >= self.v_eps {
            Ok(())
        } else {
            Err(Error::Singularity { vx, v_eps: self.v_eps })
        }
    }

    /// Kinematic front/rear slip angles [rad].
    pub fn slip_angles(&self, state: &VehicleState, input: &ControlInput) -> Result<(f64, f64)> {
        self.check_speed(state.vx)?;
        let vp = &self.vehicle;
        let alpha_f = ((state.vy + vp.lf * state.r) / state.vx).atan() - input.delta;
        let alpha_r = ((state.vy - vp.lr * state.r) / state.vx).atan();
        Ok((alpha_f, alpha_r))
    }

    /// Uncorrected Fiala axle forces.
    pub fn axle_forces(&self, state: &VehicleState, input: &ControlInput) -> Result<AxleForces> {
        let (alpha_f, alpha_r) = self.slip_angles(state, input)?;
        let mu = self.vehicle.mu;
        Ok(AxleForces {
            fy_f: fiala_lateral_force(alpha_f, self.fiala.c_alpha_f, self.fiala.fz_f, mu),
            fy_r: fiala_lateral_force(alpha_r, self.fiala.c_alpha_r, self.fiala.fz_r, mu),
        })
    }

    pub fn derivatives(
        &self,
        state: &VehicleState,
        input: &ControlInput,
        corr: &MismatchCorrection,
    ) -> Result<StateDerivative> {
        let f = self.axle_forces(state, input)?;
        Ok(single_track_rates(
            &self.vehicle,
            state,
            input.delta,
            input.fx,
            f.fy_f + corr.dfy_f,
            f.fy_r + corr.dfy_r,
            state.r + corr.dr,
        ))
    }

    /// Classical RK4 step with the input held constant.
    pub fn rk4_step(
        &self,
        state: &VehicleState,
        input: &ControlInput,
        corr: &MismatchCorrection,
        dt: f64,
    ) -> Result<VehicleState> {
        self.rk4_step_ramp(state, input, input, corr, dt)
    }

    /// RK4 step with the input interpolated linearly from `from` to `to`.
    pub fn rk4_step_ramp(
        &self,
        state: &VehicleState,
        from: &ControlInput,
        to: &ControlInput,
        corr: &MismatchCorrection,
        dt: f64,
    ) -> Result<VehicleState> {
        if !(dt >= 0.0) {
            return Err(Error::param("dt", "must be non-negative"));
        }
        let mid = ControlInput { delta: 0.5 * (from.delta + to.delta), fx: 0.5 * (from.fx + to.fx) };
        let f = |s: &VehicleState, u: &ControlInput| self.derivatives(s, u, corr).map(|d| d.to_array());
        let x0 = state.to_array();
        let k1 = f(state, from)?;
        let k2 = f(&VehicleState::from_array(axpy(&x0, 0.5 * dt, &k1)), &mid)?;
        let k3 = f(&VehicleState::from_array(axpy(&x0, 0.5 * dt, &k2)), &mid)?;
        let k4 = f(&VehicleState::from_array(axpy(&x0, dt, &k3)), to)?;
        let mut out = x0;
        for i in 0..6 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(VehicleState::from_array(out))
    }
}

fn axpy(x: &[f64; 6], a: f64, y: &[f64; 6]) -> [f64; 6] {
    std::array::from_fn(|i| x[i] + a * y[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cruise(vx: f64) -> VehicleState {
        VehicleState { vx, ..Default::default() }
    }

    #[test]
    fn slip_angles_straight_and_steer() {
        let m = PredictionModel::default();
        let s = cruise(15.0);
        assert_eq!(m.slip_angles(&s, &ControlInput::default()).unwrap(), (0.0, 0.0));
        let (af, ar) = m.slip_angles(&s, &ControlInput { delta: 0.05, fx: 0.0 }).unwrap();
        assert_eq!((af, ar), (-0.05, 0.0));
    }

    #[test]
    fn slip_angles_reference() {
        let m = PredictionModel::default();
        let s = VehicleState { vx: 15.0, vy: 0.5, r: 0.2, ..Default::default() };
        let (af, ar) = m.slip_angles(&s, &ControlInput::default()).unwrap();
        // independent evaluation of atan(0.72/15), atan(0.18/15)
        assert_relative_eq!(af, 0.047_963_186_877_076_7, max_relative = 1e-14);
        assert_relative_eq!(ar, 0.011_999_424_049_761_282, max_relative = 1e-14);
    }

    #[test]
    fn slip_angle_singularity() {
        let m = PredictionModel::default();
        let err = m.slip_angles(&cruise(0.3), &ControlInput::default()).unwrap_err();
        assert!(matches!(err, Error::Singularity { .. }));
        assert!(m.rk4_step(&cruise(0.1), &ControlInput::default(), &MismatchCorrection::ZERO, 0.05).is_err());
    }

    #[test]
    fn equilibrium_straight_driving() {
        let m = PredictionModel::default();
        let vx = 20.0;
        let input = ControlInput { delta: 0.0, fx: m.vehicle.drag_coeff * vx * vx };
        let d = m.derivatives(&cruise(vx), &input, &MismatchCorrection::ZERO).unwrap();
        assert_eq!(d.x, vx);
        assert_eq!((d.y, d.psi, d.vx, d.vy, d.r), (0.0, 0.0, 0.0, 0.0, 0.0));

        let next = m.rk4_step(&cruise(vx), &input, &MismatchCorrection::ZERO, 0.05).unwrap();
        assert_relative_eq!(next.x, vx * 0.05, max_relative = 1e-15);
        assert_eq!((next.vx, next.vy, next.r), (vx, 0.0, 0.0));
    }

    #[test]
    fn yaw_rate_correction_couples_into_velocities() {
        let m = PredictionModel::default();
        let vx = 20.0;
        let input = ControlInput { delta: 0.0, fx: m.vehicle.drag_coeff * vx * vx };
        let corr = MismatchCorrection { dr: 0.03, ..Default::default() };
        let d = m.derivatives(&cruise(vx), &input, &corr).unwrap();
        assert_relative_eq!(d.vy, -0.03 * vx, max_relative = 1e-15);
        assert_eq!(d.vx, 0.0);
        assert_eq!(d.r, 0.0);
        assert_eq!(d.psi, 0.0);
    }

    #[test]
    fn zero_correction_is_bitwise_nominal() {
        let m = PredictionModel::default();
        let s = VehicleState { x: 1.0, y: -2.0, psi: 0.3, vx: 17.0, vy: 0.4, r: -0.2 };
        let u = ControlInput { delta: 0.07, fx: 900.0 };
        let f = m.axle_forces(&s, &u).unwrap();
        let plain = single_track_rates(&m.vehicle, &s, u.delta, u.fx, f.fy_f, f.fy_r, s.r);
        assert_eq!(m.derivatives(&s, &u, &MismatchCorrection::ZERO).unwrap(), plain);
    }

    #[test]
    fn zero_step_is_identity() {
        let m = PredictionModel::default();
        let s = VehicleState { x: 1.0, y: -2.0, psi: 0.3, vx: 17.0, vy: 0.4, r: -0.2 };
        let u = ControlInput { delta: 0.07, fx: 900.0 };
        assert_eq!(m.rk4_step(&s, &u, &MismatchCorrection::ZERO, 0.0).unwrap(), s);
    }
}

//! Analytic Jacobians of the prediction model.

use nalgebra::{Matrix2, SMatrix, Vector2};

use super::model::PredictionModel;
use super::tyre::{fiala_lateral_force, fiala_slope};
use super::{ControlInput, MismatchCorrection, VehicleState};
use crate::error::Result;

/// Linearization of the lateral subsystem `(v_y, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralJacobians {
    /// d(v_y', r') / d(v_y, r)
    pub a: Matrix2<f64>,
    /// d(v_y', r') / d(dF_yF, dF_yR)
    pub b: Matrix2<f64>,
    /// d(v_y', r') / d(dr)
    pub dr_gain: Vector2<f64>,
}

/// Continuous-time Jacobian of the six vehicle states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateJacobian {
    /// w.r.t. (X, Y, psi, v_x, v_y, r)
    pub state: SMatrix<f64, 6, 6>,
    /// w.r.t. (delta, F_x)
    pub input: SMatrix<f64, 6, 2>,
}

/// Slip angles and their partials w.r.t. (v_x, v_y, r).
struct SlipPartials {
    alpha_f: f64,
    alpha_r: f64,
    df: [f64; 3],
    dr: [f64; 3],
}

impl PredictionModel {
    fn slip_partials(&self, s: &VehicleState, u: &ControlInput) -> Result<SlipPartials> {
        let (alpha_f, alpha_r) = self.slip_angles(s, u)?;
        let vp = &self.vehicle;
        let qf = (s.vy + vp.lf * s.r) / s.vx;
        let qr = (s.vy - vp.lr * s.r) / s.vx;
        let gf = 1.0 / ((1.0 + qf * qf) * s.vx);
        let gr = 1.0 / ((1.0 + qr * qr) * s.vx);
        Ok(SlipPartials { alpha_f, alpha_r, df: [-qf * gf, gf, vp.lf * gf], dr: [-qr * gr, gr, -vp.lr * gr] })
    }

    /// Full continuous-time Jacobian with the correction held fixed.
    pub fn state_jacobian(
        &self,
        s: &VehicleState,
        u: &ControlInput,
        corr: &MismatchCorrection,
    ) -> Result<StateJacobian> {
        let sp = self.slip_partials(s, u)?;
        let vp = &self.vehicle;
        let fp = &self.fiala;
        let ff = fiala_lateral_force(sp.alpha_f, fp.c_alpha_f, fp.fz_f, vp.mu) + corr.dfy_f;
        let kf = fiala_slope(sp.alpha_f, fp.c_alpha_f, fp.fz_f, vp.mu);
        let kr = fiala_slope(sp.alpha_r, fp.c_alpha_r, fp.fz_r, vp.mu);
        let (sd, cd) = u.delta.sin_cos();
        let (sps, cps) = s.psi.sin_cos();
        let (fx_f, _) = vp.split_fx(u.fx);
        let rho = vp.fx_front_ratio;
        let (m, iz, lf, lr) = (vp.mass, vp.yaw_inertia, vp.lf, vp.lr);
        let rc = s.r + corr.dr;

        // d F_f / d(vx, vy, r), d F_r / d(vx, vy, r)
        let dff: [f64; 3] = std::array::from_fn(|i| kf * sp.df[i]);
        let dfr: [f64; 3] = std::array::from_fn(|i| kr * sp.dr[i]);

        let mut a = SMatrix::<f64, 6, 6>::zeros();
        // kinematics
        a[(0, 2)] = -s.vx * sps - s.vy * cps;
        a[(0, 3)] = cps;
        a[(0, 4)] = -sps;
        a[(1, 2)] = s.vx * cps - s.vy * sps;
        a[(1, 3)] = sps;
        a[(1, 4)] = cps;
        a[(2, 5)] = 1.0;
        // v_x'
        a[(3, 3)] = (-dff[0] * sd - 2.0 * vp.drag_coeff * s.vx) / m;
        a[(3, 4)] = -dff[1] * sd / m + rc;
        a[(3, 5)] = -dff[2] * sd / m + s.vy;
        // v_y'
        a[(4, 3)] = (dff[0] * cd + dfr[0]) / m - rc;
        a[(4, 4)] = (dff[1] * cd + dfr[1]) / m;
        a[(4, 5)] = (dff[2] * cd + dfr[2]) / m - s.vx;
        // r'
        for (j, col) in (3..6).enumerate() {
            a[(5, col)] = (dff[j] * cd * lf - dfr[j] * lr) / iz;
        }

        // d alpha_f / d delta = -1
        let mut b = SMatrix::<f64, 6, 2>::zeros();
        b[(3, 0)] = (-fx_f * sd - ff * cd + kf * sd) / m;
        b[(3, 1)] = (rho * cd + 1.0 - rho) / m;
        b[(4, 0)] = (fx_f * cd - ff * sd - kf * cd) / m;
        b[(4, 1)] = rho * sd / m;
        b[(5, 0)] = (-ff * sd * lf - kf * cd * lf + fx_f * cd * lf) / iz;
        b[(5, 1)] = rho * sd * lf / iz;
        Ok(StateJacobian { state: a, input: b })
    }

    /// Partials of the uncorrected Fiala axle forces with respect to
    /// `(v_x, v_y, r, delta)`, front then rear.
    pub fn axle_force_partials(&self, s: &VehicleState, u: &ControlInput) -> Result<([f64; 4], [f64; 4])> {
        let sp = self.slip_partials(s, u)?;
        let vp = &self.vehicle;
        let fp = &self.fiala;
        let kf = fiala_slope(sp.alpha_f, fp.c_alpha_f, fp.fz_f, vp.mu);
        let kr = fiala_slope(sp.alpha_r, fp.c_alpha_r, fp.fz_r, vp.mu);
        Ok(([kf * sp.df[0], kf * sp.df[1], kf * sp.df[2], -kf], [kr * sp.dr[0], kr * sp.dr[1], kr * sp.dr[2], 0.0]))
    }

    /// Jacobians of `(v_y', r')` used for covariance propagation.
    pub fn lateral_jacobians(
        &self,
        s: &VehicleState,
        u: &ControlInput,
        corr: &MismatchCorrection,
    ) -> Result<LateralJacobians> {
        let full = self.state_jacobian(s, u, corr)?;
        let vp = &self.vehicle;
        let cd = u.delta.cos();
        Ok(LateralJacobians {
            a: Matrix2::new(full.state[(4, 4)], full.state[(4, 5)], full.state[(5, 4)], full.state[(5, 5)]),
            b: Matrix2::new(cd / vp.mass, 1.0 / vp.mass, cd * vp.lf / vp.yaw_inertia, -vp.lr / vp.yaw_inertia),
            dr_gain: Vector2::new(-s.vx, 0.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn axle_force_partials_match_finite_differences() {
        let m = PredictionModel::default();
        let s = VehicleState { vx: 14.0, vy: 0.4, r: 0.2, ..Default::default() };
        let u = ControlInput { delta: 0.05, fx: 300.0 };
        let (pf, pr) = m.axle_force_partials(&s, &u).unwrap();
        let f = |s: &VehicleState, u: &ControlInput| {
            let a = m.axle_forces(s, u).unwrap();
            [a.fy_f, a.fy_r]
        };
        let h = 1e-6;
        for i in 0..4 {
            let (mut sp, mut sm, mut up, mut um) = (s, s, u, u);
            match i {
                0 => (sp.vx, sm.vx) = (s.vx + h, s.vx - h),
                1 => (sp.vy, sm.vy) = (s.vy + h, s.vy - h),
                2 => (sp.r, sm.r) = (s.r + h, s.r - h),
                _ => (up.delta, um.delta) = (u.delta + h, u.delta - h),
            }
            let (a, b) = (f(&sp, &up), f(&sm, &um));
            assert_relative_eq!(pf[i], (a[0] - b[0]) / (2.0 * h), max_relative = 1e-6, epsilon = 1e-6);
            assert_relative_eq!(pr[i], (a[1] - b[1]) / (2.0 * h), max_relative = 1e-6, epsilon = 1e-6);
        }
    }

    #[test]
    fn input_matrix_at_zero_steer() {
        let m = PredictionModel::default();
        let s = VehicleState { vx: 18.0, vy: 0.3, r: 0.1, ..Default::default() };
        let j = m.lateral_jacobians(&s, &ControlInput::default(), &MismatchCorrection::ZERO).unwrap();
        let vp = m.vehicle;
        assert_relative_eq!(j.b[(0, 0)], 1.0 / vp.mass);
        assert_relative_eq!(j.b[(0, 1)], 1.0 / vp.mass);
        assert_relative_eq!(j.b[(1, 0)], vp.lf / vp.yaw_inertia);
        assert_relative_eq!(j.b[(1, 1)], -vp.lr / vp.yaw_inertia);
    }

    fn central_difference(
        m: &PredictionModel,
        s: &VehicleState,
        u: &ControlInput,
        corr: &MismatchCorrection,
        col: usize,
        h: f64,
    ) -> [f64; 6] {
        let perturb = |sign: f64| {
            let mut st = s.to_array();
            let mut inp = *u;
            match col {
                0..=5 => st[col] += sign * h,
                6 => inp.delta += sign * h,
                _ => inp.fx += sign * h,
            }
            m.derivatives(&VehicleState::from_array(st), &inp, corr).unwrap().to_array()
        };
        let (p, q) = (perturb(1.0), perturb(-1.0));
        std::array::from_fn(|i| (p[i] - q[i]) / (2.0 * h))
    }

    #[test]
    fn full_jacobian_matches_finite_differences() {
        let m = PredictionModel::default();
        let s = VehicleState { x: 3.0, y: 1.0, psi: 0.4, vx: 16.0, vy: 0.8, r: 0.35 };
        let u = ControlInput { delta: 0.06, fx: 1500.0 };
        let corr = MismatchCorrection { dfy_f: -300.0, dfy_r: 150.0, dr: 0.01 };
        let j = m.state_jacobian(&s, &u, &corr).unwrap();
        for col in 0..8 {
            let h = if col == 7 { 1e-2 } else { 1e-6 };
            let fd = central_difference(&m, &s, &u, &corr, col, h);
            for row in 0..6 {
                let an = if col < 6 { j.state[(row, col)] } else { j.input[(row, col - 6)] };
                assert!(
                    (an - fd[row]).abs() <= 1e-5 * an.abs().max(1e-3),
                    "d f{row}/d x{col}: analytic {an} vs fd {}",
                    fd[row]
                );
            }
        }
    }
}

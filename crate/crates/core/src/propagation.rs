//! First-order propagation of the lateral velocity / yaw rate covariance
//! along a predicted trajectory.
//!
//! One step maps `Sigma` to
//!
//! ```text
//! A_d Sigma A_d' + dt^2 B diag(var_FyF, var_FyR) B' + var_r g g'
//! ```
//!
//! with `A_d = I + A dt` and `g = dt * (-v_x, 0)`: the yaw-rate mismatch only
//! enters the lateral subsystem through the `-(r + dr) v_x` term of `v_y'`.

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vehicle::LateralJacobians;

/// Packed symmetric covariance of `(v_y, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LateralCovariance {
    pub s_vyvy: f64,
    pub s_rr: f64,
    pub s_vyr: f64,
}

impl LateralCovariance {
    pub const ZERO: Self = Self { s_vyvy: 0.0, s_rr: 0.0, s_vyr: 0.0 };

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.s_vyvy, self.s_vyr, self.s_vyr, self.s_rr)
    }

    /// Symmetric part of `m`.
    pub fn from_matrix(m: &Matrix2<f64>) -> Self {
        Self { s_vyvy: m[(0, 0)], s_rr: m[(1, 1)], s_vyr: 0.5 * (m[(0, 1)] + m[(1, 0)]) }
    }

    /// `(sigma_vy, sigma_r)`.
    pub fn sigmas(&self) -> (f64, f64) {
        (self.s_vyvy.max(0.0).sqrt(), self.s_rr.max(0.0).sqrt())
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.s_vyvy >= -tol && self.s_rr >= -tol && self.s_vyvy * self.s_rr - self.s_vyr * self.s_vyr >= -tol
    }
}

/// Moment-matched variances of the three mismatch channels at one stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageDisturbance {
    pub var_fyf: f64,
    pub var_fyr: f64,
    pub var_r: f64,
}

impl StageDisturbance {
    pub const ZERO: Self = Self { var_fyf: 0.0, var_fyr: 0.0, var_r: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if [self.var_fyf, self.var_fyr, self.var_r].iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("disturbance variances must be non-negative: {self:?}")))
        }
    }
}

/// The three noise directions of one stage, `dt * B e_1`, `dt * B e_2` and `g`.
pub fn injection_vectors(jac: &LateralJacobians, dt: f64) -> [Vector2<f64>; 3] {
    [jac.b.column(0) * dt, jac.b.column(1) * dt, jac.dr_gain * dt]
}

fn process_noise(jac: &LateralJacobians, dist: &StageDisturbance, dt: f64) -> Matrix2<f64> {
    let [u_f, u_r, g] = injection_vectors(jac, dt);
    u_f * u_f.transpose() * dist.var_fyf + u_r * u_r.transpose() * dist.var_fyr + g * g.transpose() * dist.var_r
}

/// One propagation step. The flag reports whether a negative eigenvalue had
/// to be floored at zero.
pub fn propagate_step(
    cov: &LateralCovariance,
    jac: &LateralJacobians,
    dist: &StageDisturbance,
    dt: f64,
) -> Result<(LateralCovariance, bool)> {
    if !(dt > 0.0) {
        return Err(Error::param("dt", "must be strictly positive"));
    }
    dist.validate()?;
    let ad = Matrix2::identity() + jac.a * dt;
    let next = ad * cov.to_matrix() * ad.transpose() + process_noise(jac, dist, dt);
    let sym = LateralCovariance::from_matrix(&next);
    if sym.is_psd(0.0) {
        return Ok((sym, false));
    }
    let eig = SymmetricEigen::new(sym.to_matrix());
    let floored = eig.eigenvalues.map(|v| v.max(0.0));
    let m = eig.eigenvectors * Matrix2::from_diagonal(&floored) * eig.eigenvectors.transpose();
    Ok((LateralCovariance::from_matrix(&m), true))
}

/// Linearization and disturbance of one horizon stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageModel {
    pub jacobians: LateralJacobians,
    pub disturbance: StageDisturbance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonCovariance {
    /// `n_prob` covariances; the first is the (zero) covariance of the
    /// measured current state.
    pub covariances: Vec<LateralCovariance>,
    /// Number of steps that needed eigenvalue flooring.
    pub floored: usize,
}

impl HorizonCovariance {
    pub fn sigmas(&self) -> Vec<(f64, f64)> {
        self.covariances.iter().map(LateralCovariance::sigmas).collect()
    }
}

/// Runs `n_prob - 1` steps from a zero covariance using `stages[0..n_prob-1]`.
pub fn propagate_horizon(stages: &[StageModel], n_prob: usize, dt: f64) -> Result<HorizonCovariance> {
    if n_prob == 0 {
        return Err(Error::param("n_prob", "must be at least 1"));
    }
    if stages.len() + 1 < n_prob {
        return Err(Error::InvalidInput(format!("{} stages cannot cover n_prob = {n_prob}", stages.len())));
    }
    let mut covariances = Vec::with_capacity(n_prob);
    covariances.push(LateralCovariance::ZERO);
    let mut floored = 0;
    for st in &stages[..n_prob - 1] {
        let (next, f) = propagate_step(covariances.last().unwrap(), &st.jacobians, &st.disturbance, dt)?;
        floored += usize::from(f);
        covariances.push(next);
    }
    Ok(HorizonCovariance { covariances, floored })
}

/// `out[k][j][c]` is the derivative of `(Sigma_k[0,0], Sigma_k[1,1])` with
/// respect to the variance of channel `c` injected at stage `j < k`.
/// Flooring is ignored, which is exact whenever no step was floored.
pub fn diagonal_sensitivities(stages: &[StageModel], n_prob: usize, dt: f64) -> Vec<Vec<[[f64; 2]; 3]>> {
    let mut out = vec![Vec::new(); n_prob];
    for j in 0..n_prob.saturating_sub(1) {
        let mut dirs = injection_vectors(&stages[j].jacobians, dt);
        for k in (j + 1)..n_prob {
            if k > j + 1 {
                let ad = Matrix2::identity() + stages[k - 1].jacobians.a * dt;
                dirs = dirs.map(|d| ad * d);
            }
            out[k].push(dirs.map(|d| [d[0] * d[0], d[1] * d[1]]));
        }
    }
    out
}

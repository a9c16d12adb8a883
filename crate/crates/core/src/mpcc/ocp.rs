//! The contouring optimal control problem.

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use super::config::{OcpConfig, Weights};
use super::sqp::{Layout, Residuals, ShootingProblem, SolveStatus, Trajectory};
use crate::error::{Error, Result};
use crate::track::{Obstacle, Scenario};
use crate::vehicle::{ControlInput, MismatchCorrection, PredictionModel, VehicleState};

pub const NX: usize = 9;
pub const NU: usize = 3;

/// State indices: `(X, Y, psi, v_x, v_y, r, s, delta, F_x)`.
pub mod sx {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const PSI: usize = 2;
    pub const VX: usize = 3;
    pub const VY: usize = 4;
    pub const R: usize = 5;
    pub const S: usize = 6;
    pub const DELTA: usize = 7;
    pub const FX: usize = 8;
}

/// Control indices: `(delta_dot, F_x_dot, s_dot)`.
pub mod su {
    pub const DDELTA: usize = 0;
    pub const DFX: usize = 1;
    pub const DS: usize = 2;
}

pub type StateVec = [f64; NX];

pub fn vehicle_state(x: &[f64]) -> VehicleState {
    VehicleState { x: x[0], y: x[1], psi: x[2], vx: x[3], vy: x[4], r: x[5] }
}

pub fn applied_input(x: &[f64]) -> ControlInput {
    ControlInput { delta: x[sx::DELTA], fx: x[sx::FX] }
}

/// Per-term cost of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageCost {
    pub obs: f64,
    pub edg: f64,
    pub d_delta: f64,
    pub d_fx: f64,
    pub con: f64,
    pub lag: f64,
    pub vel: f64,
    pub sigma_vy: f64,
    pub sigma_r: f64,
}

impl StageCost {
    pub fn total(&self) -> f64 {
        self.obs + self.edg + self.d_delta + self.d_fx + self.con + self.lag + self.vel + self.sigma_vy + self.sigma_r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_vy + self.sigma_r
    }

    fn add(&mut self, term: Term, v: f64) {
        let slot = match term {
            Term::Obs => &mut self.obs,
            Term::Edg => &mut self.edg,
            Term::DDelta => &mut self.d_delta,
            Term::DFx => &mut self.d_fx,
            Term::Con => &mut self.con,
            Term::Lag => &mut self.lag,
            Term::Vel => &mut self.vel,
            Term::SigmaVy => &mut self.sigma_vy,
            Term::SigmaR => &mut self.sigma_r,
        };
        *slot += v;
    }

    pub fn sum(costs: &[StageCost]) -> StageCost {
        let mut out = StageCost::default();
        for c in costs {
            out.obs += c.obs;
            out.edg += c.edg;
            out.d_delta += c.d_delta;
            out.d_fx += c.d_fx;
            out.con += c.con;
            out.lag += c.lag;
            out.vel += c.vel;
            out.sigma_vy += c.sigma_vy;
            out.sigma_r += c.sigma_r;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Term {
    Obs,
    Edg,
    DDelta,
    DFx,
    Con,
    Lag,
    Vel,
    SigmaVy,
    SigmaR,
}

/// `max(0, v)` with a quadratic blend on `[0, w]`; returns value and slope.
pub fn smooth_hinge(v: f64, w: f64) -> (f64, f64) {
    if v <= 0.0 {
        (0.0, 0.0)
    } else if v < w {
        (0.5 * v * v / w, v / w)
    } else {
        (v - 0.5 * w, 1.0)
    }
}

const OBSTACLE_EPS: f64 = 1e-6;

/// Uncertainty along the horizon, affine in the predicted states around the
/// trajectory it was propagated on.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SigmaLinearization {
    /// States `x_0 .. x_{n_prob-1}` of the propagation trajectory.
    pub reference: Vec<StateVec>,
    /// `(sigma_vy, sigma_r)` at the reference, one per stage.
    pub base: Vec<(f64, f64)>,
    /// `grad_vy[k][j]` = d sigma_vy_k / d x_j for `j < k`.
    pub grad_vy: Vec<Vec<StateVec>>,
    pub grad_r: Vec<Vec<StateVec>>,
    /// Upper limits on `(sigma_vy, sigma_r)` per stage that keep the
    /// weighted uncertainty cost under the prioritized obstacle ceiling.
    pub caps: Vec<(f64, f64)>,
}

impl SigmaLinearization {
    pub fn stages(&self) -> usize {
        self.base.len()
    }

    /// `(sigma_vy, sigma_r)` at stage `k` of `traj`, with flags telling
    /// whether each value sits on its lower or upper limit.
    pub fn evaluate(&self, k: usize, traj: &Trajectory) -> ((f64, bool), (f64, bool)) {
        let (mut vy, mut r) = self.base[k];
        for j in 1..k {
            for i in 0..NX {
                let d = traj.states[j][i] - self.reference[j][i];
                vy += self.grad_vy[k][j][i] * d;
                r += self.grad_r[k][j][i] * d;
            }
        }
        let (cvy, cr) = self.caps.get(k).copied().unwrap_or((f64::INFINITY, f64::INFINITY));
        let clip = |v: f64, cap: f64| {
            let c = v.clamp(0.0, cap);
            (c, c != v)
        };
        (clip(vy, cvy), clip(r, cr))
    }
}

/// One instance of the contouring problem for a control cycle.
#[derive(Debug, Clone)]
pub struct Ocp<'a> {
    pub scenario: &'a Scenario,
    pub model: &'a PredictionModel,
    pub cfg: &'a OcpConfig,
    /// Effective weights for this cycle.
    pub weights: Weights,
    pub x0: StateVec,
    /// Frozen correction per stage, `N` entries.
    pub corrections: Vec<MismatchCorrection>,
    pub sigma: Option<SigmaLinearization>,
}

impl<'a> Ocp<'a> {
    /// Problem with zero corrections and no uncertainty terms.
    pub fn new(scenario: &'a Scenario, model: &'a PredictionModel, cfg: &'a OcpConfig) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        scenario.validate()?;
        if cfg.bounds.vx.0 < model.v_eps {
            return Err(Error::param("bounds.vx", "lower speed bound is below the slip-angle guard"));
        }
        Ok(Self {
            scenario,
            model,
            cfg,
            weights: cfg.weights,
            x0: [0.0; NX],
            corrections: vec![MismatchCorrection::ZERO; cfg.horizon],
            sigma: None,
        })
    }

    pub fn decision_count(&self) -> usize {
        self.layout().len()
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.model.vehicle.width
    }

    fn derivative(&self, x: &[f64], u: &[f64], corr: &MismatchCorrection) -> Result<[f64; NX]> {
        let d = self.model.derivatives(&vehicle_state(x), &applied_input(x), corr)?;
        Ok([d.x, d.y, d.psi, d.vx, d.vy, d.r, u[su::DS], u[su::DDELTA], u[su::DFX]])
    }

    fn derivative_jacobian(
        &self,
        x: &[f64],
        corr: &MismatchCorrection,
    ) -> Result<(SMatrix<f64, NX, NX>, SMatrix<f64, NX, NU>)> {
        let j = self.model.state_jacobian(&vehicle_state(x), &applied_input(x), corr)?;
        let mut a = SMatrix::<f64, NX, NX>::zeros();
        for r in 0..6 {
            for c in 0..6 {
                a[(r, c)] = j.state[(r, c)];
            }
            a[(r, sx::DELTA)] = j.input[(r, 0)];
            a[(r, sx::FX)] = j.input[(r, 1)];
        }
        let mut b = SMatrix::<f64, NX, NU>::zeros();
        b[(sx::S, su::DS)] = 1.0;
        b[(sx::DELTA, su::DDELTA)] = 1.0;
        b[(sx::FX, su::DFX)] = 1.0;
        Ok((a, b))
    }

    fn rk4(&self, k: usize, x: &[f64], u: &[f64]) -> Result<StateVec> {
        let dt = self.cfg.dt;
        let c = &self.corrections[k];
        let f = |x: &[f64]| self.derivative(x, u, c);
        let add = |a: &[f64], h: f64, b: &[f64; NX]| -> StateVec { std::array::from_fn(|i| a[i] + h * b[i]) };
        let k1 = f(x)?;
        let k2 = f(&add(x, 0.5 * dt, &k1))?;
        let k3 = f(&add(x, 0.5 * dt, &k2))?;
        let k4 = f(&add(x, dt, &k3))?;
        Ok(std::array::from_fn(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])))
    }

    fn rk4_jacobian(&self, k: usize, x: &[f64], u: &[f64]) -> Result<(SMatrix<f64, NX, NX>, SMatrix<f64, NX, NU>)> {
        let dt = self.cfg.dt;
        let c = &self.corrections[k];
        let add = |a: &[f64], h: f64, b: &[f64; NX]| -> StateVec { std::array::from_fn(|i| a[i] + h * b[i]) };
        let id = SMatrix::<f64, NX, NX>::identity();
        let k1 = self.derivative(x, u, c)?;
        let (a1, b1) = self.derivative_jacobian(x, c)?;
        let x2 = add(x, 0.5 * dt, &k1);
        let k2 = self.derivative(&x2, u, c)?;
        let (a2, b2) = self.derivative_jacobian(&x2, c)?;
        let x3 = add(x, 0.5 * dt, &k2);
        let k3 = self.derivative(&x3, u, c)?;
        let (a3, b3) = self.derivative_jacobian(&x3, c)?;
        let x4 = add(x, dt, &k3);
        let (a4, b4) = self.derivative_jacobian(&x4, c)?;

        let dk1x = a1;
        let dk2x = a2 * (id + dk1x * (0.5 * dt));
        let dk3x = a3 * (id + dk2x * (0.5 * dt));
        let dk4x = a4 * (id + dk3x * dt);
        let dk1u = b1;
        let dk2u = a2 * dk1u * (0.5 * dt) + b2;
        let dk3u = a3 * dk2u * (0.5 * dt) + b3;
        let dk4u = a4 * dk3u * dt + b4;
        let fx = id + (dk1x + dk2x * 2.0 + dk3x * 2.0 + dk4x) * (dt / 6.0);
        let fu = (dk1u + dk2u * 2.0 + dk3u * 2.0 + dk4u) * (dt / 6.0);
        Ok((fx, fu))
    }

    /// Residuals of the state-dependent terms at one stage, with gradients
    /// over the nine state components.
    fn state_terms(&self, x: &[f64], w: &Weights, out: &mut Vec<(Term, f64, StateVec)>) {
        let sc = self.scenario;
        let blend = self.cfg.hinge_blend;
        let p = sc.spline.evaluate(x[sx::S]);
        let (sh, ch) = p.heading.sin_cos();
        let (dx, dy) = (x[sx::X] - p.x, x[sx::Y] - p.y);
        let e_con = -sh * dx + ch * dy;
        let e_lag = ch * dx + sh * dy;
        let mut g_con = [0.0; NX];
        g_con[sx::X] = -sh;
        g_con[sx::Y] = ch;
        g_con[sx::S] = -p.curvature * e_lag;
        let mut g_lag = [0.0; NX];
        g_lag[sx::X] = ch;
        g_lag[sx::Y] = sh;
        g_lag[sx::S] = p.curvature * e_con - 1.0;
        let scaled = |g: &StateVec, f: f64| -> StateVec { std::array::from_fn(|i| g[i] * f) };

        let q = w.e_con.sqrt();
        out.push((Term::Con, q * e_con, scaled(&g_con, q)));
        let q = w.e_lag.sqrt();
        out.push((Term::Lag, q * e_lag, scaled(&g_lag, q)));
        let q = w.e_vel.sqrt();
        let mut g = [0.0; NX];
        g[sx::VX] = q;
        out.push((Term::Vel, q * (x[sx::VX] - sc.v_ref), g));

        let q = w.e_obs.sqrt();
        for o in &sc.obstacles {
            let (v, gx, gy) = obstacle_penetration(o, x[sx::X], x[sx::Y]);
            let (h, dh) = smooth_hinge(v, blend);
            let mut g = [0.0; NX];
            g[sx::X] = q * dh * gx;
            g[sx::Y] = q * dh * gy;
            out.push((Term::Obs, q * h, g));
        }

        let q = w.e_edg.sqrt();
        let (left, right) = sc.edges.at(x[sx::S]);
        let hw = self.half_width() + self.cfg.edge_margin;
        let (h, dh) = smooth_hinge(e_con - (left - hw), blend);
        out.push((Term::Edg, q * h, scaled(&g_con, q * dh)));
        let (h, dh) = smooth_hinge((right + hw) - e_con, blend);
        out.push((Term::Edg, q * h, scaled(&g_con, -q * dh)));
    }

    fn tagged_residuals(&self, traj: &Trajectory) -> Result<(Residuals, Vec<(usize, Term)>)> {
        let layout = self.layout();
        let w = &self.weights;
        let mut res = Residuals::default();
        let mut tags = Vec::new();
        let mut terms = Vec::new();
        for k in 0..layout.horizon {
            let u = &traj.inputs[k];
            let q = w.d_delta.sqrt();
            res.push(q * u[su::DDELTA], vec![(layout.u(k, su::DDELTA), q)]);
            tags.push((k, Term::DDelta));
            let q = w.d_fx.sqrt();
            res.push(q * u[su::DFX], vec![(layout.u(k, su::DFX), q)]);
            tags.push((k, Term::DFx));
        }
        for k in 1..=layout.horizon {
            terms.clear();
            self.state_terms(&traj.states[k], w, &mut terms);
            for (term, v, g) in terms.drain(..) {
                let row = (0..NX).filter(|&i| g[i] != 0.0).map(|i| (layout.x(k, i), g[i])).collect();
                res.push(v, row);
                tags.push((k, term));
            }
        }
        if let Some(sig) = &self.sigma {
            for k in 1..sig.stages().min(layout.horizon + 1) {
                let ((vy, vy_clip), (r, r_clip)) = sig.evaluate(k, traj);
                for (term, weight, (val, clipped), grads) in [
                    (Term::SigmaVy, w.sigma_vy, (vy, vy_clip), &sig.grad_vy[k]),
                    (Term::SigmaR, w.sigma_r, (r, r_clip), &sig.grad_r[k]),
                ] {
                    let q = weight.sqrt();
                    let mut row = Vec::new();
                    let active = if clipped { 0 } else { k.saturating_sub(1) };
                    for (j, g) in grads.iter().enumerate().skip(1).take(active) {
                        for i in 0..NX {
                            if g[i] != 0.0 {
                                row.push((layout.x(j, i), q * g[i]));
                            }
                        }
                    }
                    res.push(q * val, row);
                    tags.push((k, term));
                }
            }
        }
        Ok((res, tags))
    }

    /// Per-stage cost breakdown, `N + 1` entries (stage 0 only carries
    /// input-rate terms).
    pub fn stage_costs(&self, traj: &Trajectory) -> Result<Vec<StageCost>> {
        let (res, tags) = self.tagged_residuals(traj)?;
        let mut out = vec![StageCost::default(); self.cfg.horizon + 1];
        for (v, (k, term)) in res.values.iter().zip(tags) {
            out[k].add(term, v * v);
        }
        Ok(out)
    }

    pub fn objective(&self, traj: &Trajectory) -> Result<f64> {
        Ok(self.tagged_residuals(traj)?.0.cost())
    }

    /// Straight-ahead rollout holding the current steering and force.
    pub fn cold_start(&self) -> Trajectory {
        let layout = self.layout();
        let ds = self.x0[sx::VX].clamp(0.0, self.progress_rate_max());
        let u = vec![0.0, 0.0, ds];
        let mut states = vec![self.x0.to_vec()];
        for k in 0..layout.horizon {
            let next = self.rk4(k, &states[k], &u).map(|s| s.to_vec()).unwrap_or_else(|_| states[k].clone());
            states.push(next);
        }
        Trajectory { states, inputs: vec![u; layout.horizon] }
    }

    /// The previous solution advanced by one stage, with `x_0` replaced.
    pub fn shifted(&self, prev: &Trajectory) -> Trajectory {
        let n = self.cfg.horizon;
        let mut states = Vec::with_capacity(n + 1);
        states.push(self.x0.to_vec());
        states.extend(prev.states[2..=n].iter().cloned());
        let last_u = prev.inputs[n - 1].clone();
        let tail =
            self.rk4(n - 1, &prev.states[n], &last_u).map(|s| s.to_vec()).unwrap_or_else(|_| prev.states[n].clone());
        states.push(tail);
        let mut inputs: Vec<Vec<f64>> = prev.inputs[1..].to_vec();
        inputs.push(last_u);
        Trajectory { states, inputs }
    }

    pub fn progress_rate_max(&self) -> f64 {
        self.cfg.bounds.progress_rate_factor * self.scenario.v_ref
    }

    /// Smallest clearance between any predicted position and any obstacle
    /// grown by the vehicle half-width.
    pub fn min_clearance(&self, traj: &Trajectory) -> f64 {
        min_clearance(self.scenario, traj, self.half_width())
    }
}

pub(crate) fn min_clearance(scenario: &Scenario, traj: &Trajectory, half_width: f64) -> f64 {
    let mut best = f64::INFINITY;
    for x in &traj.states {
        for o in &scenario.obstacles {
            best = best.min(o.clearance(x[sx::X], x[sx::Y], half_width));
        }
    }
    best
}

/// `1 - d` for the margin-inflated ellipse with the gradient of `1 - d` in
/// `(X, Y)`. The distance is regularized so the gradient exists at the centre.
fn obstacle_penetration(o: &Obstacle, x: f64, y: f64) -> (f64, f64, f64) {
    let (sh, ch) = o.heading.sin_cos();
    let (lx, ly) = o.local(x, y);
    let (a, b) = (o.a + o.margin, o.b + o.margin);
    let q = (lx / a).powi(2) + (ly / b).powi(2);
    let d = (q + OBSTACLE_EPS).sqrt();
    let (qx, qy) = (2.0 * lx / (a * a), 2.0 * ly / (b * b));
    // local = R(-heading) (x - xo, y - yo)
    let dq_dx = qx * ch - qy * sh;
    let dq_dy = qx * sh + qy * ch;
    (1.0 - d, -dq_dx / (2.0 * d), -dq_dy / (2.0 * d))
}

/// Cost of one stage with the problem's smoothed hinges. `sigmas` are only
/// charged when given (stages inside the uncertainty horizon).
pub fn stage_cost(state: &StateVec, rates: Option<&[f64; NU]>, sigmas: Option<(f64, f64)>, ocp: &Ocp<'_>) -> StageCost {
    let mut out = StageCost::default();
    let mut terms = Vec::new();
    ocp.state_terms(state, &ocp.weights, &mut terms);
    for (t, v, _) in terms {
        out.add(t, v * v);
    }
    if let Some(u) = rates {
        out.d_delta = ocp.weights.d_delta * u[su::DDELTA].powi(2);
        out.d_fx = ocp.weights.d_fx * u[su::DFX].powi(2);
    }
    if let Some((vy, r)) = sigmas {
        out.sigma_vy = ocp.weights.sigma_vy * vy * vy;
        out.sigma_r = ocp.weights.sigma_r * r * r;
    }
    out
}

impl ShootingProblem for Ocp<'_> {
    fn layout(&self) -> Layout {
        Layout { nx: NX, nu: NU, horizon: self.cfg.horizon }
    }

    fn initial_state(&self) -> &[f64] {
        &self.x0
    }

    fn step(&self, k: usize, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.rk4(k, x, u)?.to_vec())
    }

    fn step_jacobian(&self, k: usize, x: &[f64], u: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (a, b) = self.rk4_jacobian(k, x, u)?;
        Ok((DMatrix::from_column_slice(NX, NX, a.as_slice()), DMatrix::from_column_slice(NX, NU, b.as_slice())))
    }

    fn residuals(&self, traj: &Trajectory) -> Result<Residuals> {
        Ok(self.tagged_residuals(traj)?.0)
    }

    fn state_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let b = &self.cfg.bounds;
        let mut lo = vec![f64::NEG_INFINITY; NX];
        let mut hi = vec![f64::INFINITY; NX];
        (lo[sx::VX], hi[sx::VX]) = b.vx;
        (lo[sx::DELTA], hi[sx::DELTA]) = b.delta;
        (lo[sx::FX], hi[sx::FX]) = b.fx;
        (lo, hi)
    }

    fn input_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let b = &self.cfg.bounds;
        (vec![b.delta_rate.0, b.fx_rate.0, 0.0], vec![b.delta_rate.1, b.fx_rate.1, self.progress_rate_max()])
    }
}

/// Solved problem for one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcpSolution {
    pub trajectory: Trajectory,
    pub stage_costs: Vec<StageCost>,
    pub objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt: f64,
    pub merit_trace: Vec<(f64, f64)>,
}

impl OcpSolution {
    pub fn state(&self, k: usize) -> &[f64] {
        &self.trajectory.states[k]
    }

    /// Steering and force the plant should reach at the end of the first stage.
    pub fn first_command(&self) -> ControlInput {
        applied_input(&self.trajectory.states[1])
    }

    /// Command the shifted solution prescribes for the next cycle.
    pub fn next_command(&self) -> ControlInput {
        applied_input(&self.trajectory.states[2.min(self.trajectory.states.len() - 1)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::{dlc_scenario, PathSpline, RoadEdges};
    use approx::assert_relative_eq;

    fn straight() -> Scenario {
        let wps: Vec<(f64, f64)> = (0..=40).map(|i| (5.0 * i as f64, 0.0)).collect();
        Scenario {
            name: "straight".into(),
            spline: PathSpline::build(&wps).unwrap(),
            edges: RoadEdges::constant(3.5, -3.5).unwrap(),
            obstacles: vec![],
            v_ref: 15.0,
            collision_prioritization: false,
            finish_s: 150.0,
        }
    }

    #[test]
    fn hinge_is_c1() {
        let w = 0.01;
        assert_eq!(smooth_hinge(-1.0, w), (0.0, 0.0));
        assert_eq!(smooth_hinge(0.3, w), (0.3 - 0.005, 1.0));
        let (a, da) = smooth_hinge(w - 1e-12, w);
        let (b, db) = smooth_hinge(w + 1e-12, w);
        assert!((a - b).abs() < 1e-11 && (da - db).abs() < 1e-9);
    }

    #[test]
    fn stage_cost_terms() {
        let sc = straight();
        let model = PredictionModel::default();
        let cfg = OcpConfig::default();
        let mut ocp = Ocp::new(&sc, &model, &cfg).unwrap();
        let mut x = [0.0; NX];
        x[sx::X] = 20.0;
        x[sx::S] = 20.0;
        x[sx::VX] = 15.0;
        ocp.weights = Weights::ZERO;
        assert_eq!(stage_cost(&x, Some(&[0.3, 100.0, 15.0]), Some((0.1, 0.2)), &ocp).total(), 0.0);
        ocp.weights = Weights::default();
        assert!(stage_cost(&x, Some(&[0.0, 0.0, 15.0]), Some((0.0, 0.0)), &ocp).total() < 1e-20);
        ocp.weights = Weights { e_con: 1.0, ..Weights::ZERO };
        x[sx::Y] = 0.5;
        assert_relative_eq!(stage_cost(&x, None, None, &ocp).total(), 0.25, max_relative = 1e-12);
    }

    #[test]
    fn decision_count() {
        let sc = dlc_scenario(55.0, false).unwrap();
        let model = PredictionModel::default();
        let cfg = OcpConfig::default();
        let ocp = Ocp::new(&sc, &model, &cfg).unwrap();
        assert_eq!(ocp.decision_count(), 30 * (9 + 3));
    }

    #[test]
    fn residual_gradients_match_finite_differences() {
        let sc = dlc_scenario(65.0, true).unwrap();
        let model = PredictionModel::default();
        let cfg = OcpConfig::default();
        let mut ocp = Ocp::new(&sc, &model, &cfg).unwrap();
        ocp.x0 = [85.0, 1.2, 0.1, 18.0, 0.3, 0.1, 85.5, 0.05, 200.0];
        let traj = ocp.cold_start();
        let layout = ocp.layout();
        let res = ocp.residuals(&traj).unwrap();
        let z = traj.to_vector(&layout);
        let h = 1e-6;
        for var in 0..layout.len() {
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[var] += h;
            zm[var] -= h;
            let rp = ocp.residuals(&Trajectory::from_vector(&ocp.x0, &zp, &layout)).unwrap();
            let rm = ocp.residuals(&Trajectory::from_vector(&ocp.x0, &zm, &layout)).unwrap();
            for (i, row) in res.rows.iter().enumerate() {
                let g = row.iter().filter(|(c, _)| *c == var).map(|(_, v)| v).sum::<f64>();
                let fd = (rp.values[i] - rm.values[i]) / (2.0 * h);
                assert!((g - fd).abs() < 1e-5 * (1.0 + fd.abs()), "row {i} var {var}: {g} vs {fd}");
            }
        }
    }

    #[test]
    fn step_jacobian_matches_finite_differences() {
        let sc = straight();
        let model = PredictionModel::default();
        let cfg = OcpConfig::default();
        let ocp = Ocp::new(&sc, &model, &cfg).unwrap();
        let x = [3.0, 0.2, 0.05, 16.0, 0.4, 0.15, 3.1, 0.04, 800.0];
        let u = [0.2, -3000.0, 15.0];
        let (a, b) = ocp.step_jacobian(0, &x, &u).unwrap();
        for c in 0..NX + NU {
            let h = if c == sx::FX || c == NX + su::DFX { 1e-2 } else { 1e-6 };
            let (mut xp, mut xm, mut up, mut um) = (x, x, u, u);
            if c < NX {
                xp[c] += h;
                xm[c] -= h;
            } else {
                up[c - NX] += h;
                um[c - NX] -= h;
            }
            let fp = ocp.step(0, &xp, &up).unwrap();
            let fm = ocp.step(0, &xm, &um).unwrap();
            for r in 0..NX {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let an = if c < NX { a[(r, c)] } else { b[(r, c - NX)] };
                assert!((an - fd).abs() < 1e-6 * (1.0 + fd.abs()), "({r},{c}) {an} vs {fd}");
            }
        }
    }
}

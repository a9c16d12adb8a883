//! Gauss–Newton SQP for multiple-shooting problems with least-squares costs.
//!
//! Decision vector layout: `[u_0, x_1, u_1, x_2, ..., u_{N-1}, x_N]`; the
//! initial state `x_0` is fixed.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT, ZeroConeT,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub nx: usize,
    pub nu: usize,
    pub horizon: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.horizon * (self.nx + self.nu)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of state component `i` of `x_k`, `k >= 1`.
    pub fn x(&self, k: usize, i: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.horizon && i < self.nx);
        (k - 1) * (self.nx + self.nu) + self.nu + i
    }

    /// Index of input component `j` of `u_k`.
    pub fn u(&self, k: usize, j: usize) -> usize {
        debug_assert!(k < self.horizon && j < self.nu);
        k * (self.nx + self.nu) + j
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// `x_0 .. x_N`
    pub states: Vec<Vec<f64>>,
    /// `u_0 .. u_{N-1}`
    pub inputs: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn to_vector(&self, layout: &Layout) -> Vec<f64> {
        let mut z = vec![0.0; layout.len()];
        for k in 0..layout.horizon {
            for j in 0..layout.nu {
                z[layout.u(k, j)] = self.inputs[k][j];
            }
            for i in 0..layout.nx {
                z[layout.x(k + 1, i)] = self.states[k + 1][i];
            }
        }
        z
    }

    pub fn from_vector(x0: &[f64], z: &[f64], layout: &Layout) -> Self {
        let mut states = vec![x0.to_vec()];
        let mut inputs = Vec::with_capacity(layout.horizon);
        for k in 0..layout.horizon {
            inputs.push((0..layout.nu).map(|j| z[layout.u(k, j)]).collect());
            states.push((0..layout.nx).map(|i| z[layout.x(k + 1, i)]).collect());
        }
        Self { states, inputs }
    }

    pub fn is_finite(&self) -> bool {
        self.states.iter().chain(&self.inputs).flatten().all(|v| v.is_finite())
    }
}

/// Least-squares residuals `r` with sparse gradient rows over the decision
/// vector. The cost is `sum r_i^2`.
#[derive(Debug, Clone, Default)]
pub struct Residuals {
    pub values: Vec<f64>,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl Residuals {
    pub fn push(&mut self, value: f64, row: Vec<(usize, f64)>) {
        self.values.push(value);
        self.rows.push(row);
    }

    pub fn cost(&self) -> f64 {
        self.values.iter().map(|r| r * r).sum()
    }
}

pub trait ShootingProblem {
    fn layout(&self) -> Layout;
    fn initial_state(&self) -> &[f64];
    /// Discrete dynamics `x_{k+1} = F_k(x_k, u_k)`.
    fn step(&self, k: usize, x: &[f64], u: &[f64]) -> Result<Vec<f64>>;
    /// `(dF/dx, dF/du)`.
    fn step_jacobian(&self, k: usize, x: &[f64], u: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)>;
    fn residuals(&self, traj: &Trajectory) -> Result<Residuals>;
    /// Box bounds `(lower, upper)` on every state and input component.
    fn state_bounds(&self) -> (Vec<f64>, Vec<f64>);
    fn input_bounds(&self) -> (Vec<f64>, Vec<f64>);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqpSettings {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    /// Levenberg term added to the Gauss–Newton Hessian.
    pub regularization: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self { max_iterations: 50, kkt_tolerance: 1e-6, regularization: 1e-8, armijo: 1e-4, max_backtracks: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    /// Iteration limit or stalled line search; the last iterate is usable.
    Degraded,
    /// Non-finite iterate or failed subproblem; the trajectory is the guess.
    Failed,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Degraded => "degraded",
            SolveStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SqpResult {
    pub trajectory: Trajectory,
    pub status: SolveStatus,
    pub iterations: usize,
    pub kkt: f64,
    pub objective: f64,
    /// Merit before and after every accepted step, both at the penalty
    /// parameter in force for that step.
    pub merit_trace: Vec<(f64, f64)>,
}

struct Point {
    traj: Trajectory,
    z: Vec<f64>,
    defects: Vec<Vec<f64>>,
    cost: f64,
}

fn evaluate<P: ShootingProblem>(p: &P, z: Vec<f64>, layout: &Layout) -> Option<Point> {
    let traj = Trajectory::from_vector(p.initial_state(), &z, layout);
    let mut defects = Vec::with_capacity(layout.horizon);
    for k in 0..layout.horizon {
        let next = p.step(k, &traj.states[k], &traj.inputs[k]).ok()?;
        let d: Vec<f64> = next.iter().zip(&traj.states[k + 1]).map(|(a, b)| a - b).collect();
        defects.push(d);
    }
    let cost = p.residuals(&traj).ok()?.cost();
    let ok = cost.is_finite() && defects.iter().flatten().all(|v| v.is_finite());
    ok.then_some(Point { traj, z, defects, cost })
}

fn l1(defects: &[Vec<f64>]) -> f64 {
    defects.iter().flatten().map(|v| v.abs()).sum()
}

fn linf(defects: &[Vec<f64>]) -> f64 {
    defects.iter().flatten().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn clamp_to_bounds(z: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in z.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn decision_bounds<P: ShootingProblem>(p: &P, layout: &Layout) -> (Vec<f64>, Vec<f64>) {
    let (xl, xh) = p.state_bounds();
    let (ul, uh) = p.input_bounds();
    let mut lo = vec![f64::NEG_INFINITY; layout.len()];
    let mut hi = vec![f64::INFINITY; layout.len()];
    for k in 0..layout.horizon {
        for j in 0..layout.nu {
            lo[layout.u(k, j)] = ul[j];
            hi[layout.u(k, j)] = uh[j];
        }
        for i in 0..layout.nx {
            lo[layout.x(k + 1, i)] = xl[i];
            hi[layout.x(k + 1, i)] = xh[i];
        }
    }
    (lo, hi)
}

struct QpStep {
    delta: Vec<f64>,
    max_multiplier: f64,
    stationarity: f64,
}

fn solve_qp<P: ShootingProblem>(
    p: &P,
    layout: &Layout,
    point: &Point,
    lo: &[f64],
    hi: &[f64],
    settings: &SqpSettings,
) -> Option<(QpStep, Vec<f64>)> {
    let n = layout.len();
    let res = p.residuals(&point.traj).ok()?;

    // Gauss–Newton model of sum r^2: Hessian 2 J'J, gradient 2 J'r
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut grad = vec![0.0; n];
    for (r, row) in res.values.iter().zip(&res.rows) {
        for &(i, gi) in row {
            grad[i] += 2.0 * r * gi;
            for &(j, gj) in row {
                if j >= i {
                    hess[(i, j)] += 2.0 * gi * gj;
                }
            }
        }
    }
    let upper = |reg: f64| {
        let mut colptr = Vec::with_capacity(n + 1);
        let mut rowval = Vec::new();
        let mut nzval = Vec::new();
        colptr.push(0);
        for j in 0..n {
            for i in 0..=j {
                let v = if i == j { hess[(i, j)] + reg } else { hess[(i, j)] };
                if v != 0.0 {
                    rowval.push(i);
                    nzval.push(v);
                }
            }
            colptr.push(rowval.len());
        }
        CscMatrix::new(n, n, colptr, rowval, nzval)
    };

    let (nx, nu) = (layout.nx, layout.nu);
    let (mut ti, mut tj, mut tv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    let mut row = 0;
    for k in 0..layout.horizon {
        let (a, bu) = p.step_jacobian(k, &point.traj.states[k], &point.traj.inputs[k]).ok()?;
        for i in 0..nx {
            if k >= 1 {
                for c in 0..nx {
                    if a[(i, c)] != 0.0 {
                        ti.push(row + i);
                        tj.push(layout.x(k, c));
                        tv.push(-a[(i, c)]);
                    }
                }
            }
            for c in 0..nu {
                if bu[(i, c)] != 0.0 {
                    ti.push(row + i);
                    tj.push(layout.u(k, c));
                    tv.push(-bu[(i, c)]);
                }
            }
            ti.push(row + i);
            tj.push(layout.x(k + 1, i));
            tv.push(1.0);
            b.push(point.defects[k][i]);
        }
        row += nx;
    }
    let n_eq = row;
    for v in 0..n {
        if hi[v].is_finite() {
            ti.push(row);
            tj.push(v);
            tv.push(1.0);
            b.push(hi[v] - point.z[v]);
            row += 1;
        }
        if lo[v].is_finite() {
            ti.push(row);
            tj.push(v);
            tv.push(-1.0);
            b.push(point.z[v] - lo[v]);
            row += 1;
        }
    }
    let amat = CscMatrix::new_from_triplets(row, n, ti, tj, tv);
    let cones: Vec<SupportedConeT<f64>> = vec![ZeroConeT(n_eq), NonnegativeConeT(row - n_eq)];
    let qp_settings = DefaultSettingsBuilder::default().verbose(false).max_iter(100).build().ok()?;
    // Retry with stronger proximal regularization when the interior-point
    // method stalls on a badly conditioned model; infeasibility is final.
    let mut solution = None;
    for reg in [settings.regularization, 1e-4, 1e-2] {
        let pmat = upper(reg);
        let mut solver = DefaultSolver::new(&pmat, &grad, &amat, &b, &cones, qp_settings.clone()).ok()?;
        solver.solve();
        if matches!(solver.solution.status, SolverStatus::Solved | SolverStatus::AlmostSolved) {
            solution = Some((solver.solution, reg));
            break;
        }
        if matches!(solver.solution.status, SolverStatus::PrimalInfeasible | SolverStatus::DualInfeasible) {
            break;
        }
    }
    let (solution, reg) = solution?;
    for i in 0..n {
        hess[(i, i)] += reg;
    }
    let delta = solution.x.clone();
    if !delta.iter().all(|v| v.is_finite()) {
        return None;
    }
    let max_multiplier = solution.z[..n_eq].iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    // stationarity of the current point: -(grad + A'lambda) = H delta
    let mut hd = 0.0_f64;
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let h = if j >= i { hess[(i, j)] } else { hess[(j, i)] };
            s += h * delta[j];
        }
        hd = hd.max(s.abs());
    }
    Some((QpStep { delta, max_multiplier, stationarity: hd }, grad))
}

/// Solves from the guess `guess` (its `x_0` is replaced by the problem's).
pub fn solve<P: ShootingProblem>(p: &P, guess: &Trajectory, settings: &SqpSettings) -> SqpResult {
    let layout = p.layout();
    let (lo, hi) = decision_bounds(p, &layout);
    let mut z0 = guess.to_vector(&layout);
    clamp_to_bounds(&mut z0, &lo, &hi);
    let failed = |traj: Trajectory| SqpResult {
        trajectory: traj,
        status: SolveStatus::Failed,
        iterations: 0,
        kkt: f64::INFINITY,
        objective: f64::NAN,
        merit_trace: Vec::new(),
    };
    let Some(mut point) = evaluate(p, z0, &layout) else {
        return failed(guess.clone());
    };
    let mut mu = 1.0_f64;
    let mut merit_trace = Vec::new();
    let mut status = SolveStatus::Degraded;
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;

    while iterations < settings.max_iterations {
        let Some((step, grad)) = solve_qp(p, &layout, &point, &lo, &hi, settings) else {
            if iterations == 0 {
                return failed(guess.clone());
            }
            break;
        };
        iterations += 1;
        kkt = (step.stationarity / (1.0 + point.cost)).max(linf(&point.defects));
        if kkt < settings.kkt_tolerance {
            status = SolveStatus::Converged;
            break;
        }
        mu = mu.max(1.1 * step.max_multiplier);
        let merit = point.cost + mu * l1(&point.defects);
        let slope: f64 = grad.iter().zip(&step.delta).map(|(g, d)| g * d).sum::<f64>() - mu * l1(&point.defects);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_backtracks {
            let mut z: Vec<f64> = point.z.iter().zip(&step.delta).map(|(a, d)| a + t * d).collect();
            clamp_to_bounds(&mut z, &lo, &hi);
            if let Some(trial) = evaluate(p, z, &layout) {
                let m = trial.cost + mu * l1(&trial.defects);
                if m <= merit + settings.armijo * t * slope.min(0.0) {
                    accepted = Some((trial, m));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((trial, m)) = accepted else {
            break;
        };
        point = trial;
        merit_trace.push((merit, m));
        let step_size = step.delta.iter().fold(0.0_f64, |a, d| a.max((t * d).abs()));
        if step_size < 1e-12 {
            break;
        }
    }
    if !point.traj.is_finite() {
        return failed(guess.clone());
    }
    SqpResult { objective: point.cost, trajectory: point.traj, status, iterations, kkt, merit_trace }
}

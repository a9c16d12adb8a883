//! One control cycle for each controller variant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::OcpConfig;
use super::ocp::{
    applied_input, min_clearance, sx, vehicle_state, Ocp, OcpSolution, SigmaLinearization, StageCost, StateVec, NX,
};
use super::priority::{collision_priority_weights, PrioritySwitch};
use super::sqp::{solve, SolveStatus, Trajectory};
use crate::error::{Error, Result};
use crate::propagation::{diagonal_sensitivities, propagate_horizon, StageDisturbance, StageModel};
use crate::stp::{Features, MismatchModels, Process};
use crate::track::Scenario;
use crate::vehicle::{ControlInput, Measurement, MismatchCorrection, PredictionModel, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "mpcc")]
    Mpcc,
    #[serde(rename = "lmpcc-gp")]
    LmpccGp,
    #[serde(rename = "lmpcc-stp")]
    LmpccStp,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Mpcc, Variant::LmpccGp, Variant::LmpccStp];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Mpcc => "mpcc",
            Variant::LmpccGp => "lmpcc-gp",
            Variant::LmpccStp => "lmpcc-stp",
        }
    }

    /// Regression process the variant learns with, if any.
    pub fn process(self) -> Option<Process> {
        match self {
            Variant::Mpcc => None,
            Variant::LmpccGp => Some(Process::Gaussian),
            Variant::LmpccStp => Some(Process::StudentT),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown variant `{s}` (expected mpcc, lmpcc-gp or lmpcc-stp)")))
    }
}

/// What one cycle did, for logging.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleDiagnostics {
    /// Correction applied at each of the `N` stages.
    pub corrections: Vec<MismatchCorrection>,
    /// Moment-matched variances at each of the `N` stages.
    pub disturbances: Vec<StageDisturbance>,
    /// `(sigma_vy, sigma_r)` at each of the `N` stages, zero from `N_prob` on.
    pub sigmas: Vec<(f64, f64)>,
    pub min_predicted_clearance: f64,
    pub priority_active: bool,
    pub status: Option<SolveStatus>,
    pub iterations: usize,
    pub kkt: f64,
    /// The solver failed and the previous plan was reused.
    pub fallback: bool,
    pub costs: StageCost,
    pub objective: f64,
    /// Largest per-stage uncertainty cost at the returned plan.
    pub max_sigma_stage_cost: f64,
    pub sigma_ceiling: f64,
    /// Accepted-step merit values `(before, after)`.
    pub merit_trace: Vec<(f64, f64)>,
}

/// Closed-loop contouring controller.
#[derive(Debug, Clone)]
pub struct Controller {
    pub variant: Variant,
    pub scenario: Scenario,
    pub model: PredictionModel,
    pub cfg: OcpConfig,
    models: Option<MismatchModels>,
    previous: Option<OcpSolution>,
    previous_corrections: Vec<MismatchCorrection>,
    switch: PrioritySwitch,
    /// Warm-start from the shifted previous plan.
    pub warm_start: bool,
}

impl Controller {
    pub fn new(
        variant: Variant,
        scenario: Scenario,
        model: PredictionModel,
        cfg: OcpConfig,
        models: Option<MismatchModels>,
    ) -> Result<Self> {
        match (variant.process(), &models) {
            (None, _) => {}
            (Some(_), None) => {
                return Err(Error::InvalidInput(format!("variant {variant} needs trained mismatch models")))
            }
            (Some(p), Some(m)) if m.process() != p => {
                return Err(Error::InvalidInput(format!("variant {variant} cannot use {:?} models", m.process())))
            }
            _ => {}
        }
        // fails early on inconsistent settings
        Ocp::new(&scenario, &model, &cfg)?;
        let n = cfg.horizon;
        Ok(Self {
            variant,
            scenario,
            model,
            cfg,
            models: if variant == Variant::Mpcc { None } else { models },
            previous: None,
            previous_corrections: vec![MismatchCorrection::ZERO; n],
            switch: PrioritySwitch::default(),
            warm_start: true,
        })
    }

    pub fn solution(&self) -> Option<&OcpSolution> {
        self.previous.as_ref()
    }

    pub fn reset(&mut self) {
        self.previous = None;
        self.previous_corrections = vec![MismatchCorrection::ZERO; self.cfg.horizon];
        self.switch = PrioritySwitch::default();
    }

    /// Runs one cycle from the measured state. `applied` is the command the
    /// plant received last cycle; `meas` the current sensor readings.
    pub fn control_step(
        &mut self,
        state: &VehicleState,
        applied: &ControlInput,
        meas: &Measurement,
    ) -> Result<(ControlInput, CycleDiagnostics)> {
        if !state.is_finite() {
            return Err(Error::InvalidInput("non-finite state".into()));
        }
        let n = self.cfg.horizon;
        let guess_s = self.previous.as_ref().map_or(0.0, |p| p.trajectory.states[1][sx::S]);
        let s0 = self.scenario.spline.project(state.x, state.y, guess_s);
        let v = state.to_array();
        let x0: StateVec = [v[0], v[1], v[2], v[3], v[4], v[5], s0, applied.delta, applied.fx];

        let mut ocp = Ocp::new(&self.scenario, &self.model, &self.cfg)?;
        ocp.x0 = x0;
        let guess = match (&self.previous, self.warm_start) {
            (Some(prev), true) => ocp.shifted(&prev.trajectory),
            _ => ocp.cold_start(),
        };

        let mut diag = CycleDiagnostics {
            corrections: vec![MismatchCorrection::ZERO; n],
            disturbances: vec![StageDisturbance::ZERO; n],
            sigmas: vec![(0.0, 0.0); n],
            sigma_ceiling: self.cfg.sigma_cost_ceiling(),
            ..Default::default()
        };

        if let Some(models) = &self.models {
            let shifted_corr: Vec<MismatchCorrection> = self.previous_corrections[1..]
                .iter()
                .copied()
                .chain(std::iter::once(self.previous_corrections[n - 1]))
                .collect();
            let learned = learn_horizon(&self.model, models, &self.cfg, &guess, meas, &shifted_corr)?;
            diag.corrections.clone_from(&learned.corrections);
            diag.disturbances.clone_from(&learned.disturbances);
            for (k, s) in learned.sigma.base.iter().enumerate() {
                diag.sigmas[k] = *s;
            }
            ocp.corrections = learned.corrections;
            ocp.sigma = Some(learned.sigma);
        }

        let clearance = min_clearance(&self.scenario, &guess, ocp.half_width());
        diag.min_predicted_clearance = clearance;
        if self.scenario.collision_prioritization {
            ocp.weights =
                collision_priority_weights(&self.cfg.weights, &self.cfg.priority, &mut self.switch, clearance);
            diag.priority_active = self.switch.is_active();
        }

        let res = solve(&ocp, &guess, &self.cfg.solver);
        diag.status = Some(res.status);
        diag.iterations = res.iterations;
        diag.kkt = res.kkt;
        diag.merit_trace = res.merit_trace;

        let (trajectory, command) = if res.status == SolveStatus::Failed {
            diag.fallback = true;
            let command = match &self.previous {
                Some(prev) => prev.next_command(),
                None => *applied,
            };
            (guess, command)
        } else {
            let c = applied_input(&res.trajectory.states[1]);
            (res.trajectory, c)
        };
        let stage_costs = ocp.stage_costs(&trajectory)?;
        diag.costs = StageCost::sum(&stage_costs);
        diag.objective = diag.costs.total();
        diag.max_sigma_stage_cost = stage_costs.iter().map(StageCost::sigma).fold(0.0, f64::max);
        self.previous_corrections.clone_from(&ocp.corrections);
        self.previous = Some(OcpSolution {
            trajectory,
            stage_costs,
            objective: diag.objective,
            status: res.status,
            iterations: res.iterations,
            kkt: res.kkt,
            merit_trace: diag.merit_trace.clone(),
        });
        Ok((command, diag))
    }
}

/// Regression feature vector of a predicted state.
pub fn features(x: &[f64], fy_f: f64, fy_r: f64, r: f64) -> Features {
    [x[sx::VX], x[sx::DELTA], x[sx::FX], r, fy_f, fy_r]
}

struct LearnedHorizon {
    corrections: Vec<MismatchCorrection>,
    disturbances: Vec<StageDisturbance>,
    sigma: SigmaLinearization,
}

/// Queries the regressors along `guess` and propagates the lateral
/// covariance. Stage 0 uses the measurements; later stages use the nominal
/// tyre forces plus the previous cycle's correction for that stage.
fn learn_horizon(
    model: &PredictionModel,
    models: &MismatchModels,
    cfg: &OcpConfig,
    guess: &Trajectory,
    meas: &Measurement,
    prior: &[MismatchCorrection],
) -> Result<LearnedHorizon> {
    let n = cfg.horizon;
    let np = cfg.prob_horizon;
    let mut corrections = Vec::with_capacity(n);
    let mut disturbances = Vec::with_capacity(n);
    let mut stages = Vec::with_capacity(n);
    // d variance / d state, per stage and channel
    let mut var_grads: Vec<[StateVec; 3]> = Vec::with_capacity(n);
    for k in 0..n {
        let x = &guess.states[k];
        let vs = vehicle_state(x);
        let u = applied_input(x);
        let z = if k == 0 {
            features(x, meas.fy_f, meas.fy_r, meas.r)
        } else {
            let f = model.axle_forces(&vs, &u)?;
            features(x, f.fy_f + prior[k].dfy_f, f.fy_r + prior[k].dfy_r, x[sx::R])
        };
        let mut mean = [0.0; 3];
        let mut var = [0.0; 3];
        let mut grads = [[0.0; NX]; 3];
        let (pf, pr) = if k == 0 { ([0.0; 4], [0.0; 4]) } else { model.axle_force_partials(&vs, &u)? };
        for (c, m) in [&models.dfy_f, &models.dfy_r, &models.dr].into_iter().enumerate() {
            let (mu, v, _, dv) = m.predict_with_gradient(&z);
            mean[c] = mu;
            var[c] = v.max(0.0);
            if k > 0 {
                let g = &mut grads[c];
                g[sx::VX] += dv[0];
                g[sx::DELTA] += dv[1];
                g[sx::FX] += dv[2];
                g[sx::R] += dv[3];
                for (i, col) in [sx::VX, sx::VY, sx::R, sx::DELTA].into_iter().enumerate() {
                    g[col] += dv[4] * pf[i] + dv[5] * pr[i];
                }
            }
        }
        let corr = MismatchCorrection { dfy_f: mean[0], dfy_r: mean[1], dr: mean[2] };
        let dist = StageDisturbance { var_fyf: var[0], var_fyr: var[1], var_r: var[2] };
        stages.push(StageModel { jacobians: model.lateral_jacobians(&vs, &u, &corr)?, disturbance: dist });
        corrections.push(corr);
        disturbances.push(dist);
        var_grads.push(grads);
    }

    let cov = propagate_horizon(&stages, np, cfg.dt)?;
    let sens = diagonal_sensitivities(&stages, np, cfg.dt);
    let w = &cfg.weights;
    let ceiling = cfg.sigma_cost_ceiling();
    let mut base = Vec::with_capacity(np);
    let mut grad_vy = Vec::with_capacity(np);
    let mut grad_r = Vec::with_capacity(np);
    let mut caps = Vec::with_capacity(np);
    for k in 0..np {
        let (mut svy, mut sr) = cov.covariances[k].sigmas();
        let mut gvy = vec![[0.0; NX]; k];
        let mut gr = vec![[0.0; NX]; k];
        for j in 1..k {
            for c in 0..3 {
                let [dvy, dr] = sens[k][j][c];
                for i in 0..NX {
                    let g = var_grads[j][c][i];
                    if svy > 1e-12 {
                        gvy[j][i] += 0.5 * dvy * g / svy;
                    }
                    if sr > 1e-12 {
                        gr[j][i] += 0.5 * dr * g / sr;
                    }
                }
            }
        }
        let cost = w.sigma_vy * svy * svy + w.sigma_r * sr * sr;
        if cost > ceiling {
            let f = (ceiling / cost).sqrt();
            svy *= f;
            sr *= f;
            for g in gvy.iter_mut().chain(gr.iter_mut()) {
                g.iter_mut().for_each(|v| *v *= f);
            }
        }
        let total = w.sigma_vy * svy * svy + w.sigma_r * sr * sr;
        let share = if total > 0.0 { w.sigma_vy * svy * svy / total } else { 0.5 };
        let cap = |q: f64, part: f64| {
            if q > 0.0 {
                (ceiling * part / q).sqrt()
            } else {
                f64::INFINITY
            }
        };
        caps.push((cap(w.sigma_vy, share), cap(w.sigma_r, 1.0 - share)));
        base.push((svy, sr));
        grad_vy.push(gvy);
        grad_r.push(gr);
    }
    let reference = guess.states[..np].iter().map(|x| std::array::from_fn(|i| x[i])).collect();
    Ok(LearnedHorizon {
        corrections,
        disturbances,
        sigma: SigmaLinearization { reference, base, grad_vy, grad_r, caps },
    })
}

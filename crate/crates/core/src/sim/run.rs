//! Closed-loop simulation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::RunConfig;
use super::log::{Outcome, RunLog, RunMeta, Tick};
use crate::error::{Error, Result};
use crate::mpcc::{Controller, CycleDiagnostics};
use crate::stp::MismatchModels;
use crate::track::{contouring_lag_errors, Scenario};
use crate::vehicle::{ControlInput, Measurement, MismatchCorrection, VehicleState};

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// Runs the configured scenario, loading models from `cfg.models` when the
/// variant needs them.
pub fn run_closed_loop(cfg: &RunConfig) -> Result<RunLog> {
    let scenario = cfg.scenario.build()?;
    let models = match (cfg.variant.process(), &cfg.models) {
        (None, _) => None,
        (Some(_), Some(paths)) => Some(paths.load()?),
        (Some(_), None) => {
            return Err(Error::InvalidInput(format!("variant {} needs a [models] section", cfg.variant)));
        }
    };
    simulate(cfg, &scenario, models.as_ref())
}

struct Noise {
    rng: ChaCha8Rng,
    force: Option<Normal<f64>>,
    yaw: Option<Normal<f64>>,
}

impl Noise {
    fn new(cfg: &RunConfig) -> Result<Self> {
        let make = |std: f64| -> Result<Option<Normal<f64>>> {
            if cfg.noise.enabled && std > 0.0 {
                Normal::new(0.0, std).map(Some).map_err(|e| Error::param("noise", e.to_string()))
            } else {
                Ok(None)
            }
        };
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            force: make(cfg.noise.force_std)?,
            yaw: make(cfg.noise.yaw_rate_std)?,
        })
    }

    fn apply(&mut self, m: Measurement) -> Measurement {
        let mut draw = |d: &Option<Normal<f64>>| d.map_or(0.0, |d| d.sample(&mut self.rng));
        Measurement { fy_f: m.fy_f + draw(&self.force), fy_r: m.fy_r + draw(&self.force), r: m.r + draw(&self.yaw) }
    }
}

fn diverged(s: &VehicleState) -> bool {
    s.to_array().iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
}

/// Failure state of a plant position, if any.
pub fn check_position(scenario: &Scenario, x: f64, y: f64, s: f64, half_width: f64) -> Option<Outcome> {
    if scenario.obstacles.iter().any(|o| o.clearance(x, y, half_width) < 0.0) {
        return Some(Outcome::Collision);
    }
    let (e_con, _) = contouring_lag_errors(x, y, s, &scenario.spline);
    let (left, right) = scenario.edges.at(s);
    if e_con > left - half_width || e_con < right + half_width {
        return Some(Outcome::OffRoad);
    }
    None
}

/// Smallest clearance of `(x, y)` to any obstacle grown by `half_width`.
pub fn obstacle_clearance(scenario: &Scenario, x: f64, y: f64, half_width: f64) -> f64 {
    scenario.obstacles.iter().map(|o| o.clearance(x, y, half_width)).fold(f64::INFINITY, f64::min)
}

/// Runs `scenario` until it is completed, fails, or times out.
pub fn simulate(cfg: &RunConfig, scenario: &Scenario, models: Option<&MismatchModels>) -> Result<RunLog> {
    cfg.validate()?;
    let model = cfg.prediction_model();
    let plant = cfg.plant();
    let dt = cfg.controller.dt;
    let hw = 0.5 * cfg.vehicle.width;
    let mut controller =
        Controller::new(cfg.variant, scenario.clone(), model, cfg.controller.clone(), models.cloned())?;
    let mut noise = Noise::new(cfg)?;

    let p0 = scenario.spline.evaluate(0.0);
    let v0 = scenario.v_ref;
    let start = VehicleState { x: p0.x, y: p0.y, psi: p0.heading, vx: v0, vy: 0.0, r: 0.0 };
    let mut applied = ControlInput { delta: 0.0, fx: cfg.vehicle.drag_coeff * v0 * v0 };
    let mut plant_state = plant.settle(start, &applied)?;
    let mut meas = noise.apply(plant.measure(&plant_state, &applied)?);
    let mut previous: Option<(VehicleState, ControlInput)> = None;
    let mut s_guess = 0.0;
    let mut ticks = Vec::new();
    let max_ticks = (cfg.timeout / dt).ceil() as usize;
    let mut outcome = Outcome::Timeout;

    for k in 0..max_ticks {
        let truth = plant_state.vehicle;
        let observed = VehicleState { r: meas.r, ..truth };
        let s = scenario.spline.project(truth.x, truth.y, s_guess);
        s_guess = s;
        let nominal = model.axle_forces(&observed, &applied)?;
        let nom_r = match &previous {
            Some((state, from)) => model.rk4_step_ramp(state, from, &applied, &MismatchCorrection::ZERO, dt)?.r,
            None => meas.r,
        };

        let (command, diag) = match controller.control_step(&observed, &applied, &meas) {
            Ok(v) => v,
            Err(Error::Singularity { .. }) => {
                outcome = Outcome::Divergence;
                break;
            }
            Err(e) => return Err(e),
        };

        let mut tick = Tick {
            time: k as f64 * dt,
            x: truth.x,
            y: truth.y,
            psi: truth.psi,
            vx: truth.vx,
            vy: truth.vy,
            r: truth.r,
            s,
            e_con: contouring_lag_errors(truth.x, truth.y, s, &scenario.spline).0,
            delta: applied.delta,
            fx: applied.fx,
            delta_actual: plant_state.delta,
            meas_fy_f: meas.fy_f,
            meas_fy_r: meas.fy_r,
            meas_r: meas.r,
            nom_fy_f: nominal.fy_f,
            nom_fy_r: nominal.fy_r,
            nom_r,
            clearance: obstacle_clearance(scenario, truth.x, truth.y, hw),
            ..Default::default()
        };
        fill_diagnostics(&mut tick, &diag);

        let step = plant.step_ramp(&plant_state, &applied, &command, dt);
        let Ok((next, clean)) = step else {
            ticks.push(tick);
            outcome = Outcome::Divergence;
            break;
        };
        tick.ax = (next.vehicle.vx - truth.vx) / dt - truth.r * truth.vy;
        tick.ay = (next.vehicle.vy - truth.vy) / dt + truth.r * truth.vx;
        ticks.push(tick);

        previous = Some((observed, applied));
        applied = command;
        plant_state = next;
        if diverged(&plant_state.vehicle) {
            outcome = Outcome::Divergence;
            break;
        }
        meas = noise.apply(clean);
        let v = plant_state.vehicle;
        let s_next = scenario.spline.project(v.x, v.y, s_guess);
        if let Some(fail) = check_position(scenario, v.x, v.y, s_next, hw) {
            outcome = fail;
            break;
        }
        if s_next >= scenario.finish_s {
            outcome = Outcome::Completed;
            break;
        }
    }

    Ok(RunLog {
        meta: RunMeta { scenario: scenario.name.clone(), variant: cfg.variant, seed: cfg.seed, dt, outcome },
        ticks,
    })
}

fn fill_diagnostics(tick: &mut Tick, d: &CycleDiagnostics) {
    let c0 = d.corrections.first().copied().unwrap_or_default();
    tick.corr_fy_f = c0.dfy_f;
    tick.corr_fy_r = c0.dfy_r;
    tick.corr_r = c0.dr;
    if let Some(v) = d.disturbances.first() {
        tick.var_fy_f = v.var_fyf;
        tick.var_fy_r = v.var_fyr;
        tick.var_r = v.var_r;
    }
    tick.set_sigmas(&d.sigmas);
    let c = &d.costs;
    tick.cost_obs = c.obs;
    tick.cost_edg = c.edg;
    tick.cost_d_delta = c.d_delta;
    tick.cost_d_fx = c.d_fx;
    tick.cost_con = c.con;
    tick.cost_lag = c.lag;
    tick.cost_vel = c.vel;
    tick.cost_sigma = c.sigma();
    tick.objective = d.objective;
    tick.max_sigma_stage_cost = d.max_sigma_stage_cost;
    tick.sigma_ceiling = d.sigma_ceiling;
    tick.predicted_clearance = d.min_predicted_clearance;
    tick.priority = u8::from(d.priority_active);
    tick.status = d.status.map_or("none", |s| s.as_str()).to_string();
    tick.iterations = d.iterations;
    tick.kkt = d.kkt;
    tick.fallback = u8::from(d.fallback);
}

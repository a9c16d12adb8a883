//! Propagates the lateral-velocity / yaw-rate covariance along a constant
//! cornering state for the probabilistic horizon.

use lmpcc::mpcc::OcpConfig;
use lmpcc::propagation::{propagate_horizon, StageDisturbance, StageModel};
use lmpcc::vehicle::{ControlInput, MismatchCorrection, PredictionModel, VehicleState};

fn main() -> lmpcc::Result<()> {
    let model = PredictionModel::default();
    let cfg = OcpConfig::default();
    let state = VehicleState { vx: 18.0, vy: 0.3, r: 0.3, ..Default::default() };
    let input = ControlInput { delta: 0.04, fx: 400.0 };
    let jacobians = model.lateral_jacobians(&state, &input, &MismatchCorrection::ZERO)?;
    let disturbance =
        StageDisturbance { var_fyf: 150.0_f64.powi(2), var_fyr: 100.0_f64.powi(2), var_r: 0.005_f64.powi(2) };
    let stages = vec![StageModel { jacobians, disturbance }; cfg.horizon];

    let horizon = propagate_horizon(&stages, cfg.prob_horizon, cfg.dt)?;
    println!("stage,sigma_vy,sigma_r,q_sigma_cost");
    for (k, (s_vy, s_r)) in horizon.sigmas().into_iter().enumerate() {
        let cost = cfg.weights.sigma_vy * s_vy * s_vy + cfg.weights.sigma_r * s_r * s_r;
        println!("{k},{s_vy:.5},{s_r:.5},{cost:.4}");
    }
    println!("ceiling {:.0}, floored steps {}", cfg.sigma_cost_ceiling(), horizon.floored);
    Ok(())
}

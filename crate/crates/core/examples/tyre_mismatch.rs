//! Steady-state axle forces of the Fiala prediction model against the
//! Pacejka surrogate plant over a steering sweep.

use lmpcc::sim::RunConfig;
use lmpcc::vehicle::{ControlInput, MismatchCorrection, VehicleState};

fn main() -> lmpcc::Result<()> {
    let cfg = RunConfig::default();
    let model = cfg.prediction_model();
    let plant = cfg.plant();
    let state = VehicleState { vx: 20.0, vy: -0.3, r: 0.25, ..Default::default() };

    println!("delta,fiala_fy_f,plant_fy_f,fiala_fy_r,plant_fy_r");
    for i in 0..=12 {
        let input = ControlInput { delta: 0.01 * i as f64, fx: 0.0 };
        let nominal = model.axle_forces(&state, &input)?;
        let measured = plant.measure(&plant.settle(state, &input)?, &input)?;
        println!(
            "{:.2},{:.1},{:.1},{:.1},{:.1}",
            input.delta, nominal.fy_f, measured.fy_f, nominal.fy_r, measured.fy_r
        );
    }

    // One control interval of the prediction model against the plant.
    let input = ControlInput { delta: 0.06, fx: 500.0 };
    let predicted = model.rk4_step(&state, &input, &MismatchCorrection::ZERO, cfg.controller.dt)?;
    let (next, _) = plant.step(&plant.settle(state, &input)?, &input, cfg.controller.dt)?;
    println!("\nafter {} s: model r = {:.4}, plant r = {:.4}", cfg.controller.dt, predicted.r, next.vehicle.r);
    Ok(())
}

//! Control cycles of the baseline controller entering the first swerve of
//! the double lane change, with the prediction model as the plant.

use lmpcc::mpcc::{Controller, Variant};
use lmpcc::sim::RunConfig;
use lmpcc::vehicle::{ControlInput, Measurement, MismatchCorrection, VehicleState};

fn main() -> lmpcc::Result<()> {
    let cfg = RunConfig::default();
    let scenario = cfg.scenario.build()?;
    let model = cfg.prediction_model();
    let mut controller = Controller::new(Variant::Mpcc, scenario.clone(), model, cfg.controller.clone(), None)?;

    let p0 = scenario.spline.evaluate(55.0);
    let mut state = VehicleState { x: p0.x, y: p0.y, psi: p0.heading, vx: scenario.v_ref, ..Default::default() };
    let mut applied = ControlInput { delta: 0.0, fx: cfg.vehicle.drag_coeff * state.vx * state.vx };
    for k in 0..20 {
        let forces = model.axle_forces(&state, &applied)?;
        let meas = Measurement { fy_f: forces.fy_f, fy_r: forces.fy_r, r: state.r };
        let (command, diag) = controller.control_step(&state, &applied, &meas)?;
        println!(
            "cycle {k}: {:?} after {} iterations, kkt {:.1e}, objective {:.3}, delta {:+.4}, fx {:+.0}",
            diag.status, diag.iterations, diag.kkt, diag.objective, command.delta, command.fx
        );
        state = model.rk4_step_ramp(&state, &applied, &command, &MismatchCorrection::ZERO, cfg.controller.dt)?;
        applied = command;
    }
    Ok(())
}

mod common;

use common::numerics::{jacobian_fd_worst, random_point, rk4_orders};
use lmpcc::vehicle::tyre::fiala_sliding_angle;
use lmpcc::vehicle::{
    fiala_lateral_force, ControlInput, MagicFormula, MismatchCorrection, PacejkaParams, Plant, PlantTyres,
    PredictionModel, VehicleState,
};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn derivatives_match_high_precision_oracle() {
    let m = PredictionModel::default();
    let s = VehicleState { x: 3.0, y: -1.0, psi: 0.4, vx: 16.0, vy: 0.8, r: 0.35 };
    let u = ControlInput { delta: 0.06, fx: 1500.0 };
    let corr = MismatchCorrection { dfy_f: -300.0, dfy_r: 150.0, dr: 0.01 };
    let d = m.derivatives(&s, &u, &corr).unwrap().to_array();
    // 40-digit evaluation of the single-track equations with Fiala tyres
    let oracle = [
        14.425_441_230_199_240_931,
        6.967_542_272_140_715_932_9,
        0.35,
        1.272_594_951_100_865_328_9,
        -7.281_847_801_528_781_778_2,
        0.045_031_594_945_411_403_66,
    ];
    for (a, b) in d.iter().zip(oracle) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn jacobians_match_finite_differences_on_random_points() {
    let worst = jacobian_fd_worst(11, 1000);
    assert!(worst <= 1e-5, "worst relative gap {worst}");
}

#[test]
fn lateral_jacobian_is_the_full_jacobian_block() {
    let m = PredictionModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let (s, u, c) = random_point(&mut rng);
        let full = m.state_jacobian(&s, &u, &c).unwrap();
        let lat = m.lateral_jacobians(&s, &u, &c).unwrap();
        for (i, row) in [4, 5].into_iter().enumerate() {
            for (j, col) in [4, 5].into_iter().enumerate() {
                assert_eq!(lat.a[(i, j)], full.state[(row, col)]);
            }
        }
    }
}

#[test]
fn rk4_convergence_order() {
    let orders = rk4_orders();
    assert!(orders.iter().all(|&p| p >= 3.9), "observed orders {orders:?}");
}

#[test]
fn plant_matches_model_in_linear_regime() {
    let model = PredictionModel::default();
    let f = model.fiala;
    let pacejka = PacejkaParams {
        front: MagicFormula::with_slope(f.c_alpha_f, 1.3, f.fz_f, 0.0),
        rear: MagicFormula::with_slope(f.c_alpha_r, 1.3, f.fz_r, 0.0),
        relax_length: 0.0,
        steer_tau: 0.0,
    };
    let plant = Plant { vehicle: model.vehicle, tyres: PlantTyres::Pacejka(pacejka), substeps: 1, v_eps: model.v_eps };
    let vx = 15.0;
    let u = ControlInput { delta: 1e-4, fx: model.vehicle.drag_coeff * vx * vx };
    let mut x = VehicleState { vx, ..Default::default() };
    let mut p = plant.settle(x, &u).unwrap();
    for _ in 0..10 {
        x = model.rk4_step(&x, &u, &MismatchCorrection::ZERO, 0.05).unwrap();
        p = plant.step(&p, &u, 0.05).unwrap().0;
        let (alpha_f, alpha_r) = model.slip_angles(&x, &u).unwrap();
        assert!(alpha_f.abs() < 0.01 && alpha_r.abs() < 0.01);
        for (a, b) in x.to_array().iter().zip(p.vehicle.to_array()) {
            assert!((a - b).abs() < 1e-6, "model {a} vs plant {b}");
        }
    }
}

#[test]
fn plant_kinetic_energy_decays_without_drive() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lagless = PacejkaParams { relax_length: 0.0, ..Default::default() };
    for tyres in [PlantTyres::Pacejka(lagless), PlantTyres::Fiala(Default::default())] {
        let plant = Plant { tyres, ..Default::default() };
        let vp = plant.vehicle;
        let energy = |s: &VehicleState| 0.5 * vp.mass * (s.vx * s.vx + s.vy * s.vy) + 0.5 * vp.yaw_inertia * s.r * s.r;
        for _ in 0..20 {
            let s0 = VehicleState { vx: rng.random_range(10.0..30.0), ..Default::default() };
            let mut s = plant.settle(s0, &ControlInput::default()).unwrap();
            for _ in 0..60 {
                let cmd = ControlInput { delta: rng.random_range(-0.1..0.1), fx: 0.0 };
                let before = energy(&s.vehicle);
                s = plant.step(&s, &cmd, 0.05).unwrap().0;
                assert!(energy(&s.vehicle) <= before * (1.0 + 1e-12));
            }
        }
    }
}

proptest! {
    #[test]
    fn fiala_is_odd_bounded_and_monotone(
        alpha in 0.0f64..1.5,
        c in 1e4f64..2e5,
        fz in 1e3f64..1e4,
        mu in 0.3f64..1.2,
        frac in 0.0f64..1.0,
    ) {
        let f = fiala_lateral_force(alpha, c, fz, mu);
        prop_assert!(f.abs() <= mu * fz * (1.0 + 1e-15));
        prop_assert_eq!(fiala_lateral_force(-alpha, c, fz, mu), -f);
        // non-increasing on [0, alpha_sl]
        let sl = fiala_sliding_angle(c, fz, mu);
        let a = frac * sl;
        let b = a + 1e-3 * sl;
        prop_assert!(fiala_lateral_force(b.min(sl), c, fz, mu) <= fiala_lateral_force(a, c, fz, mu));
        if alpha >= sl {
            prop_assert_eq!(f, -mu * fz);
        }
    }

    #[test]
    fn fiala_is_continuous_at_sliding(c in 1e4f64..2e5, fz in 1e3f64..1e4, mu in 0.3f64..1.2) {
        let sl = fiala_sliding_angle(c, fz, mu);
        let below = fiala_lateral_force(sl * (1.0 - 1e-9), c, fz, mu);
        prop_assert!((below + mu * fz).abs() <= 1e-6 * mu * fz);
    }
}

use lmpcc::propagation::{injection_vectors, propagate_step, LateralCovariance, StageDisturbance};
use lmpcc::vehicle::tyre::fiala_sliding_angle;
use lmpcc::vehicle::{ControlInput, LateralJacobians, MismatchCorrection, PredictionModel, VehicleState};
use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const DT: f64 = 0.05;

pub fn random_jacobians(rng: &mut ChaCha8Rng) -> LateralJacobians {
    let m = PredictionModel::default();
    let s = VehicleState {
        vx: rng.random_range(8.0..30.0),
        vy: rng.random_range(-1.0..1.0),
        r: rng.random_range(-0.5..0.5),
        ..Default::default()
    };
    let u = ControlInput { delta: rng.random_range(-0.1..0.1), fx: 0.0 };
    m.lateral_jacobians(&s, &u, &MismatchCorrection::ZERO).unwrap()
}

pub fn random_cov(rng: &mut ChaCha8Rng) -> LateralCovariance {
    let l = Matrix2::new(rng.random_range(-0.3..0.3), 0.0, rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
    LateralCovariance::from_matrix(&(l * l.transpose()))
}

pub fn random_dist(rng: &mut ChaCha8Rng) -> StageDisturbance {
    StageDisturbance {
        var_fyf: rng.random_range(0.0..400.0_f64).powi(2),
        var_fyr: rng.random_range(0.0..400.0_f64).powi(2),
        var_r: rng.random_range(0.0..0.02_f64).powi(2),
    }
}

/// Largest `|monte carlo - propagated| / standard error` over all cases and
/// covariance entries.
pub fn monte_carlo_worst_ratio(seed: u64, cases: usize, samples: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let jac = random_jacobians(&mut rng);
        let cov = random_cov(&mut rng);
        let dist = random_dist(&mut rng);
        let (pred, _) = propagate_step(&cov, &jac, &dist, DT).unwrap();

        let ad = Matrix2::identity() + jac.a * DT;
        let chol = cov.to_matrix().cholesky().map(|c| c.l()).unwrap_or_else(|| {
            // rank-deficient start: use the symmetric square root
            let e = cov.to_matrix().symmetric_eigen();
            e.eigenvectors * Matrix2::from_diagonal(&e.eigenvalues.map(|v| v.max(0.0).sqrt()))
        });
        let [u_f, u_r, g] = injection_vectors(&jac, DT);
        let sd = [dist.var_fyf.sqrt(), dist.var_fyr.sqrt(), dist.var_r.sqrt()];
        let mut acc = Matrix2::zeros();
        for _ in 0..samples {
            let mut n = || -> f64 { StandardNormal.sample(&mut rng) };
            let x = chol * Vector2::new(n(), n());
            let w = u_f * (sd[0] * n()) + u_r * (sd[1] * n()) + g * (sd[2] * n());
            let y = ad * x + w;
            acc += y * y.transpose();
        }
        let est = acc / samples as f64;
        let p = pred.to_matrix();
        for (i, j) in [(0, 0), (1, 1), (0, 1)] {
            let se = ((p[(i, i)] * p[(j, j)] + p[(i, j)].powi(2)) / samples as f64).sqrt();
            worst = worst.max((est[(i, j)] - p[(i, j)]).abs() / se);
        }
    }
    worst
}

fn vec4(m: &Matrix2<f64>) -> Vector4<f64> {
    Vector4::new(m[(0, 0)], m[(1, 0)], m[(0, 1)], m[(1, 1)])
}

/// Largest relative deviation of 25 iterated steps from the closed form
/// `vec(S_k) = M^k vec(S_0) + (I - M)^-1 (I - M^k) vec(Q)`, `M = A_d (x) A_d`.
pub fn lyapunov_worst_rel(seed: u64, cases: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..cases {
        let jac = random_jacobians(&mut rng);
        let dist = random_dist(&mut rng);
        let start = random_cov(&mut rng);
        let steps = 25;

        let mut cov = start;
        for _ in 0..steps {
            cov = propagate_step(&cov, &jac, &dist, DT).unwrap().0;
        }

        let ad = Matrix2::identity() + jac.a * DT;
        let m: Matrix4<f64> = ad.kronecker(&ad);
        let [u_f, u_r, g] = injection_vectors(&jac, DT);
        let q = u_f * u_f.transpose() * dist.var_fyf
            + u_r * u_r.transpose() * dist.var_fyr
            + g * g.transpose() * dist.var_r;
        let mk = m.pow(steps as u32);
        let inv = (Matrix4::identity() - m).try_inverse().unwrap();
        let closed = mk * vec4(&start.to_matrix()) + inv * (Matrix4::identity() - mk) * vec4(&q);
        let got = vec4(&cov.to_matrix());
        worst = worst.max((got - closed).amax() / closed.amax());
    }
    worst
}

pub fn random_point(rng: &mut ChaCha8Rng) -> (VehicleState, ControlInput, MismatchCorrection) {
    let s = VehicleState {
        x: rng.random_range(-100.0..100.0),
        y: rng.random_range(-10.0..10.0),
        psi: rng.random_range(-3.0..3.0),
        vx: rng.random_range(5.0..40.0),
        vy: rng.random_range(-2.0..2.0),
        r: rng.random_range(-1.0..1.0),
    };
    let u = ControlInput { delta: rng.random_range(-0.3..0.3), fx: rng.random_range(-10_000.0..5_000.0) };
    let c = MismatchCorrection {
        dfy_f: rng.random_range(-1000.0..1000.0),
        dfy_r: rng.random_range(-1000.0..1000.0),
        dr: rng.random_range(-0.05..0.05),
    };
    (s, u, c)
}

/// Largest relative gap between the analytic state/input Jacobian and
/// central differences on `points` random points.
pub fn jacobian_fd_worst(seed: u64, points: usize) -> f64 {
    let m = PredictionModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut checked = 0;
    while checked < points {
        let (s, u, c) = random_point(&mut rng);
        let alphas = m.slip_angles(&s, &u).unwrap();
        let f_sl = fiala_sliding_angle(m.fiala.c_alpha_f, m.fiala.fz_f, m.vehicle.mu);
        let r_sl = fiala_sliding_angle(m.fiala.c_alpha_r, m.fiala.fz_r, m.vehicle.mu);
        // the Fiala curvature jumps at the sliding angle; keep the stencil on one side
        if (alphas.0.abs() - f_sl).abs() < 1e-3 || (alphas.1.abs() - r_sl).abs() < 1e-3 {
            continue;
        }
        let j = m.state_jacobian(&s, &u, &c).unwrap();
        let f = |x: [f64; 8]| {
            let st = VehicleState::from_array([x[0], x[1], x[2], x[3], x[4], x[5]]);
            m.derivatives(&st, &ControlInput { delta: x[6], fx: x[7] }, &c).unwrap().to_array()
        };
        let base = [s.x, s.y, s.psi, s.vx, s.vy, s.r, u.delta, u.fx];
        for col in 0..8 {
            let h = 1e-6 * base[col].abs().max(1.0);
            let (mut p, mut q) = (base, base);
            p[col] += h;
            q[col] -= h;
            let (fp, fq) = (f(p), f(q));
            for row in 0..6 {
                let fd = (fp[row] - fq[row]) / (2.0 * h);
                let an = if col < 6 { j.state[(row, col)] } else { j.input[(row, col - 6)] };
                let scale = an.abs().max(fd.abs()).max(1e-6);
                worst = worst.max((an - fd).abs() / scale);
            }
        }
        checked += 1;
    }
    worst
}

/// Error of `steps` RK4 steps against a much finer RK4 reference.
fn rk4_error(m: &PredictionModel, s: &VehicleState, u: &ControlInput, horizon: f64, steps: usize) -> f64 {
    let c = MismatchCorrection::ZERO;
    let run = |n: usize| {
        let mut x = *s;
        for _ in 0..n {
            x = m.rk4_step(&x, u, &c, horizon / n as f64).unwrap();
        }
        x.to_array()
    };
    let coarse = run(steps);
    let fine = run(steps * 64);
    coarse.iter().zip(fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Observed RK4 orders from 4, 8 and 16 steps over one second of steady
/// cornering. The start is settled away from zero slip, where the Fiala
/// curve is only C1.
pub fn rk4_orders() -> Vec<f64> {
    let m = PredictionModel::default();
    let u = ControlInput { delta: 0.03, fx: 800.0 };
    let mut s = VehicleState { vx: 15.0, ..Default::default() };
    for _ in 0..400 {
        s = m.rk4_step(&s, &u, &MismatchCorrection::ZERO, 0.01).unwrap();
    }
    let (af, ar) = m.slip_angles(&s, &u).unwrap();
    assert!(af.abs() > 1e-3 && ar.abs() > 1e-3);
    let errors: Vec<f64> = [4, 8, 16].iter().map(|&n| rk4_error(&m, &s, &u, 1.0, n)).collect();
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

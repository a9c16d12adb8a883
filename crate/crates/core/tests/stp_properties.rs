mod common;

use common::{dense_oracle, random_problem};

use lmpcc::stp::{
    farthest_point_indices, fit_process, gram, kernel_matrix, Features, FitOptions, KernelHyper, Process, StpModel,
    FEATURE_DIM,
};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

#[test]
fn kernel_matrix_is_psd() {
    let (z, _, h) = random_problem(3, 50, 6);
    let eig = SymmetricEigen::new(kernel_matrix(&z, &h)).eigenvalues;
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-10 * eig.amax(), "min eigenvalue {min}");
    gram(&z, &h).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cholesky_posterior_matches_dense_inverse(seed in 0u64..10_000, n in 2usize..100, nu in 2.5f64..50.0) {
        let (z, y, h) = random_problem(seed, n, 3);
        let m = StpModel::new(z.clone(), y.clone(), h.clone(), nu).unwrap();
        let zs = [0.3, -0.7, 1.1];
        let (mean, var) = dense_oracle(&z, &y, &h, nu, &zs);
        let p = m.stp_posterior(&zs);
        prop_assert!((p.mean - mean).abs() < 1e-10 * (1.0 + mean.abs()));
        prop_assert!((p.variance - var).abs() < 1e-10 * (1.0 + var.abs()));
        prop_assert_eq!(p.mean, m.gp_posterior(&zs).mean);
        prop_assert_eq!(p.dof, nu + n as f64);
    }

    #[test]
    fn scaling_targets_raises_only_stp_variance(seed in 0u64..10_000, c in 1.5f64..5.0) {
        let (z, y, h) = random_problem(seed, 30, 2);
        let a = StpModel::new(z.clone(), y.clone(), h.clone(), 4.0).unwrap();
        let b = StpModel::new(z, y * c, h, 4.0).unwrap();
        for q in [[0.0, 0.0], [1.0, -1.0], [3.0, 3.0]] {
            prop_assert!(b.stp_posterior(&q).variance > a.stp_posterior(&q).variance);
            prop_assert_eq!(b.gp_posterior(&q).variance, a.gp_posterior(&q).variance);
        }
    }
}

#[test]
fn predictive_variance_is_nonnegative() {
    let (z, y, h) = random_problem(11, 40, 2);
    let m = StpModel::new(z, y, h, 3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let q = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
        assert!(m.stp_posterior(&q).variance >= 0.0);
        assert!(m.gp_posterior(&q).variance >= 0.0);
    }
}

#[test]
fn expected_beta_leaves_gp_variance() {
    let (z, y, h) = random_problem(2, 20, 2);
    let probe = StpModel::new(z.clone(), y.clone(), h.clone(), 5.0).unwrap();
    let y = y * (20.0 / probe.beta()).sqrt();
    let m = StpModel::new(z, y, h, 5.0).unwrap();
    assert!((m.beta() - 20.0).abs() < 1e-9);
    let q = [0.2, 0.4];
    approx::assert_relative_eq!(m.stp_posterior(&q).variance, m.gp_posterior(&q).variance, max_relative = 1e-10);
}

#[test]
fn large_nu_recovers_gaussian() {
    let (z, y, h) = random_problem(9, 25, 2);
    let m = StpModel::new(z, y, h, 1e6).unwrap();
    for q in [[0.0, 0.0], [0.5, -1.2], [2.0, 1.0]] {
        let s = m.stp_posterior(&q).variance;
        let g = m.gp_posterior(&q).variance;
        assert!((s - g).abs() / g < 1e-4);
    }
}

#[test]
fn interpolates_with_vanishing_noise() {
    let (_, y, _) = random_problem(4, 8, 1);
    let z = DMatrix::from_fn(8, 1, |i, _| i as f64);
    let h = KernelHyper::isotropic(1, 0.5, 1.0, 1e-10);
    let m = StpModel::new(z.clone(), y.clone(), h, 4.0).unwrap();
    for i in 0..8 {
        let e = (m.stp_posterior(&[z[(i, 0)]]).mean - y[i]).abs();
        assert!(e < 1e-8, "{e}");
    }
}

#[test]
fn recovers_kernel_lengthscales() {
    let n = 200;
    let truth = KernelHyper { lengthscales: vec![0.5, 2.0], signal_variance: 1.0, noise_variance: 0.01 };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let z = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-3.0..3.0));
    let g = gram(&z, &truth).unwrap();
    let w = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let y = g.chol.l() * w;
    let fit =
        fit_process(&z, &y, Process::Gaussian, &FitOptions { restarts: 3, seed: 1, ..Default::default() }).unwrap();
    for (est, tru) in fit.model.hyper().lengthscales.iter().zip(&truth.lengthscales) {
        assert!(est / tru < 2.0 && tru / est < 2.0, "lengthscale {est} vs {tru}");
    }
}

#[test]
fn pure_noise_prefers_noise_explanation() {
    let mut hits = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let z = DMatrix::from_fn(40, 1, |_, _| rng.random_range(0.0..10.0));
        let y = DVector::from_fn(40, |_, _| StandardNormal.sample(&mut rng));
        let fit =
            fit_process(&z, &y, Process::StudentT, &FitOptions { restarts: 2, seed, ..Default::default() }).unwrap();
        let h = fit.model.hyper();
        if h.signal_variance / h.noise_variance < 1.0 {
            hits += 1;
        }
    }
    assert!(hits >= 16, "{hits}/20");
}

#[test]
fn accepted_steps_increase_likelihood() {
    let (z, y) = common::outlier_benchmark(3);
    for process in [Process::StudentT, Process::Gaussian] {
        let fit = fit_process(&z, &y, process, &FitOptions { restarts: 3, seed: 3, ..Default::default() }).unwrap();
        for r in &fit.restarts {
            assert!(r.trace.windows(2).all(|w| w[1] >= w[0]));
        }
        let nu = fit.model.nu();
        assert!(process == Process::Gaussian || (2.1..=1000.0).contains(&nu));
    }
}

#[test]
fn fit_is_deterministic() {
    let (z, y) = common::outlier_benchmark(8);
    let opts = FitOptions { restarts: 3, seed: 8, ..Default::default() };
    let a = fit_process(&z, &y, Process::StudentT, &opts).unwrap();
    let b = fit_process(&z, &y, Process::StudentT, &opts).unwrap();
    assert_eq!(a.model.hyper(), b.model.hyper());
    assert_eq!(a.model.nu(), b.model.nu());
}

#[test]
fn farthest_point_beats_random_subsets() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let rows: Vec<Features> = (0..5000).map(|_| std::array::from_fn(|_| normal.sample(&mut rng))).collect();
    let min_gap = |idx: &[usize]| {
        let mut best = f64::INFINITY;
        for a in 0..idx.len() {
            for b in 0..a {
                let d: f64 = (0..FEATURE_DIM).map(|j| (rows[idx[a]][j] - rows[idx[b]][j]).powi(2)).sum();
                best = best.min(d);
            }
        }
        best.sqrt()
    };
    let chosen = farthest_point_indices(&rows, 100);
    assert_eq!(chosen.len(), 100);
    let greedy = min_gap(&chosen);
    for _ in 0..100 {
        let mut idx: Vec<usize> = (0..5000).collect();
        for i in 0..100 {
            let j = rng.random_range(i..5000);
            idx.swap(i, j);
        }
        assert!(greedy > min_gap(&idx[..100]));
    }
}

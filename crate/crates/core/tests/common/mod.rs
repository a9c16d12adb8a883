#![allow(dead_code)]

pub mod numerics;

use lmpcc::stp::{fit_process, kernel_matrix, matern52_ard, FitOptions, KernelHyper, Process, StpModel};
use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const NOISE_STD: f64 = 0.1;

pub fn clean(x: f64) -> f64 {
    x.sin() + 0.3 * (2.3 * x).cos()
}

/// 50 noisy samples of a smooth function with one 10-sigma outlier.
pub fn outlier_benchmark(seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, NOISE_STD).unwrap();
    let n = 50;
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut ys: Vec<f64> = xs.iter().map(|&x| clean(x) + noise.sample(&mut rng)).collect();
    let k = rng.random_range(0..n);
    ys[k] += 10.0 * NOISE_STD * if rng.random::<bool>() { 1.0 } else { -1.0 };
    (DMatrix::from_vec(n, 1, xs), DVector::from_vec(ys))
}

pub fn clean_rms(model: &StpModel) -> f64 {
    let m = 200;
    let se: f64 = (0..m)
        .map(|i| {
            let x = 10.0 * (i as f64 + 0.5) / m as f64;
            (model.stp_posterior(&[x]).mean - clean(x)).powi(2)
        })
        .sum();
    (se / m as f64).sqrt()
}

/// Clean-function RMS of the STP fit and the GP fit on one seed.
pub fn outlier_trial(seed: u64) -> (f64, f64) {
    let (z, y) = outlier_benchmark(seed);
    let opts = FitOptions { restarts: 3, seed, ..FitOptions::default() };
    let stp = fit_process(&z, &y, Process::StudentT, &opts).unwrap();
    let gp = fit_process(&z, &y, Process::Gaussian, &opts).unwrap();
    (clean_rms(&stp.model), clean_rms(&gp.model))
}

pub fn random_problem(seed: u64, n: usize, d: usize) -> (DMatrix<f64>, DVector<f64>, KernelHyper) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(-1.5..1.5));
    let hyper = KernelHyper {
        lengthscales: (0..d).map(|_| rng.random_range(0.3..2.0)).collect(),
        signal_variance: rng.random_range(0.5..2.0),
        noise_variance: rng.random_range(0.01..0.2),
    };
    (z, y, hyper)
}

/// Posterior mean and Student-t variance from an explicit dense inverse.
pub fn dense_oracle(z: &DMatrix<f64>, y: &DVector<f64>, h: &KernelHyper, nu: f64, zs: &[f64]) -> (f64, f64) {
    let n = z.nrows();
    let mut k = kernel_matrix(z, h);
    for i in 0..n {
        k[(i, i)] += h.noise_variance;
    }
    let kinv = k.try_inverse().unwrap();
    let ks = DVector::from_fn(n, |i, _| {
        let zi: Vec<f64> = z.row(i).iter().copied().collect();
        matern52_ard(zs, &zi, h)
    });
    let mean = (ks.transpose() * &kinv * y)[0];
    let s2 = h.signal_variance - (ks.transpose() * &kinv * &ks)[0];
    let beta = (y.transpose() * &kinv * y)[0];
    (mean, (nu + beta - 2.0) / (nu + n as f64 - 2.0) * s2)
}

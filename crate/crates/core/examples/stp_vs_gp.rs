//! Fits a Student-t process and a Gaussian process to noisy samples with
//! one gross outlier and compares their posteriors.

use lmpcc::stp::{fit_process, moment_match_gaussian, FitOptions, Process};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> lmpcc::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.1).unwrap();
    let xs: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
    let mut ys: Vec<f64> = xs.iter().map(|x| x.sin() + noise.sample(&mut rng)).collect();
    ys[17] += 1.5;
    let z = DMatrix::from_vec(xs.len(), 1, xs);
    let y = DVector::from_vec(ys);

    let opts = FitOptions { restarts: 4, seed: 7, ..Default::default() };
    let stp = fit_process(&z, &y, Process::StudentT, &opts)?;
    let gp = fit_process(&z, &y, Process::Gaussian, &opts)?;
    for (name, fit) in [("stp", &stp), ("gp", &gp)] {
        let h = fit.model.hyper();
        println!(
            "{name}: log-lik {:.3}, lengthscale {:.3}, signal var {:.3}, noise var {:.4}, nu {:.1}",
            fit.log_likelihood,
            h.lengthscales[0],
            h.signal_variance,
            h.noise_variance,
            fit.model.nu()
        );
    }

    println!("\nx,truth,stp_mean,stp_std,gp_mean,gp_std");
    for i in 0..=20 {
        let x = 0.5 * i as f64;
        let s = stp.model.stp_posterior(&[x]);
        let g = gp.model.gp_posterior(&[x]);
        let s_std = moment_match_gaussian(&s)?.sqrt();
        println!("{x:.1},{:.4},{:.4},{:.4},{:.4},{:.4}", x.sin(), s.mean, s_std, g.mean, g.variance.sqrt());
    }
    Ok(())
}

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use super::kernel::{gram, matern52_ard, matern52_gradient, matern52_of_rho, matern52_radial, KernelHyper};
use crate::error::{Error, Result};

pub const NU_MIN: f64 = 2.1;
pub const NU_MAX: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
    /// Degrees of freedom, infinite for a Gaussian posterior.
    pub dof: f64,
}

/// Variance of the Gaussian with the same second moment as `p`.
pub fn moment_match_gaussian(p: &Posterior) -> Result<f64> {
    if p.dof.is_infinite() && p.dof > 0.0 {
        Ok(p.variance)
    } else if p.dof > 2.0 {
        Ok(p.variance * p.dof / (p.dof - 2.0))
    } else {
        Err(Error::param("dof", format!("must exceed 2, got {}", p.dof)))
    }
}

/// Exact Student-t process regression on a fixed training set.
///
/// `nu = inf` turns it into plain GP regression. Predictive variances are
/// those of the latent function (observation noise excluded).
#[derive(Debug, Clone)]
pub struct StpModel {
    nu: f64,
    hyper: KernelHyper,
    z: DMatrix<f64>,
    y: DVector<f64>,
    chol_l: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    alpha: DVector<f64>,
    beta: f64,
    log_det: f64,
    jitter: f64,
}

impl StpModel {
    pub fn new(z: DMatrix<f64>, y: DVector<f64>, hyper: KernelHyper, nu: f64) -> Result<Self> {
        hyper.validate()?;
        if !(nu > 2.0) {
            return Err(Error::param("nu", format!("must exceed 2, got {nu}")));
        }
        if z.nrows() != y.len() {
            return Err(Error::InvalidInput(format!("{} input rows but {} targets", z.nrows(), y.len())));
        }
        if !z.iter().chain(y.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite training data".into()));
        }
        let g = gram(&z, &hyper)?;
        let alpha = g.chol.solve(&y);
        let beta = y.dot(&alpha).max(0.0);
        let chol_l = g.chol.l();
        let log_det = 2.0 * chol_l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Ok(Self { nu, hyper, z, y, chol_l, chol: g.chol, alpha, beta, log_det, jitter: g.jitter })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn hyper(&self) -> &KernelHyper {
        &self.hyper
    }
    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.z
    }
    pub fn targets(&self) -> &DVector<f64> {
        &self.y
    }
    pub fn n(&self) -> usize {
        self.y.len()
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
    /// Lower Cholesky factor of the noisy Gram matrix.
    pub fn cholesky_factor(&self) -> &DMatrix<f64> {
        &self.chol_l
    }
    pub fn is_gaussian(&self) -> bool {
        self.nu.is_infinite()
    }

    /// Same data and hyperparameters with different degrees of freedom.
    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        if !(nu > 2.0) {
            return Err(Error::param("nu", format!("must exceed 2, got {nu}")));
        }
        Ok(Self { nu, ..self.clone() })
    }

    fn cross(&self, z_star: &[f64]) -> DVector<f64> {
        assert_eq!(z_star.len(), self.hyper.dim(), "query dimension mismatch");
        DVector::from_iterator(
            self.n(),
            (0..self.n()).map(|i| {
                let zi: Vec<f64> = self.z.row(i).iter().copied().collect();
                matern52_ard(z_star, &zi, &self.hyper)
            }),
        )
    }

    /// `(nu + beta - 2) / (nu + n - 2)`, 1 for a Gaussian process.
    pub fn variance_scale(&self) -> f64 {
        if self.is_gaussian() {
            1.0
        } else {
            (self.nu + self.beta - 2.0) / (self.nu + self.n() as f64 - 2.0)
        }
    }

    fn gp_parts(&self, z_star: &[f64]) -> (f64, f64, DVector<f64>) {
        let ks = self.cross(z_star);
        let mean = ks.dot(&self.alpha);
        let v = self.chol.solve(&ks);
        let var = (self.hyper.signal_variance - ks.dot(&v)).max(0.0);
        (mean, var, v)
    }

    pub fn gp_posterior(&self, z_star: &[f64]) -> Posterior {
        let (mean, variance, _) = self.gp_parts(z_star);
        Posterior { mean, variance, dof: f64::INFINITY }
    }

    pub fn stp_posterior(&self, z_star: &[f64]) -> Posterior {
        let (mean, s2, _) = self.gp_parts(z_star);
        let dof = if self.is_gaussian() { f64::INFINITY } else { self.nu + self.n() as f64 };
        Posterior { mean, variance: self.variance_scale() * s2, dof }
    }

    /// Posterior together with the gradients of its mean and variance with
    /// respect to the query point.
    pub fn posterior_with_gradient(&self, z_star: &[f64]) -> (Posterior, Vec<f64>, Vec<f64>) {
        let (mean, s2, v) = self.gp_parts(z_star);
        let d = self.hyper.dim();
        let mut dmean = vec![0.0; d];
        let mut dvar = vec![0.0; d];
        let mut dk = vec![0.0; d];
        for i in 0..self.n() {
            let zi: Vec<f64> = self.z.row(i).iter().copied().collect();
            matern52_gradient(z_star, &zi, &self.hyper, &mut dk);
            for j in 0..d {
                dmean[j] += self.alpha[i] * dk[j];
                dvar[j] -= 2.0 * v[i] * dk[j];
            }
        }
        let scale = self.variance_scale();
        if s2 <= 0.0 {
            dvar.iter_mut().for_each(|g| *g = 0.0);
        } else {
            dvar.iter_mut().for_each(|g| *g *= scale);
        }
        let dof = if self.is_gaussian() { f64::INFINITY } else { self.nu + self.n() as f64 };
        (Posterior { mean, variance: scale * s2, dof }, dmean, dvar)
    }

    /// Log marginal likelihood of the training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.n() as f64;
        if self.is_gaussian() {
            -0.5 * self.beta - 0.5 * self.log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
        } else {
            let nu = self.nu;
            ln_gamma(0.5 * (nu + n))
                - ln_gamma(0.5 * nu)
                - 0.5 * n * ((nu - 2.0) * std::f64::consts::PI).ln()
                - 0.5 * self.log_det
                - 0.5 * (nu + n) * (1.0 + self.beta / (nu - 2.0)).ln()
        }
    }

    /// Gradient of [`Self::log_marginal_likelihood`] with respect to
    /// `[ln l_1 .. ln l_d, ln signal_variance, ln noise_variance]`, followed by
    /// `ln(nu - 2)` for a Student-t model.
    pub fn log_marginal_likelihood_gradient(&self) -> Vec<f64> {
        let n = self.n();
        let d = self.hyper.dim();
        let c = if self.is_gaussian() { 1.0 } else { (self.nu + n as f64) / (self.nu + self.beta - 2.0) };
        let kinv = self.chol.inverse();
        // W = c alpha alpha' - K^-1 ; gradient_theta = 1/2 tr(W dK/dtheta)
        let mut w = &self.alpha * self.alpha.transpose() * c;
        w -= &kinv;

        let rows: Vec<Vec<f64>> = (0..n).map(|i| self.z.row(i).iter().copied().collect()).collect();
        let sf2 = self.hyper.signal_variance;
        let mut grad = vec![0.0; d + 2 + usize::from(!self.is_gaussian())];
        for p in 0..n {
            // diagonal: dK/dln sf2 = sf2, lengthscale terms vanish
            grad[d] += 0.5 * w[(p, p)] * sf2;
            for q in 0..p {
                let rho = self.hyper.rho(&rows[p], &rows[q]);
                let wpq = w[(p, q)]; // symmetric: count twice, times 1/2
                grad[d] += wpq * matern52_of_rho(rho, sf2);
                let g = matern52_radial(rho, sf2);
                for i in 0..d {
                    let r = (rows[p][i] - rows[q][i]) / self.hyper.lengthscales[i];
                    grad[i] += wpq * g * r * r;
                }
            }
        }
        grad[d + 1] = 0.5 * self.hyper.noise_variance * w.trace();
        if !self.is_gaussian() {
            let nu = self.nu;
            let nf = n as f64;
            let b = self.beta;
            let dnu = 0.5 * digamma(0.5 * (nu + nf))
                - 0.5 * digamma(0.5 * nu)
                - nf / (2.0 * (nu - 2.0))
                - 0.5 * (1.0 + b / (nu - 2.0)).ln()
                + 0.5 * (nu + nf) * b / ((nu - 2.0) * (nu - 2.0 + b));
            grad[d + 2] = dnu * (nu - 2.0);
        }
        grad
    }
}

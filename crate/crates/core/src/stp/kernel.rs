use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Jitter ladder, relative to the mean diagonal of the kernel matrix.
const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyper {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelHyper {
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Self {
        Self { lengthscales: vec![lengthscale; dim], signal_variance, noise_variance }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if self.lengthscales.is_empty() || !self.lengthscales.iter().all(|&l| ok(l)) {
            return Err(Error::param("lengthscales", "must be non-empty and strictly positive"));
        }
        if !ok(self.signal_variance) {
            return Err(Error::param("signal_variance", "must be strictly positive"));
        }
        if !ok(self.noise_variance) {
            return Err(Error::param("noise_variance", "must be strictly positive"));
        }
        Ok(())
    }

    /// Scaled distance between two points.
    pub fn rho(&self, z1: &[f64], z2: &[f64]) -> f64 {
        z1.iter().zip(z2).zip(&self.lengthscales).map(|((a, b), l)| ((a - b) / l).powi(2)).sum::<f64>().sqrt()
    }
}

/// Matérn 5/2 kernel with one lengthscale per input dimension.
pub fn matern52_ard(z1: &[f64], z2: &[f64], hyper: &KernelHyper) -> f64 {
    matern52_of_rho(hyper.rho(z1, z2), hyper.signal_variance)
}

pub(crate) fn matern52_of_rho(rho: f64, signal_variance: f64) -> f64 {
    let t = SQRT5 * rho;
    signal_variance * (1.0 + t + t * t / 3.0) * (-t).exp()
}

/// `-(1/rho) dk/drho`, finite at zero. Multiplying by `d_i / l_i^2` gives
/// the derivative of `k` with respect to `z1_i` (up to sign), and by
/// `(d_i / l_i)^2` the derivative with respect to `ln l_i`.
pub(crate) fn matern52_radial(rho: f64, signal_variance: f64) -> f64 {
    let t = SQRT5 * rho;
    signal_variance * (5.0 / 3.0) * (1.0 + t) * (-t).exp()
}

/// Gradient of `k(z, zi)` with respect to `z`.
pub fn matern52_gradient(z: &[f64], zi: &[f64], hyper: &KernelHyper, out: &mut [f64]) {
    let g = matern52_radial(hyper.rho(z, zi), hyper.signal_variance);
    for (j, o) in out.iter_mut().enumerate() {
        let l = hyper.lengthscales[j];
        *o = -g * (z[j] - zi[j]) / (l * l);
    }
}

/// Kernel matrix over the rows of `z` without the noise term.
pub fn kernel_matrix(z: &DMatrix<f64>, hyper: &KernelHyper) -> DMatrix<f64> {
    let n = z.nrows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| z.row(i).iter().copied().collect()).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hyper.signal_variance;
        for j in 0..i {
            let v = matern52_ard(&rows[i], &rows[j], hyper);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Noisy Gram matrix `K + noise_variance I` and its Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gram {
    pub matrix: DMatrix<f64>,
    pub chol: Cholesky<f64, Dyn>,
    /// Jitter that was added on top of the noise (0 if none was needed).
    pub jitter: f64,
}

pub fn gram(z: &DMatrix<f64>, hyper: &KernelHyper) -> Result<Gram> {
    if z.nrows() == 0 {
        return Err(Error::InvalidInput("gram matrix of an empty set".into()));
    }
    if z.ncols() != hyper.dim() {
        return Err(Error::InvalidInput(format!(
            "inputs have {} columns but the kernel has {} lengthscales",
            z.ncols(),
            hyper.dim()
        )));
    }
    let mut matrix = kernel_matrix(z, hyper);
    for i in 0..matrix.nrows() {
        matrix[(i, i)] += hyper.noise_variance;
    }
    factor_with_jitter(matrix)
}

pub(crate) fn factor_with_jitter(matrix: DMatrix<f64>) -> Result<Gram> {
    if !matrix.iter().all(|v| v.is_finite()) {
        return Err(Error::Conditioning { jitter: 0.0 });
    }
    if let Some(chol) = Cholesky::new(matrix.clone()) {
        return Ok(Gram { matrix, chol, jitter: 0.0 });
    }
    let scale = matrix.diagonal().mean().abs().max(f64::MIN_POSITIVE);
    let mut last = 0.0;
    for rel in JITTER_LADDER {
        let jitter = rel * scale;
        let mut m = matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m.clone()) {
            return Ok(Gram { matrix: m, chol, jitter });
        }
        last = jitter;
    }
    Err(Error::Conditioning { jitter: last })
}

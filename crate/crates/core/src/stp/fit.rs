use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::KernelHyper;
use super::regression::{StpModel, NU_MAX, NU_MIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    StudentT,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub signal_variance: (f64, f64),
    pub noise_variance: (f64, f64),
    pub nu: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            lengthscale: (0.02, 5.0),
            signal_variance: (1e-4, 10.0),
            noise_variance: (1e-6, 10.0),
            nu: (NU_MIN, NU_MAX),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Starting point of the first restart; the others are random.
    pub init: Option<(KernelHyper, f64)>,
    pub bounds: HyperBounds,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { restarts: 4, seed: 0, max_iterations: 200, init: None, bounds: HyperBounds::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartReport {
    pub status: RestartStatus,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// Log-likelihood after every accepted step, starting point first.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: StpModel,
    pub log_likelihood: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartReport>,
}

struct Layout {
    dim: usize,
    student: bool,
}

impl Layout {
    fn bounds(&self, b: &HyperBounds) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![b.lengthscale.0.ln(); self.dim];
        let mut hi = vec![b.lengthscale.1.ln(); self.dim];
        lo.push(b.signal_variance.0.ln());
        hi.push(b.signal_variance.1.ln());
        lo.push(b.noise_variance.0.ln());
        hi.push(b.noise_variance.1.ln());
        if self.student {
            lo.push((b.nu.0 - 2.0).ln());
            hi.push((b.nu.1 - 2.0).ln());
        }
        (lo, hi)
    }

    fn decode(&self, x: &[f64]) -> (KernelHyper, f64) {
        let hyper = KernelHyper {
            lengthscales: x[..self.dim].iter().map(|v| v.exp()).collect(),
            signal_variance: x[self.dim].exp(),
            noise_variance: x[self.dim + 1].exp(),
        };
        let nu = if self.student { (2.0 + x[self.dim + 2].exp()).clamp(NU_MIN, NU_MAX) } else { f64::INFINITY };
        (hyper, nu)
    }

    fn encode(&self, hyper: &KernelHyper, nu: f64) -> Vec<f64> {
        let mut x: Vec<f64> = hyper.lengthscales.iter().map(|l| l.ln()).collect();
        x.push(hyper.signal_variance.ln());
        x.push(hyper.noise_variance.ln());
        if self.student {
            x.push((nu - 2.0).ln());
        }
        x
    }
}

/// Maximizes the log marginal likelihood over log-lengthscales, log-variances
/// and, for a Student-t process, `ln(nu - 2)`.
pub fn fit_process(z: &DMatrix<f64>, y: &DVector<f64>, process: Process, opts: &FitOptions) -> Result<FitReport> {
    if z.nrows() < 10 {
        return Err(Error::InvalidInput(format!("fitting needs at least 10 samples, got {}", z.nrows())));
    }
    if z.nrows() != y.len() {
        return Err(Error::InvalidInput("input and target counts differ".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::param("restarts", "must be at least 1"));
    }
    let layout = Layout { dim: z.ncols(), student: process == Process::StudentT };
    let (lo, hi) = layout.bounds(&opts.bounds);
    let y_var = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).max(1e-12);

    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (hyper, nu) = layout.decode(x);
        let m = StpModel::new(z.clone(), y.clone(), hyper, nu).ok()?;
        let f = -m.log_marginal_likelihood();
        let g: Vec<f64> = m.log_marginal_likelihood_gradient().iter().map(|v| -v).collect();
        (f.is_finite() && g.iter().all(|v| v.is_finite())).then_some((f, g))
    };

    let starts: Vec<Vec<f64>> = (0..opts.restarts)
        .map(|i| {
            let x = if i == 0 {
                match &opts.init {
                    Some((h, nu)) => layout.encode(h, *nu),
                    None => layout.encode(&KernelHyper::isotropic(layout.dim, 1.0, y_var, 0.1 * y_var), 5.0),
                }
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                let mut x: Vec<f64> = (0..layout.dim).map(|_| rng.random_range(0.2_f64.ln()..5.0_f64.ln())).collect();
                x.push(y_var.ln() + rng.random_range(-1.5..1.5));
                x.push(y_var.ln() + rng.random_range(-5.0..-0.5));
                if layout.student {
                    x.push(rng.random_range(0.5_f64.ln()..50.0_f64.ln()));
                }
                x
            };
            x.iter().zip(lo.iter().zip(&hi)).map(|(v, (a, b))| v.clamp(*a, *b)).collect()
        })
        .collect();

    let runs: Vec<(RestartReport, Vec<f64>)> = starts
        .into_par_iter()
        .map(|x0| {
            let r = minimize_box(&objective, x0, &lo, &hi, opts.max_iterations);
            let report = RestartReport {
                status: r.status,
                iterations: r.iterations,
                log_likelihood: -r.f,
                trace: r.trace.iter().map(|f| -f).collect(),
            };
            (report, r.x)
        })
        .collect();

    let mut best: Option<usize> = None;
    for (i, (r, _)) in runs.iter().enumerate() {
        if r.log_likelihood.is_finite() && best.is_none_or(|b| r.log_likelihood > runs[b].0.log_likelihood) {
            best = Some(i);
        }
    }
    let best_ll = best.map_or(f64::NEG_INFINITY, |b| runs[b].0.log_likelihood);
    let all_failed = runs.iter().all(|(r, _)| r.status == RestartStatus::LineSearchFailed && r.iterations == 0);
    let Some(best) = best.filter(|_| !all_failed) else {
        return Err(Error::NonConvergence { restarts: opts.restarts, best_log_likelihood: best_ll });
    };
    let (hyper, nu) = layout.decode(&runs[best].1);
    let model = StpModel::new(z.clone(), y.clone(), hyper, nu)?;
    Ok(FitReport {
        log_likelihood: model.log_marginal_likelihood(),
        model,
        best_restart: best,
        restarts: runs.into_iter().map(|(r, _)| r).collect(),
    })
}

struct Minimum {
    x: Vec<f64>,
    f: f64,
    iterations: usize,
    status: RestartStatus,
    trace: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected L-BFGS with backtracking Armijo line search on a box.
fn minimize_box(
    f: &impl Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
    x0: Vec<f64>,
    lo: &[f64],
    hi: &[f64],
    max_iter: usize,
) -> Minimum {
    const MEMORY: usize = 8;
    let n = x0.len();
    let Some((mut fx, mut g)) = f(&x0) else {
        return Minimum {
            x: x0,
            f: f64::INFINITY,
            iterations: 0,
            status: RestartStatus::LineSearchFailed,
            trace: vec![],
        };
    };
    let mut x = x0;
    let mut trace = vec![fx];
    let mut mem: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let projected = |x: &[f64], g: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| if (x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0) { 0.0 } else { g[i] })
            .collect()
    };

    for it in 0..max_iter {
        let pg = projected(&x, &g);
        if pg.iter().fold(0.0_f64, |m, v| m.max(v.abs())) < 1e-5 {
            return Minimum { x, f: fx, iterations: it, status: RestartStatus::Converged, trace };
        }
        // two-loop recursion
        let mut q = pg.clone();
        let mut alphas = vec![0.0; mem.len()];
        for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
            alphas[k] = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= alphas[k] * yi);
        }
        if let Some((s, y, _)) = mem.last() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, (s, y, rho)) in mem.iter().enumerate() {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (alphas[k] - b) * si);
        }
        let mut p: Vec<f64> = q.iter().map(|v| -v).collect();
        for i in 0..n {
            if pg[i] == 0.0 {
                p[i] = 0.0;
            }
        }
        if dot(&p, &g) >= 0.0 {
            mem.clear();
            p = pg.iter().map(|v| -v).collect();
        }
        let mut t = if mem.is_empty() { (1.0 / p.iter().fold(0.0_f64, |m, v| m.max(v.abs()))).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..40 {
            let xt: Vec<f64> = (0..n).map(|i| (x[i] + t * p[i]).clamp(lo[i], hi[i])).collect();
            let step: Vec<f64> = (0..n).map(|i| xt[i] - x[i]).collect();
            if let Some((ft, gt)) = f(&xt) {
                if ft <= fx + 1e-4 * dot(&g, &step) {
                    accepted = Some((xt, ft, gt, step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xt, ft, gt, step)) = accepted else {
            let status = RestartStatus::LineSearchFailed;
            return Minimum { x, f: fx, iterations: it, status, trace };
        };
        let yv: Vec<f64> = (0..n).map(|i| gt[i] - g[i]).collect();
        let sy = dot(&step, &yv);
        if sy > 1e-12 {
            if mem.len() == MEMORY {
                mem.remove(0);
            }
            mem.push((step, yv, 1.0 / sy));
        }
        let decrease = fx - ft;
        x = xt;
        fx = ft;
        g = gt;
        trace.push(fx);
        if decrease < 1e-10 * (1.0 + fx.abs()) {
            return Minimum { x, f: fx, iterations: it + 1, status: RestartStatus::Converged, trace };
        }
    }
    Minimum { x, f: fx, iterations: max_iter, status: RestartStatus::MaxIterations, trace }
}

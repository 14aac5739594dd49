//! Bounded Levenberg–Marquardt least squares with deterministic multi-start.

use nalgebra::{DMatrix, DVector};

pub const STEP_TOL: f64 = 1e-10;
pub const GRAD_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 500;
const N_STARTS: usize = 3;

/// A differentiable model `f(p; x)`.
pub trait Model {
    fn n_params(&self) -> usize;
    fn eval(&self, p: &[f64], x: f64) -> f64;
    /// Writes `∂f/∂p` into `grad`.
    fn grad(&self, p: &[f64], x: f64, grad: &mut [f64]);
}

/// Fits `ln f` to `ln y`; `sigma` must then be the log-space uncertainty.
pub struct LogSpace<'a, M: Model>(pub &'a M);

impl<M: Model> Model for LogSpace<'_, M> {
    fn n_params(&self) -> usize {
        self.0.n_params()
    }
    fn eval(&self, p: &[f64], x: f64) -> f64 {
        self.0.eval(p, x).max(1e-300).ln()
    }
    fn grad(&self, p: &[f64], x: f64, grad: &mut [f64]) {
        let f = self.0.eval(p, x).max(1e-300);
        self.0.grad(p, x, grad);
        grad.iter_mut().for_each(|g| *g /= f);
    }
}

pub struct Problem<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub sigma: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub params: Vec<f64>,
    /// Covariance scaled by the reduced χ²; `None` if the normal matrix is singular.
    pub covariance: Option<DMatrix<f64>>,
    pub chi2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reason: &'static str,
}

fn residuals_and_jacobian<M: Model>(
    model: &M,
    prob: &Problem,
    p: &[f64],
) -> (DVector<f64>, DMatrix<f64>) {
    let n = prob.x.len();
    let k = p.len();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, k);
    let mut g = vec![0.0; k];
    for i in 0..n {
        let s = prob.sigma[i];
        r[i] = (prob.y[i] - model.eval(p, prob.x[i])) / s;
        model.grad(p, prob.x[i], &mut g);
        for c in 0..k {
            j[(i, c)] = g[c] / s;
        }
    }
    (r, j)
}

fn chi2<M: Model>(model: &M, prob: &Problem, p: &[f64]) -> f64 {
    prob.x
        .iter()
        .zip(prob.y)
        .zip(prob.sigma)
        .map(|((&x, &y), &s)| ((y - model.eval(p, x)) / s).powi(2))
        .sum()
}

fn clamp(p: &mut [f64], prob: &Problem) {
    for (i, v) in p.iter_mut().enumerate() {
        *v = v.clamp(prob.lower[i], prob.upper[i]);
    }
}

/// Single Levenberg–Marquardt run from `p0`.
pub fn levenberg_marquardt<M: Model>(model: &M, prob: &Problem, p0: &[f64]) -> Outcome {
    let k = model.n_params();
    let mut p = p0.to_vec();
    clamp(&mut p, prob);
    let mut cost = chi2(model, prob, &p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut reason = "iteration limit";
    let mut iterations = 0;
    if !cost.is_finite() {
        return Outcome {
            params: p,
            covariance: None,
            chi2: cost,
            iterations,
            converged: false,
            reason: "non-finite start",
        };
    }
    'outer: while iterations < MAX_ITER {
        iterations += 1;
        let (r, j) = residuals_and_jacobian(model, prob, &p);
        let a = j.transpose() * &j;
        let g = j.transpose() * &r;
        let rnorm = r.norm();
        let grad_measure = (0..k)
            .map(|c| {
                let col = j.column(c).norm();
                if col > 0.0 && rnorm > 0.0 {
                    g[c].abs() / (col * rnorm)
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max);
        if grad_measure <= GRAD_TOL {
            converged = true;
            reason = "gradient tolerance";
            break;
        }
        loop {
            let mut damped = a.clone();
            for c in 0..k {
                damped[(c, c)] += lambda * a[(c, c)].max(1e-12);
            }
            let Some(step) = damped.clone().cholesky().map(|ch| ch.solve(&g)) else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    reason = "singular normal matrix";
                    break 'outer;
                }
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial, prob);
            let trial_cost = chi2(model, prob, &trial);
            if trial_cost.is_finite() && trial_cost <= cost {
                let moved: f64 = trial
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let scale: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                p = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-12);
                if moved <= STEP_TOL * (scale + STEP_TOL) {
                    converged = true;
                    reason = "step tolerance";
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no descent direction left: a minimum to machine precision
                converged = true;
                reason = "no further reduction";
                break 'outer;
            }
        }
    }
    let n = prob.x.len();
    let (_, j) = residuals_and_jacobian(model, prob, &p);
    let scale = if n > k { cost / (n - k) as f64 } else { 1.0 };
    let covariance = (j.transpose() * &j).try_inverse().map(|m| m * scale);
    if covariance.is_none() {
        converged = false;
        reason = "singular covariance";
    }
    Outcome {
        params: p,
        covariance,
        chi2: cost,
        iterations,
        converged,
        reason,
    }
}

/// Runs from `p0` and two jittered copies; returns the best converged run.
pub fn multistart<M: Model>(model: &M, prob: &Problem, p0: &[f64]) -> Outcome {
    let mut best: Option<Outcome> = None;
    for s in 0..N_STARTS {
        let start: Vec<f64> = p0
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let sign = if (i + s) % 2 == 0 { 1.0 } else { -1.0 };
                let jitter = [0.0, 0.15, 0.3][s] * sign;
                v * (1.0 + jitter)
            })
            .collect();
        let out = levenberg_marquardt(model, prob, &start);
        let better = match &best {
            None => true,
            Some(b) => {
                (out.converged && !b.converged)
                    || (out.converged == b.converged && out.chi2 < b.chi2)
            }
        };
        if better {
            best = Some(out);
        }
    }
    best.expect("at least one start")
}

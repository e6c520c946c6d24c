//! Marginal-likelihood hyperparameter fitting.
//!
//! Gradient ascent on the log of every parameter (keeps them positive) with
//! Armijo backtracking. Each accepted step strictly increases the objective,
//! so the returned configuration is always the best one seen.

use nalgebra::DMatrix;
use serde::Serialize;

use super::gp::lml_gradient_from_gram;
use crate::error::{Error, Result};
use crate::gram::gram_with_gradients;
use crate::kernels::KernelConfig;
use crate::sequence::Sequence;

#[derive(Debug, Clone, Serialize)]
pub struct FitOptions {
    /// Maximum number of gradient-ascent iterations.
    pub budget: usize,
    /// Initial noise variance.
    pub noise: f64,
    /// Also learn the noise variance.
    pub fit_noise: bool,
    /// Stop when the log-space gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    pub max_backtracks: usize,
    pub initial_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            budget: 50,
            noise: 0.1,
            fit_noise: true,
            grad_tol: 1e-5,
            armijo: 1e-4,
            max_backtracks: 30,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    /// Gradient below tolerance.
    Converged,
    /// No step length produced sufficient increase.
    Stalled,
    /// Iteration budget used up; result is the best configuration so far.
    BudgetExhausted,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitStep {
    pub params: Vec<f64>,
    pub noise: f64,
    pub lml: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub config: KernelConfig,
    pub noise: f64,
    pub lml: f64,
    pub status: FitStatus,
    pub iterations: usize,
    /// Starting point followed by every accepted step.
    pub trace: Vec<FitStep>,
}

struct Eval {
    lml: f64,
    /// Gradient w.r.t. the log-parameters being optimized.
    grad: Vec<f64>,
}

struct Problem<'a> {
    data: &'a [Sequence],
    cfg0: &'a KernelConfig,
    targets: &'a DMatrix<f64>,
    opts: &'a FitOptions,
    noise0: f64,
}

impl Problem<'_> {
    fn unpack(&self, x: &[f64]) -> Result<(KernelConfig, f64)> {
        let n_kernel = if self.opts.fit_noise { x.len() - 1 } else { x.len() };
        let params: Vec<f64> = x[..n_kernel].iter().map(|v| v.exp()).collect();
        let noise = if self.opts.fit_noise { x[n_kernel].exp() } else { self.noise0 };
        Ok((self.cfg0.with_params(&params)?, noise))
    }

    fn eval(&self, x: &[f64]) -> Result<Eval> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite parameter".into()));
        }
        let (cfg, noise) = self.unpack(x)?;
        let (k, dks) = gram_with_gradients(self.data, &cfg)?;
        let g = lml_gradient_from_gram(&k, &dks, self.targets, noise)?;
        if !g.value.is_finite() || g.grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite likelihood".into()));
        }
        let mut grad: Vec<f64> = cfg.params()?.iter().zip(&g.grad).map(|(p, d)| p * d).collect();
        if self.opts.fit_noise {
            grad.push(noise * g.grad[g.grad.len() - 1]);
        }
        Ok(Eval { lml: g.value, grad })
    }

    fn step(&self, x: &[f64], lml: f64) -> Result<FitStep> {
        let (cfg, noise) = self.unpack(x)?;
        Ok(FitStep { params: cfg.params()?, noise, lml })
    }
}

/// Maximizes the GP log marginal likelihood of one-hot `labels` over the
/// continuous parameters of `cfg0` (and optionally the noise variance).
pub fn fit_hyperparameters(
    data: &[Sequence],
    labels: &[usize],
    cfg0: &KernelConfig,
    opts: &FitOptions,
) -> Result<FitResult> {
    if labels.len() != data.len() {
        return Err(Error::Dimension { expected: data.len(), found: labels.len() });
    }
    if !(opts.noise.is_finite() && opts.noise > 0.0) {
        return Err(Error::domain(format!("noise variance must be positive, got {}", opts.noise)));
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let targets = super::one_hot(labels, n_classes);
    let p0 = cfg0.params()?;
    if let Some(p) = p0.iter().find(|p| **p <= 0.0) {
        return Err(Error::domain(format!("parameters must be positive to fit in log space, got {p}")));
    }
    let problem = Problem { data, cfg0, targets: &targets, opts, noise0: opts.noise };

    let mut x: Vec<f64> = p0.iter().map(|p| p.ln()).collect();
    if opts.fit_noise {
        x.push(opts.noise.ln());
    }
    let mut cur = problem.eval(&x)?;
    let mut trace = vec![problem.step(&x, cur.lml)?];
    let mut t = opts.initial_step;
    let mut iterations = 0;
    let status = loop {
        let gnorm_inf = cur.grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gnorm_inf < opts.grad_tol {
            break FitStatus::Converged;
        }
        if iterations >= opts.budget {
            break FitStatus::BudgetExhausted;
        }
        iterations += 1;
        let gnorm2: f64 = cur.grad.iter().map(|g| g * g).sum();
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&cur.grad).map(|(xi, gi)| xi + t * gi).collect();
            match problem.eval(&trial) {
                Ok(e) if e.lml >= cur.lml + opts.armijo * t * gnorm2 => {
                    accepted = Some((trial, e));
                    break;
                }
                Ok(_) => t *= 0.5,
                Err(err) => {
                    log::debug!("rejected trial step: {err}");
                    t *= 0.5;
                }
            }
        }
        match accepted {
            Some((nx, e)) => {
                x = nx;
                cur = e;
                trace.push(problem.step(&x, cur.lml)?);
                t *= 2.0;
            }
            None => break FitStatus::Stalled,
        }
    };
    let (config, noise) = problem.unpack(&x)?;
    Ok(FitResult { config, noise, lml: cur.lml, status, iterations, trace })
}

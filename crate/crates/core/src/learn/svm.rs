//! C-SVM on a precomputed kernel, solved by SMO with maximal-violating-pair
//! working-set selection; one-vs-rest for more than one class.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use super::{argmax_rows, check_labels, check_square};
use crate::error::{Error, Result};
use crate::gram::{check_psd, DEFAULT_PSD_TOL};
use crate::kernels::SequenceKernel;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct SvmOptions {
    pub c: f64,
    /// KKT tolerance on the maximal violation.
    pub tol: f64,
    pub max_iter: usize,
    /// Eigen-check the Gram first and add diagonal jitter if it is not PSD.
    pub check_psd: bool,
    /// Record the dual objective after every SMO step.
    pub record_objective: bool,
}

impl SvmOptions {
    pub fn new(c: f64) -> Self {
        Self {
            c,
            tol: 1e-3,
            max_iter: 10_000_000,
            check_psd: true,
            record_objective: false,
        }
    }
}

/// One binary problem: class `+1` against the rest.
#[derive(Debug, Clone, Serialize)]
pub struct BinarySvm {
    pub alpha: Vec<f64>,
    /// Targets in {-1, +1}.
    pub y: Vec<f64>,
    pub bias: f64,
    /// Indices with nonzero alpha.
    pub support: Vec<usize>,
    pub iterations: usize,
    /// Dual objective sum(alpha) - alpha'Qalpha/2 at the solution.
    pub objective: f64,
    /// Maximal KKT violation at the solution.
    pub kkt_violation: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective_trace: Option<Vec<f64>>,
}

impl BinarySvm {
    /// Decision values for test points given the n_train x n_test cross Gram.
    pub fn decision(&self, gcross: &DMatrix<f64>) -> Vec<f64> {
        (0..gcross.ncols())
            .map(|t| {
                self.support.iter().map(|&s| self.alpha[s] * self.y[s] * gcross[(s, t)]).sum::<f64>()
                    + self.bias
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SvmModel {
    pub c: f64,
    pub n_train: usize,
    /// One binary machine per class, in class-index order.
    pub machines: Vec<BinarySvm>,
    /// Added to the Gram diagonal before solving (0 unless non-PSD).
    pub jitter: f64,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<SequenceKernel>,
}

impl SvmModel {
    pub fn n_classes(&self) -> usize {
        self.machines.len()
    }
}

pub fn svm_train(k: &DMatrix<f64>, labels: &[usize], c: f64, tol: f64) -> Result<SvmModel> {
    svm_train_with(k, labels, &SvmOptions { tol, ..SvmOptions::new(c) })
}

pub fn svm_train_with(k: &DMatrix<f64>, labels: &[usize], opts: &SvmOptions) -> Result<SvmModel> {
    let n = check_square(k)?;
    let n_classes = check_labels(labels, n)?;
    if !(opts.c.is_finite() && opts.c > 0.0) {
        return Err(Error::domain(format!("C must be positive, got {}", opts.c)));
    }
    if !(opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if n_classes < 2 {
        return Err(Error::InvalidInput("SVM training needs at least two classes".into()));
    }
    if let Some(c) = (0..n_classes).find(|c| !labels.contains(c)) {
        return Err(Error::InvalidInput(format!("class {c} has no training examples")));
    }

    let mut warnings = Vec::new();
    let mut jitter = 0.0;
    let mut owned;
    let mut gram = k;
    if opts.check_psd {
        let report = check_psd(k, DEFAULT_PSD_TOL)?;
        if !report.pass {
            jitter = -report.min_eig + DEFAULT_PSD_TOL * report.max_eig.abs().max(1.0);
            let msg = format!(
                "Gram is not PSD (min eigenvalue {:.3e}); added {jitter:.3e} to the diagonal",
                report.min_eig
            );
            log::warn!("{msg}");
            warnings.push(msg);
            owned = k.clone();
            for i in 0..n {
                owned[(i, i)] += jitter;
            }
            gram = &owned;
        }
    }

    let machines: Vec<BinarySvm> = (0..n_classes)
        .into_par_iter()
        .map(|c| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect();
            solve_binary(gram, y, opts)
        })
        .collect();
    for (c, m) in machines.iter().enumerate() {
        if !m.converged {
            let msg = format!(
                "SMO for class {c} stopped after {} iterations with KKT violation {:.3e}",
                m.iterations, m.kkt_violation
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(SvmModel {
        c: opts.c,
        n_train: n,
        machines,
        jitter,
        warnings,
        kernel: None,
    })
}

/// Maximal violating pair (i from I_up, j from I_low) and the violation
/// m - M; ties go to the lowest index.
fn select_pair(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> (usize, usize, f64) {
    let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
    let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
        let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
        if up && v > gmax {
            gmax = v;
            i = t;
        }
        if low && v < gmin {
            gmin = v;
            j = t;
        }
    }
    (i, j, gmax - gmin)
}

fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    // With grad = Q alpha - e: sum(alpha) - alpha'Q alpha / 2 = -alpha'(grad - e)/2.
    -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

fn solve_binary(k: &DMatrix<f64>, y: Vec<f64>, opts: &SvmOptions) -> BinarySvm {
    let n = y.len();
    let c = opts.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = opts.record_objective.then(|| vec![0.0]);
    let mut iterations = 0;
    let mut violation;
    loop {
        let (i, j, viol) = select_pair(&alpha, &y, &grad, c);
        violation = viol;
        if i == usize::MAX || j == usize::MAX || viol <= opts.tol || iterations >= opts.max_iter {
            break;
        }
        let curvature = (k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)]).max(TAU);
        // Move alpha_i by +y_i*step and alpha_j by -y_j*step; sum(y alpha) stays fixed.
        let mut step = viol / curvature;
        step = step.min(if y[i] > 0.0 { c - alpha[i] } else { alpha[i] });
        step = step.min(if y[j] > 0.0 { alpha[j] } else { c - alpha[j] });
        alpha[i] = (alpha[i] + y[i] * step).clamp(0.0, c);
        alpha[j] = (alpha[j] - y[j] * step).clamp(0.0, c);
        for t in 0..n {
            grad[t] += y[t] * step * (k[(t, i)] - k[(t, j)]);
        }
        iterations += 1;
        if let Some(tr) = trace.as_mut() {
            tr.push(dual_objective(&alpha, &grad));
        }
    }

    let (bias, _) = bias(&alpha, &y, &grad, c);
    BinarySvm {
        support: (0..n).filter(|&t| alpha[t] > 0.0).collect(),
        objective: dual_objective(&alpha, &grad),
        kkt_violation: violation.max(0.0),
        converged: violation <= opts.tol,
        objective_trace: trace,
        iterations,
        bias,
        alpha,
        y,
    }
}

/// Bias from free support vectors, or the midpoint of the feasible
/// interval when every alpha sits at a bound.
fn bias(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> (f64, usize) {
    let mut sum = 0.0;
    let mut free = 0;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += v;
            free += 1;
        } else {
            let at_upper = alpha[t] >= c;
            // v is an upper bound on b when t is in I_low only, a lower bound when in I_up only.
            if (y[t] > 0.0) == at_upper {
                ub = ub.min(v);
            } else {
                lb = lb.max(v);
            }
        }
    }
    if free > 0 {
        (sum / free as f64, free)
    } else {
        let b = match (lb.is_finite(), ub.is_finite()) {
            (true, true) => 0.5 * (lb + ub),
            (true, false) => lb,
            (false, true) => ub,
            _ => 0.0,
        };
        (b, 0)
    }
}

/// n_test x n_classes decision values from the n_train x n_test cross Gram.
pub fn svm_decision_values(model: &SvmModel, gcross: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if gcross.nrows() != model.n_train {
        return Err(Error::Dimension { expected: model.n_train, found: gcross.nrows() });
    }
    let m = gcross.ncols();
    let mut out = DMatrix::zeros(m, model.n_classes());
    for (c, machine) in model.machines.iter().enumerate() {
        for (t, v) in machine.decision(gcross).into_iter().enumerate() {
            out[(t, c)] = v;
        }
    }
    Ok(out)
}

/// Predicted class per test column of `gcross`; ties go to the lowest class index.
pub fn svm_predict(model: &SvmModel, gcross: &DMatrix<f64>) -> Result<Vec<usize>> {
    Ok(argmax_rows(&svm_decision_values(model, gcross)?))
}

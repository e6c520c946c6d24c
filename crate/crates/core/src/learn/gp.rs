//! GP regression on one-hot class targets, with the log marginal likelihood
//! and its gradient for hyperparameter learning.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::{argmax_rows, check_labels, check_square};
use crate::error::{Error, Result};
use crate::gram::gram_with_gradients;
use crate::kernels::{KernelConfig, SequenceKernel};
use crate::sequence::Sequence;

const JITTER_ATTEMPTS: usize = 3;

#[derive(Debug, Clone)]
pub struct GpModel {
    /// Cholesky factor of K + noise*I (+ jitter*I).
    pub factor: Cholesky<f64, Dyn>,
    /// n x C targets.
    pub targets: DMatrix<f64>,
    /// (K + noise*I)^-1 Y.
    pub weights: DMatrix<f64>,
    pub noise: f64,
    pub jitter: f64,
    pub kernel: Option<SequenceKernel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpPrediction {
    /// n_test x C posterior means.
    pub mean: DMatrix<f64>,
    /// Posterior variance per test point (shared by all output columns);
    /// present when the test self-similarities were supplied.
    pub variance: Option<Vec<f64>>,
}

impl GpPrediction {
    pub fn labels(&self) -> Vec<usize> {
        argmax_rows(&self.mean)
    }
}

/// n x C one-hot matrix.
pub fn one_hot(labels: &[usize], n_classes: usize) -> DMatrix<f64> {
    DMatrix::from_fn(labels.len(), n_classes, |i, c| f64::from(u8::from(labels[i] == c)))
}

fn check_noise(noise: f64) -> Result<()> {
    if noise.is_finite() && noise > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("noise variance must be positive, got {noise}")))
    }
}

/// Cholesky of K + noise*I, escalating diagonal jitter from 1e-6*trace/n by
/// factors of 10 when the plain factorization fails.
fn factorize(k: &DMatrix<f64>, noise: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = check_square(k)?;
    if n == 0 {
        return Err(Error::InvalidInput("empty Gram matrix".into()));
    }
    let mut a = k.clone();
    for i in 0..n {
        a[(i, i)] += noise;
    }
    if let Some(ch) = Cholesky::new(a.clone()) {
        return Ok((ch, 0.0));
    }
    let mut jitter = 1e-6 * a.trace().abs() / n as f64;
    if jitter == 0.0 {
        jitter = 1e-6;
    }
    for _ in 0..JITTER_ATTEMPTS {
        let mut b = a.clone();
        for i in 0..n {
            b[(i, i)] += jitter;
        }
        if let Some(ch) = Cholesky::new(b) {
            log::warn!("K + noise*I needed diagonal jitter {jitter:.3e} to factorize");
            return Ok((ch, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!(
        "K + noise*I is not positive definite even with jitter {:.3e}",
        jitter / 10.0
    )))
}

pub fn gp_fit(k: &DMatrix<f64>, labels: &[usize], n_classes: usize, noise: f64) -> Result<GpModel> {
    let n = check_square(k)?;
    let seen = check_labels(labels, n)?;
    if seen > n_classes {
        return Err(Error::InvalidInput(format!("label {} out of range for {n_classes} classes", seen - 1)));
    }
    gp_fit_targets(k, one_hot(labels, n_classes), noise)
}

pub fn gp_fit_targets(k: &DMatrix<f64>, targets: DMatrix<f64>, noise: f64) -> Result<GpModel> {
    check_noise(noise)?;
    let n = check_square(k)?;
    if targets.nrows() != n {
        return Err(Error::Dimension { expected: n, found: targets.nrows() });
    }
    let (factor, jitter) = factorize(k, noise)?;
    let weights = factor.solve(&targets);
    Ok(GpModel { factor, targets, weights, noise, jitter, kernel: None })
}

/// Posterior means for test points from the n_train x n_test cross Gram;
/// `test_diag` (k(x*, x*) per test point) enables variances.
pub fn gp_predict(model: &GpModel, gcross: &DMatrix<f64>, test_diag: Option<&[f64]>) -> Result<GpPrediction> {
    let n = model.targets.nrows();
    if gcross.nrows() != n {
        return Err(Error::Dimension { expected: n, found: gcross.nrows() });
    }
    let mean = gcross.transpose() * &model.weights;
    let variance = match test_diag {
        None => None,
        Some(d) => {
            if d.len() != gcross.ncols() {
                return Err(Error::Dimension { expected: gcross.ncols(), found: d.len() });
            }
            let l = model.factor.l();
            let v = l
                .solve_lower_triangular(gcross)
                .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
            Some(d.iter().enumerate().map(|(t, kt)| kt - v.column(t).norm_squared()).collect())
        }
    };
    Ok(GpPrediction { mean, variance })
}

/// Sum over target columns of the Gaussian log evidence under K + noise*I.
pub fn log_marginal_likelihood(k: &DMatrix<f64>, targets: &DMatrix<f64>, noise: f64) -> Result<f64> {
    check_noise(noise)?;
    let n = check_square(k)?;
    if targets.nrows() != n {
        return Err(Error::Dimension { expected: n, found: targets.nrows() });
    }
    let (factor, _) = factorize(k, noise)?;
    Ok(lml_from_factor(&factor, targets))
}

fn lml_from_factor(factor: &Cholesky<f64, Dyn>, targets: &DMatrix<f64>) -> f64 {
    let n = targets.nrows() as f64;
    let c = targets.ncols() as f64;
    let w = factor.solve(targets);
    let fit = targets.component_mul(&w).sum();
    let logdet = 2.0 * factor.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * fit - 0.5 * c * logdet - 0.5 * c * n * (2.0 * PI).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmlGradient {
    pub value: f64,
    /// d/d(kernel params) in [`KernelConfig::params`] order, then d/d(noise).
    pub grad: Vec<f64>,
}

/// Log marginal likelihood of `targets` under the Gram of `data` and its
/// gradient, via dL/dθ = ½ tr((W Wᵀ − C A⁻¹) dK/dθ) with A = K + noise*I
/// and W = A⁻¹ Y.
pub fn lml_gradient(
    data: &[Sequence],
    cfg: &KernelConfig,
    targets: &DMatrix<f64>,
    noise: f64,
) -> Result<LmlGradient> {
    check_noise(noise)?;
    let (k, dks) = gram_with_gradients(data, cfg)?;
    lml_gradient_from_gram(&k, &dks, targets, noise)
}

pub(crate) fn lml_gradient_from_gram(
    k: &DMatrix<f64>,
    dks: &[DMatrix<f64>],
    targets: &DMatrix<f64>,
    noise: f64,
) -> Result<LmlGradient> {
    let n = check_square(k)?;
    if targets.nrows() != n {
        return Err(Error::Dimension { expected: n, found: targets.nrows() });
    }
    let (factor, _) = factorize(k, noise)?;
    let value = lml_from_factor(&factor, targets);
    let w = factor.solve(targets);
    let c = targets.ncols() as f64;
    let inner = &w * w.transpose() - factor.inverse() * c;
    let mut grad: Vec<f64> = dks.iter().map(|dk| 0.5 * inner.component_mul(dk).sum()).collect();
    grad.push(0.5 * inner.trace());
    Ok(LmlGradient { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_gram_closed_form() {
        let n = 5;
        let mut y = DMatrix::zeros(n, 1);
        y[(2, 0)] = 1.0;
        let l = log_marginal_likelihood(&DMatrix::identity(n, n), &y, 1e-12).unwrap();
        let expected = -0.5 - 0.5 * n as f64 * (2.0 * PI).ln();
        assert!((l - expected).abs() < 1e-9, "{l} vs {expected}");
    }

    #[test]
    fn interpolates_training_point() {
        let x: [f64; 4] = [0.0, 1.0, 2.5, 4.0];
        let k = DMatrix::from_fn(4, 4, |i, j| (-(x[i] - x[j]).powi(2) / 2.0).exp());
        let labels = [0, 1, 1, 0];
        let m = gp_fit(&k, &labels, 2, 1e-9).unwrap();
        let cross = k.columns(1, 1).into_owned();
        let p = gp_predict(&m, &cross, Some(&[1.0])).unwrap();
        assert!((p.mean[(0, 0)] - 0.0).abs() < 1e-3);
        assert!((p.mean[(0, 1)] - 1.0).abs() < 1e-3);
        assert!(p.variance.unwrap()[0].abs() < 1e-6);
    }

    #[test]
    fn single_training_point_scales_target() {
        let k = DMatrix::from_element(1, 1, 2.0);
        let m = gp_fit(&k, &[1], 3, 0.5).unwrap();
        let cross = DMatrix::from_row_slice(1, 2, &[1.0, 0.4]);
        let p = gp_predict(&m, &cross, None).unwrap();
        for t in 0..2 {
            let scale = cross[(0, t)] / 2.5;
            assert!((p.mean[(t, 1)] - scale).abs() < 1e-15);
            assert_eq!(p.mean[(t, 0)], 0.0);
        }
    }

    #[test]
    fn large_noise_predicts_majority() {
        let x: [f64; 5] = [0.0, 0.3, 0.6, 0.9, 5.0];
        let k = DMatrix::from_fn(5, 5, |i, j| (-(x[i] - x[j]).powi(2)).exp());
        let m = gp_fit(&k, &[1, 1, 1, 1, 0], 2, 1e8).unwrap();
        let cross = DMatrix::from_element(5, 1, 0.5);
        assert_eq!(gp_predict(&m, &cross, None).unwrap().labels(), vec![1]);
    }

    #[test]
    fn jitter_escalation_and_failure() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let m = gp_fit(&k, &[0, 1], 2, 1e-300).unwrap();
        assert!(m.jitter > 0.0);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        assert!(matches!(gp_fit(&bad, &[0, 1], 2, 1e-3), Err(Error::Numerical(_))));
        assert!(gp_fit(&k, &[0, 1], 2, 0.0).is_err());
    }

    #[test]
    fn noise_gradient_matches_difference() {
        let x: [f64; 4] = [0.0, 0.7, 1.1, 3.0];
        let k = DMatrix::from_fn(4, 4, |i, j| (-(x[i] - x[j]).powi(2)).exp());
        let y = one_hot(&[0, 0, 1, 1], 2);
        let g = lml_gradient_from_gram(&k, &[], &y, 0.1).unwrap();
        let h = 1e-6;
        let fd = (log_marginal_likelihood(&k, &y, 0.1 + h).unwrap()
            - log_marginal_likelihood(&k, &y, 0.1 - h).unwrap())
            / (2.0 * h);
        assert!((g.grad[0] - fd).abs() < 1e-6 * fd.abs().max(1.0));
    }
}

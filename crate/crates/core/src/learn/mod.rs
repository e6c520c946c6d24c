//! Learners operating on precomputed Gram matrices.

mod fit;
mod gp;
mod pca;
mod svm;

pub use fit::{fit_hyperparameters, FitOptions, FitResult, FitStatus, FitStep};
pub use gp::{
    gp_fit, gp_fit_targets, gp_predict, log_marginal_likelihood, lml_gradient, one_hot, GpModel,
    GpPrediction, LmlGradient,
};
pub use pca::{class_separation, kernel_pca, silhouette, EmbeddingResult, Separation};
pub use svm::{
    svm_decision_values, svm_predict, svm_train, svm_train_with, BinarySvm, SvmModel, SvmOptions,
};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Row-wise argmax of an n x C score matrix.
pub fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    (0..scores.nrows()).map(|i| argmax(scores.row(i).iter().copied())).collect()
}

fn check_square(k: &DMatrix<f64>) -> Result<usize> {
    if !k.is_square() {
        return Err(Error::InvalidInput(format!("Gram matrix is {:?}, not square", k.shape())));
    }
    Ok(k.nrows())
}

fn check_labels(labels: &[usize], n: usize) -> Result<usize> {
    if labels.len() != n {
        return Err(Error::Dimension { expected: n, found: labels.len() });
    }
    Ok(labels.iter().max().map_or(0, |m| m + 1))
}

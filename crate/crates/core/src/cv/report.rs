use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::CvOptions;
use crate::kernels::SequenceKernel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_sequences: usize,
    pub classes: Vec<String>,
    pub dim: usize,
    pub length_min: usize,
    pub length_max: usize,
    pub length_median: f64,
    /// Hex SHA-256 of the sequences.
    pub checksum: String,
}

/// Hyperparameters chosen by the inner loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub kernel: SequenceKernel,
    pub c: f64,
    pub inner_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repetition: usize,
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub selection: Selection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub version: String,
    pub seed: u64,
    pub options: CvOptions,
    pub dataset: DatasetSummary,
    pub candidates: Vec<SequenceKernel>,
    pub folds: Vec<FoldResult>,
    /// Outer-fold accuracies in (repetition, fold) order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation of `accuracies`.
    pub sd: f64,
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

/// Aligned plain-text summary ending in a `mean ± sd%` line.
pub fn format_table(r: &CvReport) -> String {
    let mut out = String::new();
    let d = &r.dataset;
    let _ = writeln!(
        out,
        "dataset: {} sequences, {} classes, dim {}, length {}-{} (median {})",
        d.n_sequences,
        d.classes.len(),
        d.dim,
        d.length_min,
        d.length_max,
        d.length_median
    );
    let _ = writeln!(
        out,
        "protocol: {}x{}-fold outer, {}x{}-fold inner, {} kernels x {} C values, seed {}",
        r.options.outer_reps,
        r.options.outer_folds,
        r.options.inner_reps,
        r.options.inner_folds,
        r.candidates.len(),
        r.options.c_grid.len(),
        r.seed
    );
    let _ = writeln!(out);
    let _ = writeln!(out, "{:>3} {:>4} {:>6} {:>8} {:>8} {:>8}  kernel", "rep", "fold", "n_test", "acc%", "inner%", "C");
    for f in &r.folds {
        let _ = writeln!(
            out,
            "{:>3} {:>4} {:>6} {:>8.2} {:>8.2} {:>8}  {}",
            f.repetition,
            f.fold,
            f.n_test,
            100.0 * f.accuracy,
            100.0 * f.selection.inner_accuracy,
            f.selection.c,
            f.selection.kernel.describe()
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "accuracy: {:.2} ± {:.2}%", 100.0 * r.mean, 100.0 * r.sd);
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

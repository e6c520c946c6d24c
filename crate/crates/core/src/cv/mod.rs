//! Stratified, repeated, nested cross-validation for SVM classification.
//!
//! Gram matrices are computed once per candidate kernel on the full dataset;
//! every fold trains and tests on submatrices. All randomness derives from a
//! single seed, and results are aggregated in a fixed order, so reports do
//! not depend on the number of threads.

mod grid;
mod report;

use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gram::{build_gram, check_psd, dataset_checksum, DEFAULT_PSD_TOL};
use crate::learn::{svm_predict, svm_train_with, SvmOptions};

pub use grid::{
    kernel_grid, median_symbol_distance, Candidate, GridFamily, ALPHA_GRID, C_GRID, PATH_WEIGHTS,
    SIGMA_FACTORS,
};
pub use report::{format_table, CvReport, DatasetSummary, FoldResult, Selection};

/// Mixes a base seed with a path of indices into an independent seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    path.iter().fold(mix(seed), |acc, &p| mix(acc ^ mix(p)))
}

/// Splits `indices` into `k` folds with class proportions preserved.
///
/// Each class's members are shuffled and dealt round-robin, continuing the
/// deal across classes so fold sizes differ by at most one.
pub fn stratified_folds(
    indices: &[usize],
    labels: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::domain(format!("need at least 2 folds, got {k}")));
    }
    let n_classes = indices.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for &i in indices {
        by_class[labels[i]].push(i);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| !by_class[c].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::Stratification(format!(
            "need at least 2 classes, found {}",
            present.len()
        )));
    }
    if let Some(&c) = present.iter().find(|&&c| by_class[c].len() < k) {
        return Err(Error::Stratification(format!(
            "class {c} has {} members, fewer than {k} folds",
            by_class[c].len()
        )));
    }
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for c in present {
        let mut members = std::mem::take(&mut by_class[c]);
        members.shuffle(rng);
        for i in members {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub outer_folds: usize,
    pub inner_folds: usize,
    pub outer_reps: usize,
    pub inner_reps: usize,
    pub c_grid: Vec<f64>,
    pub svm_tol: f64,
    pub seed: u64,
    /// Include wall-clock times in the report (makes it non-reproducible).
    pub record_timings: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            outer_folds: 3,
            inner_folds: 3,
            outer_reps: 3,
            inner_reps: 20,
            c_grid: C_GRID.to_vec(),
            svm_tol: 1e-3,
            seed: 0,
            record_timings: false,
        }
    }
}

fn submatrix(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| g[(rows[i], cols[j])])
}

fn accuracy_count(
    g: &DMatrix<f64>,
    labels: &[usize],
    train: &[usize],
    test: &[usize],
    c: f64,
    tol: f64,
) -> Result<usize> {
    let k = submatrix(g, train, train);
    let y: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    // Every class of the full problem keeps its index; folds are stratified,
    // so each one is present in every training split.
    let opts = SvmOptions { tol, check_psd: false, ..SvmOptions::new(c) };
    let model = svm_train_with(&k, &y, &opts)?;
    let pred = svm_predict(&model, &submatrix(g, train, test))?;
    Ok(pred.iter().zip(test).filter(|(p, &t)| **p == labels[t]).count())
}

fn complement(all: &[usize], fold: &[usize]) -> Vec<usize> {
    all.iter().copied().filter(|i| fold.binary_search(i).is_err()).collect()
}

/// Nested CV: the outer loop estimates accuracy, the inner loop picks
/// (kernel, C) on the outer training split by pooled inner accuracy; ties
/// go to the smaller C, then the larger bandwidth, then grid order.
pub fn nested_cv(data: &Dataset, candidates: &[Candidate], opts: &CvOptions) -> Result<CvReport> {
    let start = Instant::now();
    let labels = data.labels()?;
    if data.class_names.len() < 2 {
        return Err(Error::Stratification(format!(
            "need at least 2 classes, found {}",
            data.class_names.len()
        )));
    }
    if candidates.is_empty() || opts.c_grid.is_empty() {
        return Err(Error::InvalidInput("empty hyperparameter grid".into()));
    }
    if opts.outer_reps == 0 || opts.inner_reps == 0 {
        return Err(Error::domain("repetition counts must be positive"));
    }
    let n = data.len();
    let all: Vec<usize> = (0..n).collect();
    // Validate the outer split up front so a bad dataset fails before any Gram work.
    stratified_folds(&all, &labels, opts.outer_folds, &mut ChaCha8Rng::seed_from_u64(0))?;

    let mut warnings = Vec::new();
    let grams: Vec<DMatrix<f64>> = candidates
        .iter()
        .map(|cand| {
            let g = build_gram(&data.sequences, &cand.kernel)?;
            let mut values = g.values;
            let report = check_psd(&values, DEFAULT_PSD_TOL)?;
            if !report.pass {
                let jitter = -report.min_eig + DEFAULT_PSD_TOL * report.max_eig.abs().max(1.0);
                for i in 0..n {
                    values[(i, i)] += jitter;
                }
                warnings.push(format!(
                    "{}: Gram not PSD (min eigenvalue {:.3e}), added jitter {jitter:.3e}",
                    cand.kernel.describe(),
                    report.min_eig
                ));
            }
            Ok(values)
        })
        .collect::<Result<_>>()?;

    let mut outer_jobs = Vec::new();
    for r in 0..opts.outer_reps {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, &[0, r as u64]));
        let folds = stratified_folds(&all, &labels, opts.outer_folds, &mut rng)?;
        for (f, test) in folds.into_iter().enumerate() {
            outer_jobs.push((r, f, complement(&all, &test), test));
        }
    }

    let folds: Vec<FoldResult> = outer_jobs
        .par_iter()
        .map(|(r, f, train, test)| {
            let t0 = Instant::now();
            let mut inner_splits = Vec::new();
            for ri in 0..opts.inner_reps {
                let seed = derive_seed(opts.seed, &[1, *r as u64, *f as u64, ri as u64]);
                let inner = stratified_folds(train, &labels, opts.inner_folds, &mut ChaCha8Rng::seed_from_u64(seed))?;
                for test_in in inner {
                    inner_splits.push((complement(train, &test_in), test_in));
                }
            }
            let inner_total: usize = inner_splits.iter().map(|(_, t)| t.len()).sum();

            let grid: Vec<(usize, f64)> = (0..candidates.len())
                .flat_map(|k| opts.c_grid.iter().map(move |&c| (k, c)))
                .collect();
            let scores: Vec<usize> = grid
                .par_iter()
                .map(|&(k, c)| {
                    inner_splits.iter().try_fold(0usize, |acc, (tr, te)| {
                        Ok(acc + accuracy_count(&grams[k], &labels, tr, te, c, opts.svm_tol)?)
                    })
                })
                .collect::<Result<_>>()?;

            let mut best = 0;
            for i in 1..grid.len() {
                if better(&grid[i], scores[i], &grid[best], scores[best], candidates) {
                    best = i;
                }
            }
            let (k, c) = grid[best];
            let correct = accuracy_count(&grams[k], &labels, train, test, c, opts.svm_tol)?;
            Ok(FoldResult {
                repetition: *r,
                fold: *f,
                n_train: train.len(),
                n_test: test.len(),
                accuracy: correct as f64 / test.len() as f64,
                selection: Selection {
                    kernel: candidates[k].kernel,
                    c,
                    inner_accuracy: scores[best] as f64 / inner_total as f64,
                },
                seconds: opts.record_timings.then(|| t0.elapsed().as_secs_f64()),
            })
        })
        .collect::<Result<_>>()?;

    let accs: Vec<f64> = folds.iter().map(|f| f.accuracy).collect();
    let (mean, sd) = mean_sd(&accs);
    let stats = data.length_stats();
    Ok(CvReport {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: opts.seed,
        options: opts.clone(),
        dataset: DatasetSummary {
            n_sequences: n,
            classes: data.class_names.clone(),
            dim: data.dim,
            length_min: stats.min,
            length_max: stats.max,
            length_median: stats.median,
            checksum: hex(&dataset_checksum(&data.sequences)),
        },
        candidates: candidates.iter().map(|c| c.kernel).collect(),
        folds,
        accuracies: accs,
        mean,
        sd,
        warnings,
        seconds: opts.record_timings.then(|| start.elapsed().as_secs_f64()),
    })
}

fn better(a: &(usize, f64), sa: usize, b: &(usize, f64), sb: usize, cands: &[Candidate]) -> bool {
    if sa != sb {
        return sa > sb;
    }
    if a.1 != b.1 {
        return a.1 < b.1;
    }
    match (cands[a.0].sigma, cands[b.0].sigma) {
        (Some(x), Some(y)) if x != y => x > y,
        _ => false,
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_sine_cosine;
    use crate::sequence::Sequence;
    use std::collections::BTreeMap;

    #[test]
    fn folds_are_stratified_partitions() {
        let labels: Vec<usize> = (0..17).map(|i| usize::from(i % 3 == 0)).collect();
        let all: Vec<usize> = (0..17).collect();
        let folds = stratified_folds(&all, &labels, 3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let mut seen: Vec<usize> = folds.concat();
        seen.sort_unstable();
        assert_eq!(seen, all);
        for f in &folds {
            assert!((5..=6).contains(&f.len()));
            let ones = f.iter().filter(|&&i| labels[i] == 1).count();
            assert!((1..=3).contains(&ones));
        }
    }

    #[test]
    fn too_small_class() {
        let labels = [0, 0, 0, 1, 1];
        let err = stratified_folds(&[0, 1, 2, 3, 4], &labels, 3, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(err, Err(Error::Stratification(_))));
    }

    #[test]
    fn single_class_dataset() {
        let seqs = (0..6)
            .map(|i| Sequence::univariate(format!("{i}"), vec![i as f64; 3]).unwrap().with_label("a"))
            .collect();
        let d = Dataset::new(seqs, BTreeMap::new()).unwrap();
        let cands = kernel_grid(GridFamily::GlobalAlignment, 1.0, true);
        assert!(matches!(nested_cv(&d, &cands, &CvOptions::default()), Err(Error::Stratification(_))));
    }

    #[test]
    fn mean_sd_sample() {
        let (m, s) = mean_sd(&[1.0, 0.5, 0.75]);
        assert!((m - 0.75).abs() < 1e-15);
        assert!((s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn small_run_is_reproducible() {
        let d = gen_sine_cosine(6, (10, 20), 0.1, 3).unwrap();
        let cands = kernel_grid(GridFamily::Exponential, 1.0, true);
        let opts = CvOptions { inner_reps: 2, outer_reps: 1, seed: 9, ..Default::default() };
        let a = nested_cv(&d, &cands[..4], &opts).unwrap();
        let b = nested_cv(&d, &cands[..4], &opts).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.folds.len(), 3);
        assert!(a.accuracies.iter().all(|x| (0.0..=1.0).contains(x)));
    }
}

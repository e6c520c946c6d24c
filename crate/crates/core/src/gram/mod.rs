//! Gram matrices over datasets of sequences.
//!
//! The structure matrix is built once for the longest sequence in the
//! dataset and shared by every pairwise evaluation. Pairs are evaluated in
//! parallel; each cell is computed independently with a fixed accumulation
//! order, so parallel and sequential builds are bit-identical.

mod io;
mod psd;

use nalgebra::DMatrix;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernels::{
    log_global_alignment_kernel, normalized_gradient, raw_sum, raw_with_gradient, KernelConfig,
    SequenceKernel, StructureMatrix,
};
use crate::sequence::Sequence;

pub use io::{export_csv, load_gram, load_gram_checked, save_gram, write_matrix_csv, GRAM_MAGIC, GRAM_VERSION};
pub use psd::{check_psd, PsdReport, DEFAULT_PSD_TOL};

/// Symmetric matrix of pairwise kernel values with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
    pub ids: Vec<String>,
    pub kernel: SequenceKernel,
    /// SHA-256 of the input sequences, see [`dataset_checksum`].
    pub checksum: [u8; 32],
}

impl GramMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn check_psd(&self, tol: f64) -> Result<PsdReport> {
        check_psd(&self.values, tol)
    }
}

/// SHA-256 over ids, labels, dimensions and the bit patterns of all values.
pub fn dataset_checksum(data: &[Sequence]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((data.len() as u64).to_le_bytes());
    for s in data {
        h.update((s.id().len() as u64).to_le_bytes());
        h.update(s.id().as_bytes());
        match s.label() {
            Some(l) => {
                h.update([1u8]);
                h.update((l.len() as u64).to_le_bytes());
                h.update(l.as_bytes());
            }
            None => h.update([0u8]),
        }
        h.update((s.dim() as u64).to_le_bytes());
        h.update((s.len() as u64).to_le_bytes());
        for v in s.values() {
            h.update(v.to_bits().to_le_bytes());
        }
    }
    h.finalize().into()
}

fn check_dataset(data: &[Sequence]) -> Result<()> {
    let Some(first) = data.first() else {
        return Err(Error::InvalidInput("dataset is empty".into()));
    };
    for s in data {
        if s.dim() != first.dim() {
            return Err(Error::Dimension {
                expected: first.dim(),
                found: s.dim(),
            });
        }
    }
    Ok(())
}

/// A kernel prepared for many evaluations over sequences up to a known length.
enum Prepared {
    Decomposable(KernelConfig, StructureMatrix),
    Alignment(f64),
}

impl Prepared {
    fn new(kernel: &SequenceKernel, max_len: usize) -> Result<Self> {
        kernel.validate()?;
        Ok(match *kernel {
            SequenceKernel::Decomposable(cfg) => {
                Prepared::Decomposable(cfg, StructureMatrix::new(cfg.structure, max_len.max(1))?)
            }
            SequenceKernel::GlobalAlignment { sigma, .. } => Prepared::Alignment(sigma),
        })
    }

    /// Unnormalized value, or its log for the alignment kernel.
    fn raw(&self, s: &Sequence, t: &Sequence) -> Result<f64> {
        match self {
            Prepared::Decomposable(cfg, m) => Ok(raw_sum(s, t, &cfg.symbol, m)),
            Prepared::Alignment(sigma) => log_global_alignment_kernel(s, t, *sigma),
        }
    }

    fn finish(&self, raw: f64, diag_a: Option<f64>, diag_b: Option<f64>) -> Result<f64> {
        match (self, diag_a.zip(diag_b)) {
            (Prepared::Decomposable(..), None) => Ok(raw),
            (Prepared::Decomposable(..), Some((a, b))) => {
                crate::kernels::decomposable_normalize(raw, a, b)
            }
            (Prepared::Alignment(_), None) => Ok(raw.exp()),
            (Prepared::Alignment(_), Some((a, b))) => Ok((raw - 0.5 * a - 0.5 * b).exp()),
        }
    }
}

fn max_len(data: &[&[Sequence]]) -> usize {
    data.iter()
        .flat_map(|d| d.iter())
        .map(Sequence::len)
        .max()
        .unwrap_or(0)
}

fn self_values(p: &Prepared, data: &[Sequence], parallel: bool) -> Result<Vec<f64>> {
    for s in data {
        if s.is_empty() {
            return Err(Error::UndefinedNormalization);
        }
    }
    if parallel {
        data.par_iter().map(|s| p.raw(s, s)).collect()
    } else {
        data.iter().map(|s| p.raw(s, s)).collect()
    }
}

/// Gram matrix over `data` (parallel over pairs).
pub fn build_gram(data: &[Sequence], kernel: &SequenceKernel) -> Result<GramMatrix> {
    build_gram_with(data, kernel, true)
}

/// Gram matrix over `data` evaluated on the calling thread.
pub fn build_gram_sequential(data: &[Sequence], kernel: &SequenceKernel) -> Result<GramMatrix> {
    build_gram_with(data, kernel, false)
}

fn build_gram_with(data: &[Sequence], kernel: &SequenceKernel, parallel: bool) -> Result<GramMatrix> {
    check_dataset(data)?;
    let n = data.len();
    let prepared = Prepared::new(kernel, max_len(&[data]))?;
    let diag = if kernel.normalize() {
        Some(self_values(&prepared, data, parallel)?)
    } else {
        None
    };

    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let eval = |&(i, j): &(usize, usize)| -> Result<f64> {
        if let Some(d) = &diag {
            if i == j {
                return Ok(1.0);
            }
            let raw = prepared.raw(&data[i], &data[j])?;
            prepared.finish(raw, Some(d[i]), Some(d[j]))
        } else {
            let raw = prepared.raw(&data[i], &data[j])?;
            prepared.finish(raw, None, None)
        }
    };
    let values: Vec<f64> = if parallel {
        pairs.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        pairs.iter().map(eval).collect::<Result<_>>()?
    };

    let mut g = DMatrix::zeros(n, n);
    for (&(i, j), v) in pairs.iter().zip(values) {
        g[(i, j)] = v;
        g[(j, i)] = v;
    }
    Ok(GramMatrix {
        values: g,
        ids: data.iter().map(|s| s.id().to_string()).collect(),
        kernel: *kernel,
        checksum: dataset_checksum(data),
    })
}

/// Rectangular `|a| x |b|` matrix of kernel values.
pub fn cross_gram(a: &[Sequence], b: &[Sequence], kernel: &SequenceKernel) -> Result<DMatrix<f64>> {
    if let Some(first) = a.first().or(b.first()) {
        if let Some(s) = a.iter().chain(b).find(|s| s.dim() != first.dim()) {
            return Err(Error::Dimension {
                expected: first.dim(),
                found: s.dim(),
            });
        }
    }
    if a.is_empty() || b.is_empty() {
        return Ok(DMatrix::zeros(a.len(), b.len()));
    }
    let prepared = Prepared::new(kernel, max_len(&[a, b]))?;
    let (da, db) = if kernel.normalize() {
        (
            Some(self_values(&prepared, a, true)?),
            Some(self_values(&prepared, b, true)?),
        )
    } else {
        (None, None)
    };
    let (n, m) = (a.len(), b.len());
    let values: Vec<f64> = (0..n * m)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / m, idx % m);
            let raw = prepared.raw(&a[i], &b[j])?;
            prepared.finish(
                raw,
                da.as_ref().map(|d| d[i]),
                db.as_ref().map(|d| d[j]),
            )
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_row_slice(n, m, &values))
}

/// Gram matrix and its derivative with respect to every continuous kernel
/// parameter (in [`KernelConfig::params`] order).
pub fn gram_with_gradients(
    data: &[Sequence],
    cfg: &KernelConfig,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    check_dataset(data)?;
    cfg.validate()?;
    let n_params = cfg.param_ids()?.len();
    let m = StructureMatrix::with_gradients(cfg.structure, max_len(&[data]).max(1))?;
    if cfg.normalize && data.iter().any(Sequence::is_empty) {
        return Err(Error::UndefinedNormalization);
    }
    let n = data.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let raw: Vec<(f64, Vec<f64>)> = pairs
        .par_iter()
        .map(|&(i, j)| raw_with_gradient(&data[i], &data[j], &cfg.symbol, &m))
        .collect();

    let mut row_start = vec![0usize; n];
    for i in 1..n {
        row_start[i] = row_start[i - 1] + (n - (i - 1));
    }
    let at = |i: usize, j: usize| -> &(f64, Vec<f64>) {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        &raw[row_start[i] + (j - i)]
    };

    let mut k = DMatrix::zeros(n, n);
    let mut dk = vec![DMatrix::zeros(n, n); n_params];
    for &(i, j) in &pairs {
        let (v, g) = if cfg.normalize {
            let (kij, gij) = at(i, j);
            let (kii, gii) = at(i, i);
            let (kjj, gjj) = at(j, j);
            normalized_gradient((*kij, gij), (*kii, gii), (*kjj, gjj))?
        } else {
            at(i, j).clone()
        };
        k[(i, j)] = v;
        k[(j, i)] = v;
        for (p, gp) in g.into_iter().enumerate() {
            dk[p][(i, j)] = gp;
            dk[p][(j, i)] = gp;
        }
    }
    Ok((k, dk))
}

use std::borrow::Cow;

use nalgebra::DMatrix;

use super::{KernelConfig, StructureMatrix, SymbolKernel};
use crate::error::{Error, Result};
use crate::sequence::{check_dims, Sequence};

/// Unnormalized double sum over all symbol pairs, row-major over `(i, j)`.
///
/// `m` must cover both lengths.
#[inline]
pub(crate) fn raw_sum(s: &Sequence, t: &Sequence, symbol: &SymbolKernel, m: &StructureMatrix) -> f64 {
    let mut acc = 0.0;
    for (i, a) in s.symbols().enumerate() {
        let row = m.row(i);
        for (j, b) in t.symbols().enumerate() {
            acc += symbol.eval_unchecked(a, b) * row[j];
        }
    }
    acc
}

/// Resolves the structure matrix to use for a pair of lengths, building one
/// when `m` is missing or too small.
pub(super) fn structure_for<'a>(
    cfg: &KernelConfig,
    m: Option<&'a StructureMatrix>,
    len: usize,
    gradients: bool,
) -> Result<Cow<'a, StructureMatrix>> {
    if let Some(m) = m {
        if m.kernel() != &cfg.structure {
            return Err(Error::InvalidInput(
                "structure matrix was built for a different structure kernel".into(),
            ));
        }
        if m.max_len() >= len && (!gradients || m.n_grads() > 0) {
            return Ok(Cow::Borrowed(m));
        }
    }
    let len = len.max(1);
    Ok(Cow::Owned(if gradients {
        StructureMatrix::with_gradients(cfg.structure, len)?
    } else {
        StructureMatrix::new(cfg.structure, len)?
    }))
}

/// Decomposable sequence kernel `sum_ij k_sym(s_i, t_j) * k_struct(i, j)`.
///
/// Empty sequences give 0 unless `cfg.normalize` is set, in which case they
/// are an error. With `cfg.normalize` the value is divided by
/// `sqrt(k(s,s) * k(t,t))`.
pub fn sequence_kernel(
    s: &Sequence,
    t: &Sequence,
    cfg: &KernelConfig,
    m: Option<&StructureMatrix>,
) -> Result<f64> {
    check_dims(s, t)?;
    cfg.validate()?;
    if cfg.normalize && (s.is_empty() || t.is_empty()) {
        return Err(Error::UndefinedNormalization);
    }
    if s.is_empty() || t.is_empty() {
        return Ok(0.0);
    }
    let m = structure_for(cfg, m, s.len().max(t.len()), false)?;
    let k = raw_sum(s, t, &cfg.symbol, &m);
    if !cfg.normalize {
        return Ok(k);
    }
    let kss = raw_sum(s, s, &cfg.symbol, &m);
    let ktt = raw_sum(t, t, &cfg.symbol, &m);
    normalize(k, kss, ktt)
}

pub(crate) fn normalize(k: f64, kss: f64, ktt: f64) -> Result<f64> {
    if !(kss > 0.0 && ktt > 0.0) {
        return Err(Error::Numerical(format!(
            "cannot normalize with self-similarities {kss} and {ktt}"
        )));
    }
    Ok(k / (kss.sqrt() * ktt.sqrt()))
}

/// Unnormalized kernel as `trace(K_sym^T K_struct)`, with `K_sym` the
/// `|s| x |t|` symbol-kernel matrix and `K_struct` the matching block of
/// structure values.
pub fn sequence_kernel_trace(s: &Sequence, t: &Sequence, cfg: &KernelConfig) -> Result<f64> {
    check_dims(s, t)?;
    cfg.validate()?;
    if s.is_empty() || t.is_empty() {
        return Ok(0.0);
    }
    let (n, m) = (s.len(), t.len());
    let st = StructureMatrix::new(cfg.structure, n.max(m))?;
    let k_sym = DMatrix::from_fn(n, m, |i, j| cfg.symbol.eval_unchecked(s.symbol(i), t.symbol(j)));
    let k_struct = DMatrix::from_fn(n, m, |i, j| st.get(i + 1, j + 1));
    Ok((k_sym.transpose() * k_struct).trace())
}

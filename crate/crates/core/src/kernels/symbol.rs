//! Kernels on individual symbols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::Symbol;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolKernel {
    /// `exp(-|a-b|^2 / (2 sigma^2))`
    Rbf { sigma: f64 },
    /// Euclidean inner product.
    Linear,
    /// 1 when the symbols are identical, 0 otherwise.
    Delta,
}

impl SymbolKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SymbolKernel::Rbf { sigma } if !(sigma.is_finite() && sigma > 0.0) => Err(
                Error::domain(format!("rbf bandwidth must be finite and positive, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SymbolKernel::Rbf { .. } => "rbf",
            SymbolKernel::Linear => "linear",
            SymbolKernel::Delta => "delta",
        }
    }

    /// Evaluates the kernel without checking dimensions.
    #[inline]
    pub(crate) fn eval_unchecked(&self, a: Symbol<'_>, b: Symbol<'_>) -> f64 {
        match *self {
            SymbolKernel::Rbf { sigma } => (-sq_dist(a, b) / (2.0 * sigma * sigma)).exp(),
            SymbolKernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            SymbolKernel::Delta => {
                if a == b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Value and derivative with respect to the bandwidth (zero for kinds without one).
    #[inline]
    pub(crate) fn eval_with_grad(&self, a: Symbol<'_>, b: Symbol<'_>) -> (f64, f64) {
        match *self {
            SymbolKernel::Rbf { sigma } => {
                let d2 = sq_dist(a, b);
                let v = (-d2 / (2.0 * sigma * sigma)).exp();
                (v, v * d2 / (sigma * sigma * sigma))
            }
            _ => (self.eval_unchecked(a, b), 0.0),
        }
    }
}

#[inline]
pub(crate) fn sq_dist(a: Symbol<'_>, b: Symbol<'_>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Evaluates `kernel` on a pair of symbols of equal dimension.
pub fn symbol_kernel(a: Symbol<'_>, b: Symbol<'_>, kernel: &SymbolKernel) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            found: b.len(),
        });
    }
    kernel.validate()?;
    Ok(kernel.eval_unchecked(a, b))
}

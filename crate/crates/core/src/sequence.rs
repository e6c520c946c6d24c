//! Variable-length sequences of fixed-dimension real symbols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single symbol borrowed from a [`Sequence`].
pub type Symbol<'a> = &'a [f64];

/// An ordered list of `dim`-dimensional real symbols, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    id: String,
    label: Option<String>,
    dim: usize,
    values: Vec<f64>,
}

impl Sequence {
    /// Builds a sequence from a flat row-major buffer of `len * dim` values.
    pub fn new(id: impl Into<String>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("symbol dimension must be at least 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "buffer of {} values is not a whole number of {dim}-dimensional symbols",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at symbol {}",
                pos / dim
            )));
        }
        Ok(Self {
            id: id.into(),
            label: None,
            dim,
            values,
        })
    }

    pub fn from_symbols(id: impl Into<String>, symbols: &[Vec<f64>]) -> Result<Self> {
        let dim = symbols
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("cannot infer dimension of an empty sequence".into()))?;
        let mut values = Vec::with_capacity(dim * symbols.len());
        for sym in symbols {
            if sym.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    found: sym.len(),
                });
            }
            values.extend_from_slice(sym);
        }
        Self::new(id, dim, values)
    }

    /// One-dimensional sequence.
    pub fn univariate(id: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Self::new(id, 1, values)
    }

    pub fn empty(id: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new(id, dim, Vec::new())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn set_label(&mut self, label: Option<String>) {
        self.label = label;
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The `i`-th symbol, zero-based.
    pub fn symbol(&self, i: usize) -> Symbol<'_> {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn symbols(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The sequence with its first symbol removed.
    pub fn tail(&self) -> Sequence {
        let start = self.dim.min(self.values.len());
        Sequence {
            id: self.id.clone(),
            label: self.label.clone(),
            dim: self.dim,
            values: self.values[start..].to_vec(),
        }
    }
}

pub(crate) fn check_dims(s: &Sequence, t: &Sequence) -> Result<()> {
    if s.dim() != t.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            found: t.dim(),
        });
    }
    Ok(())
}

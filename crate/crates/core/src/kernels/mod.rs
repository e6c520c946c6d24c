//! Sequence kernels built from a symbol kernel and a structure kernel,
//! plus the global alignment baseline.

mod alignment;
mod gradient;
mod path;
mod decomposable;
mod structure;
mod symbol;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::Sequence;

pub use alignment::{global_alignment_kernel, log_global_alignment_kernel};
pub use gradient::{kernel_gradients, KernelGradient};
pub(crate) use gradient::{normalized_gradient, raw_with_gradient};
pub use path::path_kernel_recursive;
pub use decomposable::{sequence_kernel, sequence_kernel_trace};
pub(crate) use decomposable::{normalize as decomposable_normalize, raw_sum};
pub use structure::{
    factorial, lattice_weights, path_structure_closed_form, path_structure_matrix,
    structure_evaluations, structure_kernel, StructureKernel, StructureMatrix,
};
pub use symbol::{symbol_kernel, SymbolKernel};
pub(crate) use symbol::sq_dist;

/// A decomposable sequence kernel: every symbol pair is compared with
/// `symbol` and weighted by `structure` at their positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub symbol: SymbolKernel,
    pub structure: StructureKernel,
    #[serde(default = "default_normalize")]
    pub normalize: bool,
}

fn default_normalize() -> bool {
    true
}

/// Identifies a continuous kernel parameter that gradients are taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelParam {
    Sigma,
    Alpha,
    Chv,
    Cd,
}

impl KernelParam {
    pub fn name(&self) -> &'static str {
        match self {
            KernelParam::Sigma => "sigma",
            KernelParam::Alpha => "alpha",
            KernelParam::Chv => "chv",
            KernelParam::Cd => "cd",
        }
    }
}

impl KernelConfig {
    pub fn new(symbol: SymbolKernel, structure: StructureKernel) -> Self {
        Self {
            symbol,
            structure,
            normalize: true,
        }
    }

    pub fn normalized(mut self, normalize: bool) -> Self {
        self.normalize = normalize;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.symbol.validate()?;
        self.structure.validate()
    }

    /// Continuous parameters in gradient order: the rbf bandwidth (if any),
    /// then `alpha` or `(chv, cd)`.
    pub fn param_ids(&self) -> Result<Vec<KernelParam>> {
        let mut ids = Vec::new();
        if let SymbolKernel::Rbf { .. } = self.symbol {
            ids.push(KernelParam::Sigma);
        }
        match self.structure {
            StructureKernel::Exponential { .. } => ids.push(KernelParam::Alpha),
            StructureKernel::Path { .. } => ids.extend([KernelParam::Chv, KernelParam::Cd]),
            other => {
                return Err(Error::Unsupported(format!(
                    "{} structure kernel is not differentiable",
                    other.name()
                )))
            }
        }
        Ok(ids)
    }

    pub fn params(&self) -> Result<Vec<f64>> {
        let mut p = Vec::new();
        if let SymbolKernel::Rbf { sigma } = self.symbol {
            p.push(sigma);
        }
        match self.structure {
            StructureKernel::Exponential { alpha } => p.push(alpha),
            StructureKernel::Path { chv, cd } => p.extend([chv, cd]),
            other => {
                return Err(Error::Unsupported(format!(
                    "{} structure kernel is not differentiable",
                    other.name()
                )))
            }
        }
        Ok(p)
    }

    /// Same kinds with parameters replaced, in [`KernelConfig::params`] order.
    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let expected = self.param_ids()?.len();
        if p.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: p.len(),
            });
        }
        let mut out = *self;
        let mut it = p.iter().copied();
        if let SymbolKernel::Rbf { sigma } = &mut out.symbol {
            *sigma = it.next().unwrap();
        }
        match &mut out.structure {
            StructureKernel::Exponential { alpha } => *alpha = it.next().unwrap(),
            StructureKernel::Path { chv, cd } => {
                *chv = it.next().unwrap();
                *cd = it.next().unwrap();
            }
            _ => unreachable!(),
        }
        out.validate()?;
        Ok(out)
    }
}

/// Any sequence kernel this crate can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SequenceKernel {
    Decomposable(KernelConfig),
    /// Global alignment kernel with rbf-derived local similarity.
    GlobalAlignment { sigma: f64, normalize: bool },
}

impl From<KernelConfig> for SequenceKernel {
    fn from(cfg: KernelConfig) -> Self {
        SequenceKernel::Decomposable(cfg)
    }
}

impl SequenceKernel {
    pub fn normalize(&self) -> bool {
        match *self {
            SequenceKernel::Decomposable(cfg) => cfg.normalize,
            SequenceKernel::GlobalAlignment { normalize, .. } => normalize,
        }
    }

    pub fn with_normalize(self, normalize: bool) -> Self {
        match self {
            SequenceKernel::Decomposable(cfg) => {
                SequenceKernel::Decomposable(cfg.normalized(normalize))
            }
            SequenceKernel::GlobalAlignment { sigma, .. } => {
                SequenceKernel::GlobalAlignment { sigma, normalize }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SequenceKernel::Decomposable(cfg) => cfg.validate(),
            SequenceKernel::GlobalAlignment { sigma, .. } => {
                SymbolKernel::Rbf { sigma: *sigma }.validate()
            }
        }
    }

    pub fn as_decomposable(&self) -> Option<&KernelConfig> {
        match self {
            SequenceKernel::Decomposable(cfg) => Some(cfg),
            SequenceKernel::GlobalAlignment { .. } => None,
        }
    }

    /// Short human-readable description, e.g. `path(chv=0.3, cd=0.3) x rbf(sigma=1)`.
    pub fn describe(&self) -> String {
        match *self {
            SequenceKernel::Decomposable(cfg) => {
                let sym = match cfg.symbol {
                    SymbolKernel::Rbf { sigma } => format!("rbf(sigma={sigma})"),
                    other => other.name().to_string(),
                };
                let st = match cfg.structure {
                    StructureKernel::Exponential { alpha } => format!("exponential(alpha={alpha})"),
                    StructureKernel::Polynomial { c, degree } => {
                        format!("polynomial(c={c}, degree={degree})")
                    }
                    StructureKernel::Factorial { d } => format!("factorial(d={d})"),
                    StructureKernel::Path { chv, cd } => format!("path(chv={chv}, cd={cd})"),
                };
                format!("{st} x {sym}{}", if cfg.normalize { ", normalized" } else { "" })
            }
            SequenceKernel::GlobalAlignment { sigma, normalize } => format!(
                "global_alignment(sigma={sigma}){}",
                if normalize { ", normalized" } else { "" }
            ),
        }
    }

    /// Evaluates the kernel on one pair, building any structure values on the fly.
    pub fn eval(&self, s: &Sequence, t: &Sequence) -> Result<f64> {
        match self {
            SequenceKernel::Decomposable(cfg) => sequence_kernel(s, t, cfg, None),
            SequenceKernel::GlobalAlignment { sigma, normalize } => {
                if *normalize {
                    let st = log_global_alignment_kernel(s, t, *sigma)?;
                    let ss = log_global_alignment_kernel(s, s, *sigma)?;
                    let tt = log_global_alignment_kernel(t, t, *sigma)?;
                    Ok((st - 0.5 * ss - 0.5 * tt).exp())
                } else {
                    global_alignment_kernel(s, t, *sigma)
                }
            }
        }
    }
}

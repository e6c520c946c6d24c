//! Hyperparameter grids for model selection.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{sq_dist, KernelConfig, SequenceKernel, StructureKernel, SymbolKernel};

pub const C_GRID: [f64; 4] = [0.1, 1.0, 10.0, 100.0];
pub const SIGMA_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
pub const PATH_WEIGHTS: [f64; 4] = [0.25, 0.3, 0.35, 0.4];
pub const ALPHA_GRID: [f64; 4] = [1.0, 4.0, 16.0, 64.0];

/// Symbols used to estimate the median pairwise distance.
const MEDIAN_SAMPLE: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kernel: SequenceKernel,
    /// Symbol bandwidth, used to break ties toward smoother kernels.
    pub sigma: Option<f64>,
}

impl Candidate {
    pub fn new(kernel: SequenceKernel) -> Self {
        let sigma = match kernel {
            SequenceKernel::Decomposable(KernelConfig { symbol: SymbolKernel::Rbf { sigma }, .. }) => {
                Some(sigma)
            }
            SequenceKernel::GlobalAlignment { sigma, .. } => Some(sigma),
            _ => None,
        };
        Self { kernel, sigma }
    }
}

/// Which kernel parameters are searched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridFamily {
    /// rbf sigma x path (C_hv, C_d).
    Path,
    /// rbf sigma x exponential alpha.
    Exponential,
    /// Global alignment sigma.
    GlobalAlignment,
    /// A single fixed kernel; only C is searched.
    Fixed(SequenceKernel),
}

/// Median Euclidean distance between symbols of the dataset, estimated on
/// a seeded subsample of at most 2000 symbols. Labels are not used.
pub fn median_symbol_distance(data: &Dataset, seed: u64) -> Result<f64> {
    let dim = data.dim;
    let symbols: Vec<&[f64]> = data.sequences.iter().flat_map(|s| s.symbols()).collect();
    let chosen: Vec<&[f64]> = if symbols.len() > MEDIAN_SAMPLE {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = index::sample(&mut rng, symbols.len(), MEDIAN_SAMPLE).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| symbols[i]).collect()
    } else {
        symbols
    };
    let mut d: Vec<f64> = Vec::with_capacity(chosen.len() * chosen.len().saturating_sub(1) / 2);
    for i in 0..chosen.len() {
        for j in i + 1..chosen.len() {
            debug_assert_eq!(chosen[i].len(), dim);
            d.push(sq_dist(chosen[i], chosen[j]).sqrt());
        }
    }
    if d.is_empty() {
        return Err(Error::InvalidInput("need at least two symbols to pick a bandwidth".into()));
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    Ok(if m > 0.0 { m } else { 1.0 })
}

/// Candidate kernels for `family`; bandwidths are multiples of `median`.
pub fn kernel_grid(family: GridFamily, median: f64, normalize: bool) -> Vec<Candidate> {
    let sigmas = SIGMA_FACTORS.map(|f| f * median);
    let decomposable = |sigma: f64, structure| {
        Candidate::new(KernelConfig::new(SymbolKernel::Rbf { sigma }, structure).normalized(normalize).into())
    };
    match family {
        GridFamily::Path => sigmas
            .iter()
            .flat_map(|&s| {
                PATH_WEIGHTS.iter().flat_map(move |&chv| {
                    PATH_WEIGHTS.iter().map(move |&cd| (s, StructureKernel::Path { chv, cd }))
                })
            })
            .map(|(s, st)| decomposable(s, st))
            .collect(),
        GridFamily::Exponential => sigmas
            .iter()
            .flat_map(|&s| ALPHA_GRID.iter().map(move |&alpha| (s, StructureKernel::Exponential { alpha })))
            .map(|(s, st)| decomposable(s, st))
            .collect(),
        GridFamily::GlobalAlignment => sigmas
            .iter()
            .map(|&sigma| Candidate::new(SequenceKernel::GlobalAlignment { sigma, normalize }))
            .collect(),
        GridFamily::Fixed(k) => vec![Candidate::new(k.with_normalize(normalize))],
    }
}

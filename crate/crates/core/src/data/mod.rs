//! Labeled sequence datasets, the SEQT text format and toy generators.

mod seqt;
mod toy;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::Sequence;

pub use seqt::{parse_dataset, parse_seqt, write_dataset, write_seqt};
pub use toy::{gen_sine_cosine, gen_sine_square_spike, SpikeData, SPIKE_COUNT, SPIKE_VALUE};

/// Min, max and median sequence length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub min: usize,
    pub max: usize,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<Sequence>,
    /// Distinct labels, sorted.
    pub class_names: Vec<String>,
    pub dim: usize,
    /// Free-form provenance (generator parameters, seeds, ...).
    pub metadata: BTreeMap<String, String>,
}

impl Dataset {
    pub fn new(sequences: Vec<Sequence>, metadata: BTreeMap<String, String>) -> Result<Self> {
        let Some(first) = sequences.first() else {
            return Err(Error::InvalidInput("dataset has no sequences".into()));
        };
        let dim = first.dim();
        if let Some(s) = sequences.iter().find(|s| s.dim() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                found: s.dim(),
            });
        }
        let class_names = sequences
            .iter()
            .filter_map(|s| s.label().map(str::to_string))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(Self {
            sequences,
            class_names,
            dim,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Class index of every sequence; fails if any sequence is unlabeled.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.sequences
            .iter()
            .map(|s| {
                let l = s.label().ok_or_else(|| {
                    Error::InvalidInput(format!("sequence {} has no label", s.id()))
                })?;
                Ok(self.class_names.binary_search_by(|c| c.as_str().cmp(l)).unwrap())
            })
            .collect()
    }

    pub fn length_stats(&self) -> LengthStats {
        let mut lens: Vec<usize> = self.sequences.iter().map(Sequence::len).collect();
        lens.sort_unstable();
        let n = lens.len();
        let median = if n % 2 == 1 {
            lens[n / 2] as f64
        } else {
            (lens[n / 2 - 1] + lens[n / 2]) as f64 / 2.0
        };
        LengthStats {
            min: lens[0],
            max: lens[n - 1],
            median,
        }
    }

    /// Same sequences under a different labeling.
    pub fn relabeled(&self, labels: &[String]) -> Result<Dataset> {
        if labels.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: labels.len(),
            });
        }
        let seqs = self
            .sequences
            .iter()
            .zip(labels)
            .map(|(s, l)| s.clone().with_label(l.clone()))
            .collect();
        Dataset::new(seqs, self.metadata.clone())
    }
}

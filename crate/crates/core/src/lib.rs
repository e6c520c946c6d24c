//! Decomposable kernels on variable-length sequences.
//!
//! A sequence kernel in this family compares every symbol of one sequence
//! with every symbol of the other and weighs each comparison by a kernel on
//! their positions:
//!
//! ```text
//! k(s, t) = sum_i sum_j k_sym(s_i, t_j) * k_struct(i, j)
//! ```
//!
//! The position kernel depends only on the two lengths, so for a dataset it
//! is tabulated once up to the longest sequence ([`kernels::StructureMatrix`])
//! and every pairwise evaluation is then `O(|s| |t|)`.

pub mod cli;
pub mod cv;
pub mod data;
pub mod error;
pub mod gram;
pub mod kernels;
pub mod learn;
pub mod sequence;

pub use error::{Error, Result};
pub use kernels::{KernelConfig, SequenceKernel, StructureKernel, StructureMatrix, SymbolKernel};
pub use sequence::Sequence;

//! Exact-integer workbench for coherent families of truncated functions,
//! derived limits of the associated inverse systems, and the
//! higher-dimensional Δ-system combinatorics used to trivialize them.

pub mod cli;
pub mod complex;
pub mod delta;
pub mod error;
pub mod family;
pub mod forcing;
pub mod grid;
pub mod linalg;
pub mod par;
pub mod propagation;
pub mod subdivision;

pub use error::{Error, Result};
pub use family::{Family, FunctionSet, SparseZFn, Threshold, TypeIWitness};
pub use grid::{GridPoint, Index, IndexTuple, Region, TruncFn};
pub use par::Exec;

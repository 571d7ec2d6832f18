//! Flexible cross-subspace alignment codes for distributed batch matrix
//! multiplication with arbitrary computation lists.

pub mod assignment;
pub mod codec;
pub mod error;
pub mod field;
pub mod graph;
pub mod io;
pub mod seed;
pub mod simulator;

pub use error::{Error, Result};
pub use field::{FieldMatrix, FieldPolynomial, PrimeField};
pub use graph::ComputationGraph;

//! Anomalous Lieb-Robinson light cones for the Fibonacci XY spin chain.
//!
//! The XY chain reduces, through the Jordan-Wigner transformation, to free
//! fermions hopping under the one-body Jacobi matrix `H_n`. Everything here
//! is built on that reduction: exact propagator rows of `e^{-2iH_n t}`,
//! transport exponents of the one-body problem, the Fibonacci trace map,
//! commutator envelopes for the many-body chain, and a dense many-body
//! oracle that checks the reduction directly at small sizes.

pub mod dimerlab;
pub mod error;
pub mod export;
pub mod fit;
pub mod potential;
pub mod onebody;
pub mod tracemap;
pub mod manybody;
pub mod oracle;
pub mod transport;

pub use error::{Error, Result};

//! Community detection in Markov chains and temporal networks by minimum
//! description length.
//!
//! Tokens and memories (the preceding `n` tokens) are clustered jointly so
//! that the chain's transition counts are explained by a small block matrix.
//! Temporal networks reduce to the same machinery by treating the sequence
//! of edge-group labels as a chain.

pub mod chain;
pub mod combinatorics;
pub mod dl;
pub mod edges;
pub mod error;
pub mod generate;
pub mod inference;
pub mod metrics;
pub mod predict;
pub mod report;
pub mod sequence;
pub mod synthetic;
pub mod temporal;
pub mod waits;

pub use error::{Error, Result};

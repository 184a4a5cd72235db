//! Data-driven tensor-network topology search and its application to
//! multi-view subspace clustering.
//!
//! The crate is organized around a dense column-major tensor type
//! ([`tensor::DenseTensor`]), an edge-rank topology representation
//! ([`topology`]), the adaptive-topology decomposition solver
//! ([`solver`]), reference decompositions ([`baseline`]), an ADMM
//! multi-view subspace clustering solver ([`msc`]), spectral clustering
//! with external evaluation metrics ([`cluster`]), and dataset/tensor
//! I/O plus synthetic generators ([`data`]).

pub mod baseline;
pub mod cluster;
pub mod data;
pub mod error;
pub(crate) mod linalg;
pub mod msc;
pub mod tensor;
pub mod topology;
pub mod solver;

pub use error::{Error, Result};
pub use tensor::DenseTensor;
pub use topology::{FactorSet, TopologyGraph};

//! Euclidean locality-sensitive hashing, fast Gaussian kernel density
//! estimation, and KDE-backed similarity graphs for spectral clustering.
//!
//! The crate is organised around a small pipeline:
//!
//! - [`data`] holds the dense row-major dataset type and its text I/O.
//! - [`lsh`] implements the random-projection hash family and boosted
//!   hash tables built from `K` concatenated functions across `L` tables.
//! - [`kde`] provides exact kernel density queries and a hash-based
//!   estimator that subsamples the dataset at geometric rates and
//!   recovers each kernel-value band from its own hash table.
//! - [`graph`] is a compressed sparse undirected weighted graph with
//!   Laplacian construction.
//! - [`cluster`] builds full and approximate similarity graphs and runs
//!   spectral clustering (eigenvector embedding followed by k-means).
//! - [`synth`] generates labelled benchmark datasets (Gaussian blobs and
//!   interleaved moons).
//!
//! All randomised operations take an explicit `u64` seed and are
//! reproducible bit-for-bit, including internally parallel code paths.

pub mod cluster;
pub mod data;
pub mod error;
pub mod graph;
pub mod kde;
pub mod lsh;
pub mod synth;

mod eigen;
mod util;

pub use data::{load_matrix, matrix_to_datapoints, save_matrix, DataPoint, DenseMatrix};
pub use error::{Error, Result};
pub use graph::SparseGraph;
pub use kde::{gaussian_kernel, kernel_eval, CknsGaussianKde, ExactKde, KernelConfig};
pub use lsh::{boosted_collision_probability, collision_probability, E2LshTable, LshFunction};

//! Sampling-set selection and least-squares reconstruction for signals in
//! Kronecker-structured linear models.
//!
//! A dense vector or tensor signal is represented through per-mode factor
//! matrices and a small core; measuring it means picking rows per mode and
//! reading the intersection grid. This crate selects those rows — fast
//! score-ranking samplers with near-optimality certificates, greedy
//! frame-potential baselines, seeded random selection, and an exhaustive
//! oracle — then reconstructs the signal by least squares and evaluates
//! frame potential, estimator MSE, and certificate bounds.
//!
//! ```
//! use kronsampler::{fp::FactorMatrix, instances, samplers};
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
//! let factor = FactorMatrix::new(instances::gaussian_matrix(&mut rng, 30, 4));
//! let selection = samplers::ffw_vector(&factor, 10).unwrap();
//! assert_eq!(selection.budget(), 10);
//! ```
//!
//! The `parallel` feature (on by default) runs the data-parallel inner
//! loops on rayon; without it every kernel falls back to its sequential
//! twin with identical results.

pub mod bounds;
pub mod error;
pub mod fp;
pub mod instances;
pub mod io;
pub mod linalg;
pub mod recon;
pub mod samplers;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};
pub use fp::FactorMatrix;
pub use linalg::{DenseMatrix, IndexSet};
pub use samplers::{Algorithm, Objective, ProblemInstance, Selection};

//! Stochastic matrix factorization.
//!
//! Non-negative factorizations `X ≈ W H` where the rows of at least one
//! factor are probability distributions. The crate provides
//!
//! - [`matrix`]: dense matrices, pseudoinverse, simplex projection, file formats;
//! - [`solver`]: the concentrated constrained least-squares estimator;
//! - [`identifiability`]: the support-set uniqueness test, axis-aligned bounds
//!   on the identified set, and a brute-force sampler of observationally
//!   equivalent mixing matrices;
//! - [`synthetic`]: ground-truth instances and permutation-aligned scoring;
//! - [`applications`]: the face-image and topic-model pipelines.

pub mod applications;
pub mod error;
pub mod factors;
pub mod identifiability;
pub mod matrix;
pub mod solver;
pub mod synthetic;

pub use error::{Result, SmfError};
pub use factors::{FactorPair, Orientation};
pub use matrix::DenseMatrix;
pub use solver::{factorize, Mode, SolveResult, SolverConfig};

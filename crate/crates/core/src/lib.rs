//! Noisy inductive matrix completion.
//!
//! Estimates a low-rank `n1 x n2` matrix from a sparse set of noisy entries
//! when its column and row spaces are (approximately) known to lie inside
//! given feature subspaces `X`, `Y`. The main estimator runs gradient descent
//! on the factored core `Z = A B^T` from a spectral initialization; the
//! ambient-space matrix completion baseline and a penalized interpolation
//! between the two share the same machinery.

pub mod diagnostics;
pub mod error;
pub mod matrix;
pub mod movielens;
pub mod solvers;
pub mod synthetic;

pub use error::{Error, Result};
pub use matrix::{Entry, FactorPair, GroundTruth, Matrix, ObservationSet, SideInfo};

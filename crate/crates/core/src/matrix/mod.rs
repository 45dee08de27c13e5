//! Dense and sparse matrix types and the domain types built from them.

pub mod csv;
mod dense;
mod model;
mod sparse;

pub use dense::{
    ensure_finite, factored_frob, factored_frob_sq, frob_inner, from_rows, orthonormality_defect,
    orthonormalize, orthonormalize_dropping, projector_distance, row_norms_sq, spectral_norm, svd,
    two_inf_norm, Matrix, Svd, RANK_TOL,
};
pub use model::{FactorPair, GroundTruth, SideInfo, ORTHONORMAL_TOL};
pub(crate) use model::incoherence_of_bases;
pub use sparse::{Entry, ObservationSet};

//! Erasing guarded attributes from representations when the attribute
//! records are not aligned with the inputs.
//!
//! The crate alternates two coordinate-ascent steps over a shared objective:
//! an assignment step that solves a bounded many-to-one matching between
//! input rows and guarded records, and a maximization step that takes the
//! SVD of the empirical cross-covariance under that matching. The final
//! projection is then used to remove the guarded directions (spectral
//! removal) or an alternative nullspace-projection backend is fitted on the
//! recovered labels.
//!
//! Everything here is pure computation over dense `f64` matrices and builds
//! without `std`; file formats, the CLI and threaded seed execution live in
//! the companion `amsal` crate.

#![no_std]

extern crate alloc;

pub mod amsal;
pub mod assignment;
mod error;
pub mod kmeans;
pub mod linalg;
pub mod metrics;
pub mod probe;
pub mod removal;
pub mod rng;
pub mod synthetic;

pub use amsal::{
    am_iterate, run_amsal, run_amsal_traced, run_seed, select_model, AmsalConfig, AmsalResult,
    AmsalTrace, Candidate, ScoreK, Selection, TraceRow,
};
pub use assignment::{
    bounds_from_priors, brute_force_assignment, score_matrix, solve_assignment, Assignment,
    BoundViolation, GuardedRecords, ScoreMatrix,
};
pub use error::{Error, Result};
pub use kmeans::kmeans_assign;
pub use linalg::{
    center_columns, cross_covariance, frobenius_norm, numerical_rank, singular_value_sum,
    spectral_norm, svd, Matrix, SvdResult,
};
pub use metrics::EvalReport;
pub use removal::{apply_eraser, fit_inlp, fit_sal, Eraser, EraserKind, RemovalRank};

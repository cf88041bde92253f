//! ℓ¹-penalized Tikhonov regularization for discretized ill-posed linear
//! operator equations `Ax = y` with noisy data `y^δ`, `‖y − y^δ‖ ≤ δ`.
//!
//! The crate is organised bottom-up:
//!
//! - [`sequences`]: finite truncations of ℓ¹ sequences, solution models with
//!   analytic tail sums, norms and soft-thresholding.
//! - [`operators`]: the example operator family (identity, embeddings,
//!   bidiagonal sum, first-row summation, diagonal) as sparse truncations with
//!   adjoints, norm estimation and conditioning/weak* diagnostics.
//! - [`solver`]: minimization of `(1/p)‖Ax − y^δ‖^p + α‖x‖₁` (and the
//!   elastic-net variant) with an exhaustive oracle for tiny instances.
//! - [`parameter_choice`]: the a priori rule `α = δ^p/φ(δ)` and the
//!   sequential discrepancy principle.
//! - [`source_conditions`]: γ_n sequences, the index function
//!   `φ(t) = 2 inf_n (tail(n) + γ_n t)`, dual witnesses for the bidiagonal
//!   operator and sampling checks of the variational inequalities.
//! - [`rates`]: noise synthesis, δ-sweeps and log-log slope fits.
//! - [`presets`] and [`csv`]: bundled studies and deterministic CSV output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csv;
pub mod error;
pub mod operators;
pub mod parameter_choice;
pub mod presets;
pub mod rates;
pub mod sequences;
pub mod solver;
pub mod source_conditions;

pub use error::{Error, Result};
pub use operators::{OperatorKind, OperatorSpec, OperatorTruncation, SingularValueRule};
pub use sequences::{NormKind, SequenceModel, TruncatedSequence};
pub use solver::{SolveDiagnostics, SolveOptions, TikhonovProblem};

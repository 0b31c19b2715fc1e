//! Finite-dimensional models for pairs of almost-commuting unitaries.
//!
//! The crate provides, at matrix scale:
//!
//! - dense complex linear algebra tuned for unitary (normal) matrices,
//!   including polar decomposition and the principal matrix logarithm
//!   ([`linalg`]);
//! - a small expression language for clock/shift generator matrices
//!   ([`expr`]);
//! - canonical forms of λ-commuting unitary pairs and joint spectra of
//!   commuting pairs ([`pairs`]);
//! - equidistribution diagnostics for finite sequences on tori: Weyl
//!   sums, box discrepancy, and bottleneck matching against product
//!   grids ([`equidist`]);
//! - winding-number and path-determinant invariants ([`invariants`]);
//! - truncated Rohlin towers under the index shift and the exact
//!   intertwiner construction ([`towers`]);
//! - product-type action specs, their classification invariant, and the
//!   regime trichotomy for the ambient algebra ([`actions`]).
//!
//! All values are immutable after construction and all operations are
//! pure, so everything here is safe to use from multiple threads.

pub mod actions;
pub mod equidist;
pub mod expr;
pub mod invariants;
pub mod linalg;
pub mod pairs;
pub mod towers;

#[cfg(test)]
pub(crate) mod testutil;

pub use linalg::{ComplexMatrix, TorusPoint, UnitaryMatrix};


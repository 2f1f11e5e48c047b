//! Beam-splitter entanglement laboratory.
//!
//! Simulates passive linear-optical transformations on truncated multimode Fock spaces
//! and checks that classical inputs (non-negative P-functions) come out separable,
//! along two independent routes: the closed-form coherent-ensemble map and the numeric
//! density-operator pipeline with partial-transpose tests. A Gaussian covariance
//! oracle cross-checks both.

pub mod cli;
pub mod error;
pub mod gaussian;
pub mod hilbert;
pub mod passive;
pub mod states;
pub mod theoremlab;
pub mod tolerance;
pub mod witnesses;

pub use error::{Error, Result};
pub use hilbert::C64;

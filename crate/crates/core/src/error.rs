use thiserror::Error;

/// Errors raised by the simulator and its checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid arena: {0}")]
    InvalidArena(String),

    #[error("mode index {mode} out of range for {n_modes} mode(s)")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("cutoff mismatch: {left} vs {right}")]
    CutoffMismatch { left: usize, right: usize },

    #[error("mode count mismatch: expected {expected}, got {actual}")]
    ModeCountMismatch { expected: usize, actual: usize },

    #[error("occupation {occupation} on mode {mode} is not below the cutoff {cutoff}")]
    OccupationOutOfRange {
        mode: usize,
        occupation: usize,
        cutoff: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid mode set: {0}")]
    InvalidModeSet(String),

    /// Probability weight lost to the photon-number cutoff exceeds the budget.
    #[error("truncation leakage {leakage:.3e} exceeds budget {budget:.3e}")]
    TruncationLeak { leakage: f64, budget: f64 },

    #[error("weight {weight} at component {index} is negative; classical ensembles require non-negative weights")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("matrix is not unitary: max|M^dagger M - I| = {defect:.3e}")]
    NotUnitary { defect: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for failures caused by the finite photon-number cutoff rather than
    /// by the physics under test.
    pub fn is_truncation(&self) -> bool {
        matches!(self, Error::TruncationLeak { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use serde::{Deserialize, Serialize};

/// Probability budget that may be lost to the photon-number cutoff.
pub const LEAK_TOL: f64 = 1e-6;
/// Allowed negative eigenvalue of a density operator, relative to its scale.
pub const PSD_TOL: f64 = 1e-10;
/// Relative Hermiticity tolerance for density operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Partial-transpose eigenvalues below `-PPT_TOL` certify entanglement.
pub const PPT_TOL: f64 = 1e-8;
/// Allowed max-norm disagreement between the coherent-ensemble and density pipelines.
pub const PIPELINE_TOL: f64 = 1e-7;
/// Band around zero within which Gaussian margins count as non-negative.
pub const VERDICT_BAND: f64 = 1e-10;
/// Unitarity tolerance for mode matrices.
pub const UNITARY_TOL: f64 = 1e-12;
/// Threshold for the sub-Poissonian and squeezing flags.
pub const WITNESS_TOL: f64 = 1e-8;

/// Tolerance set threaded through campaigns; every field defaults to the constants above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub leak_tol: f64,
    pub psd_tol: f64,
    pub ppt_tol: f64,
    pub pipeline_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            leak_tol: LEAK_TOL,
            psd_tol: PSD_TOL,
            ppt_tol: PPT_TOL,
            pipeline_tol: PIPELINE_TOL,
        }
    }
}

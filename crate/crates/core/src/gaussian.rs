//! Closed-form Gaussian oracle.
//!
//! Conventions: `hbar = 1`, `a = (x + i p) / sqrt(2)`, vacuum quadrature variance 1/2,
//! quadratures interleaved as `(x_1, p_1, .., x_n, p_n)`. Mode `j` of a Gaussian state
//! is mode `j` of the Fock arena.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::C64;
use crate::passive::ModeUnitary;
use crate::states::GaussianSpec;
use crate::tolerance::{PSD_TOL, VERDICT_BAND};

const SYMMETRY_TOL: f64 = 1e-12;
const SYMPLECTIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    n_modes: usize,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

/// Standard symplectic form `Omega = diag([[0, 1], [-1, 0]], ..)`.
pub fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for j in 0..n_modes {
        omega[(2 * j, 2 * j + 1)] = 1.0;
        omega[(2 * j + 1, 2 * j)] = -1.0;
    }
    omega
}

impl GaussianState {
    /// Validates symmetry and the uncertainty relation `cov + (i/2) Omega >= 0`.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "mean vector length {dim} is not a positive even number"
            )));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: cov.nrows().max(cov.ncols()),
            });
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL * cov.amax().max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "covariance is not symmetric (defect {asym:.3e})"
            )));
        }
        let state = Self {
            n_modes: dim / 2,
            mean,
            cov,
        };
        let margin = state.uncertainty_margin();
        if margin < -PSD_TOL * state.cov.amax().max(1.0) {
            return Err(Error::InvariantViolation(format!(
                "covariance violates the uncertainty relation (margin {margin:.3e})"
            )));
        }
        Ok(state)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + (i/2) Omega`.
    pub fn uncertainty_margin(&self) -> f64 {
        let omega = symplectic_form(self.n_modes);
        let h = DMatrix::<C64>::from_fn(self.cov.nrows(), self.cov.ncols(), |i, j| {
            C64::new(self.cov[(i, j)], 0.5 * omega[(i, j)])
        });
        h.symmetric_eigenvalues().min()
    }

    /// Coherent amplitude of each mode, `(x + i p) / sqrt(2)`.
    pub fn amplitudes(&self) -> Vec<C64> {
        (0..self.n_modes)
            .map(|j| C64::new(self.mean[2 * j], self.mean[2 * j + 1]) / 2f64.sqrt())
            .collect()
    }

    /// 2x2 covariance block between modes `j` and `k`.
    pub fn block(&self, j: usize, k: usize) -> Matrix2<f64> {
        Matrix2::new(
            self.cov[(2 * j, 2 * k)],
            self.cov[(2 * j, 2 * k + 1)],
            self.cov[(2 * j + 1, 2 * k)],
            self.cov[(2 * j + 1, 2 * k + 1)],
        )
    }
}

fn rotation(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Product Gaussian state with one spec per mode.
pub fn gaussian_from_spec(specs: &[GaussianSpec]) -> Result<GaussianState> {
    if specs.is_empty() {
        return Err(Error::InvalidParameter("no modes given".into()));
    }
    let n = specs.len();
    let mut mean = DVector::zeros(2 * n);
    let mut cov = DMatrix::zeros(2 * n, 2 * n);
    for (j, spec) in specs.iter().enumerate() {
        spec.validate()?;
        let block = match *spec {
            GaussianSpec::Coherent { alpha } => {
                mean[2 * j] = 2f64.sqrt() * alpha.re;
                mean[2 * j + 1] = 2f64.sqrt() * alpha.im;
                Matrix2::identity() * 0.5
            }
            GaussianSpec::Thermal { nbar } => Matrix2::identity() * (nbar + 0.5),
            GaussianSpec::SqueezedVacuum { r, theta_s } => {
                // The squeezed quadrature of S(r e^{i theta}) sits at phase theta / 2.
                let rot = rotation(theta_s / 2.0);
                let diag = Matrix2::new((-2.0 * r).exp(), 0.0, 0.0, (2.0 * r).exp()) * 0.5;
                rot * diag * rot.transpose()
            }
        };
        cov.view_mut((2 * j, 2 * j), (2, 2)).copy_from(&block);
    }
    GaussianState::new(mean, cov)
}

/// Real `2n x 2n` phase-space image of a passive transformation.
///
/// A coherent amplitude column vector maps as `alpha -> N alpha` with `N = M^dagger`
/// (the row-vector form `alpha * conj(M)`). Writing `N = X + iY`, block `(j, k)` is
/// `[[X_jk, -Y_jk], [Y_jk, X_jk]]`. The result is orthogonal and symplectic.
pub fn symplectic_image(m: &ModeUnitary) -> Result<DMatrix<f64>> {
    let n = m.n_modes();
    let amp_map = m.matrix().adjoint();
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            let z = amp_map[(j, k)];
            s[(2 * j, 2 * k)] = z.re;
            s[(2 * j, 2 * k + 1)] = -z.im;
            s[(2 * j + 1, 2 * k)] = z.im;
            s[(2 * j + 1, 2 * k + 1)] = z.re;
        }
    }
    let id = DMatrix::<f64>::identity(2 * n, 2 * n);
    let orth = (s.transpose() * &s - &id).amax();
    let omega = symplectic_form(n);
    let sympl = (&s * &omega * s.transpose() - &omega).amax();
    if orth > SYMPLECTIC_TOL || sympl > SYMPLECTIC_TOL {
        return Err(Error::InvariantViolation(format!(
            "phase-space image is not orthogonal-symplectic ({orth:.3e}, {sympl:.3e})"
        )));
    }
    Ok(s)
}

/// `mean -> S mean`, `cov -> S cov S^T`.
pub fn apply_passive(g: &GaussianState, m: &ModeUnitary) -> Result<GaussianState> {
    if g.n_modes() != m.n_modes() {
        return Err(Error::ModeCountMismatch {
            expected: g.n_modes(),
            actual: m.n_modes(),
        });
    }
    let s = symplectic_image(m)?;
    let mean = &s * g.mean();
    let cov = &s * g.cov() * s.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    GaussianState::new(mean, cov)
}

/// Verdict with its signed margin; non-negative margins (within the shared band) pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalityVerdict {
    pub classical: bool,
    /// Smallest eigenvalue of `cov - I/2`.
    pub margin: f64,
}

/// P-representability of a Gaussian state: `cov - I/2 >= 0`.
pub fn is_classical(g: &GaussianState) -> ClassicalityVerdict {
    let dim = g.cov().nrows();
    let shifted = g.cov() - DMatrix::<f64>::identity(dim, dim) * 0.5;
    let margin = shifted.symmetric_eigen().eigenvalues.min();
    ClassicalityVerdict {
        classical: margin >= -VERDICT_BAND,
        margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparabilityVerdict {
    pub separable: bool,
    /// Slack of the Simon inequality; negative means entangled.
    pub margin: f64,
}

/// Simon's PPT criterion for two-mode Gaussian states, with `cov = [[A, C], [C^T, B]]`:
///
/// `det A det B + (1/4 - |det C|)^2 - tr(A J C J B J C^T J) - (det A + det B)/4 >= 0`.
pub fn simon_separable(g: &GaussianState) -> Result<SeparabilityVerdict> {
    if g.n_modes() != 2 {
        return Err(Error::ModeCountMismatch {
            expected: 2,
            actual: g.n_modes(),
        });
    }
    let a = g.block(0, 0);
    let b = g.block(1, 1);
    let c = g.block(0, 1);
    let j = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let (det_a, det_b, det_c) = (a.determinant(), b.determinant(), c.determinant());
    let cross = (a * j * c * j * b * j * c.transpose() * j).trace();
    let margin =
        det_a * det_b + (0.25 - det_c.abs()).powi(2) - cross - 0.25 * (det_a + det_b);
    Ok(SeparabilityVerdict {
        separable: margin >= -VERDICT_BAND,
        margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::passive::{beam_splitter_matrix, transform_ensemble};
    use crate::states::CoherentEnsemble;
    use std::f64::consts::FRAC_PI_4;

    /// Smallest symplectic eigenvalue of the partially transposed covariance.
    fn pt_symplectic_min(g: &GaussianState) -> f64 {
        let mut flip = DMatrix::<f64>::identity(4, 4);
        flip[(3, 3)] = -1.0;
        let v = &flip * g.cov() * &flip;
        let a = v.view((0, 0), (2, 2)).determinant();
        let b = v.view((2, 2), (2, 2)).determinant();
        let c = v.view((0, 2), (2, 2)).determinant();
        let delta = a + b + 2.0 * c;
        let det = v.determinant();
        ((delta - (delta * delta - 4.0 * det).max(0.0).sqrt()) / 2.0).sqrt()
    }

    fn tmsv(r: f64) -> GaussianState {
        let specs = [
            GaussianSpec::SqueezedVacuum { r, theta_s: 0.0 },
            GaussianSpec::SqueezedVacuum { r, theta_s: std::f64::consts::PI },
        ];
        apply_passive(&gaussian_from_spec(&specs).unwrap(), &beam_splitter_matrix(FRAC_PI_4, 0.0, 0.0)).unwrap()
    }

    #[test]
    fn closed_form_covariances() {
        let vac = gaussian_from_spec(&[GaussianSpec::vacuum()]).unwrap();
        assert_eq!(vac.mean().amax(), 0.0);
        assert_eq!(vac.cov(), &(DMatrix::identity(2, 2) * 0.5));
        let th = gaussian_from_spec(&[GaussianSpec::Thermal { nbar: 1.0 }]).unwrap();
        assert_eq!(th.cov(), &(DMatrix::identity(2, 2) * 1.5));
        let sq = gaussian_from_spec(&[GaussianSpec::SqueezedVacuum { r: 0.5, theta_s: 0.7 }]).unwrap();
        let min = sq.cov().clone().symmetric_eigen().eigenvalues.min();
        assert!((min - 0.183_939_720_585_721_2).abs() < 1e-12);
        assert!(gaussian_from_spec(&[GaussianSpec::Thermal { nbar: -1.0 }]).is_err());
        assert!(gaussian_from_spec(&[]).is_err());
    }

    #[test]
    fn uncertainty_relation_is_enforced() {
        let bad = DMatrix::identity(2, 2) * 0.3;
        assert!(GaussianState::new(DVector::zeros(2), bad).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(GaussianState::new(DVector::zeros(2), asym).is_err());
    }

    #[test]
    fn identity_leaves_state_unchanged_and_vacuum_is_fixed() {
        let specs = [GaussianSpec::Thermal { nbar: 0.4 }, GaussianSpec::Coherent { alpha: C64::new(0.3, -0.2) }];
        let g = gaussian_from_spec(&specs).unwrap();
        let same = apply_passive(&g, &ModeUnitary::identity(2)).unwrap();
        assert!((same.cov() - g.cov()).amax() < 1e-15);
        assert!((same.mean() - g.mean()).amax() < 1e-15);

        let vac = gaussian_from_spec(&[GaussianSpec::vacuum(), GaussianSpec::vacuum()]).unwrap();
        let out = apply_passive(&vac, &beam_splitter_matrix(0.9, 0.3, -1.7)).unwrap();
        assert!((out.cov() - vac.cov()).amax() < 1e-15);
    }

    #[test]
    fn coherent_mean_follows_ensemble_map() {
        let alphas = vec![C64::new(0.7, -0.1), C64::new(-0.2, 0.4)];
        let m = beam_splitter_matrix(0.5, 0.8, -0.3);
        let g = gaussian_from_spec(&alphas.iter().map(|&alpha| GaussianSpec::Coherent { alpha }).collect::<Vec<_>>()).unwrap();
        let out = apply_passive(&g, &m).unwrap();
        let ens = transform_ensemble(&CoherentEnsemble::pure(alphas).unwrap(), &m).unwrap();
        for (x, y) in out.amplitudes().iter().zip(&ens.components()[0].alphas) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn classicality_verdicts() {
        for nbar in [0.0, 0.3, 2.0] {
            let v = is_classical(&gaussian_from_spec(&[GaussianSpec::Thermal { nbar }]).unwrap());
            assert!(v.classical);
            assert!((v.margin - nbar).abs() < 1e-12);
        }
        let r = 0.4;
        let v = is_classical(&gaussian_from_spec(&[GaussianSpec::SqueezedVacuum { r, theta_s: 0.0 }]).unwrap());
        assert!(!v.classical);
        assert!((v.margin - ((-2.0 * r).exp() / 2.0 - 0.5)).abs() < 1e-12);
        let vac = is_classical(&gaussian_from_spec(&[GaussianSpec::vacuum()]).unwrap());
        assert!(vac.classical);
        assert_eq!(vac.margin, 0.0);
    }

    #[test]
    fn simon_on_products_and_two_mode_squeezing() {
        let prod = gaussian_from_spec(&[
            GaussianSpec::SqueezedVacuum { r: 0.8, theta_s: 0.2 },
            GaussianSpec::Thermal { nbar: 0.3 },
        ])
        .unwrap();
        assert!(simon_separable(&prod).unwrap().separable);

        let g = tmsv(0.5);
        let v = simon_separable(&g).unwrap();
        assert!(!v.separable);
        // Closed form: margin = -sinh^2(2r) / 4.
        assert!((v.margin + (1.0f64).sinh().powi(2) / 4.0).abs() < 1e-12);
        // PT symplectic eigenvalue e^{-2r}/2 < 1/2.
        assert!((pt_symplectic_min(&g) - (-1.0f64).exp() / 2.0).abs() < 1e-12);

        let three = gaussian_from_spec(&[GaussianSpec::vacuum(); 3]).unwrap();
        assert!(simon_separable(&three).is_err());
    }

    #[test]
    fn simon_agrees_with_symplectic_oracle() {
        let cases = [
            tmsv(0.2),
            tmsv(0.0),
            apply_passive(
                &gaussian_from_spec(&[GaussianSpec::SqueezedVacuum { r: 0.6, theta_s: 0.0 }, GaussianSpec::Thermal { nbar: 0.2 }]).unwrap(),
                &beam_splitter_matrix(0.7, 0.1, 0.4),
            )
            .unwrap(),
            apply_passive(
                &gaussian_from_spec(&[GaussianSpec::Thermal { nbar: 1.2 }, GaussianSpec::Coherent { alpha: C64::new(1.0, 2.0) }]).unwrap(),
                &beam_splitter_matrix(0.3, -0.8, 2.1),
            )
            .unwrap(),
        ];
        for g in &cases {
            let simon = simon_separable(g).unwrap();
            let oracle = pt_symplectic_min(g) >= 0.5 - 1e-9;
            assert_eq!(simon.separable, oracle, "margin {}", simon.margin);
        }
    }
}

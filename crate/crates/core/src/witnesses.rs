//! Entanglement and nonclassicality diagnostics on truncated density operators.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigenvalues, partial_transpose, DensityOperator, C64};
use crate::tolerance::{PPT_TOL, WITNESS_TOL};

/// Mean photon number below which Mandel Q is defined as 0.
const VACUUM_MEAN: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PptVerdict {
    /// No partial-transpose eigenvalue below `-ppt_tol`. Not a proof of separability.
    SeparableByPptNonviolation,
    Entangled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntanglementReport {
    pub bipartition: (Vec<usize>, Vec<usize>),
    pub min_pt_eigenvalue: f64,
    pub negativity: f64,
    pub log_negativity: f64,
    pub verdict: PptVerdict,
}

fn check_bipartition(n_modes: usize, a: &[usize], b: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut seen = vec![false; n_modes];
    for &m in a.iter().chain(b) {
        if m >= n_modes {
            return Err(Error::ModeOutOfRange { mode: m, n_modes });
        }
        if seen[m] {
            return Err(Error::InvalidModeSet(format!("mode {m} appears twice in the bipartition")));
        }
        seen[m] = true;
    }
    if a.is_empty() || b.is_empty() || seen.contains(&false) {
        return Err(Error::InvalidModeSet(
            "bipartition must split all modes into two non-empty parts".into(),
        ));
    }
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    Ok((a, b))
}

/// One representative of every bipartition of `n_modes` modes, smaller part first.
///
/// For three modes these are the three 1-vs-2 splits.
pub fn bipartitions(n_modes: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    if n_modes < 2 || n_modes >= usize::BITS as usize {
        return out;
    }
    for mask in 1usize..(1 << n_modes) - 1 {
        let size = mask.count_ones() as usize;
        let keep = 2 * size < n_modes || (2 * size == n_modes && mask & 1 == 1);
        if keep {
            let a = (0..n_modes).filter(|m| mask >> m & 1 == 1).collect();
            let b = (0..n_modes).filter(|m| mask >> m & 1 == 0).collect();
            out.push((a, b));
        }
    }
    out.sort_by(|x, y| x.0.len().cmp(&y.0.len()).then_with(|| x.0.cmp(&y.0)));
    out
}

pub fn negativity_report(rho: &DensityOperator, a: &[usize], b: &[usize]) -> Result<EntanglementReport> {
    negativity_report_with_tol(rho, a, b, PPT_TOL)
}

/// PPT test transposing part `a`.
pub fn negativity_report_with_tol(
    rho: &DensityOperator,
    a: &[usize],
    b: &[usize],
    ppt_tol: f64,
) -> Result<EntanglementReport> {
    let (a, b) = check_bipartition(rho.arena().n_modes(), a, b)?;
    let ev = hermitian_eigenvalues(&partial_transpose(rho, &a)?);
    let min_pt_eigenvalue = ev.min();
    let negativity = (-ev.iter().filter(|&&x| x < 0.0).sum::<f64>()).max(0.0);
    Ok(EntanglementReport {
        bipartition: (a, b),
        min_pt_eigenvalue,
        negativity,
        log_negativity: (1.0 + 2.0 * negativity).log2(),
        verdict: if min_pt_eigenvalue < -ppt_tol {
            PptVerdict::Entangled
        } else {
            PptVerdict::SeparableByPptNonviolation
        },
    })
}

/// Reports for every bipartition returned by [`bipartitions`].
pub fn all_bipartition_reports(rho: &DensityOperator, ppt_tol: f64) -> Result<Vec<EntanglementReport>> {
    bipartitions(rho.arena().n_modes())
        .iter()
        .map(|(a, b)| negativity_report_with_tol(rho, a, b, ppt_tol))
        .collect()
}

/// Trace-normalized single-mode moments `<n>, <n^2>, <a>, <a^2>`.
struct Moments {
    n: f64,
    n2: f64,
    a: C64,
    a2: C64,
}

fn moments(rho: &DensityOperator, mode: usize) -> Result<Moments> {
    let arena = rho.arena();
    arena.check_mode(mode)?;
    let m = rho.matrix();
    let s = arena.stride(mode);
    let tr = rho.trace();
    let (mut n, mut n2) = (0.0, 0.0);
    let (mut a, mut a2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for j in 0..arena.total_dim() {
        let k = arena.occupation(j, mode) as f64;
        let p = m[(j, j)].re;
        n += k * p;
        n2 += k * k * p;
        if k >= 1.0 {
            a += m[(j, j - s)] * k.sqrt();
        }
        if k >= 2.0 {
            a2 += m[(j, j - 2 * s)] * (k * (k - 1.0)).sqrt();
        }
    }
    Ok(Moments {
        n: n / tr,
        n2: n2 / tr,
        a: a / tr,
        a2: a2 / tr,
    })
}

/// `(<n^2> - <n>^2 - <n>) / <n>` of one mode; 0 when `<n> < 1e-14`.
pub fn mandel_q(rho: &DensityOperator, mode: usize) -> Result<f64> {
    let mo = moments(rho, mode)?;
    if mo.n < VACUUM_MEAN {
        return Ok(0.0);
    }
    Ok((mo.n2 - mo.n * mo.n - mo.n) / mo.n)
}

/// Variance of `x_theta = (a e^{-i theta} + a^dagger e^{i theta}) / sqrt(2)`.
///
/// `<a a^dagger>` is taken as `<n> + 1`, the untruncated commutator.
pub fn quadrature_variance(rho: &DensityOperator, mode: usize, theta_q: f64) -> Result<f64> {
    let mo = moments(rho, mode)?;
    let ph = C64::from_polar(1.0, -theta_q);
    let second = (ph * ph * mo.a2).re + mo.n + 0.5;
    let mean = 2f64.sqrt() * (ph * mo.a).re;
    Ok(second - mean * mean)
}

/// Minimum quadrature variance over all phases and the phase attaining it.
pub fn min_quadrature_variance(rho: &DensityOperator, mode: usize) -> Result<(f64, f64)> {
    let mo = moments(rho, mode)?;
    let da2 = mo.a2 - mo.a * mo.a;
    let dn = mo.n - mo.a.norm_sqr();
    let phase = (da2.arg() - std::f64::consts::PI) / 2.0;
    Ok((dn + 0.5 - da2.norm(), phase))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeClassicality {
    pub mode: usize,
    pub mandel_q: f64,
    pub min_quadrature_variance: f64,
    pub optimal_phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalityReport {
    pub modes: Vec<ModeClassicality>,
    pub sub_poissonian_detected: bool,
    pub squeezing_detected: bool,
}

impl ClassicalityReport {
    /// True when either witness fires.
    pub fn nonclassical(&self) -> bool {
        self.sub_poissonian_detected || self.squeezing_detected
    }
}

pub fn classicality_report(rho: &DensityOperator) -> Result<ClassicalityReport> {
    classicality_report_with_tol(rho, WITNESS_TOL)
}

pub fn classicality_report_with_tol(rho: &DensityOperator, tol: f64) -> Result<ClassicalityReport> {
    let modes = (0..rho.arena().n_modes())
        .map(|mode| {
            let (min_var, phase) = min_quadrature_variance(rho, mode)?;
            Ok(ModeClassicality {
                mode,
                mandel_q: mandel_q(rho, mode)?,
                min_quadrature_variance: min_var,
                optimal_phase: phase,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClassicalityReport {
        sub_poissonian_detected: modes.iter().any(|m| m.mandel_q < -tol),
        squeezing_detected: modes.iter().any(|m| m.min_quadrature_variance < 0.5 - tol),
        modes,
    })
}

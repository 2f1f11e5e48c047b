//! Passive linear-optical transformations.
//!
//! A [`ModeUnitary`] `M` acts on the annihilation operators as `c_j -> sum_k M_jk c_k`.
//! Its Fock-space lift is `R = exp(-sum_jk L_jk c_j^dagger c_k)` with `L` the principal
//! logarithm of `M`, which satisfies `R c R^dagger = M c` and leaves the vacuum fixed.
//!
//! The generator conserves the total photon number, so `R` is block diagonal over
//! photon-number sectors and each block is finite. The lift is computed exactly on every
//! complete sector that meets the arena and then restricted to the arena. On the
//! protected subspace (total photon number at most `cutoff / 2`) the restricted operator
//! is exactly unitary.
//!
//! Coherent states transform in closed form: `R |alpha> = |alpha'>` with the row vector
//! `alpha' = alpha * conj(M)`. For real `M` this is `alpha * M`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{DensityOperator, FockArena, StateVector, C64};
use crate::states::{rank_one_update, CoherentComponent, CoherentEnsemble, ProductMixture};
use crate::tolerance::{LEAK_TOL, PSD_TOL, UNITARY_TOL};

/// Largest allowed `max|exp(log M) - M|`.
const LOG_ROUNDTRIP_TOL: f64 = 1e-10;
/// Eigenphases this close to `-pi` are moved to `+pi`.
const BRANCH_EPS: f64 = 1e-12;
const VACUUM_TOL: f64 = 1e-10;
const PROTECTED_UNITARITY_TOL: f64 = 1e-8;

/// Unitary `n x n` matrix acting on the mode operators.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    matrix: DMatrix<C64>,
}

impl ModeUnitary {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerance(matrix, UNITARY_TOL)
    }

    pub fn with_tolerance(matrix: DMatrix<C64>, tol: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let defect = unitarity_defect(&matrix);
        if !(defect <= tol) {
            return Err(Error::NotUnitary { defect });
        }
        Ok(Self { matrix })
    }

    pub fn identity(n_modes: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n_modes, n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    pub fn determinant(&self) -> C64 {
        self.matrix.determinant()
    }

    /// `M^{-1} = M^dagger`.
    pub fn inverse(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// The transformation that applies `self` first, then `next`.
    pub fn then(&self, next: &ModeUnitary) -> Result<Self> {
        if self.n_modes() != next.n_modes() {
            return Err(Error::ModeCountMismatch {
                expected: self.n_modes(),
                actual: next.n_modes(),
            });
        }
        // R_next R_self c R_self^-1 R_next^-1 = R_next (M_self c) R_next^-1 = M_self M_next c
        Ok(Self {
            matrix: &self.matrix * &next.matrix,
        })
    }

    /// Image of a coherent amplitude row vector: `alpha * conj(M)`.
    pub fn map_amplitudes(&self, alphas: &[C64]) -> Vec<C64> {
        let n = self.n_modes();
        (0..n)
            .map(|k| {
                alphas
                    .iter()
                    .enumerate()
                    .map(|(j, &a)| a * self.matrix[(j, k)].conj())
                    .sum()
            })
            .collect()
    }
}

fn unitarity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let g = m.adjoint() * m - DMatrix::<C64>::identity(n, n);
    g.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Lossless two-mode beam splitter, rows and columns ordered `(a, b)`:
///
/// ```text
/// [  cos t e^{i p0}    sin t e^{i p1} ]
/// [ -sin t e^{-i p1}   cos t e^{-i p0} ]
/// ```
pub fn beam_splitter_matrix(theta: f64, phi0: f64, phi1: f64) -> ModeUnitary {
    let (s, c) = theta.sin_cos();
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::from_polar(c, phi0),
            C64::from_polar(s, phi1),
            -C64::from_polar(s, -phi1),
            C64::from_polar(c, -phi0),
        ],
    );
    ModeUnitary { matrix: m }
}

/// Principal logarithm of a unitary: anti-Hermitian `L` with eigenphases in `(-pi, pi]`.
///
/// Uses a complex Schur factorization, which stays well conditioned for degenerate
/// spectra (identity, swaps).
pub fn log_unitary(m: &ModeUnitary) -> Result<DMatrix<C64>> {
    let defect = m.unitarity_defect();
    if defect > UNITARY_TOL {
        return Err(Error::NotUnitary { defect });
    }
    let n = m.n_modes();
    let schur = m
        .matrix()
        .clone()
        .try_schur(f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let phases = DVector::<C64>::from_fn(n, |k, _| {
        let mut phase = t[(k, k)].arg();
        if phase <= -std::f64::consts::PI + BRANCH_EPS {
            phase += 2.0 * std::f64::consts::PI;
        }
        C64::new(0.0, phase)
    });
    let l = &q * DMatrix::from_diagonal(&phases) * q.adjoint();
    let l = (&l - l.adjoint()).scale(0.5);
    let err = (l.clone().exp() - m.matrix())
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()));
    if err > LOG_ROUNDTRIP_TOL {
        return Err(Error::Numerical(format!(
            "matrix logarithm round trip error {err:.3e}"
        )));
    }
    Ok(l)
}

/// Occupation tuples of every photon-number sector `0..=max_total` for `n_modes` modes.
#[derive(Debug, Clone)]
pub struct PhotonSectors {
    n_modes: usize,
    sectors: Vec<Vec<Vec<usize>>>,
    lookup: Vec<HashMap<Vec<usize>, usize>>,
}

impl PhotonSectors {
    pub fn new(n_modes: usize, max_total: usize) -> Self {
        let sectors: Vec<Vec<Vec<usize>>> = (0..=max_total)
            .map(|total| compositions(total, n_modes))
            .collect();
        let lookup = sectors
            .iter()
            .map(|states| {
                states
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.clone(), i))
                    .collect()
            })
            .collect();
        Self {
            n_modes,
            sectors,
            lookup,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn max_total(&self) -> usize {
        self.sectors.len() - 1
    }

    pub fn sector(&self, total: usize) -> &[Vec<usize>] {
        &self.sectors[total]
    }

    pub fn position(&self, occupations: &[usize]) -> Option<(usize, usize)> {
        let total: usize = occupations.iter().sum();
        self.lookup
            .get(total)?
            .get(occupations)
            .map(|&p| (total, p))
    }

    pub fn dim(&self) -> usize {
        self.sectors.iter().map(Vec::len).sum()
    }
}

/// All tuples of `parts` non-negative integers summing to `total`, mode 0 descending.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `down[j][p]`: position in sector `N - 1` of state `p` of sector `N` with one photon
/// removed from mode `j`, or `usize::MAX` when mode `j` is empty.
fn lowering_table(sectors: &PhotonSectors, total: usize) -> Vec<Vec<usize>> {
    let n = sectors.n_modes();
    let states = sectors.sector(total);
    let mut target = vec![0usize; n];
    (0..n)
        .map(|j| {
            states
                .iter()
                .map(|s| {
                    if s[j] == 0 {
                        return usize::MAX;
                    }
                    target.copy_from_slice(s);
                    target[j] -= 1;
                    sectors.lookup[total - 1][&target]
                })
                .collect()
        })
        .collect()
}

/// Eigenbasis of `K = sum_jk H_jk c_j^dagger c_k` on every sector, given `H = W diag(h) W^dagger`.
///
/// Column `m` of sector `N` is `prod_k (b_k^dagger)^{m_k} / sqrt(m_k!) |vac>` with
/// `b_k^dagger = sum_j W_jk c_j^dagger`, eigenvalue `sum_k h_k m_k`.
fn sector_eigenbases(
    w: &DMatrix<C64>,
    h: &DVector<f64>,
    sectors: &PhotonSectors,
) -> (Vec<DMatrix<C64>>, Vec<DVector<f64>>) {
    let n = sectors.n_modes();
    let mut vecs = vec![DMatrix::from_element(1, 1, C64::new(1.0, 0.0))];
    let mut vals = vec![DVector::from_element(1, 0.0)];
    for total in 1..=sectors.max_total() {
        let states = sectors.sector(total);
        let dim = states.len();
        let down = lowering_table(sectors, total);
        let prev = &vecs[total - 1];
        let mut v = DMatrix::<C64>::zeros(dim, dim);
        let mut lambda = DVector::<f64>::zeros(dim);
        for (q, m) in states.iter().enumerate() {
            let k = m.iter().position(|&x| x > 0).expect("sector is non-empty");
            let src = down[k][q];
            let norm = (m[k] as f64).sqrt();
            for (p, occ) in states.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    if occ[j] > 0 {
                        acc += w[(j, k)] * (occ[j] as f64).sqrt() * prev[(down[j][p], src)];
                    }
                }
                v[(p, q)] = acc / norm;
            }
            lambda[q] = m.iter().zip(h.iter()).map(|(&c, &e)| c as f64 * e).sum();
        }
        vecs.push(v);
        vals.push(lambda);
    }
    (vecs, vals)
}

/// Fock-space operator of a passive transformation, restricted to an arena.
#[derive(Debug, Clone)]
pub struct LiftedUnitary {
    arena: FockArena,
    source: ModeUnitary,
    log: DMatrix<C64>,
    sectors: PhotonSectors,
    /// Per sector: eigenvectors of the generator and the phases `exp(-i lambda)`.
    eigvecs: Vec<DMatrix<C64>>,
    phases: Vec<DVector<C64>>,
    /// `members[N]` lists `(arena index, sector position)` of arena states with N photons.
    members: Vec<Vec<(usize, usize)>>,
    matrix: DMatrix<C64>,
}

pub fn lift_unitary(m: &ModeUnitary, arena: &FockArena) -> Result<LiftedUnitary> {
    if m.n_modes() != arena.n_modes() {
        return Err(Error::ModeCountMismatch {
            expected: arena.n_modes(),
            actual: m.n_modes(),
        });
    }
    let log = log_unitary(m)?;
    // L = iH with H Hermitian, so exp(-sum L_jk c_j^dag c_k) = exp(-i K) with K Hermitian.
    let h = log.map(|z| C64::new(z.im, -z.re));
    let n = arena.n_modes();
    let max_total = n * (arena.cutoff() - 1);
    let sectors = PhotonSectors::new(n, max_total);

    let h = (&h + h.adjoint()).scale(0.5);
    let eig = h.symmetric_eigen();
    let (eigvecs, lambdas) = sector_eigenbases(&eig.eigenvectors, &eig.eigenvalues, &sectors);
    let phases: Vec<DVector<C64>> = lambdas
        .iter()
        .map(|l| l.map(|x| C64::from_polar(1.0, -x)))
        .collect();

    let mut members: Vec<Vec<(usize, usize)>> = vec![Vec::new(); max_total + 1];
    for idx in 0..arena.total_dim() {
        let occ = arena.decode(idx);
        let (total, pos) = sectors
            .position(&occ)
            .expect("every arena state lies in a sector");
        members[total].push((idx, pos));
    }

    let dim = arena.total_dim();
    let mut matrix = DMatrix::<C64>::zeros(dim, dim);
    for (total, group) in members.iter().enumerate() {
        let rows: Vec<usize> = group.iter().map(|&(_, p)| p).collect();
        let v = eigvecs[total].select_rows(&rows);
        let mut vp = v.clone();
        for (mut col, ph) in vp.column_iter_mut().zip(phases[total].iter()) {
            col *= *ph;
        }
        let block = vp * v.adjoint();
        for (a, &(ai, _)) in group.iter().enumerate() {
            for (b, &(aj, _)) in group.iter().enumerate() {
                matrix[(ai, aj)] = block[(a, b)];
            }
        }
    }

    let lifted = LiftedUnitary {
        arena: arena.clone(),
        source: m.clone(),
        log,
        sectors,
        eigvecs,
        phases,
        members,
        matrix,
    };
    let vac = lifted.vacuum_deviation();
    if vac > VACUUM_TOL {
        return Err(Error::InvariantViolation(format!(
            "lifted operator moves the vacuum by {vac:.3e}"
        )));
    }
    let defect = lifted.unitarity_defect_within(arena.cutoff() / 2);
    if defect > PROTECTED_UNITARITY_TOL {
        return Err(Error::InvariantViolation(format!(
            "lifted operator is not unitary on the protected subspace (defect {defect:.3e})"
        )));
    }
    Ok(lifted)
}

impl LiftedUnitary {
    pub fn arena(&self) -> &FockArena {
        &self.arena
    }

    pub fn source(&self) -> &ModeUnitary {
        &self.source
    }

    /// The logarithm `L` the operator was exponentiated from.
    pub fn log(&self) -> &DMatrix<C64> {
        &self.log
    }

    /// Dense matrix on the arena.
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Exact block of the full operator on the sector with `total` photons.
    pub fn sector_block(&self, total: usize) -> Option<DMatrix<C64>> {
        let v = self.eigvecs.get(total)?;
        Some(v * DMatrix::from_diagonal(&self.phases[total]) * v.adjoint())
    }

    pub fn sectors(&self) -> &PhotonSectors {
        &self.sectors
    }

    /// Arena basis indices whose total photon number is at most `max_total`.
    pub fn indices_within(&self, max_total: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .members
            .iter()
            .take(max_total + 1)
            .flat_map(|g| g.iter().map(|&(ai, _)| ai))
            .collect();
        out.sort_unstable();
        out
    }

    /// `||U|vac> - |vac>||`.
    pub fn vacuum_deviation(&self) -> f64 {
        let mut col = self.matrix.column(0).into_owned();
        col[0] -= C64::new(1.0, 0.0);
        col.norm()
    }

    /// `max|U^dagger U - I|` restricted to states with at most `max_total` photons.
    pub fn unitarity_defect_within(&self, max_total: usize) -> f64 {
        let idx = self.indices_within(max_total);
        let mut worst = 0.0f64;
        for &i in &idx {
            for &j in &idx {
                let g = self.matrix.column(i).dotc(&self.matrix.column(j));
                let expected = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - C64::new(expected, 0.0)).norm());
            }
        }
        worst
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.check_arena(psi.arena())?;
        StateVector::new(self.arena.clone(), &self.matrix * psi.amplitudes())
    }

    /// `R rho R^dagger` for every branch of a padded product mixture, each branch
    /// transformed on complete photon-number sectors before being cut down to the arena.
    pub fn apply_to_mixture(&self, mixture: &ProductMixture, leak_tol: f64) -> Result<DensityOperator> {
        if mixture.n_modes() != self.arena.n_modes() {
            return Err(Error::ModeCountMismatch {
                expected: self.arena.n_modes(),
                actual: mixture.n_modes(),
            });
        }
        let max_total = self.sectors.max_total().min(mixture.max_photons());
        let tail = mixture.lost_weight();
        if tail > leak_tol {
            return Err(Error::TruncationLeak {
                leakage: tail,
                budget: leak_tol,
            });
        }
        let dim = self.arena.total_dim();
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        let mut out = DVector::<C64>::zeros(dim);
        for comp in mixture.components() {
            out.fill(C64::new(0.0, 0.0));
            for total in 0..=max_total {
                let group = &self.members[total];
                if group.is_empty() {
                    continue;
                }
                let states = self.sectors.sector(total);
                let input = DVector::<C64>::from_iterator(
                    states.len(),
                    states.iter().map(|occ| {
                        occ.iter()
                            .zip(&comp.modes)
                            .map(|(&n, amps)| amps[n])
                            .product::<C64>()
                    }),
                );
                if input.iter().all(|z| z.norm_sqr() == 0.0) {
                    continue;
                }
                let v = &self.eigvecs[total];
                let y = (v.adjoint() * input).component_mul(&self.phases[total]);
                for &(ai, pi) in group {
                    out[ai] = v.row(pi).transpose().dot(&y);
                }
            }
            rank_one_update(&mut rho, comp.weight, &out);
        }
        DensityOperator::checked_without_spectrum(self.arena.clone(), rho, leak_tol)
    }

    fn check_arena(&self, arena: &FockArena) -> Result<()> {
        if *arena != self.arena {
            return Err(Error::InvalidParameter(format!(
                "operator on {:?} applied to a state on {:?}",
                self.arena, arena
            )));
        }
        Ok(())
    }
}

/// `U rho U^dagger`, re-validated. Loss of trace means the state reached the cutoff.
pub fn apply_to_density(u: &LiftedUnitary, rho: &DensityOperator) -> Result<DensityOperator> {
    apply_to_density_within(u, rho, LEAK_TOL, PSD_TOL)
}

pub fn apply_to_density_within(
    u: &LiftedUnitary,
    rho: &DensityOperator,
    leak_tol: f64,
    psd_tol: f64,
) -> Result<DensityOperator> {
    u.check_arena(rho.arena())?;
    // U is block diagonal over photon-number sectors: (U rho U^dag)[N, N'] = U_N rho[N, N'] U_N'^dag.
    let groups: Vec<(Vec<usize>, DMatrix<C64>)> = u
        .members
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            let idx: Vec<usize> = g.iter().map(|&(ai, _)| ai).collect();
            let block = u.matrix.select_rows(&idx).select_columns(&idx);
            (idx, block)
        })
        .collect();
    let dim = u.arena.total_dim();
    let m = rho.matrix();
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for (ri, ui) in &groups {
        for (rj, uj) in &groups {
            let sub = m.select_rows(ri).select_columns(rj);
            if sub.iter().all(|z| z.norm_sqr() == 0.0) {
                continue;
            }
            let t = ui * sub * uj.adjoint();
            for (a, &i) in ri.iter().enumerate() {
                for (b, &j) in rj.iter().enumerate() {
                    out[(i, j)] = t[(a, b)];
                }
            }
        }
    }
    let out = (&out + out.adjoint()).scale(0.5);
    DensityOperator::with_tolerances(u.arena.clone(), out, leak_tol, psd_tol)
}

/// Conjugation self-test: `max|U c_mode U^dagger - sum_k M_{mode,k} c_k|` on the protected
/// subspace (total photon number at most `cutoff / 2`).
pub fn conjugation_residual(u: &LiftedUnitary, m: &ModeUnitary, mode: usize) -> Result<f64> {
    conjugation_residual_within(u, m, mode, u.arena.cutoff() / 2)
}

/// As [`conjugation_residual`], restricted to states with at most `max_total` photons.
pub fn conjugation_residual_within(
    u: &LiftedUnitary,
    m: &ModeUnitary,
    mode: usize,
    max_total: usize,
) -> Result<f64> {
    let arena = &u.arena;
    arena.check_mode(mode)?;
    if m.n_modes() != arena.n_modes() {
        return Err(Error::ModeCountMismatch {
            expected: arena.n_modes(),
            actual: m.n_modes(),
        });
    }
    let idx = u.indices_within(max_total);
    let dim = arena.total_dim();
    let mut worst = 0.0f64;
    for &j in &idx {
        // U c U^dagger e_j
        let v: DVector<C64> = u.matrix.row(j).adjoint();
        let w = lower(arena, mode, &v);
        // sum_k M_{mode,k} c_k e_j
        let mut target = DVector::<C64>::zeros(dim);
        let mut e = DVector::<C64>::zeros(dim);
        e[j] = C64::new(1.0, 0.0);
        for k in 0..arena.n_modes() {
            target += lower(arena, k, &e) * m.matrix()[(mode, k)];
        }
        for &i in &idx {
            let lhs = u.matrix.row(i).transpose().dot(&w);
            worst = worst.max((lhs - target[i]).norm());
        }
    }
    Ok(worst)
}

/// Annihilation operator applied to a vector by index arithmetic.
fn lower(arena: &FockArena, mode: usize, v: &DVector<C64>) -> DVector<C64> {
    let stride = arena.stride(mode);
    let mut out = DVector::zeros(v.len());
    for idx in 0..v.len() {
        let n = arena.occupation(idx, mode);
        if n > 0 {
            out[idx - stride] = v[idx] * (n as f64).sqrt();
        }
    }
    out
}

/// Closed-form image of a coherent ensemble: weights unchanged, every amplitude row
/// vector mapped by [`ModeUnitary::map_amplitudes`]. The output is again a classical
/// ensemble of product coherent states.
pub fn transform_ensemble(ens: &CoherentEnsemble, m: &ModeUnitary) -> Result<CoherentEnsemble> {
    if ens.n_modes() != m.n_modes() {
        return Err(Error::ModeCountMismatch {
            expected: m.n_modes(),
            actual: ens.n_modes(),
        });
    }
    let components = ens
        .components()
        .iter()
        .map(|c| CoherentComponent {
            weight: c.weight,
            alphas: m.map_amplitudes(&c.alphas),
        })
        .collect();
    Ok(CoherentEnsemble::from_normalized(ens.n_modes(), components))
}

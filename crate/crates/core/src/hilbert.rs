//! Truncated multimode Fock space.
//!
//! Each of the `n_modes` modes holds photon numbers `0..cutoff`. Basis states are
//! indexed mode-major: mode 0 is the slowest-varying digit, so the index of the
//! occupation tuple `(n_0, .., n_{m-1})` is `sum_j n_j * cutoff^(m-1-j)`. Operators on
//! a joined arena are therefore plain Kronecker products with the first factor's modes
//! first.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tolerance::{HERMITIAN_TOL, LEAK_TOL, PSD_TOL};

pub type C64 = Complex<f64>;

const NORM_SLACK: f64 = 1e-12;

/// Index scheme of an `n_modes`-mode Fock space truncated at `cutoff` photons per mode.
///
/// Cheap to clone; ladder matrices are built lazily and shared between clones.
#[derive(Clone)]
pub struct FockArena {
    inner: Arc<ArenaInner>,
}

struct ArenaInner {
    n_modes: usize,
    cutoff: usize,
    total_dim: usize,
    ladders: OnceLock<Vec<DMatrix<C64>>>,
}

impl FockArena {
    pub fn new(n_modes: usize, cutoff: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidArena("at least one mode is required".into()));
        }
        if cutoff == 0 {
            return Err(Error::InvalidArena("cutoff must be positive".into()));
        }
        let total_dim = u32::try_from(n_modes)
            .ok()
            .and_then(|n| cutoff.checked_pow(n))
            .filter(|&d| d <= 1 << 24)
            .ok_or_else(|| {
                Error::InvalidArena(format!(
                    "{cutoff}^{n_modes} basis states is beyond dense storage"
                ))
            })?;
        Ok(Self {
            inner: Arc::new(ArenaInner {
                n_modes,
                cutoff,
                total_dim,
                ladders: OnceLock::new(),
            }),
        })
    }

    pub fn n_modes(&self) -> usize {
        self.inner.n_modes
    }

    pub fn cutoff(&self) -> usize {
        self.inner.cutoff
    }

    pub fn total_dim(&self) -> usize {
        self.inner.total_dim
    }

    /// Index step between neighbouring occupations of `mode`.
    pub fn stride(&self, mode: usize) -> usize {
        self.cutoff().pow((self.n_modes() - 1 - mode) as u32)
    }

    pub fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes() {
            Ok(())
        } else {
            Err(Error::ModeOutOfRange {
                mode,
                n_modes: self.n_modes(),
            })
        }
    }

    pub fn encode(&self, occupations: &[usize]) -> Result<usize> {
        if occupations.len() != self.n_modes() {
            return Err(Error::ModeCountMismatch {
                expected: self.n_modes(),
                actual: occupations.len(),
            });
        }
        let d = self.cutoff();
        occupations
            .iter()
            .enumerate()
            .try_fold(0usize, |acc, (mode, &n)| {
                if n >= d {
                    Err(Error::OccupationOutOfRange {
                        mode,
                        occupation: n,
                        cutoff: d,
                    })
                } else {
                    Ok(acc * d + n)
                }
            })
    }

    /// Occupation tuple of a basis index.
    ///
    /// Panics if `index >= total_dim`.
    pub fn decode(&self, index: usize) -> Vec<usize> {
        assert!(index < self.total_dim(), "basis index {index} out of range");
        let d = self.cutoff();
        let mut out = vec![0; self.n_modes()];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = rest % d;
            rest /= d;
        }
        out
    }

    /// Occupation of a single mode in the given basis state.
    pub fn occupation(&self, index: usize, mode: usize) -> usize {
        (index / self.stride(mode)) % self.cutoff()
    }

    pub fn total_photons(&self, index: usize) -> usize {
        (0..self.n_modes()).map(|m| self.occupation(index, m)).sum()
    }

    /// Cached dense annihilation operator of `mode`.
    pub fn ladder(&self, mode: usize) -> Result<&DMatrix<C64>> {
        self.check_mode(mode)?;
        let ladders = self
            .inner
            .ladders
            .get_or_init(|| (0..self.n_modes()).map(|m| self.build_ladder(m)).collect());
        Ok(&ladders[mode])
    }

    fn build_ladder(&self, mode: usize) -> DMatrix<C64> {
        let dim = self.total_dim();
        let stride = self.stride(mode);
        let mut a = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let n = self.occupation(col, mode);
            if n > 0 {
                a[(col - stride, col)] = C64::new((n as f64).sqrt(), 0.0);
            }
        }
        a
    }

    pub fn identity(&self) -> DMatrix<C64> {
        DMatrix::identity(self.total_dim(), self.total_dim())
    }

    /// Sorted, de-duplicated, range-checked copy of a mode set.
    pub fn normalize_modes(&self, modes: &[usize]) -> Result<Vec<usize>> {
        let mut out = modes.to_vec();
        out.sort_unstable();
        out.dedup();
        for &m in &out {
            self.check_mode(m)?;
        }
        Ok(out)
    }
}

impl PartialEq for FockArena {
    fn eq(&self, other: &Self) -> bool {
        self.n_modes() == other.n_modes() && self.cutoff() == other.cutoff()
    }
}

impl Eq for FockArena {}

impl fmt::Debug for FockArena {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FockArena")
            .field("n_modes", &self.n_modes())
            .field("cutoff", &self.cutoff())
            .finish()
    }
}

/// Dense annihilation operator on `mode`, identity on the other modes.
pub fn annihilation_matrix(arena: &FockArena, mode: usize) -> Result<DMatrix<C64>> {
    arena.ladder(mode).cloned()
}

/// A dense operator tied to the arena it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct ArenaOperator {
    pub arena: FockArena,
    pub matrix: DMatrix<C64>,
}

impl ArenaOperator {
    pub fn new(arena: FockArena, matrix: DMatrix<C64>) -> Result<Self> {
        check_square(&arena, &matrix)?;
        Ok(Self { arena, matrix })
    }

    pub fn identity(arena: &FockArena) -> Self {
        Self {
            arena: arena.clone(),
            matrix: arena.identity(),
        }
    }
}

/// Operator on the joined arena whose first modes are those of `left`.
pub fn tensor_product(left: &ArenaOperator, right: &ArenaOperator) -> Result<ArenaOperator> {
    if left.arena.cutoff() != right.arena.cutoff() {
        return Err(Error::CutoffMismatch {
            left: left.arena.cutoff(),
            right: right.arena.cutoff(),
        });
    }
    let arena = FockArena::new(
        left.arena.n_modes() + right.arena.n_modes(),
        left.arena.cutoff(),
    )?;
    Ok(ArenaOperator {
        arena,
        matrix: left.matrix.kronecker(&right.matrix),
    })
}

fn check_square(arena: &FockArena, m: &DMatrix<C64>) -> Result<()> {
    let dim = arena.total_dim();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: m.nrows().max(m.ncols()),
        });
    }
    Ok(())
}

/// Pure state over a truncated arena.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    arena: FockArena,
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Validates that the squared norm lies in `[1 - LEAK_TOL, 1]`.
    pub fn new(arena: FockArena, amplitudes: DVector<C64>) -> Result<Self> {
        Self::with_leak_budget(arena, amplitudes, LEAK_TOL)
    }

    pub fn with_leak_budget(
        arena: FockArena,
        amplitudes: DVector<C64>,
        leak_tol: f64,
    ) -> Result<Self> {
        if amplitudes.len() != arena.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: arena.total_dim(),
                actual: amplitudes.len(),
            });
        }
        let norm_sqr = amplitudes.norm_squared();
        if norm_sqr > 1.0 + NORM_SLACK {
            return Err(Error::InvariantViolation(format!(
                "state norm^2 {norm_sqr} exceeds one"
            )));
        }
        if norm_sqr < 1.0 - leak_tol {
            return Err(Error::TruncationLeak {
                leakage: 1.0 - norm_sqr,
                budget: leak_tol,
            });
        }
        Ok(Self { arena, amplitudes })
    }

    pub fn arena(&self) -> &FockArena {
        &self.arena
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn to_density(&self) -> DensityOperator {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityOperator::trusted(self.arena.clone(), m)
    }
}

/// Mixed state over a truncated arena.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    arena: FockArena,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Checks Hermiticity, trace in `[1 - LEAK_TOL, 1]` and positivity.
    pub fn new(arena: FockArena, matrix: DMatrix<C64>) -> Result<Self> {
        Self::with_tolerances(arena, matrix, LEAK_TOL, PSD_TOL)
    }

    pub fn with_tolerances(
        arena: FockArena,
        matrix: DMatrix<C64>,
        leak_tol: f64,
        psd_tol: f64,
    ) -> Result<Self> {
        let rho = Self::checked_without_spectrum(arena, matrix, leak_tol)?;
        let scale = rho.max_abs().max(1.0);
        let min_eig = rho.min_eigenvalue();
        if min_eig < -psd_tol * scale {
            return Err(Error::InvariantViolation(format!(
                "density operator has eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Hermiticity and trace checks only, for operators positive by construction.
    pub(crate) fn checked_without_spectrum(
        arena: FockArena,
        matrix: DMatrix<C64>,
        leak_tol: f64,
    ) -> Result<Self> {
        check_square(&arena, &matrix)?;
        let scale = max_abs(&matrix);
        let asym = max_abs(&(&matrix - matrix.adjoint()));
        if asym > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvariantViolation(format!(
                "density operator is not Hermitian (defect {asym:.3e})"
            )));
        }
        let tr = matrix.trace().re;
        if tr > 1.0 + NORM_SLACK {
            return Err(Error::InvariantViolation(format!(
                "density operator trace {tr} exceeds one"
            )));
        }
        if tr < 1.0 - leak_tol {
            return Err(Error::TruncationLeak {
                leakage: 1.0 - tr,
                budget: leak_tol,
            });
        }
        Ok(Self { arena, matrix })
    }

    pub(crate) fn trusted(arena: FockArena, matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), arena.total_dim());
        Self { arena, matrix }
    }

    pub fn arena(&self) -> &FockArena {
        &self.arena
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    /// Largest entrywise deviation from another operator on the same arena.
    pub fn max_abs_diff(&self, other: &DensityOperator) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    pub fn expectation(&self, op: &DMatrix<C64>) -> C64 {
        (&self.matrix * op).trace()
    }

    /// `<psi|rho|psi>`.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> f64 {
        let v = psi.amplitudes();
        v.dotc(&(&self.matrix * v)).re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigenvalues(&self.matrix).min()
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        let joined = tensor_product(
            &ArenaOperator {
                arena: self.arena.clone(),
                matrix: self.matrix.clone(),
            },
            &ArenaOperator {
                arena: other.arena.clone(),
                matrix: other.matrix.clone(),
            },
        )?;
        Ok(DensityOperator::trusted(joined.arena, joined.matrix))
    }
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Eigenvalues of the Hermitian part `(m + m^dagger)/2`, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> DVector<f64> {
    let h = (m + m.adjoint()).scale(0.5);
    let mut ev = h.symmetric_eigenvalues();
    ev.as_mut_slice().sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Reduced state on the `keep` modes, in their original order.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let arena = rho.arena();
    let keep = arena.normalize_modes(keep)?;
    if keep.is_empty() {
        return Err(Error::InvalidModeSet("keep set is empty".into()));
    }
    if keep.len() == arena.n_modes() {
        return Ok(rho.clone());
    }
    let traced: Vec<usize> = (0..arena.n_modes()).filter(|m| !keep.contains(m)).collect();
    let reduced = FockArena::new(keep.len(), arena.cutoff())?;
    let d = arena.cutoff();
    let digits = |idx: usize, modes: &[usize]| {
        modes
            .iter()
            .fold(0usize, |acc, &m| acc * d + arena.occupation(idx, m))
    };
    let n_traced = d.pow(traced.len() as u32);
    // groups[t] lists (kept index, full index) for every basis state with traced digits t.
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n_traced];
    for idx in 0..arena.total_dim() {
        groups[digits(idx, &traced)].push((digits(idx, &keep), idx));
    }
    let m = rho.matrix();
    let mut out = DMatrix::<C64>::zeros(reduced.total_dim(), reduced.total_dim());
    for group in &groups {
        for &(ki, fi) in group {
            for &(kj, fj) in group {
                out[(ki, kj)] += m[(fi, fj)];
            }
        }
    }
    Ok(DensityOperator::trusted(reduced, out))
}

/// Partial transpose over `transposed_modes`, which must be a proper non-empty subset.
pub fn partial_transpose(rho: &DensityOperator, transposed_modes: &[usize]) -> Result<DMatrix<C64>> {
    let arena = rho.arena();
    let modes = arena.normalize_modes(transposed_modes)?;
    if modes.is_empty() || modes.len() == arena.n_modes() {
        return Err(Error::InvalidModeSet(
            "partial transpose needs a proper non-empty subset of modes".into(),
        ));
    }
    Ok(partial_transpose_matrix(arena, rho.matrix(), &modes))
}

pub(crate) fn partial_transpose_matrix(
    arena: &FockArena,
    m: &DMatrix<C64>,
    modes: &[usize],
) -> DMatrix<C64> {
    let dim = arena.total_dim();
    // Contribution of the transposed modes' digits to each index.
    let part: Vec<usize> = (0..dim)
        .map(|idx| {
            modes
                .iter()
                .map(|&mode| arena.occupation(idx, mode) * arena.stride(mode))
                .sum()
        })
        .collect();
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    for j in 0..dim {
        for i in 0..dim {
            let ti = i - part[i] + part[j];
            let tj = j - part[j] + part[i];
            out[(ti, tj)] = m[(i, j)];
        }
    }
    out
}

//! Input-state constructors: vacuum, Fock, coherent, classical coherent ensembles,
//! squeezed vacuum and thermal probes.
//!
//! Constructors never renormalize a truncated state. If more than the leak budget of
//! probability falls outside the arena they fail with [`Error::TruncationLeak`].

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hilbert::{DensityOperator, FockArena, StateVector, C64};
use crate::tolerance::LEAK_TOL;

const WEIGHT_SUM_SLACK: f64 = 1e-12;

/// Poisson probability `P(N >= n)` for mean `mean`, summed from the tail so that tiny
/// values keep full relative precision.
pub fn poisson_tail(mean: f64, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if mean <= 0.0 {
        return 0.0;
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let mut term = (-mean + n as f64 * mean.ln() - ln_fact).exp();
    let mut sum = 0.0;
    let mut k = n;
    loop {
        sum += term;
        k += 1;
        term *= mean / k as f64;
        if k > n + 2 && (term <= sum * 1e-18 || term == 0.0) {
            break;
        }
        if sum >= 1.0 {
            return 1.0;
        }
    }
    sum.min(1.0)
}

/// Fock amplitudes `e^{-|alpha|^2/2} alpha^k / sqrt(k!)` for `k < len`.
pub fn coherent_amplitudes(alpha: C64, len: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(len);
    let mut amp = C64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    for k in 0..len {
        if k > 0 {
            amp = amp * alpha / (k as f64).sqrt();
        }
        out.push(amp);
    }
    out
}

/// Fock amplitudes of `S(r e^{i theta}) |0>` for `k < len`; only even `k` are populated.
///
/// With `theta = 0` the `x` quadrature is squeezed; in general the squeezed quadrature
/// sits at phase `theta / 2`.
pub fn squeezed_amplitudes(r: f64, theta: f64, len: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    let ratio = -C64::from_polar(r.tanh(), theta);
    let mut amp = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut n = 0usize;
    while 2 * n < len {
        if n > 0 {
            // c_{2n} / c_{2n-2} = ratio * sqrt((2n)(2n-1)) / (2n)
            let two_n = (2 * n) as f64;
            amp = amp * ratio * ((two_n - 1.0) / two_n).sqrt();
        }
        out[2 * n] = amp;
        n += 1;
    }
    out
}

/// Geometric photon distribution `(1 - q) q^k`, `q = nbar / (1 + nbar)`, for `k < len`.
pub fn thermal_populations(nbar: f64, len: usize) -> Vec<f64> {
    let q = nbar / (1.0 + nbar);
    (0..len).map(|k| (1.0 - q) * q.powi(k as i32)).collect()
}

/// Single-mode Gaussian probe states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaussianSpec {
    Coherent { alpha: C64 },
    Thermal { nbar: f64 },
    SqueezedVacuum { r: f64, theta_s: f64 },
}

impl GaussianSpec {
    pub fn vacuum() -> Self {
        GaussianSpec::Coherent {
            alpha: C64::new(0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GaussianSpec::Coherent { alpha } if !(alpha.re.is_finite() && alpha.im.is_finite()) => {
                Err(Error::InvalidParameter("coherent amplitude must be finite".into()))
            }
            GaussianSpec::Thermal { nbar } if !(nbar.is_finite() && nbar >= 0.0) => Err(
                Error::InvalidParameter(format!("thermal nbar must be finite and >= 0, got {nbar}")),
            ),
            GaussianSpec::SqueezedVacuum { r, theta_s }
                if !(r.is_finite() && r >= 0.0 && theta_s.is_finite()) =>
            {
                Err(Error::InvalidParameter(format!(
                    "squeezing needs finite r >= 0 and finite phase, got r = {r}, theta_s = {theta_s}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// True when the state has a non-negative P-function.
    pub fn is_classical(&self) -> bool {
        match *self {
            GaussianSpec::Coherent { .. } | GaussianSpec::Thermal { .. } => true,
            GaussianSpec::SqueezedVacuum { r, .. } => r == 0.0,
        }
    }

    /// Probability beyond photon number `cutoff - 1`.
    pub fn leakage(&self, cutoff: usize) -> f64 {
        match *self {
            GaussianSpec::Coherent { alpha } => poisson_tail(alpha.norm_sqr(), cutoff),
            GaussianSpec::Thermal { nbar } => (nbar / (1.0 + nbar)).powi(cutoff as i32),
            GaussianSpec::SqueezedVacuum { r, theta_s } => {
                let kept: f64 = squeezed_amplitudes(r, theta_s, cutoff)
                    .iter()
                    .map(|a| a.norm_sqr())
                    .sum();
                (1.0 - kept).max(0.0)
            }
        }
    }
}

/// One atom of a classical P-function: a multimode coherent state with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentComponent {
    pub weight: f64,
    pub alphas: Vec<C64>,
}

/// Finite non-negative mixture of multimode coherent states.
///
/// Weights are normalized at construction; a single negative weight is rejected since a
/// negative P-function is exactly what the classicality hypothesis excludes.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherentEnsemble {
    n_modes: usize,
    components: Vec<CoherentComponent>,
}

impl CoherentEnsemble {
    pub fn new(n_modes: usize, components: Vec<(f64, Vec<C64>)>) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::InvalidEnsemble("ensemble needs at least one mode".into()));
        }
        if components.is_empty() {
            return Err(Error::InvalidEnsemble("ensemble has no components".into()));
        }
        for (index, (weight, alphas)) in components.iter().enumerate() {
            if !weight.is_finite() {
                return Err(Error::InvalidEnsemble(format!(
                    "weight at component {index} is not finite"
                )));
            }
            if *weight < 0.0 {
                return Err(Error::NegativeWeight {
                    index,
                    weight: *weight,
                });
            }
            if alphas.len() != n_modes {
                return Err(Error::ModeCountMismatch {
                    expected: n_modes,
                    actual: alphas.len(),
                });
            }
            if alphas.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
                return Err(Error::InvalidEnsemble(format!(
                    "amplitude at component {index} is not finite"
                )));
            }
        }
        let total: f64 = components.iter().map(|(w, _)| w).sum();
        if total <= 0.0 {
            return Err(Error::InvalidEnsemble("weights sum to zero".into()));
        }
        let components = components
            .into_iter()
            .map(|(w, alphas)| CoherentComponent {
                weight: w / total,
                alphas,
            })
            .collect();
        Ok(Self {
            n_modes,
            components,
        })
    }

    /// A single multimode coherent state.
    pub fn pure(alphas: Vec<C64>) -> Result<Self> {
        let n = alphas.len();
        Self::new(n, vec![(1.0, alphas)])
    }

    /// Rebuilds an ensemble from already-normalized components, keeping weights bit-exact.
    pub(crate) fn from_normalized(n_modes: usize, components: Vec<CoherentComponent>) -> Self {
        debug_assert!(components.iter().all(|c| c.alphas.len() == n_modes));
        let sum: f64 = components.iter().map(|c| c.weight).sum();
        debug_assert!((sum - 1.0).abs() <= WEIGHT_SUM_SLACK * components.len() as f64);
        Self {
            n_modes,
            components,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn components(&self) -> &[CoherentComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Mean total photon number `sum_i w_i |alpha_i|^2`.
    pub fn mean_photons(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.alphas.iter().map(|a| a.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Largest `|alpha_i|^2` over components.
    pub fn max_component_photons(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.alphas.iter().map(|a| a.norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

fn basis_vector(arena: &FockArena, index: usize) -> DVector<C64> {
    let mut v = DVector::zeros(arena.total_dim());
    v[index] = C64::new(1.0, 0.0);
    v
}

pub fn vacuum(arena: &FockArena) -> StateVector {
    StateVector::new(arena.clone(), basis_vector(arena, 0)).expect("vacuum is normalized")
}

pub fn fock(arena: &FockArena, occupations: &[usize]) -> Result<StateVector> {
    let index = arena.encode(occupations)?;
    StateVector::new(arena.clone(), basis_vector(arena, index))
}

/// Product of per-mode amplitude vectors, laid out in the arena's index order.
pub(crate) fn product_amplitudes(arena: &FockArena, per_mode: &[Vec<C64>]) -> DVector<C64> {
    let mut v = DVector::from_element(1, C64::new(1.0, 0.0));
    for amps in per_mode {
        let factor = DVector::from_column_slice(&amps[..arena.cutoff()]);
        v = v.kronecker(&factor);
    }
    v
}

pub fn coherent(arena: &FockArena, alphas: &[C64]) -> Result<StateVector> {
    coherent_within(arena, alphas, LEAK_TOL)
}

pub fn coherent_within(arena: &FockArena, alphas: &[C64], leak_tol: f64) -> Result<StateVector> {
    if alphas.len() != arena.n_modes() {
        return Err(Error::ModeCountMismatch {
            expected: arena.n_modes(),
            actual: alphas.len(),
        });
    }
    let kept: f64 = alphas
        .iter()
        .map(|a| 1.0 - poisson_tail(a.norm_sqr(), arena.cutoff()))
        .product();
    let leakage = 1.0 - kept;
    if leakage > leak_tol {
        return Err(Error::TruncationLeak {
            leakage,
            budget: leak_tol,
        });
    }
    let per_mode: Vec<Vec<C64>> = alphas
        .iter()
        .map(|&a| coherent_amplitudes(a, arena.cutoff()))
        .collect();
    StateVector::with_leak_budget(arena.clone(), product_amplitudes(arena, &per_mode), leak_tol)
}

/// `sum_i w_i |alpha_i><alpha_i|` on the arena.
pub fn ensemble_to_density(ens: &CoherentEnsemble, arena: &FockArena) -> Result<DensityOperator> {
    ensemble_to_density_within(ens, arena, LEAK_TOL)
}

pub fn ensemble_to_density_within(
    ens: &CoherentEnsemble,
    arena: &FockArena,
    leak_tol: f64,
) -> Result<DensityOperator> {
    if ens.n_modes() != arena.n_modes() {
        return Err(Error::ModeCountMismatch {
            expected: arena.n_modes(),
            actual: ens.n_modes(),
        });
    }
    let dim = arena.total_dim();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for comp in ens.components() {
        let psi = coherent_within(arena, &comp.alphas, leak_tol)?;
        rank_one_update(&mut rho, comp.weight, psi.amplitudes());
    }
    DensityOperator::checked_without_spectrum(arena.clone(), rho, leak_tol)
}

/// `rho += w |v><v|`, touching only the support of `v`.
pub(crate) fn rank_one_update(rho: &mut DMatrix<C64>, weight: f64, v: &DVector<C64>) {
    let support: Vec<(usize, C64)> = v
        .iter()
        .enumerate()
        .filter(|(_, z)| z.re != 0.0 || z.im != 0.0)
        .map(|(i, &z)| (i, z))
        .collect();
    for &(j, vj) in &support {
        let wj = vj.conj() * weight;
        for &(i, vi) in &support {
            rho[(i, j)] += vi * wj;
        }
    }
}

fn single_mode(arena: &FockArena) -> Result<()> {
    if arena.n_modes() != 1 {
        return Err(Error::ModeCountMismatch {
            expected: 1,
            actual: arena.n_modes(),
        });
    }
    Ok(())
}

/// Single-mode squeezed vacuum `S(r e^{i theta_s}) |0>`.
pub fn squeezed_vacuum(arena: &FockArena, r: f64, theta_s: f64) -> Result<StateVector> {
    single_mode(arena)?;
    let spec = GaussianSpec::SqueezedVacuum { r, theta_s };
    spec.validate()?;
    check_leak(spec.leakage(arena.cutoff()), LEAK_TOL)?;
    let amps = squeezed_amplitudes(r, theta_s, arena.cutoff());
    StateVector::new(arena.clone(), DVector::from_vec(amps))
}

/// Single-mode thermal state with mean photon number `nbar`.
pub fn thermal(arena: &FockArena, nbar: f64) -> Result<DensityOperator> {
    single_mode(arena)?;
    let spec = GaussianSpec::Thermal { nbar };
    spec.validate()?;
    check_leak(spec.leakage(arena.cutoff()), LEAK_TOL)?;
    let diag: Vec<C64> = thermal_populations(nbar, arena.cutoff())
        .into_iter()
        .map(|p| C64::new(p, 0.0))
        .collect();
    DensityOperator::new(arena.clone(), DMatrix::from_diagonal(&DVector::from_vec(diag)))
}

fn check_leak(leakage: f64, budget: f64) -> Result<()> {
    if leakage > budget {
        Err(Error::TruncationLeak { leakage, budget })
    } else {
        Ok(())
    }
}

/// Product of single-mode Gaussian probes, one spec per arena mode.
pub fn gaussian_product_density(arena: &FockArena, specs: &[GaussianSpec]) -> Result<DensityOperator> {
    ProductMixture::from_gaussian_specs(specs, arena.cutoff() - 1)?.to_density(arena, LEAK_TOL)
}

/// One pure product branch of a [`ProductMixture`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProductComponent {
    pub weight: f64,
    /// Per-mode Fock amplitudes for photon numbers `0..=max_photons`.
    pub modes: Vec<Vec<C64>>,
    /// Squared amplitude carried by total photon numbers above `max_photons`.
    pub tail: f64,
}

/// A state written as a non-negative mixture of product pure states, with per-mode
/// amplitudes kept up to `max_photons` on every mode.
///
/// Unlike a [`DensityOperator`], this keeps the amplitudes that lie beyond the arena
/// cutoff, so a passive transformation can act on complete photon-number sectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMixture {
    n_modes: usize,
    max_photons: usize,
    components: Vec<ProductComponent>,
}

/// Branches lighter than this are dropped when expanding products of mixed modes.
const MIN_BRANCH_WEIGHT: f64 = 1e-24;

impl ProductMixture {
    pub fn from_ensemble(ens: &CoherentEnsemble, max_photons: usize) -> Self {
        let components = ens
            .components()
            .iter()
            .map(|c| {
                let modes = c
                    .alphas
                    .iter()
                    .map(|&a| coherent_amplitudes(a, max_photons + 1))
                    .collect();
                let total: f64 = c.alphas.iter().map(|a| a.norm_sqr()).sum();
                ProductComponent {
                    weight: c.weight,
                    modes,
                    tail: poisson_tail(total, max_photons + 1),
                }
            })
            .collect();
        Self {
            n_modes: ens.n_modes(),
            max_photons,
            components,
        }
    }

    pub fn fock(occupations: &[usize], max_photons: usize) -> Result<Self> {
        let total: usize = occupations.iter().sum();
        if total > max_photons {
            return Err(Error::InvalidParameter(format!(
                "{total} photons exceed the padded space of {max_photons}"
            )));
        }
        let modes = occupations
            .iter()
            .map(|&n| {
                let mut v = vec![C64::new(0.0, 0.0); max_photons + 1];
                v[n] = C64::new(1.0, 0.0);
                v
            })
            .collect();
        Ok(Self {
            n_modes: occupations.len(),
            max_photons,
            components: vec![ProductComponent {
                weight: 1.0,
                modes,
                tail: 0.0,
            }],
        })
    }

    /// Expands a product of single-mode Gaussian probes; thermal modes become
    /// mixtures of Fock branches.
    pub fn from_gaussian_specs(specs: &[GaussianSpec], max_photons: usize) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidParameter("no modes given".into()));
        }
        let len = max_photons + 1;
        // Amplitudes are generated on a doubled range so the beyond-range tail can be
        // summed directly instead of by cancellation.
        let long = 2 * len;
        let mut per_mode: Vec<Vec<(f64, Vec<C64>)>> = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.validate()?;
            let branches = match *spec {
                GaussianSpec::Coherent { alpha } => vec![(1.0, coherent_amplitudes(alpha, long))],
                GaussianSpec::SqueezedVacuum { r, theta_s } => {
                    vec![(1.0, squeezed_amplitudes(r, theta_s, long))]
                }
                GaussianSpec::Thermal { nbar } => thermal_populations(nbar, len)
                    .into_iter()
                    .enumerate()
                    .filter(|&(_, p)| p >= MIN_BRANCH_WEIGHT)
                    .map(|(k, p)| {
                        let mut v = vec![C64::new(0.0, 0.0); long];
                        v[k] = C64::new(1.0, 0.0);
                        (p, v)
                    })
                    .collect(),
            };
            per_mode.push(branches);
        }

        let mut combos: Vec<(f64, Vec<Vec<C64>>)> = vec![(1.0, Vec::new())];
        for branches in &per_mode {
            let mut next = Vec::with_capacity(combos.len() * branches.len());
            for (w, modes) in &combos {
                for (bw, amps) in branches {
                    let weight = w * bw;
                    if weight < MIN_BRANCH_WEIGHT {
                        continue;
                    }
                    let mut m = modes.clone();
                    m.push(amps.clone());
                    next.push((weight, m));
                }
            }
            combos = next;
        }

        let components = combos
            .into_iter()
            .map(|(weight, long_modes)| {
                let tail = total_photon_tail(&long_modes, max_photons);
                let modes = long_modes.into_iter().map(|mut v| {
                    v.truncate(len);
                    v
                });
                ProductComponent {
                    weight,
                    modes: modes.collect(),
                    tail,
                }
            })
            .collect();
        Ok(Self {
            n_modes: specs.len(),
            max_photons,
            components,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }

    pub fn components(&self) -> &[ProductComponent] {
        &self.components
    }

    /// Probability carried by total photon numbers beyond the padded range.
    pub fn lost_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.tail).sum()
    }

    /// Projects every branch onto the arena and sums the branch projectors.
    pub fn to_density(&self, arena: &FockArena, leak_tol: f64) -> Result<DensityOperator> {
        if self.n_modes != arena.n_modes() {
            return Err(Error::ModeCountMismatch {
                expected: arena.n_modes(),
                actual: self.n_modes,
            });
        }
        if arena.cutoff() > self.max_photons + 1 {
            return Err(Error::InvalidParameter(format!(
                "arena cutoff {} exceeds padded range {}",
                arena.cutoff(),
                self.max_photons + 1
            )));
        }
        let dim = arena.total_dim();
        let mut rho = DMatrix::<C64>::zeros(dim, dim);
        for comp in &self.components {
            rank_one_update(&mut rho, comp.weight, &product_amplitudes(arena, &comp.modes));
        }
        DensityOperator::checked_without_spectrum(arena.clone(), rho, leak_tol)
    }
}

/// Probability of a total photon number above `max_photons` for a product of pure modes.
fn total_photon_tail(modes: &[Vec<C64>], max_photons: usize) -> f64 {
    let mut dist = vec![1.0];
    for amps in modes {
        let p: Vec<f64> = amps.iter().map(|a| a.norm_sqr()).collect();
        let mut next = vec![0.0; dist.len() + p.len() - 1];
        for (i, &x) in dist.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            for (j, &y) in p.iter().enumerate() {
                next[i + j] += x * y;
            }
        }
        dist = next;
    }
    dist.iter().skip(max_photons + 1).sum()
}

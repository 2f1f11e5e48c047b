//! Verification harness: single theorem trials, seeded campaigns, Gaussian trials,
//! the inverse-splitter demonstration and parameter sweeps.
//!
//! A theorem trial runs two independent routes on a classical coherent ensemble:
//! the closed-form ensemble map (weights must come out unchanged and non-negative) and
//! the numeric density pipeline followed by partial-transpose tests on every
//! bipartition. The two outputs are compared entrywise.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    apply_passive, gaussian_from_spec, is_classical, simon_separable, ClassicalityVerdict,
    SeparabilityVerdict,
};
use crate::hilbert::{FockArena, C64};
use crate::passive::{
    apply_to_density, beam_splitter_matrix, lift_unitary, transform_ensemble, ModeUnitary,
};
use crate::states::{
    ensemble_to_density_within, fock, poisson_tail, CoherentEnsemble, GaussianSpec, ProductMixture,
};
use crate::tolerance::Tolerances;
use crate::witnesses::{
    all_bipartition_reports, classicality_report, mandel_q, negativity_report_with_tol,
    ClassicalityReport, EntanglementReport,
};

pub const CONFIG_VERSION: u32 = 1;
/// Unitarity tolerance for matrices read from configs, which carry rounded decimals.
pub const CONFIG_UNITARY_TOL: f64 = 1e-9;
const GRID_THETA_STEPS: usize = 9;

// ---------------------------------------------------------------------------
// Config schema

/// One coherent atom: weight and per-mode amplitudes as `[re, im]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub weight: f64,
    pub alphas: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSpec {
    Coherent {
        alpha: [f64; 2],
    },
    Thermal {
        nbar: f64,
    },
    SqueezedVacuum {
        r: f64,
        #[serde(default)]
        theta_s: f64,
    },
}

impl ModeSpec {
    pub fn to_gaussian(&self) -> GaussianSpec {
        match *self {
            ModeSpec::Coherent { alpha } => GaussianSpec::Coherent {
                alpha: C64::new(alpha[0], alpha[1]),
            },
            ModeSpec::Thermal { nbar } => GaussianSpec::Thermal { nbar },
            ModeSpec::SqueezedVacuum { r, theta_s } => GaussianSpec::SqueezedVacuum { r, theta_s },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    CoherentEnsemble { components: Vec<ComponentSpec> },
    Fock { occupations: Vec<usize> },
    GaussianProduct { modes: Vec<ModeSpec> },
}

impl InputSpec {
    pub fn n_modes(&self) -> usize {
        match self {
            InputSpec::CoherentEnsemble { components } => {
                components.first().map_or(0, |c| c.alphas.len())
            }
            InputSpec::Fock { occupations } => occupations.len(),
            InputSpec::GaussianProduct { modes } => modes.len(),
        }
    }

    pub fn to_ensemble(&self) -> Result<CoherentEnsemble> {
        match self {
            InputSpec::CoherentEnsemble { components } => {
                let parts = components
                    .iter()
                    .map(|c| (c.weight, c.alphas.iter().map(|a| C64::new(a[0], a[1])).collect()))
                    .collect();
                CoherentEnsemble::new(self.n_modes(), parts)
            }
            _ => Err(Error::InvalidParameter(
                "only coherent_ensemble inputs have a coherent-state decomposition".into(),
            )),
        }
    }

    pub fn gaussian_specs(&self) -> Option<Vec<GaussianSpec>> {
        match self {
            InputSpec::GaussianProduct { modes } => Some(modes.iter().map(ModeSpec::to_gaussian).collect()),
            _ => None,
        }
    }

    /// Padded product-branch form used by the density pipeline.
    pub fn to_mixture(&self, max_photons: usize) -> Result<ProductMixture> {
        match self {
            InputSpec::CoherentEnsemble { .. } => {
                Ok(ProductMixture::from_ensemble(&self.to_ensemble()?, max_photons))
            }
            InputSpec::Fock { occupations } => ProductMixture::fock(occupations, max_photons),
            InputSpec::GaussianProduct { modes } => {
                let specs: Vec<GaussianSpec> = modes.iter().map(ModeSpec::to_gaussian).collect();
                ProductMixture::from_gaussian_specs(&specs, max_photons)
            }
        }
    }
}

fn default_pair() -> [usize; 2] {
    [0, 1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UnitarySpec {
    /// Two-mode splitter on `modes`, identity elsewhere.
    BeamSplitter {
        theta: f64,
        #[serde(default)]
        phi0: f64,
        #[serde(default)]
        phi1: f64,
        #[serde(default = "default_pair")]
        modes: [usize; 2],
    },
    /// Row-major complex matrix with entries `[re, im]`.
    Matrix { rows: Vec<Vec<[f64; 2]>> },
}

impl UnitarySpec {
    pub fn build(&self, n_modes: usize) -> Result<ModeUnitary> {
        match self {
            UnitarySpec::BeamSplitter {
                theta,
                phi0,
                phi1,
                modes,
            } => embed_beam_splitter(n_modes, *modes, *theta, *phi0, *phi1),
            UnitarySpec::Matrix { rows } => {
                if rows.len() != n_modes || rows.iter().any(|r| r.len() != n_modes) {
                    return Err(Error::DimensionMismatch {
                        expected: n_modes,
                        actual: rows.iter().map(Vec::len).chain([rows.len()]).max().unwrap_or(0),
                    });
                }
                let entries: Vec<C64> = rows.iter().flatten().map(|z| C64::new(z[0], z[1])).collect();
                ModeUnitary::with_tolerance(DMatrix::from_row_slice(n_modes, n_modes, &entries), CONFIG_UNITARY_TOL)
            }
        }
    }
}

/// Splitter on modes `pair` of an `n_modes` system.
pub fn embed_beam_splitter(
    n_modes: usize,
    pair: [usize; 2],
    theta: f64,
    phi0: f64,
    phi1: f64,
) -> Result<ModeUnitary> {
    let [p, q] = pair;
    if p == q || p >= n_modes || q >= n_modes {
        return Err(Error::InvalidModeSet(format!(
            "beam splitter modes {pair:?} are not two distinct modes of {n_modes}"
        )));
    }
    if ![theta, phi0, phi1].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParameter("beam splitter angles must be finite".into()));
    }
    let b = beam_splitter_matrix(theta, phi0, phi1);
    let mut m = DMatrix::<C64>::identity(n_modes, n_modes);
    for (i, &r) in [p, q].iter().enumerate() {
        for (j, &c) in [p, q].iter().enumerate() {
            m[(r, c)] = b.matrix()[(i, j)];
        }
    }
    ModeUnitary::new(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitarySource {
    RandomHaar,
    BeamSplitterGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualTrial {
    pub input: InputSpec,
    pub unitary: UnitarySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub version: u32,
    pub n_trials: usize,
    pub seed: u64,
    pub n_modes: usize,
    pub max_ensemble_components: usize,
    pub amplitude_bound: f64,
    pub cutoff: usize,
    pub unitary_source: UnitarySource,
    pub threads: usize,
    /// Extra cutoff increments of 2 tried when a trial leaks.
    pub max_retries: usize,
    pub tolerances: Tolerances,
    /// Hand-written cases run after the random ones.
    pub trials: Vec<ManualTrial>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            n_trials: 200,
            seed: 2024,
            n_modes: 2,
            max_ensemble_components: 4,
            amplitude_bound: 1.0,
            cutoff: 14,
            unitary_source: UnitarySource::RandomHaar,
            threads: 1,
            max_retries: 2,
            tolerances: Tolerances::default(),
            trials: Vec::new(),
        }
    }
}

/// Upper bound on the probability an output component loses to the cutoff when every
/// input amplitude satisfies `|alpha| <= amplitude_bound`.
///
/// A passive map can move all `n b^2` mean photons into a single mode, so each of the `n`
/// output modes leaks at most `poisson_tail(n b^2, cutoff)`.
pub fn truncation_bound(n_modes: usize, amplitude_bound: f64, cutoff: usize) -> f64 {
    let mean = n_modes as f64 * amplitude_bound * amplitude_bound;
    n_modes as f64 * poisson_tail(mean, cutoff)
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if self.n_modes < 2 {
            return bad("campaigns need at least two modes".into());
        }
        if self.cutoff < 2 {
            return bad("cutoff must be at least 2".into());
        }
        if self.threads == 0 {
            return bad("threads must be at least 1".into());
        }
        let t = &self.tolerances;
        if ![t.leak_tol, t.psd_tol, t.ppt_tol, t.pipeline_tol]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0)
        {
            return bad("tolerances must be positive and finite".into());
        }
        FockArena::new(self.n_modes, self.cutoff + 2 * self.max_retries)?;
        if self.n_trials > 0 {
            if self.max_ensemble_components == 0 {
                return bad("max_ensemble_components must be at least 1".into());
            }
            if !(self.amplitude_bound.is_finite() && self.amplitude_bound > 0.0) {
                return bad("amplitude_bound must be positive and finite".into());
            }
            let leak = truncation_bound(self.n_modes, self.amplitude_bound, self.cutoff);
            if leak > t.leak_tol {
                return bad(format!(
                    "amplitude_bound {} is unsafe at cutoff {}: output leakage bound {leak:.3e} \
                     exceeds leak_tol {:.1e}",
                    self.amplitude_bound, self.cutoff, t.leak_tol
                ));
            }
        }
        for (i, trial) in self.trials.iter().enumerate() {
            let context = |e: Error| Error::InvalidParameter(format!("manual trial {i}: {e}"));
            if trial.input.n_modes() != self.n_modes {
                return Err(context(Error::ModeCountMismatch {
                    expected: self.n_modes,
                    actual: trial.input.n_modes(),
                }));
            }
            trial.input.to_ensemble().map_err(context)?;
            trial.unitary.build(self.n_modes).map_err(context)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Random inputs

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` in a campaign seeded with `base`.
pub fn trial_seed(base: u64, index: usize) -> u64 {
    splitmix64(base ^ splitmix64(index as u64))
}

fn disk_point<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> C64 {
    let r = radius * rng.random::<f64>().sqrt();
    C64::from_polar(r, TAU * rng.random::<f64>())
}

pub fn random_classical_ensemble(
    seed: u64,
    n_modes: usize,
    max_components: usize,
    amplitude_bound: f64,
) -> Result<CoherentEnsemble> {
    random_classical_ensemble_from(&mut ChaCha8Rng::seed_from_u64(seed), n_modes, max_components, amplitude_bound)
}

/// Between 1 and `max_components` atoms, flat Dirichlet weights, amplitudes uniform in
/// the disk of radius `amplitude_bound`.
pub fn random_classical_ensemble_from<R: Rng + ?Sized>(
    rng: &mut R,
    n_modes: usize,
    max_components: usize,
    amplitude_bound: f64,
) -> Result<CoherentEnsemble> {
    if n_modes == 0 || max_components == 0 || !(amplitude_bound > 0.0) {
        return Err(Error::InvalidParameter(
            "mode count, component count and amplitude bound must be positive".into(),
        ));
    }
    let k = rng.random_range(1..=max_components);
    let parts = (0..k)
        .map(|_| {
            let w: f64 = Exp1.sample(rng);
            let alphas = (0..n_modes).map(|_| disk_point(rng, amplitude_bound)).collect();
            (w, alphas)
        })
        .collect();
    CoherentEnsemble::new(n_modes, parts)
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases of `R`'s
/// diagonal moved into `Q`.
pub fn random_haar_unitary<R: Rng + ?Sized>(rng: &mut R, n_modes: usize) -> ModeUnitary {
    let g = DMatrix::<C64>::from_fn(n_modes, n_modes, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n_modes {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n_modes {
            q[(i, j)] *= phase;
        }
    }
    ModeUnitary::new(q).expect("QR factor is unitary")
}

/// Deterministic splitter for grid campaigns: theta steps through `[0, pi/2]`, then the
/// phases through multiples of `pi/2`, then the mode pair.
pub fn grid_beam_splitter(index: usize, n_modes: usize) -> UnitarySpec {
    let theta = (index % GRID_THETA_STEPS) as f64 * FRAC_PI_2 / (GRID_THETA_STEPS - 1) as f64;
    let rest = index / GRID_THETA_STEPS;
    let pair = rest / 16 % (n_modes - 1);
    UnitarySpec::BeamSplitter {
        theta,
        phi0: (rest % 4) as f64 * FRAC_PI_2,
        phi1: (rest / 4 % 4) as f64 * FRAC_PI_2,
        modes: [pair, pair + 1],
    }
}

/// Random classical Gaussian product: each mode coherent (uniform in the disk of radius
/// `amplitude_bound`) or thermal (`nbar` uniform in `[0, max_nbar]`) with equal odds.
pub fn random_classical_gaussian<R: Rng + ?Sized>(
    rng: &mut R,
    n_modes: usize,
    amplitude_bound: f64,
    max_nbar: f64,
) -> Vec<GaussianSpec> {
    (0..n_modes)
        .map(|_| {
            if rng.random::<bool>() {
                GaussianSpec::Coherent {
                    alpha: disk_point(rng, amplitude_bound),
                }
            } else {
                GaussianSpec::Thermal {
                    nbar: max_nbar * rng.random::<f64>(),
                }
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Theorem trials

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    /// Ensemble map changed or negated a weight. Impossible in exact arithmetic.
    ClosureBreach,
    PptViolation,
    PipelineDisagreement,
    OracleDisagreement,
}

impl FindingKind {
    pub fn is_critical(self) -> bool {
        self == FindingKind::ClosureBreach
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitaryRecord {
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<UnitarySpec>,
    pub rows: Vec<Vec<[f64; 2]>>,
}

impl UnitaryRecord {
    fn new(source: &str, spec: Option<UnitarySpec>, m: &ModeUnitary) -> Self {
        let n = m.n_modes();
        let rows = (0..n)
            .map(|i| (0..n).map(|j| [m.matrix()[(i, j)].re, m.matrix()[(i, j)].im]).collect())
            .collect();
        Self {
            source: source.into(),
            spec,
            rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianVerdict {
    pub output_classicality: ClassicalityVerdict,
    pub simon: Option<SeparabilityVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub input: Vec<ComponentSpec>,
    pub unitary: UnitaryRecord,
    pub cutoff_used: usize,
    pub ensemble_closure: ClosureStatus,
    pub ppt_min_eigenvalue: f64,
    pub entanglement: Vec<EntanglementReport>,
    /// Max entrywise gap between the density pipeline and the transformed ensemble.
    pub pipeline_discrepancy: f64,
    pub gaussian_verdict: Option<GaussianVerdict>,
    /// Diagnostics of the input state.
    pub classicality_report: ClassicalityReport,
    pub output_classicality_report: ClassicalityReport,
    pub findings: Vec<FindingKind>,
    #[serde(skip)]
    pub wall_time: Duration,
}

fn component_specs(ens: &CoherentEnsemble) -> Vec<ComponentSpec> {
    ens.components()
        .iter()
        .map(|c| ComponentSpec {
            weight: c.weight,
            alphas: c.alphas.iter().map(|a| [a.re, a.im]).collect(),
        })
        .collect()
}

fn closure_status(input: &CoherentEnsemble, output: &CoherentEnsemble) -> ClosureStatus {
    let same = input.len() == output.len()
        && input
            .components()
            .iter()
            .zip(output.components())
            .all(|(a, b)| a.weight.to_bits() == b.weight.to_bits() && b.weight >= 0.0);
    if same {
        ClosureStatus::Pass
    } else {
        ClosureStatus::Fail
    }
}

/// Runs both routes of the theorem on one classical input.
///
/// Truncation problems surface as [`Error::TruncationLeak`], never as findings.
pub fn run_theorem_trial(
    input: &CoherentEnsemble,
    m: &ModeUnitary,
    arena: &FockArena,
    tol: &Tolerances,
) -> Result<TrialRecord> {
    let start = Instant::now();
    let n = arena.n_modes();
    if input.n_modes() != n {
        return Err(Error::ModeCountMismatch {
            expected: n,
            actual: input.n_modes(),
        });
    }

    let output = transform_ensemble(input, m)?;
    let ensemble_closure = closure_status(input, &output);

    let rho_in = ensemble_to_density_within(input, arena, tol.leak_tol)?;
    let reference = ensemble_to_density_within(&output, arena, tol.leak_tol)?;
    let lifted = lift_unitary(m, arena)?;
    let mixture = ProductMixture::from_ensemble(input, n * (arena.cutoff() - 1));
    let rho_out = lifted.apply_to_mixture(&mixture, tol.leak_tol)?;
    let pipeline_discrepancy = rho_out.max_abs_diff(&reference);

    let entanglement = all_bipartition_reports(&rho_out, tol.ppt_tol)?;
    let ppt_min_eigenvalue = entanglement
        .iter()
        .map(|r| r.min_pt_eigenvalue)
        .fold(f64::INFINITY, f64::min);

    let gaussian_verdict = if input.len() == 1 {
        let specs: Vec<GaussianSpec> = input.components()[0]
            .alphas
            .iter()
            .map(|&alpha| GaussianSpec::Coherent { alpha })
            .collect();
        let g = apply_passive(&gaussian_from_spec(&specs)?, m)?;
        Some(GaussianVerdict {
            output_classicality: is_classical(&g),
            simon: if n == 2 { Some(simon_separable(&g)?) } else { None },
        })
    } else {
        None
    };

    let mut findings = Vec::new();
    if ensemble_closure == ClosureStatus::Fail {
        findings.push(FindingKind::ClosureBreach);
    }
    if ppt_min_eigenvalue < -tol.ppt_tol {
        findings.push(FindingKind::PptViolation);
    }
    if !(pipeline_discrepancy <= tol.pipeline_tol) {
        findings.push(FindingKind::PipelineDisagreement);
    }
    if let Some(v) = &gaussian_verdict {
        if !v.output_classicality.classical || v.simon.is_some_and(|s| !s.separable) {
            findings.push(FindingKind::OracleDisagreement);
        }
    }

    Ok(TrialRecord {
        trial: 0,
        seed: 0,
        input: component_specs(input),
        unitary: UnitaryRecord::new("direct", None, m),
        cutoff_used: arena.cutoff(),
        ensemble_closure,
        ppt_min_eigenvalue,
        entanglement,
        pipeline_discrepancy,
        gaussian_verdict,
        classicality_report: classicality_report(&rho_in)?,
        output_classicality_report: classicality_report(&rho_out)?,
        findings,
        wall_time: start.elapsed(),
    })
}

/// Retries with the cutoff raised by 2 while the trial leaks, up to `max_retries` times.
pub fn run_theorem_trial_with_retry(
    input: &CoherentEnsemble,
    m: &ModeUnitary,
    cutoff: usize,
    max_retries: usize,
    tol: &Tolerances,
) -> Result<TrialRecord> {
    let mut cutoff = cutoff;
    let mut attempt = 0;
    loop {
        let arena = FockArena::new(input.n_modes(), cutoff)?;
        match run_theorem_trial(input, m, &arena, tol) {
            Err(e) if e.is_truncation() && attempt < max_retries => {
                attempt += 1;
                cutoff += 2;
            }
            other => return other,
        }
    }
}

// ---------------------------------------------------------------------------
// Campaigns

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Truncation,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub trial: usize,
    pub seed: u64,
    pub kind: FindingKind,
    pub critical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub seed: u64,
    pub n_modes: usize,
    pub cutoff: usize,
    pub trials_requested: usize,
    pub trials_completed: usize,
    pub closure_failures: usize,
    pub ppt_violations: usize,
    pub pipeline_breaches: usize,
    pub oracle_disagreements: usize,
    pub truncation_failures: usize,
    pub numeric_failures: usize,
    pub retried_trials: usize,
    pub worst_ppt_min_eigenvalue: Option<f64>,
    pub worst_pipeline_discrepancy: Option<f64>,
    pub max_negativity: Option<f64>,
    pub findings: Vec<Finding>,
    pub failures: Vec<TrialFailure>,
}

fn fold_min(acc: Option<f64>, x: f64) -> Option<f64> {
    Some(acc.map_or(x, |a| a.min(x)))
}

fn fold_max(acc: Option<f64>, x: f64) -> Option<f64> {
    Some(acc.map_or(x, |a| a.max(x)))
}

impl CampaignSummary {
    fn empty(cfg: &CampaignConfig) -> Self {
        Self {
            seed: cfg.seed,
            n_modes: cfg.n_modes,
            cutoff: cfg.cutoff,
            trials_requested: cfg.n_trials + cfg.trials.len(),
            trials_completed: 0,
            closure_failures: 0,
            ppt_violations: 0,
            pipeline_breaches: 0,
            oracle_disagreements: 0,
            truncation_failures: 0,
            numeric_failures: 0,
            retried_trials: 0,
            worst_ppt_min_eigenvalue: None,
            worst_pipeline_discrepancy: None,
            max_negativity: None,
            findings: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn absorb(&mut self, outcome: &std::result::Result<TrialRecord, TrialFailure>) {
        match outcome {
            Ok(r) => {
                self.trials_completed += 1;
                if r.cutoff_used != self.cutoff {
                    self.retried_trials += 1;
                }
                self.worst_ppt_min_eigenvalue = fold_min(self.worst_ppt_min_eigenvalue, r.ppt_min_eigenvalue);
                self.worst_pipeline_discrepancy =
                    fold_max(self.worst_pipeline_discrepancy, r.pipeline_discrepancy);
                for e in &r.entanglement {
                    self.max_negativity = fold_max(self.max_negativity, e.negativity);
                }
                for &kind in &r.findings {
                    match kind {
                        FindingKind::ClosureBreach => self.closure_failures += 1,
                        FindingKind::PptViolation => self.ppt_violations += 1,
                        FindingKind::PipelineDisagreement => self.pipeline_breaches += 1,
                        FindingKind::OracleDisagreement => self.oracle_disagreements += 1,
                    }
                    self.findings.push(Finding {
                        trial: r.trial,
                        seed: r.seed,
                        kind,
                        critical: kind.is_critical(),
                    });
                }
            }
            Err(f) => {
                match f.kind {
                    FailureKind::Truncation => self.truncation_failures += 1,
                    FailureKind::Numeric => self.numeric_failures += 1,
                }
                self.failures.push(f.clone());
            }
        }
    }

    /// Puts the lists in trial order so that merge order does not matter.
    fn finish(mut self) -> Self {
        self.findings.sort_by_key(|f| (f.trial, f.kind as u8));
        self.failures.sort_by_key(|f| f.trial);
        self
    }

    pub fn has_findings(&self) -> bool {
        !self.findings.is_empty()
    }

    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Campaign {
    pub summary: CampaignSummary,
    /// Completed trials in trial order.
    pub records: Vec<TrialRecord>,
    pub elapsed: Duration,
}

fn run_job(cfg: &CampaignConfig, index: usize) -> std::result::Result<TrialRecord, TrialFailure> {
    let seed = trial_seed(cfg.seed, index);
    let fail = |e: Error| TrialFailure {
        trial: index,
        seed,
        kind: if e.is_truncation() {
            FailureKind::Truncation
        } else {
            FailureKind::Numeric
        },
        message: e.to_string(),
    };
    let prepared = if index < cfg.n_trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_classical_ensemble_from(&mut rng, cfg.n_modes, cfg.max_ensemble_components, cfg.amplitude_bound)
            .map(|ens| {
                let (label, spec, m) = match cfg.unitary_source {
                    UnitarySource::RandomHaar => ("random_haar", None, Ok(random_haar_unitary(&mut rng, cfg.n_modes))),
                    UnitarySource::BeamSplitterGrid => {
                        let spec = grid_beam_splitter(index, cfg.n_modes);
                        let m = spec.build(cfg.n_modes);
                        ("beam_splitter_grid", Some(spec), m)
                    }
                };
                (ens, label, spec, m)
            })
    } else {
        let manual = &cfg.trials[index - cfg.n_trials];
        manual
            .input
            .to_ensemble()
            .map(|ens| (ens, "manual", Some(manual.unitary.clone()), manual.unitary.build(cfg.n_modes)))
    };
    let (ens, label, spec, m) = prepared.map_err(fail)?;
    let m = m.map_err(fail)?;
    let mut record =
        run_theorem_trial_with_retry(&ens, &m, cfg.cutoff, cfg.max_retries, &cfg.tolerances).map_err(fail)?;
    record.trial = index;
    record.seed = seed;
    record.unitary = UnitaryRecord::new(label, spec, &m);
    Ok(record)
}

/// Runs every random and manual trial of a validated config.
///
/// Per-trial seeds depend only on `(cfg.seed, trial index)`, so serial and threaded runs
/// produce identical records and summaries.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<Campaign> {
    cfg.validate()?;
    let start = Instant::now();
    let total = cfg.n_trials + cfg.trials.len();
    let outcomes: Vec<_> = if cfg.threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Numerical(format!("cannot start thread pool: {e}")))?;
        pool.install(|| (0..total).into_par_iter().map(|i| run_job(cfg, i)).collect())
    } else {
        (0..total).map(|i| run_job(cfg, i)).collect()
    };
    let mut summary = CampaignSummary::empty(cfg);
    for outcome in &outcomes {
        summary.absorb(outcome);
    }
    let records = outcomes.into_iter().filter_map(|o| o.ok()).collect();
    Ok(Campaign {
        summary: summary.finish(),
        records,
        elapsed: start.elapsed(),
    })
}

// ---------------------------------------------------------------------------
// Gaussian trials

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianTrial {
    pub input_classicality: ClassicalityVerdict,
    pub output_classicality: ClassicalityVerdict,
    /// Present for two-mode inputs.
    pub simon: Option<SeparabilityVerdict>,
    pub entanglement: Vec<EntanglementReport>,
    pub max_negativity: f64,
}

/// Closed-form covariance verdicts next to the Fock-pipeline negativity for a product
/// Gaussian input.
pub fn run_gaussian_trial(
    specs: &[GaussianSpec],
    m: &ModeUnitary,
    arena: &FockArena,
    tol: &Tolerances,
) -> Result<GaussianTrial> {
    let g_in = gaussian_from_spec(specs)?;
    let g_out = apply_passive(&g_in, m)?;
    let lifted = lift_unitary(m, arena)?;
    let mixture = ProductMixture::from_gaussian_specs(specs, arena.n_modes() * (arena.cutoff() - 1))?;
    let rho = lifted.apply_to_mixture(&mixture, tol.leak_tol)?;
    let entanglement = all_bipartition_reports(&rho, tol.ppt_tol)?;
    Ok(GaussianTrial {
        input_classicality: is_classical(&g_in),
        output_classicality: is_classical(&g_out),
        simon: if specs.len() == 2 { Some(simon_separable(&g_out)?) } else { None },
        max_negativity: entanglement.iter().map(|r| r.negativity).fold(0.0, f64::max),
        entanglement,
    })
}

// ---------------------------------------------------------------------------
// Demonstrations and sweeps

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonSufficiencyDemo {
    pub theta: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub cutoff: usize,
    pub input_mandel_q: f64,
    pub input_classicality: ClassicalityReport,
    /// `|1,0>` through the splitter.
    pub forward: EntanglementReport,
    /// The forward output through the inverse splitter.
    pub inverse: EntanglementReport,
    /// `<1,0| rho |1,0>` after the inverse step.
    pub recovered_fidelity: f64,
}

/// `|1,0>` through a splitter and back through its inverse: a nonclassical input that
/// becomes entangled, and an entangled nonclassical input that comes out separable.
pub fn non_sufficiency_demo(theta: f64, phi0: f64, phi1: f64, arena: &FockArena) -> Result<NonSufficiencyDemo> {
    if arena.n_modes() != 2 || arena.cutoff() < 2 {
        return Err(Error::InvalidArena(
            "the demonstration needs two modes and a cutoff of at least 2".into(),
        ));
    }
    let tol = Tolerances::default();
    let m = embed_beam_splitter(2, [0, 1], theta, phi0, phi1)?;
    let psi = fock(arena, &[1, 0])?;
    let rho_in = psi.to_density();
    let forward_state = apply_to_density(&lift_unitary(&m, arena)?, &rho_in)?;
    let back = apply_to_density(&lift_unitary(&m.inverse(), arena)?, &forward_state)?;
    Ok(NonSufficiencyDemo {
        theta,
        phi0,
        phi1,
        cutoff: arena.cutoff(),
        input_mandel_q: mandel_q(&rho_in, 0)?,
        input_classicality: classicality_report(&rho_in)?,
        forward: negativity_report_with_tol(&forward_state, &[0], &[1], tol.ppt_tol)?,
        inverse: negativity_report_with_tol(&back, &[0], &[1], tol.ppt_tol)?,
        recovered_fidelity: back.fidelity_with_pure(&psi),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub negativity: f64,
    pub log_negativity: f64,
    pub min_pt_eigenvalue: f64,
    pub mandel_q: [f64; 2],
    pub min_quadrature_variance: [f64; 2],
}

impl SweepRow {
    pub const CSV_HEADER: &'static str = "theta,phi0,phi1,negativity,log_negativity,min_pt_eigenvalue,\
mandel_q_0,mandel_q_1,min_quadrature_variance_0,min_quadrature_variance_1";

    pub fn csv_line(&self) -> String {
        [
            self.theta,
            self.phi0,
            self.phi1,
            self.negativity,
            self.log_negativity,
            self.min_pt_eigenvalue,
            self.mandel_q[0],
            self.mandel_q[1],
            self.min_quadrature_variance[0],
            self.min_quadrature_variance[1],
        ]
        .iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

/// Output diagnostics of a two-mode input sent through splitters with each `theta`.
pub fn sweep(
    input: &InputSpec,
    thetas: &[f64],
    phi0: f64,
    phi1: f64,
    arena: &FockArena,
    tol: &Tolerances,
) -> Result<Vec<SweepRow>> {
    if input.n_modes() != 2 || arena.n_modes() != 2 {
        return Err(Error::InvalidParameter("sweeps run on two-mode inputs".into()));
    }
    if let InputSpec::Fock { occupations } = input {
        arena.encode(occupations)?;
    }
    let mixture = input.to_mixture(2 * (arena.cutoff() - 1))?;
    thetas
        .iter()
        .map(|&theta| {
            let m = embed_beam_splitter(2, [0, 1], theta, phi0, phi1)?;
            let rho = lift_unitary(&m, arena)?.apply_to_mixture(&mixture, tol.leak_tol)?;
            let ent = negativity_report_with_tol(&rho, &[0], &[1], tol.ppt_tol)?;
            let diag = classicality_report(&rho)?;
            Ok(SweepRow {
                theta,
                phi0,
                phi1,
                negativity: ent.negativity,
                log_negativity: ent.log_negativity,
                min_pt_eigenvalue: ent.min_pt_eigenvalue,
                mandel_q: [diag.modes[0].mandel_q, diag.modes[1].mandel_q],
                min_quadrature_variance: [
                    diag.modes[0].min_quadrature_variance,
                    diag.modes[1].min_quadrature_variance,
                ],
            })
        })
        .collect()
}

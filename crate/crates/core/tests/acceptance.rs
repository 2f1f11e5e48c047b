//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails.

use std::f64::consts::{FRAC_PI_4, TAU};
use std::process::Command;
use std::time::Instant;

use bse_core::gaussian::{apply_passive, gaussian_from_spec, is_classical, simon_separable};
use bse_core::hilbert::{FockArena, C64};
use bse_core::passive::{apply_to_density, beam_splitter_matrix, lift_unitary, ModeUnitary};
use bse_core::states::{fock, GaussianSpec};
use bse_core::theoremlab::{
    non_sufficiency_demo, random_classical_gaussian, random_haar_unitary, run_campaign,
    run_gaussian_trial, CampaignConfig, ClosureStatus, UnitarySource,
};
use bse_core::tolerance::Tolerances;
use bse_core::witnesses::{mandel_q, negativity_report};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Unitary sets shared by criteria 1 and 2: 50 two-mode and 20 three-mode Haar draws.
fn unitary_sets() -> Vec<(FockArena, Vec<ModeUnitary>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let two = (0..50).map(|_| random_haar_unitary(&mut rng, 2)).collect();
    let three = (0..20).map(|_| random_haar_unitary(&mut rng, 3)).collect();
    vec![
        (FockArena::new(2, 10).unwrap(), two),
        (FockArena::new(3, 8).unwrap(), three),
    ]
}

fn vacuum_invariance() -> Outcome {
    let mut worst = 0.0f64;
    for (arena, us) in unitary_sets() {
        for m in &us {
            let u = lift_unitary(m, &arena).unwrap();
            let mut vac = DVector::<C64>::zeros(arena.total_dim());
            vac[0] = C64::new(1.0, 0.0);
            let moved = u.matrix() * &vac - &vac;
            worst = worst.max(moved.norm());
        }
    }
    outcome(worst <= 1e-10, format!("max |U vac - vac| = {worst:.3e} (bound 1e-10)"))
}

/// `max |<i| U a_j U^dag - sum_k M_jk a_k |l>|` over basis states with at most `cutoff/2`
/// photons, from dense ladder matrices.
fn dense_conjugation_residual(arena: &FockArena, m: &ModeUnitary, mat: &DMatrix<C64>) -> f64 {
    let keep: Vec<usize> = (0..arena.total_dim())
        .filter(|&i| arena.decode(i).iter().sum::<usize>() <= arena.cutoff() / 2)
        .collect();
    let rows = mat.select_rows(&keep);
    let mut worst = 0.0f64;
    for j in 0..arena.n_modes() {
        let lhs = &rows * arena.ladder(j).unwrap() * rows.adjoint();
        let mut rhs = DMatrix::<C64>::zeros(keep.len(), keep.len());
        for k in 0..arena.n_modes() {
            let a = arena.ladder(k).unwrap().select_rows(&keep).select_columns(&keep);
            rhs += a * m.matrix()[(j, k)];
        }
        worst = worst.max((lhs - rhs).iter().fold(0.0f64, |acc, z| acc.max(z.norm())));
    }
    worst
}

fn conjugation_law() -> Outcome {
    let mut worst = 0.0f64;
    for (arena, us) in unitary_sets() {
        for m in &us {
            let u = lift_unitary(m, &arena).unwrap();
            worst = worst.max(dense_conjugation_residual(&arena, m, u.matrix()));
        }
    }
    outcome(worst <= 1e-8, format!("max conjugation residual = {worst:.3e} (bound 1e-8)"))
}

/// Coherent amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)` from the series definition.
fn coherent_oracle(arena: &FockArena, alphas: &[C64]) -> DVector<C64> {
    DVector::from_fn(arena.total_dim(), |i, _| {
        arena
            .decode(i)
            .iter()
            .zip(alphas)
            .map(|(&n, &a)| {
                let fact: f64 = (1..=n).map(|k| k as f64).product();
                a.powu(n as u32) * (-a.norm_sqr() / 2.0).exp() / fact.sqrt()
            })
            .product()
    })
}

fn coherent_covariance() -> Outcome {
    let arena = FockArena::new(2, 20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 1.0f64;
    for _ in 0..100 {
        let alphas: Vec<C64> = (0..2)
            .map(|_| C64::from_polar(rng.random::<f64>().sqrt(), TAU * rng.random::<f64>()))
            .collect();
        let m = random_haar_unitary(&mut rng, 2);
        let input = coherent_oracle(&arena, &alphas);
        let rho_in = bse_core::hilbert::DensityOperator::new(arena.clone(), &input * input.adjoint()).unwrap();
        let out = apply_to_density(&lift_unitary(&m, &arena).unwrap(), &rho_in).unwrap();
        // Column form of the mode map: alpha' = M^dagger alpha.
        let mapped = m.matrix().adjoint() * DVector::from_column_slice(&alphas);
        let target = coherent_oracle(&arena, mapped.as_slice());
        let fidelity = target.dotc(&(out.matrix() * &target)).re;
        worst = worst.min(fidelity);
    }
    outcome(
        worst >= 1.0 - 1e-6,
        format!("min fidelity = 1 - {:.3e} (bound 1 - 1e-6)", 1.0 - worst),
    )
}

fn campaign_outcome(cfg: &CampaignConfig, expected_bipartitions: usize) -> Outcome {
    let c = run_campaign(cfg).unwrap();
    let s = &c.summary;
    let closure_ok = c.records.iter().all(|r| r.ensemble_closure == ClosureStatus::Pass);
    let ppt_ok = c.records.iter().all(|r| {
        r.entanglement.len() == expected_bipartitions
            && r.entanglement.iter().all(|e| e.min_pt_eigenvalue >= -1e-8)
    });
    let passed = s.trials_completed == cfg.n_trials
        && s.failures.is_empty()
        && s.findings.is_empty()
        && closure_ok
        && ppt_ok;
    outcome(
        passed,
        format!(
            "{}/{} trials, closure failures {}, findings {}, worst PT eigenvalue {:.3e} (bound -1e-8), {:.1}s",
            s.trials_completed,
            cfg.n_trials,
            s.closure_failures,
            s.findings.len(),
            s.worst_ppt_min_eigenvalue.unwrap_or(f64::NAN),
            c.elapsed.as_secs_f64()
        ),
    )
}

fn theorem_campaign() -> Outcome {
    let cfg = CampaignConfig {
        n_trials: 200,
        seed: 4,
        n_modes: 2,
        max_ensemble_components: 4,
        amplitude_bound: 1.0,
        cutoff: 14,
        unitary_source: UnitarySource::RandomHaar,
        ..CampaignConfig::default()
    };
    campaign_outcome(&cfg, 1)
}

fn multimode_campaign() -> Outcome {
    let cfg = CampaignConfig {
        n_trials: 100,
        seed: 5,
        n_modes: 3,
        max_ensemble_components: 4,
        // Largest bound the leakage rule admits at cutoff 8 with three modes.
        amplitude_bound: 0.4,
        cutoff: 8,
        unitary_source: UnitarySource::RandomHaar,
        ..CampaignConfig::default()
    };
    campaign_outcome(&cfg, 3)
}

fn single_photon_log_negativity(theta: f64) -> f64 {
    let arena = FockArena::new(2, 4).unwrap();
    let rho = fock(&arena, &[1, 0]).unwrap().to_density();
    let out = apply_to_density(&lift_unitary(&beam_splitter_matrix(theta, 0.0, 0.0), &arena).unwrap(), &rho).unwrap();
    negativity_report(&out, &[0], &[1]).unwrap().log_negativity
}

fn entanglement_generation() -> Outcome {
    let balanced = single_photon_log_negativity(FRAC_PI_4);
    let identity = single_photon_log_negativity(0.0);
    outcome(
        (balanced - 1.0).abs() <= 1e-9 && identity.abs() <= 1e-9,
        format!("log_negativity {balanced:.12} at pi/4 (target 1 +- 1e-9), {identity:.3e} at 0"),
    )
}

fn non_sufficiency() -> Outcome {
    let arena = FockArena::new(2, 4).unwrap();
    let d = non_sufficiency_demo(FRAC_PI_4, 0.0, 0.0, &arena).unwrap();
    let q = mandel_q(&fock(&arena, &[1, 0]).unwrap().to_density(), 0).unwrap();
    outcome(
        d.inverse.negativity <= 1e-9
            && d.recovered_fidelity >= 1.0 - 1e-9
            && (q + 1.0).abs() < 1e-12
            && (d.input_mandel_q + 1.0).abs() < 1e-12,
        format!(
            "inverse negativity {:.3e}, recovered fidelity {:.12}, input Mandel Q {}",
            d.inverse.negativity,
            d.recovered_fidelity,
            d.input_mandel_q
        ),
    )
}

fn gaussian_agreement() -> Outcome {
    let tol = Tolerances::default();
    let arena = FockArena::new(2, 14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_neg = 0.0f64;
    let mut classical_kept = true;
    let mut simon_sep = true;
    for _ in 0..100 {
        let specs = random_classical_gaussian(&mut rng, 2, 0.7, 0.3);
        let m = random_haar_unitary(&mut rng, 2);
        let t = run_gaussian_trial(&specs, &m, &arena, &tol).unwrap();
        classical_kept &= t.input_classicality.classical && t.output_classicality.classical;
        simon_sep &= t.simon.unwrap().separable;
        worst_neg = worst_neg.max(t.max_negativity);
    }

    let r = 0.5f64;
    let tmsv = [
        GaussianSpec::SqueezedVacuum { r, theta_s: 0.0 },
        GaussianSpec::SqueezedVacuum { r, theta_s: std::f64::consts::PI },
    ];
    let bs = beam_splitter_matrix(FRAC_PI_4, 0.0, 0.0);
    let g = apply_passive(&gaussian_from_spec(&tmsv).unwrap(), &bs).unwrap();
    let simon = simon_separable(&g).unwrap();
    let t = run_gaussian_trial(&tmsv, &bs, &FockArena::new(2, 20).unwrap(), &tol).unwrap();
    // Two-mode squeezed vacuum: negativity (e^{2r} - 1) / 2.
    let closed = ((2.0 * r).exp() - 1.0) / 2.0;
    let passed = classical_kept
        && simon_sep
        && worst_neg <= 1e-7
        && !simon.separable
        && !is_classical(&g).classical
        && t.max_negativity > 0.1;
    outcome(
        passed,
        format!(
            "classicality kept {classical_kept}, Simon separable {simon_sep}, max Fock negativity {worst_neg:.3e} (bound 1e-7); \
             TMSV Simon margin {:.4}, Fock negativity {:.6} (closed form {closed:.6})",
            simon.margin, t.max_negativity
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(
        &config,
        r#"{"version": 1, "n_trials": 40, "seed": 99, "n_modes": 2, "cutoff": 12, "amplitude_bound": 0.8}"#,
    )
    .unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_bse"))
            .args(["verify", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert_eq!(status.status.code(), Some(0), "{}", String::from_utf8_lossy(&status.stderr));
        let trials = std::fs::read(out.join("trials.jsonl")).unwrap();
        let report: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
        (trials, report["summary"].clone())
    };
    let (a, sa) = run("a", "1");
    let (b, sb) = run("b", "1");
    let (c, sc) = run("c", "4");
    let lines = a.iter().filter(|&&x| x == b'\n').count();
    outcome(
        a == b && sa == sc && sa == sb && lines == 40,
        format!(
            "trials.jsonl identical across threads=1 runs: {}, summary identical at threads=4: {}, jsonl identical at threads=4: {}",
            a == b,
            sa == sc,
            a == c
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 vacuum invariance", vacuum_invariance),
        ("2 conjugation law", conjugation_law),
        ("3 coherent covariance", coherent_covariance),
        ("4 theorem campaign", theorem_campaign),
        ("5 multimode campaign", multimode_campaign),
        ("6 entanglement generation", entanglement_generation),
        ("7 non-sufficiency", non_sufficiency),
        ("8 gaussian oracle agreement", gaussian_agreement),
        ("9 determinism", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let o = match std::panic::catch_unwind(f) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                outcome(false, format!("panicked: {msg}"))
            }
        };
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

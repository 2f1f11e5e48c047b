//! `bse` command-line front end.
//!
//! Exit codes: 0 pass, 2 usage, 3 finding, 4 numeric or truncation failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::hilbert::{FockArena, C64};
use crate::passive::{apply_to_density, lift_unitary};
use crate::states::coherent;
use crate::theoremlab::{
    embed_beam_splitter, non_sufficiency_demo, random_haar_unitary, run_campaign, sweep,
    CampaignConfig, InputSpec, SweepRow, TrialRecord, CONFIG_VERSION,
};
use crate::tolerance::Tolerances;
use crate::witnesses::{negativity_report, EntanglementReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FINDING: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub const OUT_DIR_ENV: &str = "BSE_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "bse-out";

const VACUUM_DEMO_TOL: f64 = 1e-10;
const BELL_DEMO_TOL: f64 = 1e-9;
const INVERSE_DEMO_TOL: f64 = 1e-9;
const COHERENT_DEMO_TOL: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "bse", version, about = "Beam-splitter entanglement laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (falls back to $BSE_OUT_DIR, then ./bse-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    cutoff: Option<usize>,
}

#[derive(Debug, Clone, Copy, Args)]
struct Splitter {
    #[arg(long, allow_negative_numbers = true)]
    theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    phi1: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a named demonstration and check its assertions.
    Demo {
        name: DemoName,
        #[command(flatten)]
        splitter: Splitter,
    },
    /// Run a theorem campaign.
    Verify,
    /// Sweep the splitter angle for a two-mode input and write sweep.csv.
    Sweep {
        #[command(flatten)]
        splitter: Splitter,
        /// Comma-separated splitter angles; overrides the config grid.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        thetas: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum DemoName {
    Bell,
    Inverse,
    CoherentCovariance,
    Vacuum,
}

/// Failure that maps to a non-zero exit code.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Numeric(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Numeric(m) => m,
        }
    }
}

/// Library errors raised while running (not parsing) are numeric failures.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Numeric(e.to_string())
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Numeric(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Platform {
    pub os: String,
    pub arch: String,
    pub family: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub started_unix_seconds: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub exit_code: i32,
    pub config: serde_json::Value,
    pub platform: Platform,
    pub timings: Timings,
    pub outputs: Vec<PathBuf>,
}

struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(flag: Option<&Path>) -> Result<Self, Failure> {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_failure(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| Failure::Numeric(e.to_string()))?;
        text.push(b'\n');
        self.write(name, &text)
    }

    fn finish(mut self, command: &str, config: serde_json::Value, start: (SystemTime, Instant), code: i32) -> Result<(), Failure> {
        let manifest_path = self.dir.join("manifest.json");
        let mut outputs = self.written.clone();
        outputs.push(manifest_path);
        let manifest = RunManifest {
            tool: "bse".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            exit_code: code,
            config,
            platform: Platform {
                os: std::env::consts::OS.into(),
                arch: std::env::consts::ARCH.into(),
                family: std::env::consts::FAMILY.into(),
            },
            timings: Timings {
                started_unix_seconds: start.0.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64()),
                elapsed_seconds: start.1.elapsed().as_secs_f64(),
            },
            outputs,
        };
        self.write_json("manifest.json", &manifest)
    }
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn read_config<T: for<'de> Deserialize<'de>>(path: Option<&Path>) -> Result<Option<T>, Failure> {
    let Some(path) = path else { return Ok(None) };
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Demo { name, splitter } => cmd_demo(*name, splitter, &cli.common),
        Command::Verify => cmd_verify(&cli.common),
        Command::Sweep { splitter, thetas } => cmd_sweep(splitter, thetas.as_deref(), &cli.common),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

// ---------------------------------------------------------------------------
// demo

#[derive(Debug, Serialize)]
struct DemoConfig {
    name: DemoName,
    theta: f64,
    phi0: f64,
    phi1: f64,
    cutoff: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct DemoReport<T: Serialize> {
    demo: DemoName,
    passed: bool,
    checks: Vec<Check>,
    details: T,
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    bound: f64,
    passed: bool,
}

fn check(name: &str, value: f64, bound: f64, passed: bool) -> Check {
    Check {
        name: name.into(),
        value,
        bound,
        passed,
    }
}

#[derive(Debug, Serialize)]
struct VacuumDetails {
    splitter_deviation: f64,
    random_two_mode_deviations: Vec<f64>,
    random_three_mode_deviations: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct BellDetails {
    report: EntanglementReport,
    expected_log_negativity: f64,
}

#[derive(Debug, Serialize)]
struct CoherentDetails {
    alpha_in: Vec<[f64; 2]>,
    alpha_out: Vec<[f64; 2]>,
    fidelity: f64,
}

fn pairs(v: &[C64]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

fn demo_details(cfg: &DemoConfig) -> Result<(Vec<Check>, serde_json::Value), Failure> {
    let two = |d| FockArena::new(2, d).map_err(|e| Failure::Usage(e.to_string()));
    let m = embed_beam_splitter(2, [0, 1], cfg.theta, cfg.phi0, cfg.phi1)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(match cfg.name {
        DemoName::Vacuum => {
            let splitter_deviation = lift_unitary(&m, &two(cfg.cutoff)?)?.vacuum_deviation();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let three = FockArena::new(3, 8)?;
            let mut random = |n: usize, arena: &FockArena| -> Result<Vec<f64>, Failure> {
                (0..5)
                    .map(|_| Ok(lift_unitary(&random_haar_unitary(&mut rng, n), arena)?.vacuum_deviation()))
                    .collect()
            };
            let details = VacuumDetails {
                splitter_deviation,
                random_two_mode_deviations: random(2, &two(cfg.cutoff)?)?,
                random_three_mode_deviations: random(3, &three)?,
            };
            let worst = details
                .random_two_mode_deviations
                .iter()
                .chain(&details.random_three_mode_deviations)
                .fold(splitter_deviation, |a, &b| a.max(b));
            (
                vec![check("max_vacuum_deviation", worst, VACUUM_DEMO_TOL, worst <= VACUUM_DEMO_TOL)],
                to_value(&details),
            )
        }
        DemoName::Bell => {
            let arena = two(cfg.cutoff)?;
            let rho = crate::states::fock(&arena, &[1, 0])?.to_density();
            let out = apply_to_density(&lift_unitary(&m, &arena)?, &rho)?;
            let report = negativity_report(&out, &[0], &[1])?;
            let expected = (1.0 + 2.0 * (cfg.theta.cos() * cfg.theta.sin()).abs()).log2();
            let err = (report.log_negativity - expected).abs();
            let details = BellDetails {
                report,
                expected_log_negativity: expected,
            };
            (
                vec![check("log_negativity_error", err, BELL_DEMO_TOL, err <= BELL_DEMO_TOL)],
                to_value(&details),
            )
        }
        DemoName::Inverse => {
            let d = non_sufficiency_demo(cfg.theta, cfg.phi0, cfg.phi1, &two(cfg.cutoff)?)?;
            let checks = vec![
                check("input_mandel_q", d.input_mandel_q, -1.0, (d.input_mandel_q + 1.0).abs() <= 1e-12),
                check("inverse_negativity", d.inverse.negativity, INVERSE_DEMO_TOL, d.inverse.negativity <= INVERSE_DEMO_TOL),
                check(
                    "recovered_infidelity",
                    1.0 - d.recovered_fidelity,
                    INVERSE_DEMO_TOL,
                    1.0 - d.recovered_fidelity <= INVERSE_DEMO_TOL,
                ),
            ];
            (checks, to_value(&d))
        }
        DemoName::CoherentCovariance => {
            let arena = two(cfg.cutoff)?;
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let alphas: Vec<C64> = (0..2)
                .map(|_| {
                    let r: f64 = rand::Rng::random::<f64>(&mut rng).sqrt();
                    C64::from_polar(r, std::f64::consts::TAU * rand::Rng::random::<f64>(&mut rng))
                })
                .collect();
            let out = apply_to_density(&lift_unitary(&m, &arena)?, &coherent(&arena, &alphas)?.to_density())?;
            let mapped = m.map_amplitudes(&alphas);
            let fidelity = out.fidelity_with_pure(&coherent(&arena, &mapped)?);
            let details = CoherentDetails {
                alpha_in: pairs(&alphas),
                alpha_out: pairs(&mapped),
                fidelity,
            };
            (
                vec![check("infidelity", 1.0 - fidelity, COHERENT_DEMO_TOL, 1.0 - fidelity <= COHERENT_DEMO_TOL)],
                to_value(&details),
            )
        }
    })
}

fn cmd_demo(name: DemoName, splitter: &Splitter, common: &Common) -> Result<i32, Failure> {
    let started = (SystemTime::now(), Instant::now());
    let default_cutoff = match name {
        DemoName::Bell | DemoName::Inverse => 4,
        DemoName::Vacuum => 10,
        DemoName::CoherentCovariance => 20,
    };
    let cfg = DemoConfig {
        name,
        theta: splitter.theta.unwrap_or(std::f64::consts::FRAC_PI_4),
        phi0: splitter.phi0.unwrap_or(0.0),
        phi1: splitter.phi1.unwrap_or(0.0),
        cutoff: common.cutoff.unwrap_or(default_cutoff),
        seed: common.seed.unwrap_or(0),
    };
    if cfg.cutoff < 2 {
        return Err(Failure::Usage("demo cutoff must be at least 2".into()));
    }
    let mut out = Output::new(common.out.as_deref())?;
    let (checks, details) = demo_details(&cfg)?;
    let passed = checks.iter().all(|c| c.passed);
    println!("demo {}", name.to_possible_value().map_or("?".into(), |v| v.get_name().to_string()));
    println!("{:<24} {:>14} {:>14}  status", "check", "value", "bound");
    for c in &checks {
        println!(
            "{:<24} {:>14.6e} {:>14.6e}  {}",
            c.name,
            c.value,
            c.bound,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    out.write_json(
        "report.json",
        &DemoReport {
            demo: name,
            passed,
            checks,
            details,
        },
    )?;
    let code = if passed { EXIT_OK } else { EXIT_FINDING };
    out.finish("demo", to_value(&cfg), started, code)?;
    Ok(code)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Serialize)]
struct VerifyReport<'a> {
    passed: bool,
    summary: &'a crate::theoremlab::CampaignSummary,
}

/// Campaign config after applying command-line overrides; validated.
fn verify_config(common: &Common) -> Result<CampaignConfig, Failure> {
    let mut cfg: CampaignConfig = read_config(common.config.as_deref())?.unwrap_or_default();
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
    if let Some(cutoff) = common.cutoff {
        cfg.cutoff = cutoff;
    }
    cfg.validate().map_err(|e| Failure::Usage(format!("invalid config: {e}")))?;
    Ok(cfg)
}

fn trials_jsonl(records: &[TrialRecord]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    for r in records {
        serde_json::to_writer(&mut buf, r).map_err(|e| Failure::Numeric(e.to_string()))?;
        buf.push(b'\n');
    }
    Ok(buf)
}

fn cmd_verify(common: &Common) -> Result<i32, Failure> {
    let started = (SystemTime::now(), Instant::now());
    let cfg = verify_config(common)?;
    let mut out = Output::new(common.out.as_deref())?;
    let campaign = run_campaign(&cfg)?;
    let s = &campaign.summary;
    out.write("trials.jsonl", &trials_jsonl(&campaign.records)?)?;
    let code = if s.has_findings() {
        EXIT_FINDING
    } else if s.has_failures() {
        EXIT_NUMERIC
    } else {
        EXIT_OK
    };
    out.write_json(
        "report.json",
        &VerifyReport {
            passed: code == EXIT_OK,
            summary: s,
        },
    )?;

    let fmt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3e}"));
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    let _ = writeln!(w, "verify: seed {} modes {} cutoff {}", s.seed, s.n_modes, s.cutoff);
    let _ = writeln!(w, "  trials clean        {}/{}", s.trials_completed - count_dirty(&campaign.records), s.trials_requested);
    let _ = writeln!(w, "  closure failures    {}", s.closure_failures);
    let _ = writeln!(w, "  ppt violations      {}", s.ppt_violations);
    let _ = writeln!(w, "  pipeline breaches   {}", s.pipeline_breaches);
    let _ = writeln!(w, "  oracle disagreements {}", s.oracle_disagreements);
    let _ = writeln!(w, "  truncation failures {}", s.truncation_failures);
    let _ = writeln!(w, "  numeric failures    {}", s.numeric_failures);
    let _ = writeln!(w, "  worst ppt min eig   {}", fmt(s.worst_ppt_min_eigenvalue));
    let _ = writeln!(w, "  worst discrepancy   {}", fmt(s.worst_pipeline_discrepancy));
    let _ = writeln!(w, "  elapsed             {:.2}s", campaign.elapsed.as_secs_f64());
    drop(w);

    out.finish("verify", to_value(&cfg), started, code)?;
    Ok(code)
}

fn count_dirty(records: &[TrialRecord]) -> usize {
    records.iter().filter(|r| !r.findings.is_empty()).count()
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    pub cutoff: usize,
    pub thetas: Vec<f64>,
    pub phi0: f64,
    pub phi1: f64,
    pub input: InputSpec,
    pub tolerances: Tolerances,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            cutoff: 12,
            thetas: (0..=8).map(|k| k as f64 * std::f64::consts::FRAC_PI_8 / 2.0).collect(),
            phi0: 0.0,
            phi1: 0.0,
            input: InputSpec::Fock {
                occupations: vec![1, 0],
            },
            tolerances: Tolerances::default(),
        }
    }
}

impl SweepConfig {
    fn validate(&self) -> Result<FockArena, String> {
        if self.version != CONFIG_VERSION {
            return Err(format!("unsupported config version {}", self.version));
        }
        if !self.thetas.iter().chain([&self.phi0, &self.phi1]).all(|x| x.is_finite()) {
            return Err("sweep angles must be finite".into());
        }
        if self.input.n_modes() != 2 {
            return Err("sweep inputs must have two modes".into());
        }
        let arena = FockArena::new(2, self.cutoff).map_err(|e| e.to_string())?;
        if self.cutoff < 2 {
            return Err("cutoff must be at least 2".into());
        }
        match &self.input {
            InputSpec::CoherentEnsemble { .. } => {
                self.input.to_ensemble().map_err(|e| e.to_string())?;
            }
            InputSpec::Fock { occupations } => {
                arena.encode(occupations).map_err(|e| e.to_string())?;
            }
            InputSpec::GaussianProduct { modes } => {
                for m in modes {
                    m.to_gaussian().validate().map_err(|e| e.to_string())?;
                }
            }
        }
        Ok(arena)
    }
}

fn cmd_sweep(splitter: &Splitter, thetas: Option<&[f64]>, common: &Common) -> Result<i32, Failure> {
    let started = (SystemTime::now(), Instant::now());
    let mut cfg: SweepConfig = read_config(common.config.as_deref())?.unwrap_or_default();
    if let Some(t) = thetas {
        cfg.thetas = t.to_vec();
    }
    if let Some(t) = splitter.theta {
        cfg.thetas = vec![t];
    }
    if let Some(p) = splitter.phi0 {
        cfg.phi0 = p;
    }
    if let Some(p) = splitter.phi1 {
        cfg.phi1 = p;
    }
    if let Some(c) = common.cutoff {
        cfg.cutoff = c;
    }
    let arena = cfg
        .validate()
        .map_err(|e| Failure::Usage(format!("invalid sweep config: {e}")))?;
    let mut out = Output::new(common.out.as_deref())?;
    let rows = sweep(&cfg.input, &cfg.thetas, cfg.phi0, cfg.phi1, &arena, &cfg.tolerances)?;
    let mut csv = String::from(SweepRow::CSV_HEADER);
    csv.push('\n');
    println!("{:>10} {:>14} {:>14} {:>12} {:>12}", "theta", "negativity", "log_neg", "mandel_q_0", "mandel_q_1");
    for r in &rows {
        csv.push_str(&r.csv_line());
        csv.push('\n');
        println!(
            "{:>10.6} {:>14.6e} {:>14.6e} {:>12.6} {:>12.6}",
            r.theta, r.negativity, r.log_negativity, r.mandel_q[0], r.mandel_q[1]
        );
    }
    out.write("sweep.csv", csv.as_bytes())?;
    out.finish("sweep", to_value(&cfg), started, EXIT_OK)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flags_and_rejects_unknown_demo() {
        let cli = Cli::try_parse_from(["bse", "demo", "bell", "--theta", "0.5", "--out", "x"]).unwrap();
        assert!(matches!(cli.command, Command::Demo { name: DemoName::Bell, .. }));
        assert_eq!(cli.common.out.as_deref(), Some(Path::new("x")));
        assert!(Cli::try_parse_from(["bse", "demo", "nope"]).is_err());
        let cli = Cli::try_parse_from(["bse", "sweep", "--thetas", "0,-0.5,1"]).unwrap();
        let Command::Sweep { thetas, .. } = cli.command else { panic!() };
        assert_eq!(thetas.unwrap(), vec![0.0, -0.5, 1.0]);
        assert_eq!(run(["bse", "demo", "nope"]), EXIT_USAGE);
    }

    #[test]
    fn sweep_config_round_trips_and_validates() {
        let cfg = SweepConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<SweepConfig>(&text).unwrap(), cfg);
        assert!(cfg.validate().is_ok());
        let bad = SweepConfig {
            input: InputSpec::Fock { occupations: vec![20, 0] },
            ..cfg.clone()
        };
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<SweepConfig>(r#"{"cutof": 3}"#).is_err());
    }
}

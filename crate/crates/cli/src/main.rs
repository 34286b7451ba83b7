//! `demrep` command-line tool.
//!
//! Exit codes: 0 success, 1 input or runtime error, 2 solver stopped at its iteration cap
//! (result still written), 3 a check failed (experiment failure budget, prox self-check).
//! Errors go to stderr as one JSON line; stdout lists the files written, one per line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use demrep::experiments::{
    check_failure_budget, run_experiment, unit_gaussian_signal, ExperimentConfig, ExperimentKind, RunManifest,
};
use demrep::frames::{up_check_exhaustive, BoundsMode, DENSE_CAP};
use demrep::io::{load_frame, read_complex_file, write_complex_file, SolveConfig};
use demrep::metrics::{bound_lower_democracy, bound_upper_democracy};
use demrep::prox::{project_l1_ball, prox_inf};
use demrep::{Error, FrameBounds, FrameOperator, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const BUILD: &str = concat!(
    env!("CARGO_PKG_VERSION"),
    " (git ",
    env!("DEMREP_GIT_DESCRIBE"),
    ", ",
    env!("DEMREP_BUILD_PROFILE"),
    ", ",
    env!("DEMREP_BUILD_TARGET"),
    ")"
);

const SEED_ENV: &str = "DEMREP_SEED";

#[derive(Parser)]
#[command(name = "demrep", version = BUILD, about = "Democratic (minimum ℓ∞-norm) frame representations")]
struct Cli {
    /// Worker threads for Monte-Carlo runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print progress diagnostics to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write the result JSON plus the representation binary.
    Solve {
        /// Frame descriptor JSON.
        #[arg(long)]
        frame: PathBuf,
        /// Signal as interleaved little-endian f64 (re, im) pairs.
        #[arg(long, conflicts_with = "synthetic")]
        signal: Option<PathBuf>,
        /// Draw a unit-norm complex Gaussian signal instead of reading one.
        #[arg(long)]
        synthetic: bool,
        /// Seed for `--synthetic` (overridden by DEMREP_SEED).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Solver config JSON (`schemaVersion`, `algorithm`, `solver`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dotted-key override, e.g. `solver.maxIters=500`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Report frame bounds, redundancy, Parseval residual and optionally the UP constant.
    FrameInfo {
        #[arg(long)]
        frame: PathBuf,
        /// Support fraction δ for the exhaustive uncertainty-principle check.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a phase-ku or phase-papr experiment.
    PhaseDiagram(ExperimentArgs),
    /// Run an ofdm-papr experiment.
    OfdmPapr(ExperimentArgs),
    /// Compare the ℓ∞ prox with the Moreau identity on random inputs.
    ProxCheck {
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 64)]
        max_len: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (default: the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure { code: 1, kind: "invalid-input", message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let kind = match &e {
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::InvalidDimensions(_) => "invalid-dimensions",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::NotParseval { .. } => "not-parseval",
            Error::NotTight { .. } => "not-tight",
            Error::SingularGram => "singular-gram",
            Error::DenseCapExceeded { .. } => "dense-cap-exceeded",
            Error::UpBudgetExceeded { .. } => "up-budget-exceeded",
            Error::StepSizeCondition { .. } => "step-size-condition",
            Error::Diverged { .. } => "diverged",
            Error::DualInfeasible { .. } => "dual-infeasible",
            Error::ZeroVector => "zero-vector",
            Error::Unsupported(_) => "unsupported",
            Error::Format(_) | Error::Json(_) | Error::Csv(_) => "format",
            Error::FailureBudget { .. } => "failure-budget",
            Error::Io(_) => "io",
        };
        Failure { code: 1, kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CmdResult = Result<(u8, Vec<PathBuf>), Failure>;

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::input(format!("{SEED_ENV} must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("cannot read {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)? + "\n";
    fs::write(path, text)?;
    Ok(())
}

fn cmd_solve(
    frame_path: &Path,
    signal: Option<&Path>,
    synthetic: bool,
    seed: u64,
    config: Option<&Path>,
    overrides: &[String],
    out: &Path,
) -> CmdResult {
    let cfg = match config {
        Some(p) => SolveConfig::from_json(&read_text(p)?, overrides)?,
        None => SolveConfig::from_json(&serde_json::to_string(&SolveConfig::default()).map_err(Error::from)?, overrides)?,
    };
    let frame = load_frame(frame_path)?;
    let y = match (signal, synthetic) {
        (Some(p), _) => read_complex_file(p)?,
        (None, true) => {
            let seed = env_seed()?.unwrap_or(seed);
            unit_gaussian_signal(frame.rows(), &mut ChaCha8Rng::seed_from_u64(seed))
        }
        (None, false) => return Err(Failure::input("one of --signal or --synthetic is required")),
    };
    if y.len() != frame.rows() {
        return Err(Error::DimensionMismatch { expected: frame.rows(), actual: y.len() }.into());
    }
    let result = cfg.run(&frame, &y)?;

    fs::create_dir_all(out)?;
    let x_path = out.join("x.bin");
    let dual_path = out.join("dual.bin");
    write_complex_file(&x_path, &result.x)?;
    write_complex_file(&dual_path, &result.dual)?;
    let mut report = serde_json::to_value(&result).map_err(Error::from)?;
    if let Value::Object(map) = &mut report {
        map.insert("relativeGap".into(), json!(result.relative_gap()));
        map.insert("m".into(), json!(frame.rows()));
        map.insert("n".into(), json!(frame.cols()));
        map.insert("representation".into(), json!("x.bin"));
        map.insert("dualPoint".into(), json!("dual.bin"));
        map.insert("config".into(), serde_json::to_value(&cfg).map_err(Error::from)?);
        map.insert("build".into(), json!(BUILD));
    }
    let result_path = out.join("result.json");
    write_json(&result_path, &report)?;
    let code = if result.converged { 0 } else { 2 };
    Ok((code, vec![result_path, x_path, dual_path]))
}

fn bounds_for_report(frame: &FrameOperator) -> demrep::Result<FrameBounds> {
    if frame.is_structurally_parseval() {
        return frame.certify_parseval();
    }
    match frame.frame_bounds(BoundsMode::Exact) {
        Err(Error::DenseCapExceeded { .. }) => frame.frame_bounds(BoundsMode::Estimate),
        other => other,
    }
}

fn cmd_frame_info(frame_path: &Path, delta: Option<f64>, out: &Path) -> CmdResult {
    let frame = load_frame(frame_path)?;
    let bounds = bounds_for_report(&frame)?;
    let meta = frame.meta();
    let residual = (frame.rows() <= DENSE_CAP).then(|| frame.parseval_residual());
    let mut report = json!({
        "m": frame.rows(),
        "n": frame.cols(),
        "kind": frame.kind(),
        "family": meta.family,
        "seed": meta.seed,
        "lowerBound": bounds.lower,
        "upperBound": bounds.upper,
        "boundsMethod": bounds.method,
        "redundancy": frame.redundancy(),
        "parsevalResidual": residual,
        "kTildeL": bound_lower_democracy(&bounds),
        "coherence": meta.coherence,
        "warning": meta.warning,
    });
    if let Some(delta) = delta {
        let up = match up_check_exhaustive(&frame, delta) {
            Ok(cert) => {
                let ku = bound_upper_democracy(&bounds, &cert);
                json!({
                    "status": "exhaustive",
                    "delta": cert.delta,
                    "eta": cert.eta,
                    "supportBudget": cert.support_budget,
                    "supportsChecked": cert.supports_checked.to_string(),
                    "kTildeU": if ku.vacuous { Value::Null } else { json!(ku.value) },
                    "vacuous": ku.vacuous,
                })
            }
            Err(Error::UpBudgetExceeded { supports, budget }) => json!({
                "status": "refused",
                "delta": delta,
                "supports": supports.to_string(),
                "budget": budget.to_string(),
            }),
            Err(e) => return Err(e.into()),
        };
        report["uncertainty"] = up;
    }
    fs::create_dir_all(out)?;
    let path = out.join("frame_info.json");
    write_json(&path, &report)?;
    Ok((0, vec![path]))
}

fn cmd_experiment(args: &ExperimentArgs, allowed: &[ExperimentKind], verbose: bool) -> CmdResult {
    let mut cfg = ExperimentConfig::from_json(&read_text(&args.config)?, &args.overrides)?;
    if let Some(seed) = env_seed()? {
        cfg.seed = seed;
    }
    if !allowed.contains(&cfg.kind) {
        return Err(Failure::input(format!(
            "config kind {:?} does not match this subcommand (expected one of {allowed:?})",
            cfg.kind
        )));
    }
    let out = match (&args.out, &cfg.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => PathBuf::from(o),
        (None, None) => return Err(Failure::input("no output directory: pass --out or set `output`")),
    };
    let start = Instant::now();
    let result = run_experiment(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    let mut written = result.write_csv(&out)?;
    let budget = check_failure_budget(result.stats(), cfg.failure_budget);
    if verbose {
        eprintln!("{} points in {wall:.1}s", result.stats().len());
        if let Err(e) = &budget {
            eprintln!("{e}");
        }
    }
    let manifest = RunManifest {
        config: cfg,
        build: BUILD.into(),
        wall_clock_seconds: wall,
        threads: rayon::current_num_threads(),
        outputs: written
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
        failure_budget_ok: budget.is_ok(),
        points: result.stats().to_vec(),
    };
    written.push(manifest.write(&out)?);
    Ok((if budget.is_ok() { 0 } else { 3 }, written))
}

fn cmd_prox_check(cases: usize, max_len: usize, seed: u64, tolerance: f64, out: &Path) -> CmdResult {
    if cases == 0 || max_len == 0 {
        return Err(Failure::input("--cases and --max-len must be positive"));
    }
    let seed = env_seed()?.unwrap_or(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let n = rng.gen_range(1..=max_len);
        let scale = 10f64.powf(rng.gen_range(-2.0..2.0));
        let z: Vec<C64> = (0..n)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
            .collect();
        let tau = 10f64.powf(rng.gen_range(-2.0..1.5));
        let u = prox_inf(&z, tau)?.u;
        let scaled: Vec<C64> = z.iter().map(|v| v / tau).collect();
        let p = project_l1_ball(&scaled, 1.0)?;
        for ((a, zi), pi) in u.iter().zip(&z).zip(&p) {
            worst = worst.max((a - (zi - pi * tau)).norm());
        }
    }
    let pass = worst <= tolerance;
    fs::create_dir_all(out)?;
    let path = out.join("prox_check.json");
    write_json(
        &path,
        &json!({ "cases": cases, "maxLen": max_len, "seed": seed, "maxError": worst, "tolerance": tolerance, "pass": pass }),
    )?;
    Ok((if pass { 0 } else { 3 }, vec![path]))
}

fn dispatch(cli: Cli) -> CmdResult {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Failure::input("--threads must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Failure::input(format!("cannot configure thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Solve { frame, signal, synthetic, seed, config, overrides, out } => {
            cmd_solve(frame, signal.as_deref(), *synthetic, *seed, config.as_deref(), overrides, out)
        }
        Command::FrameInfo { frame, delta, out } => cmd_frame_info(frame, *delta, out),
        Command::PhaseDiagram(args) => {
            cmd_experiment(args, &[ExperimentKind::PhaseKu, ExperimentKind::PhasePapr], cli.verbose)
        }
        Command::OfdmPapr(args) => cmd_experiment(args, &[ExperimentKind::OfdmPapr], cli.verbose),
        Command::ProxCheck { cases, max_len, seed, tolerance, out } => {
            cmd_prox_check(*cases, *max_len, *seed, *tolerance, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e.to_string();
            let first = first.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            report(&Failure { code: 1, kind: "usage", message: first.to_string() });
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok((code, paths)) => {
            for p in paths {
                println!("{}", p.display());
            }
            match code {
                2 => report(&Failure {
                    code,
                    kind: "iteration-cap",
                    message: "solver stopped at maxIters before meeting its tolerances; result written".into(),
                }),
                3 => report(&Failure {
                    code,
                    kind: "check-failed",
                    message: "a failure budget or self-check was exceeded; see the written report".into(),
                }),
                _ => {}
            }
            ExitCode::from(code)
        }
        Err(f) => {
            report(&f);
            ExitCode::from(f.code)
        }
    }
}

fn report(f: &Failure) {
    eprintln!("{}", json!({ "error": f.kind, "message": f.message, "exitCode": f.code }));
}

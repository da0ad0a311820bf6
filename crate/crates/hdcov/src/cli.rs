//! Command-line front end.
//!
//! Every command is a pure function of its flags, input files, and seed:
//! identical invocations produce identical bytes. Randomized commands
//! refuse to run without `--seed`; passing `--seed auto` draws one from OS
//! entropy and prints it. Exit codes: 0 success, 1 internal or check
//! failure, 2 user error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hdcov_core::calibrate::{
    decide, null_mean_exact, null_variance_asymptotic, CalibrationMethod, MeanMode, NullCalibration,
};
use hdcov_core::contiguity::{dispersion_closed_lrt, ContiguityReport};
use hdcov_core::dist::z_alpha;
use hdcov_core::model::build_covariance;
use hdcov_core::power::{analytic_power, spiked_power, spiked_sigma};
use hdcov_core::stats::{SampleShape, TestKind};
use hdcov_core::Matrix;

use crate::formats::{
    self, parse_kind, read_calibration, read_matrix_csv, CalibrationFile, ContiguityReportFile,
    PowerPredictionFile,
};
use crate::mc::{dispersion_mc, empirical_power, null_calibrate_mc, with_pool};
use crate::sample::derive_seed;
use crate::verify::{self, report_from_checks, DEFAULT_VERIFY_SEED};
use crate::{LabError, LabResult};

#[derive(Parser)]
#[command(
    name = "hdcov",
    about = "High-dimensional covariance tests: calibration, decisions, power, and verification",
    version
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "HDCOV_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo null calibration: estimate (m, sigma) under H0.
    Calibrate(CalibrateArgs),
    /// Run a test on a data file and report the decision.
    Test(TestArgs),
    /// Analytic power prediction (optionally with contiguity diagnostics).
    Power(PowerArgs),
    /// Compare analytic and empirical power for one alternative.
    Simulate(SimulateArgs),
    /// Power curves over a spike-magnitude or (n, p) grid.
    Sweep(SweepArgs),
    /// Run the full verification suite and emit a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CalibrateArgs {
    /// Test kind: lrt | nagao | lrt-s | john.
    #[arg(long = "test")]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    reps: u64,
    /// Seed (u64) or "auto".
    #[arg(long)]
    seed: String,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long = "test")]
    kind: String,
    /// CSV data file: one observation per line, comma-separated.
    #[arg(long)]
    data: PathBuf,
    /// Skip the first non-comment line of the data file.
    #[arg(long, default_value_t = false)]
    header: bool,
    /// Treat rows as mean-zero observations (N = rows) instead of
    /// centering at the sample mean (n = rows).
    #[arg(long, default_value_t = false)]
    known_mean: bool,
    /// Calibration source: a JSON file path, "asymptotic", or "mc".
    #[arg(long)]
    calib: String,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Replicates for --calib mc.
    #[arg(long, default_value_t = 20_000)]
    reps: u64,
    /// Seed for --calib mc (u64 or "auto").
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct PowerArgs {
    #[arg(long = "test")]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Alternative covariance: JSON spec (file or inline) or dense CSV.
    #[arg(long)]
    sigma: String,
    /// Null-sigma source: "asymptotic" or a calibration JSON path.
    #[arg(long, default_value = "asymptotic")]
    calib: String,
    /// Also emit the contiguity diagnostic report.
    #[arg(long, default_value_t = false)]
    diagnose: bool,
    /// Dispersion replicates for --diagnose (Monte Carlo kinds).
    #[arg(long, default_value_t = 400)]
    reps: u64,
    /// Seed for --diagnose with Monte Carlo dispersion (u64 or "auto").
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    format: OutputFormat,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long = "test")]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long)]
    sigma: String,
    #[arg(long)]
    reps: u64,
    #[arg(long)]
    seed: String,
    /// Calibration JSON path; defaults to a fresh MC calibration.
    #[arg(long)]
    calib: Option<PathBuf>,
    /// Replicates for the default MC calibration.
    #[arg(long, default_value_t = 20_000)]
    calib_reps: u64,
    /// Null-sigma source for the analytic column: "mc" (finite-sample
    /// faithful, default) or "asymptotic" (theorem-faithful).
    #[arg(long, default_value = "mc")]
    sigma_null: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct SweepArgs {
    /// Test kind or "all".
    #[arg(long = "test", default_value = "all")]
    kind: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Comma-separated first-spike magnitudes, e.g. "0,0.5,1,2".
    #[arg(long)]
    a1_grid: Option<String>,
    /// Comma-separated n:p pairs, e.g. "41:10,81:20" (uses --a1).
    #[arg(long)]
    np_grid: Option<String>,
    /// First-spike magnitude for --np-grid sweeps.
    #[arg(long, default_value_t = 1.0)]
    a1: f64,
    /// Add empirical power columns with this many replicates.
    #[arg(long)]
    reps: Option<u64>,
    /// Seed, required when --reps is given (u64 or "auto").
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
}

#[derive(Args)]
struct VerifyArgs {
    /// Seed for the randomized checks (u64 or "auto"); a fixed default
    /// keeps plain `hdcov verify` deterministic.
    #[arg(long, default_value_t = DEFAULT_VERIFY_SEED.to_string())]
    seed: String,
    /// Run only the sections whose name contains this string.
    #[arg(long)]
    only: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum OutputFormat {
    Json,
    Csv,
}

fn parse_seed(arg: &str) -> LabResult<u64> {
    if arg == "auto" {
        let seed: u64 = rand::random();
        println!("seed: {seed}");
        return Ok(seed);
    }
    arg.parse::<u64>()
        .map_err(|_| LabError::User(format!("--seed must be a u64 or \"auto\", got {arg:?}")))
}

fn require_seed(seed: &Option<String>, why: &str) -> LabResult<u64> {
    match seed {
        Some(s) => parse_seed(s),
        None => Err(LabError::User(format!(
            "{why} is randomized: pass --seed <u64> (or --seed auto to draw and print one)"
        ))),
    }
}

fn emit_text(out: &Option<PathBuf>, text: String) -> LabResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| LabError::Internal(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Emits a structured payload as JSON or as a one-row flattened CSV.
fn emit<T: serde::Serialize>(
    out: &Option<PathBuf>,
    format: OutputFormat,
    schema: &str,
    value: &T,
) -> LabResult<()> {
    let text = match format {
        OutputFormat::Json => formats::to_json_string(value),
        OutputFormat::Csv => {
            let json = serde_json::to_value(value)
                .map_err(|e| LabError::Internal(format!("serialization failed: {e}")))?;
            let (header, row) = formats::flatten_json(&json);
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            formats::csv_string(schema, &header, &[row])
        }
    };
    emit_text(out, text)
}

/// Emits tabular rows as CSV or as a JSON row array.
fn emit_rows(
    out: &Option<PathBuf>,
    format: OutputFormat,
    schema: &str,
    header: &[&str],
    rows: &[Vec<String>],
) -> LabResult<()> {
    let text = match format {
        OutputFormat::Csv => formats::csv_string(schema, header, rows),
        OutputFormat::Json => formats::to_json_string(&formats::rows_to_json(header, rows)),
    };
    emit_text(out, text)
}

/// Builds a calibration from one of the named sources.
fn resolve_calibration(
    source: &str,
    kind: TestKind,
    n: usize,
    p: usize,
    reps: u64,
    seed: Option<u64>,
) -> LabResult<NullCalibration> {
    match source {
        "asymptotic" => {
            let sigma = null_variance_asymptotic(kind, n, p)?.sqrt();
            let m = null_mean_exact(kind, n, p)?;
            Ok(NullCalibration {
                kind,
                n,
                p,
                m,
                sigma,
                method: CalibrationMethod::Asymptotic,
                reps: 0,
                seed: 0,
            })
        }
        "mc" => {
            let seed = seed.ok_or_else(|| {
                LabError::User("--calib mc is randomized: pass --seed".to_string())
            })?;
            Ok(null_calibrate_mc(kind, n, p, reps, seed)?)
        }
        path => Ok(read_calibration(std::path::Path::new(path))
            .map_err(|e| LabError::User(e.to_string()))?),
    }
}

fn cmd_calibrate(args: &CalibrateArgs) -> LabResult<()> {
    let kind = parse_kind(&args.kind)?;
    let seed = parse_seed(&args.seed)?;
    let calib = null_calibrate_mc(kind, args.n, args.p, args.reps, seed)?;
    emit(
        &args.out,
        args.format,
        "hdcov.calibration",
        &CalibrationFile::from(&calib),
    )?;
    if let Some(path) = &args.out {
        println!(
            "calibrated {} at n={} p={}: m={:.6} sigma={:.6} (reps={}, seed={}) -> {}",
            kind.name(),
            args.n,
            args.p,
            calib.m,
            calib.sigma,
            args.reps,
            seed,
            path.display()
        );
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct DecisionFile {
    schema_version: u32,
    kind: String,
    n: usize,
    p: usize,
    alpha: f64,
    mean_mode: String,
    statistic: f64,
    zscore: f64,
    reject: bool,
    calibration: CalibrationFile,
}

fn cmd_test(args: &TestArgs) -> LabResult<()> {
    let kind = parse_kind(&args.kind)?;
    let x = read_matrix_csv(&args.data, args.header)?;
    let p = x.ncols();
    let (mode, n) = if args.known_mean {
        (MeanMode::Known, x.nrows() + 1)
    } else {
        (MeanMode::Unknown, x.nrows())
    };
    let seed = match &args.seed {
        Some(s) => Some(parse_seed(s)?),
        None => None,
    };
    let calib = resolve_calibration(&args.calib, kind, n, p, args.reps, seed)?;
    let decision = decide(kind, &x, &calib, args.alpha, mode)?;
    let payload = DecisionFile {
        schema_version: formats::SCHEMA_VERSION,
        kind: kind.name().into(),
        n,
        p,
        alpha: args.alpha,
        mean_mode: if args.known_mean { "known" } else { "unknown" }.into(),
        statistic: decision.statistic,
        zscore: decision.zscore,
        reject: decision.reject,
        calibration: CalibrationFile::from(&calib),
    };
    emit(&args.out, args.format, "hdcov.decision", &payload)
}

fn cmd_power(args: &PowerArgs) -> LabResult<()> {
    let kind = parse_kind(&args.kind)?;
    let (spec_file, spec) = formats::load_covariance_spec(&args.sigma)?;
    if spec.p != args.p {
        return Err(LabError::User(format!(
            "covariance spec has p={} but --p is {}",
            spec.p, args.p
        )));
    }
    let sigma = build_covariance(&spec)?;
    let (sigma_null, source) = if args.calib == "asymptotic" {
        (
            null_variance_asymptotic(kind, args.n, args.p)?.sqrt(),
            "asymptotic".to_string(),
        )
    } else {
        let calib = read_calibration(std::path::Path::new(&args.calib))?;
        if calib.kind != kind || calib.n != args.n || calib.p != args.p {
            return Err(LabError::User(
                "calibration file does not match the requested (test, n, p)".into(),
            ));
        }
        (calib.sigma, format!("file:{}", args.calib))
    };
    let pred = analytic_power(kind, &sigma, args.n, args.p, args.alpha, sigma_null)?;
    let mut payload =
        PowerPredictionFile::new(&pred, args.n, args.p, spec_file.descriptor(), source);

    if args.diagnose {
        let gap = hdcov_core::contiguity::mean_gap_with_residual(kind, &sigma, args.n, args.p)?;
        let (v, v_method, v_se) = if kind == TestKind::LrtIdentity {
            (
                dispersion_closed_lrt(&sigma, args.n - 1).sqrt(),
                "closed_form".to_string(),
                None,
            )
        } else {
            let seed = require_seed(&args.seed, "--diagnose with a Monte Carlo dispersion")?;
            let est = dispersion_mc(kind, &sigma, args.n, args.p, args.reps, seed)?;
            (
                est.value.sqrt(),
                "monte_carlo".to_string(),
                Some(est.std_error),
            )
        };
        let report = ContiguityReport::new(kind, v, &gap, sigma_null, z_alpha(args.alpha)?)?;
        payload.diagnose = Some(ContiguityReportFile::new(&report, v_method, v_se));
    }
    emit(&args.out, args.format, "hdcov.power", &payload)
}

#[allow(clippy::too_many_arguments)]
fn simulate_row(
    kind: TestKind,
    sigma: &Matrix,
    sigma_desc: &str,
    n: usize,
    p: usize,
    alpha: f64,
    calib: &NullCalibration,
    sigma_null: f64,
    reps: u64,
    seed: u64,
) -> LabResult<Vec<String>> {
    let analytic = analytic_power(kind, sigma, n, p, alpha, sigma_null)?;
    let empirical = empirical_power(kind, sigma, n, p, alpha, calib, reps, seed)?;
    let discrepancy = empirical.value - analytic.power;
    Ok(vec![
        kind.name().into(),
        n.to_string(),
        p.to_string(),
        format!("{alpha}"),
        sigma_desc.into(),
        format!("{:.9}", analytic.power),
        format!("{:.9}", empirical.value),
        format!("{:.9}", empirical.std_error),
        format!("{:.9}", discrepancy),
    ])
}

const SIMULATE_HEADER: [&str; 9] = [
    "kind",
    "n",
    "p",
    "alpha",
    "sigma",
    "power_analytic",
    "power_empirical",
    "se",
    "discrepancy",
];

fn cmd_simulate(args: &SimulateArgs) -> LabResult<()> {
    let kind = parse_kind(&args.kind)?;
    let seed = parse_seed(&args.seed)?;
    let (spec_file, spec) = formats::load_covariance_spec(&args.sigma)?;
    let sigma = build_covariance(&spec)?;
    SampleShape::new(args.n, args.p)?.check_kind(kind)?;
    let calib = match &args.calib {
        Some(path) => read_calibration(path)?,
        None => null_calibrate_mc(kind, args.n, args.p, args.calib_reps, derive_seed(seed, 1))?,
    };
    let sigma_null = match args.sigma_null.as_str() {
        "mc" => calib.sigma,
        "asymptotic" => null_variance_asymptotic(kind, args.n, args.p)?.sqrt(),
        other => {
            return Err(LabError::User(format!(
                "--sigma-null must be \"mc\" or \"asymptotic\", got {other:?}"
            )))
        }
    };
    let row = simulate_row(
        kind,
        &sigma,
        &spec_file.descriptor(),
        args.n,
        args.p,
        args.alpha,
        &calib,
        sigma_null,
        args.reps,
        derive_seed(seed, 0),
    )?;
    emit_rows(
        &args.out,
        args.format,
        "hdcov.simulate",
        &SIMULATE_HEADER,
        &[row],
    )
}

const SWEEP_HEADER: [&str; 9] = [
    "kind",
    "n",
    "p",
    "alpha",
    "spike_descriptor",
    "tau",
    "power_analytic",
    "power_empirical",
    "se",
];

fn cmd_sweep(args: &SweepArgs) -> LabResult<()> {
    let kinds: Vec<TestKind> = if args.kind == "all" {
        TestKind::ALL.to_vec()
    } else {
        vec![parse_kind(&args.kind)?]
    };
    let empirical_seed = match (&args.reps, &args.seed) {
        (Some(_), seed) => Some(require_seed(seed, "sweep with --reps")?),
        (None, _) => None,
    };

    // Grid points: (n, p, a1).
    let mut points: Vec<(usize, usize, f64)> = Vec::new();
    match (&args.a1_grid, &args.np_grid) {
        (Some(grid), None) => {
            for tok in grid.split(',') {
                let a1: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| LabError::User(format!("malformed --a1-grid entry: {tok:?}")))?;
                points.push((args.n, args.p, a1));
            }
        }
        (None, Some(grid)) => {
            for tok in grid.split(',') {
                let (n_s, p_s) = tok.split_once(':').ok_or_else(|| {
                    LabError::User(format!("malformed --np-grid entry (want n:p): {tok:?}"))
                })?;
                let n = n_s
                    .trim()
                    .parse()
                    .map_err(|_| LabError::User(format!("malformed --np-grid entry: {tok:?}")))?;
                let p = p_s
                    .trim()
                    .parse()
                    .map_err(|_| LabError::User(format!("malformed --np-grid entry: {tok:?}")))?;
                points.push((n, p, args.a1));
            }
        }
        _ => {
            return Err(LabError::User(
                "pass exactly one of --a1-grid or --np-grid".into(),
            ))
        }
    }
    if points.is_empty() {
        return Err(LabError::User("the sweep grid is empty".into()));
    }

    let mut rows = Vec::new();
    for kind in &kinds {
        let mut calib_cache: Option<NullCalibration> = None;
        for (pi, &(n, p, a1)) in points.iter().enumerate() {
            if !(a1 > -1.0) {
                return Err(LabError::User(format!(
                    "spike magnitude must exceed -1, got {a1}"
                )));
            }
            let mut a = vec![0.0; p];
            a[0] = a1;
            let beta = spiked_power(*kind, &a, n, p, args.alpha)?;
            let sigma_null = null_variance_asymptotic(*kind, n, p)?.sqrt();
            let sigma = spiked_sigma(&a)?;
            let pred = analytic_power(*kind, &sigma, n, p, args.alpha, sigma_null)?;
            let mut row = vec![
                kind.name().to_string(),
                n.to_string(),
                p.to_string(),
                format!("{}", args.alpha),
                format!("a1={a1}"),
                format!("{:.9}", pred.tau),
                format!("{:.9}", beta),
            ];
            match (args.reps, empirical_seed) {
                (Some(reps), Some(seed)) => {
                    let calib = match &calib_cache {
                        Some(c) if c.n == n && c.p == p => c.clone(),
                        _ => {
                            let c = null_calibrate_mc(
                                *kind,
                                n,
                                p,
                                20_000,
                                derive_seed(seed, 1000 + *kind as u64),
                            )?;
                            calib_cache = Some(c.clone());
                            c
                        }
                    };
                    let est = empirical_power(
                        *kind,
                        &sigma,
                        n,
                        p,
                        args.alpha,
                        &calib,
                        reps,
                        derive_seed(seed, 2000 + 10 * *kind as u64 + pi as u64),
                    )?;
                    row.push(format!("{:.9}", est.value));
                    row.push(format!("{:.9}", est.std_error));
                }
                _ => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
            rows.push(row);
        }
    }
    emit_rows(&args.out, args.format, "hdcov.sweep", &SWEEP_HEADER, &rows)
}

fn cmd_verify(args: &VerifyArgs, threads: usize) -> LabResult<i32> {
    let seed = parse_seed(&args.seed)?;
    println!("verification suite: seed={seed} threads={threads}");
    let checks = verify::run_all(seed, args.only.as_deref(), |check| {
        println!(
            "{} {} (observed={:.6e}, expected={:.6e}, tol={:.6e})",
            if check.passed() { "PASS" } else { "FAIL" },
            check.name,
            check.observed,
            check.expected,
            check.tolerance,
        );
    });
    if checks.is_empty() {
        return Err(LabError::User(format!(
            "no verification section matches {:?} (sections: {})",
            args.only.clone().unwrap_or_default(),
            verify::SECTIONS.join(", ")
        )));
    }
    let report = report_from_checks(seed, threads, checks);
    println!("{} passed, {} failed", report.passed, report.failed);
    if let Some(path) = &args.out {
        formats::write_json_lab(path, &report)?;
    }
    Ok(if report.failed == 0 { 0 } else { 1 })
}

/// Parses arguments, dispatches, and maps errors to exit codes.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result: LabResult<i32> = with_pool(threads, || match &cli.command {
        Command::Calibrate(args) => cmd_calibrate(args).map(|()| 0),
        Command::Test(args) => cmd_test(args).map(|()| 0),
        Command::Power(args) => cmd_power(args).map(|()| 0),
        Command::Simulate(args) => cmd_simulate(args).map(|()| 0),
        Command::Sweep(args) => cmd_sweep(args).map(|()| 0),
        Command::Verify(args) => cmd_verify(args, threads),
    });
    match result {
        Ok(code) => code,
        Err(LabError::User(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(LabError::Internal(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

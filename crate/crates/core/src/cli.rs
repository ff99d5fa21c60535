//! Command-line front end.
//!
//! Exit codes: 0 success, 1 invariant or contract failure, 2 usage or
//! validation error. Machine-readable output goes to stdout, diagnostics to
//! stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bounds;
use crate::error::Error;
use crate::estimator::{self, CALIBRATION_CANDIDATES, DEFAULT_C_SAMPLE};
use crate::graph::{brute_force_matching, maximum_matching, TypeProfile};
use crate::harness::{self, ExperimentSpec, Family};
use crate::online::DEFAULT_BETA;
use crate::predictions::{l1_counts, perturb};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tamplus", version, about = "Learning-augmented online bipartite matching simulator")]
pub struct Cli {
    /// Worker threads for trial batches (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one Test-and-Match+ trial and print its record as JSON.
    Run(RunArgs),
    /// Run an experiment spec and write trial and summary CSVs.
    Sweep(SweepArgs),
    /// Find the smallest sample-size constant meeting the estimator contract.
    Calibrate(CalibrateArgs),
    /// Run the oracle cross-check suite.
    Selftest(SelftestArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value = "perfect")]
    pub family: String,
    #[arg(long)]
    pub n: usize,
    /// Target prediction error L1(p, q) in [0, 2].
    #[arg(long, default_value_t = 0.0)]
    pub l1: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta_prime: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_C_SAMPLE)]
    pub c_sample: f64,
    /// Matched fraction for the isolated family.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory for trials.csv and summary.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta_prime: f64,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_delimiter = ',', default_values_t = CALIBRATION_CANDIDATES)]
    pub candidates: Vec<f64>,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Smaller suite.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Negative control: corrupt one oracle comparison.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::Io(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first) and runs the subcommand.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
                return EXIT_OK;
            }
            let _ = write!(err, "{text}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_USAGE;
        }
    };
    // the sinks are not Send, so buffer inside the pool and copy out after
    let (code, out_buf, err_buf) = pool.install(|| {
        let mut o = Vec::new();
        let mut e = Vec::new();
        let code = match cli.command {
            Command::Run(a) => cmd_run(&a, &mut o, &mut e),
            Command::Sweep(a) => cmd_sweep(&a, &mut o, &mut e),
            Command::Calibrate(a) => cmd_calibrate(&a, &mut o, &mut e),
            Command::Selftest(a) => cmd_selftest(&a, &mut o, &mut e),
        };
        (code, o, e)
    });
    let _ = out.write_all(&out_buf);
    let _ = err.write_all(&err_buf);
    let _ = out.flush();
    code
}

fn report_error(e: &Error, err: &mut dyn Write) -> i32 {
    let _ = writeln!(err, "error: {e}");
    exit_code(e)
}

fn print_json<S: Serialize>(value: &S, out: &mut dyn Write) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(std::io::Error::other)?;
    writeln!(out)
}

pub fn cmd_run(a: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = (|| {
        let family = Family::from_name(&a.family, a.rho, a.degree)?;
        let spec = ExperimentSpec {
            family,
            n: a.n,
            alpha: a.alpha,
            beta: a.beta,
            epsilon: a.epsilon,
            delta_prime: a.delta_prime,
            c_sample: a.c_sample,
            error_grid: vec![a.l1],
            trials: 1,
            base_seed: a.seed,
        };
        spec.validate()?;
        let params = spec.params()?;
        harness::run_trial(&spec, &params, a.l1, a.seed)
    })();
    match result {
        Ok(record) => {
            if let Err(e) = print_json(&record, out) {
                return report_error(&e.into(), err);
            }
            match record.first_violation() {
                Some(v) => report_error(&v, err),
                None => EXIT_OK,
            }
        }
        Err(e) => report_error(&e, err),
    }
}

#[derive(Serialize)]
struct SweepReport {
    cells: usize,
    trials: usize,
    violations: usize,
    trials_csv: PathBuf,
    summary_csv: PathBuf,
}

pub fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let spec = match ExperimentSpec::from_json_file(&a.spec) {
        Ok(s) => s,
        Err(e) => return report_error(&e, err),
    };
    let cells = match harness::run_experiment(&spec) {
        Ok(c) => c,
        Err(e) => return report_error(&e, err),
    };
    if let Err(e) = harness::write_outputs(&cells, &a.out) {
        return report_error(&e, err);
    }
    let report = SweepReport {
        cells: cells.len(),
        trials: cells.iter().map(|c| c.records.len()).sum(),
        violations: cells.iter().map(|c| c.summary.violations).sum(),
        trials_csv: a.out.join("trials.csv"),
        summary_csv: a.out.join("summary.csv"),
    };
    if let Err(e) = print_json(&report, out) {
        return report_error(&e.into(), err);
    }
    match harness::check_invariants(&cells) {
        Ok(()) => EXIT_OK,
        Err(e) => report_error(&e, err),
    }
}

pub fn cmd_calibrate(a: &CalibrateArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if a.trials == 0 || a.candidates.is_empty() {
        return report_error(&Error::Validation("trials and candidates must be non-empty".into()), err);
    }
    let report = match estimator::calibrate(a.n, a.epsilon, a.delta_prime, a.trials, a.seed, &a.candidates) {
        Ok(r) => r,
        Err(e) => return report_error(&e, err),
    };
    if let Some(path) = &a.out {
        let written = serde_json::to_string_pretty(&report)
            .map_err(Error::from)
            .and_then(|s| std::fs::write(path, s + "\n").map_err(Error::from));
        if let Err(e) = written {
            return report_error(&e, err);
        }
    }
    if let Err(e) = print_json(&report, out) {
        return report_error(&e.into(), err);
    }
    match report.chosen {
        Some(c) => {
            let _ = writeln!(err, "calibrated c_sample = {c}");
            EXIT_OK
        }
        None => {
            let _ = writeln!(err, "no candidate met the contract on every distribution");
            EXIT_FAILURE
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct SelftestReport {
    pub quick: bool,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// Oracle suite: matching vs brute force, L1 metric laws, perturbation
/// exactness, coin-flip sampling frequencies, threshold algebra.
pub fn run_selftest(quick: bool, seed: u64, inject_fault: bool) -> SelftestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let cases = if quick { 200 } else { 1000 };
    let mut mismatches = 0;
    let mut invalid_plans = 0;
    for i in 0..cases {
        let n = rng.random_range(1..=7);
        let p = harness::random_small_profile(n, 0.35, &mut rng);
        let plan = maximum_matching(&p, n).expect("valid profile");
        if plan.validate(&p, n).is_err() {
            invalid_plans += 1;
        }
        let mut fast = plan.size();
        if inject_fault && i == 0 {
            fast += 1;
        }
        if fast != brute_force_matching(&p, n).expect("n <= 7") {
            mismatches += 1;
        }
    }
    checks.push(CheckResult {
        name: "matching_oracle",
        passed: mismatches == 0 && invalid_plans == 0,
        detail: format!("{cases} profiles, {mismatches} size mismatches, {invalid_plans} invalid plans"),
    });

    let triples = if quick { 100 } else { 500 };
    let mut metric_failures = 0;
    for _ in 0..triples {
        let n = rng.random_range(1..=8);
        let a = harness::random_small_profile(n, 0.4, &mut rng);
        let b = harness::random_small_profile(n, 0.4, &mut rng);
        let c = harness::random_small_profile(n, 0.4, &mut rng);
        let d = |x: &TypeProfile, y: &TypeProfile| l1_counts(x, y).expect("same n");
        let ok = d(&a, &a) == 0
            && d(&a, &b) == d(&b, &a)
            && (d(&a, &b) == 0) == (a == b)
            && d(&a, &c) <= d(&a, &b) + d(&b, &c)
            && d(&a, &b) % 2 == 0;
        if !ok {
            metric_failures += 1;
        }
    }
    checks.push(CheckResult {
        name: "l1_metric",
        passed: metric_failures == 0,
        detail: format!("{triples} triples, {metric_failures} failures"),
    });

    let rounds = if quick { 100 } else { 300 };
    let mut perturb_failures = 0;
    for _ in 0..rounds {
        let n = rng.random_range(1..=30);
        let truth = harness::generate_instance(&Family::perfect(), n, rng.random())
            .expect("valid family")
            .truth()
            .clone();
        let target = 2 * rng.random_range(0..=n);
        let advice = perturb(&truth, target, rng.random()).expect("valid target");
        if l1_counts(&truth, &advice).expect("same n") != target {
            perturb_failures += 1;
        }
    }
    checks.push(CheckResult {
        name: "perturb_exact",
        passed: perturb_failures == 0,
        detail: format!("{rounds} perturbations, {perturb_failures} off target"),
    });

    let profile = fidelity_profile();
    let runs = if quick { 2_000 } else { 10_000 };
    let rows = harness::sampling_fidelity(&profile, 30, runs, seed);
    let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    checks.push(CheckResult {
        name: "sampling_fidelity",
        passed: worst <= 3.0,
        detail: format!("{runs} runs, max |z| = {worst:.3}"),
    });

    let grid = bounds::threshold_grid(100, 100, DEFAULT_BETA);
    checks.push(CheckResult {
        name: "threshold_algebra",
        passed: grid.below_beta == 0 && grid.endpoint_deviation <= 1e-12,
        detail: format!(
            "{} points, {} below beta, endpoint deviation {:e}",
            grid.points, grid.below_beta, grid.endpoint_deviation
        ),
    });

    let passed = checks.iter().all(|c| c.passed);
    SelftestReport {
        quick,
        checks,
        passed,
    }
}

/// Five types with counts 8, 5, 4, 2, 1 on 20 vertices.
pub fn fidelity_profile() -> TypeProfile {
    TypeProfile::from_lists(
        20,
        &[(&[0, 1], 8), (&[2], 5), (&[3, 4, 5], 4), (&[6], 2), (&[], 1)],
    )
    .expect("counts sum to 20")
}

pub fn cmd_selftest(a: &SelftestArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let report = run_selftest(a.quick, a.seed, a.inject_fault);
    for c in &report.checks {
        let _ = writeln!(err, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Err(e) = print_json(&report, out) {
        return report_error(&e.into(), err);
    }
    if report.passed {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

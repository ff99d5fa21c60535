//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
//!
//! Runs without the libtest harness so the lines are always printed.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tamplus::bounds;
use tamplus::estimator::{self, EstimatorConfig, CALIBRATION_CANDIDATES, DEFAULT_C_SAMPLE};
use tamplus::graph::{brute_force_matching, maximum_matching, TypeProfile};
use tamplus::harness::{self, CellOutcome, ExperimentSpec, Family, TrialRecord};
use tamplus::online::DEFAULT_BETA;

const SEED: u64 = 20_240_601;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn records(cells: &[CellOutcome]) -> impl Iterator<Item = &TrialRecord> {
    cells.iter().flat_map(|c| c.records.iter())
}

/// Trials shared by the per-trial bound checks.
#[derive(Default)]
struct Pool {
    trials: usize,
    mimic_bound_violations: usize,
    opt_bound_violations: usize,
}

impl Pool {
    fn add(&mut self, cells: &[CellOutcome]) {
        for r in records(cells) {
            self.trials += 1;
            self.mimic_bound_violations += usize::from(!r.mimic_bound_ok);
            self.opt_bound_violations += usize::from(!r.opt_bound_ok);
        }
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=7);
        let edge_prob = rng.random_range(0.1..0.7);
        let p = harness::random_small_profile(n, edge_prob, &mut rng);
        let fast = maximum_matching(&p, n).unwrap().size();
        if fast != brute_force_matching(&p, n).unwrap() {
            mismatches += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        mismatches == 0 && within(t, 10),
        format!("1000 profiles, {mismatches} mismatches, {:.2}s", t.as_secs_f64()),
    )
}

fn threshold_algebra() -> Outcome {
    let start = Instant::now();
    let g = bounds::threshold_grid(100, 100, DEFAULT_BETA);
    let t = start.elapsed();
    outcome(
        g.below_beta == 0 && g.endpoint_deviation <= 1e-12 && t < Duration::from_secs(1),
        format!(
            "{} points, {} below beta, endpoint deviation {:.1e}, {:.3}s",
            g.points,
            g.below_beta,
            g.endpoint_deviation,
            t.as_secs_f64()
        ),
    )
}

fn estimator_contract() -> Outcome {
    let start = Instant::now();
    let report = estimator::calibrate(1000, 0.1, 0.1, 500, SEED, &CALIBRATION_CANDIDATES).unwrap();
    let t = start.elapsed();
    let row = report.rows.iter().find(|r| r.c_sample == DEFAULT_C_SAMPLE).unwrap();
    let freqs: Vec<String> = row
        .pairs
        .iter()
        .map(|p| format!("{} {:.3}", p.pair, p.success_frequency))
        .collect();
    outcome(
        row.passes && within(t, 300),
        format!(
            "c_sample {} (smallest passing {:?}): {}, {:.1}s",
            DEFAULT_C_SAMPLE,
            report.chosen,
            freqs.join(", "),
            t.as_secs_f64()
        ),
    )
}

fn consistency(pool: &mut Pool) -> Outcome {
    let start = Instant::now();
    let spec = ExperimentSpec::new(Family::perfect(), 1000, 0.5, vec![0.0], 200, SEED + 6);
    let cells = harness::run_experiment(&spec).unwrap();
    let t = start.elapsed();
    pool.add(&cells);
    let s = &cells[0].summary;
    outcome(
        s.mean_ratio >= 0.98 && s.freq_mimic_rest >= 0.9 && within(t, 300),
        format!(
            "mean ratio {:.4}, MimicRest {:.3}, {:.1}s",
            s.mean_ratio,
            s.freq_mimic_rest,
            t.as_secs_f64()
        ),
    )
}

fn consistency_below_beta(pool: &mut Pool) -> Outcome {
    let spec = ExperimentSpec::new(Family::isolated(0.5), 1000, 0.4, vec![0.0], 200, SEED + 7);
    let cells = harness::run_experiment(&spec).unwrap();
    pool.add(&cells);
    let s = &cells[0].summary;
    outcome(
        s.mean_ratio >= 0.98,
        format!(
            "mean ratio {:.4} vs Ranking alone {:.4}, n*/n {:.3}, MimicRest {:.3}",
            s.mean_ratio,
            s.mean_baseline_ratio,
            records(&cells).map(|r| r.n_star).sum::<usize>() as f64 / (1000.0 * s.trials as f64),
            s.freq_mimic_rest
        ),
    )
}

fn robustness(pool: &mut Pool) -> Outcome {
    let n = 1000;
    let spec = ExperimentSpec::new(Family::perfect(), n, 0.5, vec![2.0], 200, SEED + 8);
    let cells = harness::run_experiment(&spec).unwrap();
    pool.add(&cells);
    let s = &cells[0].summary;
    let recs = &cells[0].records;
    let mean_k = recs.iter().map(|r| r.k as f64).sum::<f64>() / recs.len() as f64;
    // the bound uses the arrivals actually consumed by sampling
    let lower = s.mean_baseline_ratio * (1.0 - s.mean_k_prime / n as f64) - 0.03;
    outcome(
        s.freq_baseline_rest >= 0.9 && s.mean_ratio >= lower,
        format!(
            "BaselineRest {:.3}, mean ratio {:.4} >= {:.4} (Ranking alone {:.4}, mean k' {:.1}, mean k {:.0})",
            s.freq_baseline_rest, s.mean_ratio, lower, s.mean_baseline_ratio, s.mean_k_prime, mean_k
        ),
    )
}

fn smoothness(pool: &mut Pool) -> Outcome {
    let start = Instant::now();
    let alpha = 0.5;
    let eps = bounds::default_epsilon(alpha, DEFAULT_BETA);
    let top = bounds::threshold(1000, 1000, DEFAULT_BETA) - 2.0 * eps;
    let grid: Vec<f64> = (0..)
        .map(|i| i as f64 * 0.02)
        .take_while(|l| *l <= top + 1e-12)
        .collect();
    let spec = ExperimentSpec::new(Family::perfect(), 1000, alpha, grid, 200, SEED + 9);
    let (rows, cells) = harness::smoothness_curve(&spec).unwrap();
    let t = start.elapsed();
    pool.add(&cells);
    let failing: Vec<String> = rows
        .iter()
        .filter(|r| r.mean_ratio < r.bound - 0.03)
        .map(|r| format!("L1 {:.2}: {:.4} < {:.4}", r.l1, r.mean_ratio, r.bound - 0.03))
        .collect();
    let worst = rows
        .iter()
        .map(|r| r.mean_ratio - r.bound)
        .fold(f64::INFINITY, f64::min);
    outcome(
        failing.is_empty() && within(t, 1800),
        format!(
            "{} points up to L1 {:.2}, min margin over bound {:.4}, {:.1}s{}",
            rows.len(),
            rows.last().map_or(0.0, |r| r.l1),
            worst,
            t.as_secs_f64(),
            if failing.is_empty() { String::new() } else { format!("; {}", failing.join("; ")) }
        ),
    )
}

fn extra_sweep(pool: &mut Pool) {
    // small instances across every family, so the bound checks see many trials
    let grid = vec![0.0, 0.1, 0.3, 0.6, 1.0, 2.0];
    for (i, family) in [Family::perfect(), Family::isolated(0.3), Family::Triangular]
        .into_iter()
        .enumerate()
    {
        let spec = ExperimentSpec::new(family, 100, 0.3, grid.clone(), 400, SEED + 100 + i as u64);
        pool.add(&harness::run_experiment(&spec).unwrap());
    }
}

fn bound_checks(pool: &Pool) -> (Outcome, Outcome) {
    (
        outcome(
            pool.trials >= 10_000 && pool.mimic_bound_violations == 0,
            format!("{} trials, {} violations", pool.trials, pool.mimic_bound_violations),
        ),
        outcome(
            pool.trials >= 10_000 && pool.opt_bound_violations == 0,
            format!("{} pairs, {} violations", pool.trials, pool.opt_bound_violations),
        ),
    )
}

fn concentration() -> Outcome {
    let start = Instant::now();
    let instance = harness::generate_instance(&Family::perfect(), 1000, SEED + 10).unwrap();
    let r = harness::check_concentration(&instance, 100, 10_000, SEED + 10).unwrap();
    let t = start.elapsed();
    outcome(
        r.freq_slack_002 >= 0.99 && within(t, 120),
        format!(
            "n* {}, mean O2 {:.1}, min O2 {}, freq {:.4}, mean k' {:.1}, {:.1}s",
            r.n_star,
            r.mean_o2,
            r.min_o2,
            r.freq_slack_002,
            r.mean_k_prime,
            t.as_secs_f64()
        ),
    )
}

fn overflow() -> Outcome {
    let eps = bounds::default_epsilon(0.5, DEFAULT_BETA);
    let mut parts = Vec::new();
    let mut ok = true;
    for (i, n) in [100usize, 1000].into_iter().enumerate() {
        let config = EstimatorConfig::<f64>::with_defaults(eps, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(SEED + 11 + i as u64);
        let draws = 100_000;
        let over = (0..draws)
            .filter(|_| estimator::draw_sample_size_with(&config, &mut rng).unwrap().overflowed)
            .count();
        let freq = over as f64 / draws as f64;
        ok &= freq <= 1e-3;
        parts.push(format!("n {n}: {over}/{draws}"));
    }
    outcome(ok, parts.join(", "))
}

fn fidelity() -> Outcome {
    let profile = TypeProfile::from_lists(20, &[(&[0, 1], 8), (&[2], 5), (&[3, 4, 5], 4), (&[6], 2), (&[], 1)])
        .unwrap();
    let rows = harness::sampling_fidelity(&profile, 30, 10_000, SEED + 12);
    let worst = rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    let zs: Vec<String> = rows.iter().map(|r| format!("{:+.2}", r.z)).collect();
    outcome(
        rows.len() == 5 && worst <= 3.0,
        format!("10000 runs of 30 draws, z = [{}]", zs.join(", ")),
    )
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec_path = dir.path().join("spec.json");
    let spec = ExperimentSpec::new(Family::perfect(), 200, 0.5, vec![0.0, 0.2, 1.0], 20, SEED + 13);
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_tamplus"))
            .arg("sweep")
            .arg("--spec")
            .arg(&spec_path)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        (
            std::fs::read(out.join("trials.csv")).unwrap(),
            std::fs::read(out.join("summary.csv")).unwrap(),
        )
    };
    let (a_trials, a_summary) = run("a");
    let (b_trials, b_summary) = run("b");
    outcome(
        a_trials == b_trials && a_summary == b_summary,
        format!(
            "trials.csv {} bytes, summary.csv {} bytes, identical: {}",
            a_trials.len(),
            a_summary.len(),
            a_trials == b_trials && a_summary == b_summary
        ),
    )
}

fn main() {
    // libtest flags such as --nocapture are accepted and ignored
    let mut pool = Pool::default();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |id: u32, name: &'static str, o: Outcome| {
        println!("{} [{id:>2}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    report(1, "oracle equivalence", oracle_equivalence());
    report(4, "threshold algebra", threshold_algebra());
    report(5, "estimator contract", estimator_contract());
    report(6, "consistency with perfect advice", consistency(&mut pool));
    report(7, "consistency below beta optimum", consistency_below_beta(&mut pool));
    report(8, "robustness with disjoint advice", robustness(&mut pool));
    report(9, "smoothness", smoothness(&mut pool));
    extra_sweep(&mut pool);
    let (l1, l2) = bound_checks(&pool);
    report(2, "mimic lower bound", l1);
    report(3, "optimum upper bound", l2);
    report(10, "post-sampling concentration", concentration());
    report(11, "sample size overflow", overflow());
    report(12, "sampling with replacement fidelity", fidelity());
    report(13, "sweep reproducibility", reproducibility());

    let failed: Vec<u32> = results.iter().filter(|r| !r.2.passed).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed{}",
        results.len() - failed.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(" ({failed:?})") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

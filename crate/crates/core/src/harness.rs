//! Instance families, seeded trial batches, aggregation, and the per-trial
//! and statistical checks run over them.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::estimator::{default_delta_prime, EstimatorConfig, DEFAULT_C_SAMPLE};
use crate::graph::{maximum_matching, Instance, TypeProfile, VertexType};
use crate::online::{
    random_permutation, run_online, Branch, CoinFlipSampler, MimicState, Ranking, TamParams,
    TamState, DEFAULT_BETA,
};
use crate::predictions::{l1_counts, perturb, random_subset};
use crate::seed;

fn default_degree() -> usize {
    3
}

/// Instance generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Family {
    /// Planted perfect matching; each online vertex gets `degree - 1` extra
    /// random neighbors.
    Perfect {
        #[serde(default = "default_degree")]
        degree: usize,
    },
    /// `round(rho n)` online vertices as in `Perfect`, the rest isolated, so
    /// the optimum is exactly `round(rho n)`.
    Isolated {
        rho: f64,
        #[serde(default = "default_degree")]
        degree: usize,
    },
    /// Online vertex `j` is adjacent to offline `0..=j`.
    Triangular,
}

impl Family {
    pub fn perfect() -> Self {
        Family::Perfect {
            degree: default_degree(),
        }
    }

    pub fn isolated(rho: f64) -> Self {
        Family::Isolated {
            rho,
            degree: default_degree(),
        }
    }

    /// Parses the CLI form: `perfect`, `isolated`, `triangular`.
    pub fn from_name(name: &str, rho: f64, degree: usize) -> Result<Self> {
        match name {
            "perfect" => Ok(Family::Perfect { degree }),
            "isolated" => Ok(Family::Isolated { rho, degree }),
            "triangular" => Ok(Family::Triangular),
            other => Err(Error::validation(format!("unknown instance family '{other}'"))),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Family::Perfect { degree } | Family::Isolated { degree, .. } if degree == 0 => {
                Err(Error::validation("family degree must be >= 1"))
            }
            Family::Isolated { rho, .. } if !(0.0..=1.0).contains(&rho) => Err(
                Error::validation(format!("isolated family needs rho in [0, 1], got {rho}")),
            ),
            _ => Ok(()),
        }
    }
}

pub fn generate_instance(family: &Family, n: usize, seed: u64) -> Result<Instance> {
    family.validate()?;
    if n == 0 {
        return Err(Error::validation("n must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let profile = match *family {
        Family::Perfect { degree } => planted(n, n, degree, &mut rng)?,
        Family::Isolated { rho, degree } => {
            let m = (rho * n as f64).round() as usize;
            planted(n, m, degree, &mut rng)?
        }
        Family::Triangular => TypeProfile::new(
            n,
            (0..n).map(|j| {
                let nb = (0..=j as u32).collect();
                (VertexType::new(nb, n).expect("ascending, in range"), 1)
            }),
        )?,
    };
    Ok(Instance::new(profile))
}

/// `m` online vertices matched to distinct offline vertices plus extra random
/// neighbors, and `n - m` isolated online vertices.
fn planted(n: usize, m: usize, degree: usize, rng: &mut ChaCha8Rng) -> Result<TypeProfile> {
    let partners = random_permutation(n, rng);
    let mut entries = Vec::with_capacity(n);
    for &p in partners.iter().take(m) {
        let mut nb = random_subset(degree.saturating_sub(1), n, rng).neighbors().to_vec();
        nb.push(p as u32);
        entries.push((VertexType::from_unsorted(nb, n)?, 1));
    }
    if m < n {
        entries.push((VertexType::empty(), n - m));
    }
    TypeProfile::new(n, entries)
}

fn default_beta() -> f64 {
    DEFAULT_BETA
}

fn default_c_sample() -> f64 {
    DEFAULT_C_SAMPLE
}

/// A batch of experiments over a grid of prediction errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    pub n: usize,
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Defaults to `min(0.05, alpha (1-beta)/(1+beta))`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// Defaults to the clamped `min(0.1, 1/max(ln ln ln n, 10))`.
    #[serde(default)]
    pub delta_prime: Option<f64>,
    #[serde(default = "default_c_sample")]
    pub c_sample: f64,
    /// Target `L1(p, q)` values in `[0, 2]`.
    pub error_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
}

impl ExperimentSpec {
    pub fn new(family: Family, n: usize, alpha: f64, error_grid: Vec<f64>, trials: usize, base_seed: u64) -> Self {
        ExperimentSpec {
            family,
            n,
            alpha,
            beta: DEFAULT_BETA,
            epsilon: None,
            delta_prime: None,
            c_sample: DEFAULT_C_SAMPLE,
            error_grid,
            trials,
            base_seed,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let spec: ExperimentSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::validation("trials must be >= 1"));
        }
        if self.n == 0 {
            return Err(Error::validation("n must be >= 1"));
        }
        if self.error_grid.is_empty() {
            return Err(Error::validation("error grid is empty"));
        }
        if let Some(v) = self.error_grid.iter().find(|v| !(0.0..=2.0).contains(*v)) {
            return Err(Error::validation(format!("grid value {v} outside [0, 2]")));
        }
        self.family.validate()?;
        self.params().map(|_| ())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
            .unwrap_or_else(|| bounds::default_epsilon(self.alpha, self.beta))
    }

    pub fn params(&self) -> Result<TamParams> {
        let delta_prime = self.delta_prime.unwrap_or_else(|| default_delta_prime(self.n));
        let p = TamParams {
            alpha: self.alpha,
            beta: self.beta,
            estimator: EstimatorConfig::new(self.epsilon(), delta_prime, self.n, self.c_sample)?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Nearest even count for a target `L1(p, q)`.
pub fn target_counts(l1: f64, n: usize) -> usize {
    let half = (l1 * n as f64 / 2.0).round() as usize;
    (2 * half).min(2 * n)
}

/// One randomized Test-and-Match+ run plus its reference runs and checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub branch: Branch,
    pub matches: usize,
    pub n_star: usize,
    pub n_hat: usize,
    pub l1_counts: usize,
    pub l1_true: f64,
    pub l1_hat: Option<f64>,
    pub k: u64,
    pub k_prime: usize,
    pub ratio: Option<f64>,
    /// Mimic alone over the whole input, same arrival order.
    pub mimic_whole_matches: usize,
    /// Ranking alone over the whole input, same arrival order.
    pub baseline_matches: usize,
    pub mimic_bound_ok: bool,
    pub opt_bound_ok: bool,
    pub feasible_ok: bool,
}

impl TrialRecord {
    pub fn invariants_hold(&self) -> bool {
        self.mimic_bound_ok && self.opt_bound_ok && self.feasible_ok
    }

    pub fn baseline_ratio(&self) -> Option<f64> {
        (self.n_star > 0).then(|| self.baseline_matches as f64 / self.n_star as f64)
    }

    pub fn first_violation(&self) -> Option<Error> {
        let what = if !self.mimic_bound_ok {
            format!(
                "mimic matched {} < n_hat - L1/2 = {} - {}",
                self.mimic_whole_matches,
                self.n_hat,
                self.l1_counts / 2
            )
        } else if !self.opt_bound_ok {
            format!(
                "n* = {} > n_hat + L1/2 = {} + {}",
                self.n_star,
                self.n_hat,
                self.l1_counts / 2
            )
        } else if !self.feasible_ok {
            format!("matches exceed n* = {}", self.n_star)
        } else {
            return None;
        };
        Some(Error::Invariant {
            seed: self.seed,
            what,
        })
    }
}

mod streams {
    pub const INSTANCE: u64 = 0;
    pub const ADVICE: u64 = 1;
    pub const ORDER: u64 = 2;
    pub const ALGORITHM: u64 = 3;
    pub const BASELINE: u64 = 4;
}

/// Runs one trial with the given trial seed and target error.
pub fn run_trial(spec: &ExperimentSpec, params: &TamParams, l1_target: f64, trial_seed: u64) -> Result<TrialRecord> {
    let n = spec.n;
    let instance = generate_instance(&spec.family, n, seed::derive(trial_seed, &[streams::INSTANCE]))?;
    let truth = instance.truth();
    let advice = perturb(truth, target_counts(l1_target, n), seed::derive(trial_seed, &[streams::ADVICE]))?;
    let l1 = l1_counts(truth, &advice)?;
    let n_star = instance.opt_size();
    let plan = maximum_matching(&advice, n)?;
    let n_hat = plan.size();

    let mut order_rng = ChaCha8Rng::seed_from_u64(seed::derive(trial_seed, &[streams::ORDER]));
    let order = random_permutation(n, &mut order_rng);

    let mut tam = TamState::new(&advice, *params, seed::derive(trial_seed, &[streams::ALGORITHM]))?;
    let run = run_online(&mut tam, &instance, &order)?;

    let mut mimic = MimicState::new(&advice, &plan);
    let mimic_whole = run_online(&mut mimic, &instance, &order)?.matches;

    let mut base_rng = ChaCha8Rng::seed_from_u64(seed::derive(trial_seed, &[streams::BASELINE]));
    let mut ranking = Ranking::new(n, &mut base_rng);
    let baseline = run_online(&mut ranking, &instance, &order)?.matches;

    let log = tam.log();
    Ok(TrialRecord {
        seed: trial_seed,
        branch: run.branch.expect("Test-and-Match+ always ends in a branch"),
        matches: run.matches,
        n_star,
        n_hat,
        l1_counts: l1,
        l1_true: l1 as f64 / n as f64,
        l1_hat: log.l1_hat,
        k: log.k,
        k_prime: log.k_prime,
        ratio: (n_star > 0).then(|| run.matches as f64 / n_star as f64),
        mimic_whole_matches: mimic_whole,
        baseline_matches: baseline,
        mimic_bound_ok: 2 * mimic_whole + l1 >= 2 * n_hat,
        opt_bound_ok: 2 * n_star <= 2 * n_hat + l1,
        feasible_ok: run.matches <= n_star && mimic_whole <= n_star && baseline <= n_star,
    })
}

/// Aggregate of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub l1: f64,
    pub l1_true: f64,
    pub mean_ratio: f64,
    pub std_err: f64,
    pub bound: f64,
    pub trials: usize,
    /// Trials with `n* = 0`, left out of ratio statistics.
    pub excluded: usize,
    pub freq_mimic_rest: f64,
    pub freq_baseline_rest: f64,
    pub freq_baseline_whole: f64,
    pub mean_baseline_ratio: f64,
    pub mean_mimic_whole_ratio: f64,
    pub mean_n_hat: f64,
    pub mean_k: f64,
    pub mean_k_prime: f64,
    pub violations: usize,
}

impl CellSummary {
    pub fn branch_frequency(&self, b: Branch) -> f64 {
        match b {
            Branch::MimicRest => self.freq_mimic_rest,
            Branch::BaselineRest => self.freq_baseline_rest,
            Branch::BaselineWhole => self.freq_baseline_whole,
        }
    }
}

fn mean(xs: impl IntoIterator<Item = f64>) -> (f64, usize) {
    let (s, c) = xs.into_iter().fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (if c == 0 { f64::NAN } else { s / c as f64 }, c)
}

/// Sequential reduce over trial records, in trial order.
pub fn summarize(l1: f64, alpha: f64, records: &[TrialRecord]) -> CellSummary {
    let trials = records.len();
    let ratios: Vec<f64> = records.iter().filter_map(|r| r.ratio).collect();
    let (mean_ratio, m) = mean(ratios.iter().copied());
    let std_err = if m > 1 {
        let var = ratios.iter().map(|r| (r - mean_ratio).powi(2)).sum::<f64>() / (m - 1) as f64;
        (var / m as f64).sqrt()
    } else {
        0.0
    };
    let freq = |b: Branch| records.iter().filter(|r| r.branch == b).count() as f64 / trials as f64;
    let ratio_of = |x: usize, r: &TrialRecord| (r.n_star > 0).then(|| x as f64 / r.n_star as f64);
    CellSummary {
        l1,
        l1_true: mean(records.iter().map(|r| r.l1_true)).0,
        mean_ratio,
        std_err,
        bound: bounds::smoothness_bound(alpha, l1),
        trials,
        excluded: trials - m,
        freq_mimic_rest: freq(Branch::MimicRest),
        freq_baseline_rest: freq(Branch::BaselineRest),
        freq_baseline_whole: freq(Branch::BaselineWhole),
        mean_baseline_ratio: mean(records.iter().filter_map(|r| ratio_of(r.baseline_matches, r))).0,
        mean_mimic_whole_ratio: mean(records.iter().filter_map(|r| ratio_of(r.mimic_whole_matches, r))).0,
        mean_n_hat: mean(records.iter().map(|r| r.n_hat as f64)).0,
        mean_k: mean(records.iter().map(|r| r.k as f64)).0,
        mean_k_prime: mean(records.iter().map(|r| r.k_prime as f64)).0,
        violations: records.iter().filter(|r| !r.invariants_hold()).count(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub summary: CellSummary,
    pub records: Vec<TrialRecord>,
}

/// Runs every trial of grid point `cell` concurrently; results are in trial
/// order and depend only on the spec.
pub fn run_cell(spec: &ExperimentSpec, cell: usize) -> Result<CellOutcome> {
    spec.validate()?;
    let l1 = *spec
        .error_grid
        .get(cell)
        .ok_or_else(|| Error::validation(format!("grid has no cell {cell}")))?;
    let params = spec.params()?;
    let records = (0..spec.trials)
        .into_par_iter()
        .map(|t| run_trial(spec, &params, l1, seed::derive(spec.base_seed, &[cell as u64, t as u64])))
        .collect::<Result<Vec<_>>>()?;
    Ok(CellOutcome {
        summary: summarize(l1, spec.alpha, &records),
        records,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<CellOutcome>> {
    (0..spec.error_grid.len()).map(|c| run_cell(spec, c)).collect()
}

/// First hard-invariant failure across all cells.
pub fn check_invariants(cells: &[CellOutcome]) -> Result<()> {
    match cells
        .iter()
        .flat_map(|c| &c.records)
        .find_map(TrialRecord::first_violation)
    {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct TrialRow {
    seed: u64,
    branch: &'static str,
    matches: usize,
    n_star: usize,
    n_hat: usize,
    l1_true: f64,
    l1_hat: Option<f64>,
    k: u64,
    k_prime: usize,
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct SummaryRow {
    l1: f64,
    mean_ratio: f64,
    bound: f64,
    std_err: f64,
    l1_true: f64,
    trials: usize,
    excluded: usize,
    freq_mimic_rest: f64,
    freq_baseline_rest: f64,
    freq_baseline_whole: f64,
    mean_baseline_ratio: f64,
    mean_k_prime: f64,
}

pub const TRIALS_HEADER: &str = "seed,branch,matches,n_star,n_hat,l1_true,l1_hat,k,k_prime,ratio";

pub fn write_trials_csv<W: Write>(cells: &[CellOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in cells.iter().flat_map(|c| &c.records) {
        w.serialize(TrialRow {
            seed: r.seed,
            branch: r.branch.as_str(),
            matches: r.matches,
            n_star: r.n_star,
            n_hat: r.n_hat,
            l1_true: r.l1_true,
            l1_hat: r.l1_hat,
            k: r.k,
            k_prime: r.k_prime,
            ratio: r.ratio,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(cells: &[CellOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in cells.iter().map(|c| &c.summary) {
        w.serialize(SummaryRow {
            l1: s.l1,
            mean_ratio: s.mean_ratio,
            bound: s.bound,
            std_err: s.std_err,
            l1_true: s.l1_true,
            trials: s.trials,
            excluded: s.excluded,
            freq_mimic_rest: s.freq_mimic_rest,
            freq_baseline_rest: s.freq_baseline_rest,
            freq_baseline_whole: s.freq_baseline_whole,
            mean_baseline_ratio: s.mean_baseline_ratio,
            mean_k_prime: s.mean_k_prime,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `trials.csv` and `summary.csv` into `dir`.
pub fn write_outputs(cells: &[CellOutcome], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_trials_csv(cells, File::create(dir.join("trials.csv"))?)?;
    write_summary_csv(cells, File::create(dir.join("summary.csv"))?)?;
    Ok(())
}

/// Comparison with Ranking alone for a cell that always switched after
/// sampling.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SwitchComparison {
    pub mean_matches: f64,
    pub mean_baseline_matches: f64,
    pub mean_k_prime: f64,
    pub mean_n_star: f64,
    /// `mean_baseline * (n - k') / n - slack * n*`.
    pub lower: f64,
    pub holds: bool,
}

pub fn compare_switch_to_baseline(n: usize, records: &[TrialRecord], slack: f64) -> Option<SwitchComparison> {
    if records.is_empty() || records.iter().any(|r| r.branch != Branch::BaselineRest) {
        return None;
    }
    let m = |f: &dyn Fn(&TrialRecord) -> f64| mean(records.iter().map(f)).0;
    let mean_matches = m(&|r| r.matches as f64);
    let mean_baseline_matches = m(&|r| r.baseline_matches as f64);
    let mean_k_prime = m(&|r| r.k_prime as f64);
    let mean_n_star = m(&|r| r.n_star as f64);
    let lower = mean_baseline_matches * (n as f64 - mean_k_prime) / n as f64 - slack * mean_n_star;
    Some(SwitchComparison {
        mean_matches,
        mean_baseline_matches,
        mean_k_prime,
        mean_n_star,
        lower,
        holds: mean_matches >= lower,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub trials: usize,
    pub n: usize,
    pub n_star: usize,
    pub k: u64,
    pub mean_k_prime: f64,
    pub mean_o2: f64,
    pub min_o2: usize,
    /// Frequency of `O2 >= (n-k)/n n* - 0.02 n*`.
    pub freq_slack_002: f64,
    /// Frequency of `O2 >= (n-k)/n n* - 0.05 n*`.
    pub freq_slack_005: f64,
}

/// Samples `k` arrivals with replacement by the coin-flip scheme and counts
/// how many vertices of a fixed maximum matching arrive after the sampling
/// phase.
pub fn check_concentration(instance: &Instance, k: u64, trials: usize, base_seed: u64) -> Result<ConcentrationReport> {
    let n = instance.n();
    if k > n as u64 {
        return Err(Error::validation(format!("k = {k} exceeds n = {n}")));
    }
    let truth = instance.truth();
    let plan = maximum_matching(truth, n)?;
    let n_star = plan.size();
    // within a type, the first |partners| copies of the expansion are matched
    let mut matched = Vec::with_capacity(n);
    for (t, c) in truth.iter() {
        let m = plan.partners(t).len();
        matched.extend((0..c).map(|i| i < m));
    }

    let outcomes: Vec<(usize, usize)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(base_seed, &[trial as u64]));
            let order = random_permutation(n, &mut rng);
            let mut sampler = CoinFlipSampler::<usize>::new(n, k);
            let mut next = 0;
            while sampler.flip_until_tails(&mut rng, |_| {}) {
                sampler.take_arrival(order[next], |_| {});
                next += 1;
            }
            let k_prime = sampler.consumed();
            let o2 = order[k_prime..].iter().filter(|&&v| matched[v]).count();
            (k_prime, o2)
        })
        .collect();

    let expected = (n as f64 - k as f64) / n as f64 * n_star as f64;
    let freq = |slack: f64| {
        outcomes
            .iter()
            .filter(|(_, o2)| *o2 as f64 >= expected - slack * n_star as f64)
            .count() as f64
            / trials.max(1) as f64
    };
    Ok(ConcentrationReport {
        trials,
        n,
        n_star,
        k,
        mean_k_prime: mean(outcomes.iter().map(|o| o.0 as f64)).0,
        mean_o2: mean(outcomes.iter().map(|o| o.1 as f64)).0,
        min_o2: outcomes.iter().map(|o| o.1).min().unwrap_or(n_star),
        freq_slack_002: freq(0.02),
        freq_slack_005: freq(0.05),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessRow {
    pub l1: f64,
    pub mean_ratio: f64,
    pub bound: f64,
    pub std_err: f64,
    /// Whether `l1 <= tau - 2 epsilon` for the cell's mean `n_hat`.
    pub in_range: bool,
}

pub fn smoothness_curve(spec: &ExperimentSpec) -> Result<(Vec<SmoothnessRow>, Vec<CellOutcome>)> {
    let cells = run_experiment(spec)?;
    let eps = spec.epsilon();
    let rows = cells
        .iter()
        .map(|c| {
            let s = &c.summary;
            let tau = 2.0 * s.mean_n_hat / spec.n as f64 * (1.0 - spec.beta) / (1.0 + spec.beta);
            SmoothnessRow {
                l1: s.l1,
                mean_ratio: s.mean_ratio,
                bound: s.bound,
                std_err: s.std_err,
                in_range: s.l1 <= tau - 2.0 * eps + 1e-12,
            }
        })
        .collect();
    Ok((rows, cells))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityRow {
    pub neighbors: Vec<u32>,
    pub expected: f64,
    pub observed: f64,
    /// `(observed - expected) / standard error`.
    pub z: f64,
}

/// Runs the coin-flip sampler `runs` times over random arrival orders of the
/// profile and compares pooled per-type frequencies with `c*(t)/n`.
pub fn sampling_fidelity(profile: &TypeProfile, sample_size: u64, runs: usize, base_seed: u64) -> Vec<FidelityRow> {
    let n = profile.n();
    let types: Vec<&VertexType> = profile.types().collect();
    let mut type_of = Vec::with_capacity(n);
    for (i, (_, c)) in profile.iter().enumerate() {
        type_of.extend(std::iter::repeat_n(i, c));
    }
    let counts = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(base_seed, &[run as u64]));
            let order = random_permutation(n, &mut rng);
            let mut counts = vec![0u64; types.len()];
            let mut sampler = CoinFlipSampler::<usize>::new(n, sample_size);
            let mut next = 0;
            while sampler.flip_until_tails(&mut rng, |v| counts[type_of[v]] += 1) {
                sampler.take_arrival(order[next], |v| counts[type_of[v]] += 1);
                next += 1;
            }
            counts
        })
        .reduce(
            || vec![0u64; types.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let total = (sample_size * runs as u64) as f64;
    types
        .iter()
        .zip(profile.iter())
        .zip(counts)
        .map(|((t, (_, c)), got)| {
            let p = c as f64 / n as f64;
            let observed = got as f64 / total;
            let se = (p * (1.0 - p) / total).sqrt();
            FidelityRow {
                neighbors: t.neighbors().to_vec(),
                expected: p,
                observed,
                z: if se > 0.0 { (observed - p) / se } else { 0.0 },
            }
        })
        .collect()
}

/// Draws a random profile on `n <= 10` vertices for oracle checks.
pub fn random_small_profile<R: Rng>(n: usize, edge_prob: f64, rng: &mut R) -> TypeProfile {
    let mut entries = Vec::new();
    let mut left = n;
    while left > 0 {
        let c = rng.random_range(1..=left);
        let nb: Vec<u32> = (0..n as u32).filter(|_| rng.random_bool(edge_prob)).collect();
        entries.push((VertexType::new(nb, n).expect("ascending"), c));
        left -= c;
    }
    TypeProfile::new(n, entries).expect("counts sum to n")
}

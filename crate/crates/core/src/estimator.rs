//! Poissonized sampling and the L1 distance estimate between the arrival
//! distribution `p = c*/n` and the predicted distribution `q = c_hat/n`.
//!
//! The estimate is the plug-in statistic over a padded domain of `n + 1`
//! symbols: one per predicted type, one dummy absorbing every unpredicted
//! type, and `n - r_hat` fillers with zero reference mass. The sample-size
//! constant `c_sample` is exposed so it can be calibrated against the
//! accuracy contract `|L1_hat - L1| <= epsilon` w.p. `>= 1 - delta'`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{TypeProfile, VertexType};
use crate::predictions::l1_counts;
use crate::scalar::Scalar;
use crate::seed;

/// Calibrated sample-size constant.
pub const DEFAULT_C_SAMPLE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig<T = f64> {
    pub epsilon: T,
    pub delta_prime: T,
    pub n: usize,
    pub c_sample: T,
}

impl<T: Scalar> EstimatorConfig<T> {
    pub fn new(epsilon: T, delta_prime: T, n: usize, c_sample: T) -> Result<Self> {
        let cfg = EstimatorConfig {
            epsilon,
            delta_prime,
            n,
            c_sample,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Config with the clamped default `delta'` and the calibrated constant.
    pub fn with_defaults(epsilon: T, n: usize) -> Result<Self> {
        Self::new(
            epsilon,
            default_delta_prime(n),
            n,
            T::of_f64(DEFAULT_C_SAMPLE),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("estimator n must be >= 1"));
        }
        if !self.epsilon.is_finite() || self.epsilon <= T::zero() {
            return Err(Error::validation(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.delta_prime > T::zero() && self.delta_prime < T::one()) {
            return Err(Error::validation(format!(
                "delta' must lie in (0, 1), got {}",
                self.delta_prime
            )));
        }
        if !self.c_sample.is_finite() || self.c_sample <= T::zero() {
            return Err(Error::validation(format!(
                "c_sample must be positive, got {}",
                self.c_sample
            )));
        }
        Ok(())
    }
}

/// Asymptotic choice `1 / ln ln ln n`. Not a probability for small `n`.
pub fn asymptotic_delta_prime<T: Scalar>(n: usize) -> T {
    T::one() / T::of_usize(n).ln().ln().ln()
}

/// `min(0.1, 1 / max(ln ln ln n, 10))`, always a valid probability.
pub fn default_delta_prime<T: Scalar>(n: usize) -> T {
    let lll = T::of_usize(n).ln().ln().ln();
    let lll = if lll.is_finite() { lll } else { T::zero() };
    let floor = T::of_f64(10.0);
    T::of_f64(0.1).min(T::one() / lll.max(floor))
}

/// Expected sample size `c (n+1) ln(1/delta') / (eps^2 ln(n+1))`, rounded up
/// to an even integer and at least 2.
pub fn expected_sample_size<T: Scalar>(config: &EstimatorConfig<T>) -> Result<u64> {
    config.validate()?;
    let r = T::of_usize(config.n + 1);
    let raw = config.c_sample * r * (T::one() / config.delta_prime).ln()
        / (config.epsilon * config.epsilon * r.ln());
    let raw = raw
        .to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::validation("sample size is not finite"))?;
    let mut s = raw.ceil().max(2.0) as u64;
    if s % 2 == 1 {
        s += 1;
    }
    Ok(s)
}

/// The two Poisson halves of the sample size and the overflow verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome<T = f64> {
    pub s1: u64,
    pub s2: u64,
    pub total: u64,
    /// `s (1 + sqrt(ln(n+1)))`.
    pub limit: T,
    pub overflowed: bool,
}

pub fn sample_size_limit<T: Scalar>(config: &EstimatorConfig<T>) -> Result<T> {
    let s = T::of_f64(expected_sample_size(config)? as f64);
    Ok(s * (T::one() + T::of_usize(config.n + 1).ln().sqrt()))
}

/// Draws `s1, s2 ~ Poisson(s/2)` from a generator seeded with `seed`.
pub fn draw_sample_size<T: Scalar>(config: &EstimatorConfig<T>, seed: u64) -> Result<SampleOutcome<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    draw_sample_size_with(config, &mut rng)
}

pub fn draw_sample_size_with<T: Scalar, R: Rng + ?Sized>(
    config: &EstimatorConfig<T>,
    rng: &mut R,
) -> Result<SampleOutcome<T>> {
    let s = expected_sample_size(config)?;
    let limit = sample_size_limit(config)?;
    let half = Poisson::new(s as f64 / 2.0).map_err(|e| Error::validation(format!("Poisson mean: {e}")))?;
    let s1 = half.sample(rng) as u64;
    let s2 = half.sample(rng) as u64;
    let total = s1 + s2;
    Ok(SampleOutcome {
        s1,
        s2,
        total,
        limit,
        overflowed: T::of_f64(total as f64) > limit,
    })
}

/// The `n + 1` symbol domain the estimate is computed over.
#[derive(Debug, Clone)]
pub struct PaddedDomain<T = f64> {
    symbols: BTreeMap<VertexType, usize>,
    q: Vec<T>,
}

impl<T: Scalar> PaddedDomain<T> {
    /// Predicted types get symbols `0..r_hat` in sorted order; the dummy is
    /// `r_hat`; fillers occupy `r_hat + 1..=n`.
    pub fn new(advice: &TypeProfile) -> Self {
        let n = advice.n();
        let mut symbols = BTreeMap::new();
        let mut q = Vec::with_capacity(n + 1);
        for (i, (t, c)) in advice.iter().enumerate() {
            symbols.insert(t.clone(), i);
            q.push(T::of_usize(c) / T::of_usize(n));
        }
        q.resize(n + 1, T::zero());
        PaddedDomain { symbols, q }
    }

    pub fn size(&self) -> usize {
        self.q.len()
    }

    pub fn predicted(&self) -> usize {
        self.symbols.len()
    }

    pub fn dummy(&self) -> usize {
        self.symbols.len()
    }

    pub fn fillers(&self) -> usize {
        self.size() - self.predicted() - 1
    }

    pub fn reference(&self) -> &[T] {
        &self.q
    }

    /// Symbol of an arriving type: its own if predicted, else the dummy.
    pub fn classify(&self, t: &VertexType) -> usize {
        self.symbols.get(t).copied().unwrap_or_else(|| self.dummy())
    }
}

pub fn build_padded_domain<T: Scalar>(advice: &TypeProfile) -> PaddedDomain<T> {
    PaddedDomain::new(advice)
}

/// Plug-in estimate `sum_sym |p_hat(sym) - q(sym)|` from a sample of types.
pub fn estimate_l1<T: Scalar>(domain: &PaddedDomain<T>, sample: &[VertexType]) -> Result<T> {
    let mut counts = vec![0u64; domain.size()];
    for t in sample {
        counts[domain.classify(t)] += 1;
    }
    estimate_l1_from_counts(domain, &counts)
}

/// Same estimate from per-symbol sample counts.
pub fn estimate_l1_from_counts<T: Scalar>(domain: &PaddedDomain<T>, counts: &[u64]) -> Result<T> {
    if counts.len() != domain.size() {
        return Err(Error::validation(format!(
            "expected {} symbol counts, got {}",
            domain.size(),
            counts.len()
        )));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::validation("cannot estimate from an empty sample"));
    }
    let total = T::of_f64(total as f64);
    let est = counts
        .iter()
        .zip(&domain.q)
        .fold(T::zero(), |acc, (&c, &q)| acc + (T::of_f64(c as f64) / total - q).abs());
    Ok(est.min(T::two()))
}

/// One distribution pair of the calibration suite.
#[derive(Debug, Clone)]
pub struct CalibrationPair {
    pub name: &'static str,
    pub truth: TypeProfile,
    pub advice: TypeProfile,
}

impl CalibrationPair {
    pub fn l1<T: Scalar>(&self) -> T {
        let c = l1_counts(&self.truth, &self.advice).expect("same n");
        T::of_usize(c) / T::of_usize(self.truth.n())
    }
}

fn singleton(i: usize, n: usize) -> VertexType {
    VertexType::new(vec![i as u32], n).expect("index < n")
}

/// Uniform, geometric, two-point and dummy-heavy pairs on `n` online vertices.
///
/// Requires `n >= 8`.
pub fn calibration_suite(n: usize) -> Result<Vec<CalibrationPair>> {
    if n < 8 {
        return Err(Error::validation("calibration suite needs n >= 8"));
    }
    let uniform = TypeProfile::new(n, (0..n).map(|i| (singleton(i, n), 1)))?;

    let mut geo = Vec::new();
    let mut left = n;
    let mut j = 0;
    while left > 0 {
        let c = (left / 2).max(1);
        geo.push((singleton(j, n), c));
        left -= c;
        j += 1;
    }
    let geometric = TypeProfile::new(n, geo.clone())?;
    // move a quarter of the mass one step down the tail
    let mut shifted: BTreeMap<VertexType, usize> = geo.into_iter().collect();
    let moved = n / 4;
    *shifted.get_mut(&singleton(0, n)).expect("head exists") -= moved;
    *shifted.entry(singleton(j, n)).or_insert(0) += moved;
    let geometric_advice = TypeProfile::new(n, shifted)?;

    let a = singleton(0, n);
    let b = singleton(1, n);
    let two_point = TypeProfile::new(n, [(a.clone(), n / 2), (b.clone(), n - n / 2)])?;
    let two_point_advice = TypeProfile::new(n, [(a, 3 * n / 4), (b, n - 3 * n / 4)])?;

    let predicted = n / 5;
    let dummy_truth = TypeProfile::new(
        n,
        (0..n).map(|i| {
            if i < predicted {
                (singleton(i, n), 1)
            } else {
                let nb = vec![i as u32, ((i + 1) % n) as u32];
                (VertexType::from_unsorted(nb, n).expect("in range"), 1)
            }
        }),
    )?;

    Ok(vec![
        CalibrationPair {
            name: "uniform",
            truth: uniform.clone(),
            advice: uniform,
        },
        CalibrationPair {
            name: "geometric",
            truth: geometric,
            advice: geometric_advice,
        },
        CalibrationPair {
            name: "two-point",
            truth: two_point,
            advice: two_point_advice,
        },
        CalibrationPair {
            name: "dummy-heavy",
            truth: dummy_truth,
            advice: TypeProfile::new(n, (0..n).map(|i| (singleton(i, n), 1)))?,
        },
    ])
}

/// Per-pair outcome of repeated estimation at one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractResult {
    pub pair: String,
    pub l1_true: f64,
    pub trials: usize,
    pub within_epsilon: usize,
    pub success_frequency: f64,
    pub mean_abs_error: f64,
    pub overflows: usize,
    pub passes: bool,
}

/// Runs `trials` seeded estimations of `pair`, each from `s1 + s2` i.i.d.
/// draws of `p`, and checks the `(epsilon, delta')` contract.
pub fn check_contract(
    pair: &CalibrationPair,
    config: &EstimatorConfig<f64>,
    trials: usize,
    base_seed: u64,
) -> Result<ContractResult> {
    config.validate()?;
    if pair.truth.n() != config.n {
        return Err(Error::validation("calibration pair size differs from config n"));
    }
    let domain = PaddedDomain::<f64>::new(&pair.advice);
    let population: Vec<usize> = pair.truth.expand().iter().map(|t| domain.classify(t)).collect();
    let l1_true = pair.l1::<f64>();
    let outcomes: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(base_seed, &[trial as u64]));
            let draw = draw_sample_size_with(config, &mut rng)?;
            let mut counts = vec![0u64; domain.size()];
            for _ in 0..draw.total.max(1) {
                counts[population[rng.random_range(0..population.len())]] += 1;
            }
            let est = estimate_l1_from_counts(&domain, &counts)?;
            Ok(((est - l1_true).abs(), draw.overflowed))
        })
        .collect::<Result<_>>()?;
    let within = outcomes.iter().filter(|(e, _)| *e <= config.epsilon).count();
    let freq = within as f64 / trials.max(1) as f64;
    Ok(ContractResult {
        pair: pair.name.to_string(),
        l1_true,
        trials,
        within_epsilon: within,
        success_frequency: freq,
        mean_abs_error: outcomes.iter().map(|(e, _)| e).sum::<f64>() / trials.max(1) as f64,
        overflows: outcomes.iter().filter(|(_, o)| *o).count(),
        passes: freq >= 1.0 - config.delta_prime,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub c_sample: f64,
    pub expected_sample_size: u64,
    pub pairs: Vec<ContractResult>,
    pub passes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n: usize,
    pub epsilon: f64,
    pub delta_prime: f64,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<CalibrationRow>,
    /// Smallest candidate meeting the contract on every pair.
    pub chosen: Option<f64>,
}

pub const CALIBRATION_CANDIDATES: [f64; 4] = [1.0, 2.0, 4.0, 8.0];

/// Sweeps `candidates` and reports the smallest `c_sample` for which every
/// calibration pair meets the contract.
pub fn calibrate(
    n: usize,
    epsilon: f64,
    delta_prime: f64,
    trials: usize,
    base_seed: u64,
    candidates: &[f64],
) -> Result<CalibrationReport> {
    let suite = calibration_suite(n)?;
    let mut rows = Vec::new();
    for (ci, &c) in candidates.iter().enumerate() {
        let config = EstimatorConfig::new(epsilon, delta_prime, n, c)?;
        let pairs = suite
            .iter()
            .enumerate()
            .map(|(pi, pair)| {
                check_contract(pair, &config, trials, seed::derive(base_seed, &[ci as u64, pi as u64]))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(CalibrationRow {
            c_sample: c,
            expected_sample_size: expected_sample_size(&config)?,
            passes: pairs.iter().all(|p| p.passes),
            pairs,
        });
    }
    let chosen = rows.iter().find(|r| r.passes).map(|r| r.c_sample);
    Ok(CalibrationReport {
        n,
        epsilon,
        delta_prime,
        trials,
        seed: base_seed,
        rows,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps: f64, dp: f64, n: usize, c: f64) -> EstimatorConfig<f64> {
        EstimatorConfig::new(eps, dp, n, c).unwrap()
    }

    #[test]
    fn expected_size_reference_value() {
        // 1000 ln 10 / (0.01 ln 1000) = 33333.33..., next even integer
        let oracle = 1000.0 * 10f64.ln() / (0.01 * 1000f64.ln());
        assert!((oracle - 33333.333).abs() < 1e-2);
        assert_eq!(expected_sample_size(&cfg(0.1, 0.1, 999, 1.0)).unwrap(), 33334);
    }

    #[test]
    fn expected_size_floor_and_scaling() {
        assert_eq!(expected_sample_size(&cfg(0.1, 1.0 - 1e-12, 999, 1.0)).unwrap(), 2);
        let a = expected_sample_size(&cfg(0.1, 0.1, 500, 1.0)).unwrap() as f64;
        let b = expected_sample_size(&cfg(0.2, 0.1, 500, 1.0)).unwrap() as f64;
        assert!((a / b - 4.0).abs() < 1e-3);
        for n in [1, 2, 10, 1000] {
            assert_eq!(expected_sample_size(&cfg(0.3, 0.5, n, 0.01)).unwrap() % 2, 0);
        }
    }

    #[test]
    fn expected_size_generic_over_precision() {
        let c32 = EstimatorConfig::<f32>::new(0.1, 0.1, 999, 1.0).unwrap();
        assert_eq!(expected_sample_size(&c32).unwrap(), 33334);
    }

    #[test]
    fn config_validation() {
        assert!(EstimatorConfig::new(0.1, 1.0, 10, 1.0).is_err());
        assert!(EstimatorConfig::new(0.1, 1.5, 10, 1.0).is_err());
        assert!(EstimatorConfig::new(0.0, 0.1, 10, 1.0).is_err());
        assert!(EstimatorConfig::new(0.1, 0.1, 0, 1.0).is_err());
        assert!(EstimatorConfig::new(0.1, 0.1, 10, -1.0).is_err());
    }

    #[test]
    fn delta_prime_defaults() {
        for n in [2usize, 10, 1000, 1_000_000] {
            let d: f64 = default_delta_prime(n);
            assert_eq!(d, 0.1);
        }
        // the asymptotic choice is not a probability at desk scale
        let raw: f64 = asymptotic_delta_prime(1000);
        assert!(raw > 1.0);
    }

    #[test]
    fn draws_are_deterministic_and_unbiased() {
        let c = cfg(0.1, 0.1, 999, 1.0);
        assert_eq!(draw_sample_size(&c, 42).unwrap(), draw_sample_size(&c, 42).unwrap());
        let s = expected_sample_size(&c).unwrap() as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 10_000;
        let mean = (0..draws)
            .map(|_| draw_sample_size_with(&c, &mut rng).unwrap().total as f64)
            .sum::<f64>()
            / draws as f64;
        assert!((mean / s - 1.0).abs() < 0.01);
    }

    #[test]
    fn overflow_flag_follows_limit() {
        let c = cfg(0.5, 0.9, 3, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let o = draw_sample_size_with(&c, &mut rng).unwrap();
            assert_eq!(o.overflowed, o.total as f64 > o.limit);
            assert_eq!(o.total, o.s1 + o.s2);
        }
    }

    #[test]
    fn padded_domain_layout() {
        let n = 5;
        let full = TypeProfile::new(n, (0..n).map(|i| (singleton(i, n), 1))).unwrap();
        let d = PaddedDomain::<f64>::new(&full);
        assert_eq!((d.size(), d.predicted(), d.fillers()), (6, 5, 0));

        let single = TypeProfile::new(n, [(singleton(2, n), n)]).unwrap();
        let d = PaddedDomain::<f64>::new(&single);
        assert_eq!((d.size(), d.predicted(), d.fillers()), (6, 1, 4));
        assert_eq!(d.reference().iter().sum::<f64>(), 1.0);
        assert_eq!(d.reference()[d.dummy()], 0.0);
        assert_eq!(d.classify(&singleton(2, n)), 0);
        assert_eq!(d.classify(&singleton(3, n)), d.dummy());
    }

    #[test]
    fn estimate_exact_and_edge_cases() {
        let n = 4;
        let advice = TypeProfile::new(n, [(singleton(0, n), 2), (singleton(1, n), 2)]).unwrap();
        let d = PaddedDomain::<f64>::new(&advice);
        let sample: Vec<VertexType> = [0, 1, 0, 1, 1, 0].iter().map(|&i| singleton(i, n)).collect();
        assert_eq!(estimate_l1(&d, &sample).unwrap(), 0.0);
        let off: Vec<VertexType> = (0..6).map(|_| singleton(3, n)).collect();
        assert_eq!(estimate_l1(&d, &off).unwrap(), 2.0);
        assert!(estimate_l1(&d, &[]).is_err());
        let mut rev = sample.clone();
        rev.reverse();
        assert_eq!(estimate_l1(&d, &rev).unwrap(), estimate_l1(&d, &sample).unwrap());
    }

    #[test]
    fn suite_distances() {
        let suite = calibration_suite(1000).unwrap();
        let l1: Vec<f64> = suite.iter().map(|p| p.l1()).collect();
        assert_eq!(l1, vec![0.0, 0.5, 0.5, 1.6]);
    }

    #[test]
    fn plug_in_error_shrinks_with_sample_size() {
        let suite = calibration_suite(200).unwrap();
        for pair in &suite {
            let domain = PaddedDomain::<f64>::new(&pair.advice);
            let pop: Vec<usize> = pair.truth.expand().iter().map(|t| domain.classify(t)).collect();
            let truth = pair.l1::<f64>();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let mut errs = Vec::new();
            for size in [200usize, 20_000, 2_000_000] {
                let reps = 20;
                let mut acc = 0.0;
                for _ in 0..reps {
                    let mut counts = vec![0u64; domain.size()];
                    for _ in 0..size {
                        counts[pop[rng.random_range(0..pop.len())]] += 1;
                    }
                    acc += (estimate_l1_from_counts(&domain, &counts).unwrap() - truth).abs();
                }
                errs.push(acc / reps as f64);
            }
            assert!(errs[0] > errs[1] && errs[1] > errs[2], "{}: {errs:?}", pair.name);
        }
    }

    #[test]
    fn small_uniform_meets_contract_for_every_constant() {
        let n = 10;
        let uniform = TypeProfile::new(n, (0..n).map(|i| (singleton(i, n), 1))).unwrap();
        let pair = CalibrationPair {
            name: "uniform-10",
            truth: uniform.clone(),
            advice: uniform,
        };
        for c in CALIBRATION_CANDIDATES {
            // c = 1 sits near 0.915, so 200 trials would be a coin toss
            let res = check_contract(&pair, &cfg(0.1, 0.1, n, c), 2000, 5).unwrap();
            assert!(res.passes, "c = {c}: {res:?}");
        }
    }
}

//! Online algorithms: Mimic, Ranking (the baseline), Greedy, and the
//! Test-and-Match+ state machine that samples a prefix of the arrivals,
//! estimates the prediction error, then commits to Mimic or Ranking.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::estimator::{self, EstimatorConfig, PaddedDomain};
use crate::graph::{maximum_matching, Instance, MatchingPlan, TypeProfile, VertexType};

/// Ratio of Ranking in the random arrival order model.
pub const DEFAULT_BETA: f64 = 0.696;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Match(u32),
    Skip,
}

/// Terminal branch of a Test-and-Match+ run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    /// Sampling finished and the estimate was below `tau - epsilon`.
    MimicRest,
    /// Sampling finished and the run switched to Ranking.
    BaselineRest,
    /// Ranking from the first arrival (small `n_hat`, or sample-size overflow).
    BaselineWhole,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::MimicRest, Branch::BaselineRest, Branch::BaselineWhole];

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::MimicRest => "MimicRest",
            Branch::BaselineRest => "BaselineRest",
            Branch::BaselineWhole => "BaselineWhole",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Processes one arrival at a time. Implementations must only return
/// unmatched neighbors of the arriving vertex.
pub trait OnlineAlgorithm {
    fn on_arrival(&mut self, arrival: &VertexType) -> Decision;

    /// Called once after the last arrival.
    fn finish(&mut self) {}

    fn branch(&self) -> Option<Branch> {
        None
    }
}

struct MimicSlot {
    remaining: usize,
    cursor: usize,
    partners: Vec<u32>,
}

/// Follows a maximum matching of the predicted graph.
pub struct MimicState {
    slots: BTreeMap<VertexType, MimicSlot>,
    used: Vec<bool>,
    matches: usize,
}

impl MimicState {
    pub fn new(advice: &TypeProfile, plan: &MatchingPlan) -> Self {
        let slots = advice
            .iter()
            .map(|(t, c)| {
                (
                    t.clone(),
                    MimicSlot {
                        remaining: c,
                        cursor: 0,
                        partners: plan.partners(t).to_vec(),
                    },
                )
            })
            .collect();
        MimicState {
            slots,
            used: vec![false; advice.n()],
            matches: 0,
        }
    }

    /// Builds the plan from the advice itself.
    pub fn from_advice(advice: &TypeProfile) -> Result<Self> {
        let plan = maximum_matching(advice, advice.n())?;
        Ok(Self::new(advice, &plan))
    }

    pub fn remaining(&self, t: &VertexType) -> usize {
        self.slots.get(t).map_or(0, |s| s.remaining)
    }

    pub fn used(&self) -> &[bool] {
        &self.used
    }

    pub fn matches(&self) -> usize {
        self.matches
    }
}

impl OnlineAlgorithm for MimicState {
    fn on_arrival(&mut self, arrival: &VertexType) -> Decision {
        let Some(slot) = self.slots.get_mut(arrival) else {
            return Decision::Skip;
        };
        if slot.remaining == 0 {
            return Decision::Skip;
        }
        slot.remaining -= 1;
        if slot.cursor < slot.partners.len() {
            let u = slot.partners[slot.cursor];
            slot.cursor += 1;
            self.used[u as usize] = true;
            self.matches += 1;
            Decision::Match(u)
        } else {
            Decision::Skip
        }
    }
}

/// Ranking: a uniformly random priority over offline vertices, each arrival
/// takes its unmatched neighbor of best priority.
pub struct Ranking {
    rank: Vec<u32>,
    taken: Vec<bool>,
    matches: usize,
}

impl Ranking {
    pub fn new<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        Self::excluding(&vec![false; n], rng)
    }

    /// Ranking over the offline vertices with `excluded[u] == false`; excluded
    /// vertices behave as if absent.
    pub fn excluding<R: Rng + ?Sized>(excluded: &[bool], rng: &mut R) -> Self {
        let mut free: Vec<u32> = (0..excluded.len() as u32)
            .filter(|&u| !excluded[u as usize])
            .collect();
        free.shuffle(rng);
        let mut rank = vec![u32::MAX; excluded.len()];
        for (r, &u) in free.iter().enumerate() {
            rank[u as usize] = r as u32;
        }
        Ranking {
            rank,
            taken: excluded.to_vec(),
            matches: 0,
        }
    }

    pub fn matches(&self) -> usize {
        self.matches
    }
}

impl OnlineAlgorithm for Ranking {
    fn on_arrival(&mut self, arrival: &VertexType) -> Decision {
        let best = arrival
            .neighbors()
            .iter()
            .copied()
            .filter(|&u| !self.taken[u as usize])
            .min_by_key(|&u| self.rank[u as usize]);
        match best {
            Some(u) => {
                self.taken[u as usize] = true;
                self.matches += 1;
                Decision::Match(u)
            }
            None => Decision::Skip,
        }
    }
}

/// Matches each arrival to its lowest-index unmatched neighbor.
pub struct Greedy {
    taken: Vec<bool>,
}

impl Greedy {
    pub fn new(n: usize) -> Self {
        Greedy {
            taken: vec![false; n],
        }
    }
}

impl OnlineAlgorithm for Greedy {
    fn on_arrival(&mut self, arrival: &VertexType) -> Decision {
        match arrival.neighbors().iter().find(|&&u| !self.taken[u as usize]) {
            Some(&u) => {
                self.taken[u as usize] = true;
                Decision::Match(u)
            }
            None => Decision::Skip,
        }
    }
}

/// Sampling with replacement from an arrival stream of known length `n`.
///
/// Each step flips a coin with heads probability `i / n`, where `i` is the
/// number of arrivals consumed so far. Heads re-draws a uniform element of
/// the consumed prefix; tails consumes the next arrival. Every sample element
/// is then a uniform draw from the full sequence.
#[derive(Debug, Clone)]
pub struct CoinFlipSampler<S> {
    n: usize,
    target: u64,
    taken: u64,
    seen: Vec<S>,
}

impl<S: Copy> CoinFlipSampler<S> {
    pub fn new(n: usize, target: u64) -> Self {
        CoinFlipSampler {
            n,
            target,
            taken: 0,
            seen: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.taken >= self.target
    }

    pub fn sample_len(&self) -> u64 {
        self.taken
    }

    /// Arrivals consumed so far.
    pub fn consumed(&self) -> usize {
        self.seen.len()
    }

    pub fn seen(&self) -> &[S] {
        &self.seen
    }

    /// Flips coins until one lands tails or the sample is complete, feeding
    /// heads draws to `sink`. Returns `true` when tails came up, i.e. the next
    /// arrival must be consumed with [`take_arrival`](Self::take_arrival).
    pub fn flip_until_tails<R: Rng + ?Sized>(&mut self, rng: &mut R, mut sink: impl FnMut(S)) -> bool {
        while !self.is_complete() {
            let i = self.seen.len();
            if i < self.n && rng.random_range(0..self.n) >= i {
                return true;
            }
            let x = self.seen[rng.random_range(0..i)];
            sink(x);
            self.taken += 1;
        }
        false
    }

    pub fn take_arrival(&mut self, x: S, mut sink: impl FnMut(S)) {
        self.seen.push(x);
        sink(x);
        self.taken += 1;
    }

    /// Completes the sample from the consumed prefix alone, for a stream that
    /// ended early. Returns `false` if nothing was consumed.
    pub fn finish_from_prefix<R: Rng + ?Sized>(&mut self, rng: &mut R, mut sink: impl FnMut(S)) -> bool {
        if self.seen.is_empty() {
            return false;
        }
        while !self.is_complete() {
            sink(self.seen[rng.random_range(0..self.seen.len())]);
            self.taken += 1;
        }
        true
    }
}

/// Parameters of a Test-and-Match+ run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TamParams {
    pub alpha: f64,
    pub beta: f64,
    pub estimator: EstimatorConfig<f64>,
}

impl TamParams {
    /// Defaults: `beta = 0.696`, `epsilon = min(0.05, alpha (1-beta)/(1+beta))`,
    /// clamped `delta'` and the calibrated sample constant.
    pub fn with_defaults(n: usize, alpha: f64) -> Result<Self> {
        let estimator = EstimatorConfig::with_defaults(bounds::default_epsilon(alpha, DEFAULT_BETA), n)?;
        let p = TamParams {
            alpha,
            beta: DEFAULT_BETA,
            estimator,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::validation(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::validation(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        self.estimator.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Sampling,
    MimicRest,
    BaselineRest,
    BaselineWhole,
}

/// What happened in a run, for logging and checking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLog {
    pub branch: Option<Branch>,
    pub l1_hat: Option<f64>,
    pub n_hat: usize,
    pub tau: f64,
    /// Sample size `s1 + s2` (0 if none was drawn).
    pub k: u64,
    /// Arrivals consumed during sampling.
    pub k_prime: usize,
    pub s1: u64,
    pub s2: u64,
    pub overflowed: bool,
    pub below_alpha: bool,
    /// Sampling ran out of arrivals and was completed from the prefix.
    pub exhausted: bool,
}

/// Test-and-Match+ as an explicit state machine.
pub struct TamState {
    n: usize,
    params: TamParams,
    tau: f64,
    phase: Phase,
    mimic: MimicState,
    baseline: Option<Ranking>,
    sampler: CoinFlipSampler<u32>,
    domain: PaddedDomain<f64>,
    counts: Vec<u64>,
    rng: ChaCha8Rng,
    log: DecisionLog,
    matches: usize,
}

impl TamState {
    pub fn new(advice: &TypeProfile, params: TamParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let n = advice.n();
        if params.estimator.n != n {
            return Err(Error::validation(format!(
                "estimator configured for n = {} but advice has n = {n}",
                params.estimator.n
            )));
        }
        let plan = maximum_matching(advice, n)?;
        let n_hat = plan.size();
        let tau = bounds::threshold(n_hat, n, params.beta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let below_alpha = (n_hat as f64) < params.alpha * n as f64;
        let outcome = if below_alpha {
            None
        } else {
            Some(estimator::draw_sample_size_with(&params.estimator, &mut rng)?)
        };
        let domain = PaddedDomain::new(advice);
        let mut state = TamState {
            n,
            params,
            tau,
            phase: Phase::Sampling,
            mimic: MimicState::new(advice, &plan),
            baseline: None,
            sampler: CoinFlipSampler::new(n, 0),
            counts: vec![0; domain.size()],
            domain,
            rng,
            log: DecisionLog {
                branch: None,
                l1_hat: None,
                n_hat,
                tau,
                k: outcome.map_or(0, |o| o.total),
                k_prime: 0,
                s1: outcome.map_or(0, |o| o.s1),
                s2: outcome.map_or(0, |o| o.s2),
                overflowed: outcome.is_some_and(|o| o.overflowed),
                below_alpha,
                exhausted: false,
            },
            matches: 0,
        };
        match outcome {
            Some(o) if !o.overflowed => {
                state.sampler = CoinFlipSampler::new(n, o.total);
                // i = 0: the first flip is tails, nothing is drawn yet
                state.advance_sampling();
            }
            _ => state.enter_baseline_whole(),
        }
        Ok(state)
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn n_hat(&self) -> usize {
        self.log.n_hat
    }

    pub fn log(&self) -> &DecisionLog {
        &self.log
    }

    pub fn matches(&self) -> usize {
        self.matches
    }

    pub fn sample_len(&self) -> u64 {
        self.sampler.sample_len()
    }

    fn enter_baseline_whole(&mut self) {
        self.phase = Phase::BaselineWhole;
        self.log.branch = Some(Branch::BaselineWhole);
        self.baseline = Some(Ranking::new(self.n, &mut self.rng));
    }

    fn advance_sampling(&mut self) {
        let counts = &mut self.counts;
        self.sampler
            .flip_until_tails(&mut self.rng, |s| counts[s as usize] += 1);
        if self.sampler.is_complete() {
            self.decide();
        }
    }

    fn decide(&mut self) {
        self.log.k_prime = self.sampler.consumed();
        // a Poisson draw of zero leaves nothing to test: reject the advice
        let l1_hat = if self.sampler.sample_len() == 0 {
            None
        } else {
            Some(
                estimator::estimate_l1_from_counts(&self.domain, &self.counts)
                    .expect("counts match the domain"),
            )
        };
        self.log.l1_hat = l1_hat;
        if l1_hat.is_some_and(|e| e <= self.tau - self.params.estimator.epsilon) {
            self.phase = Phase::MimicRest;
            self.log.branch = Some(Branch::MimicRest);
        } else {
            self.phase = Phase::BaselineRest;
            self.log.branch = Some(Branch::BaselineRest);
            self.baseline = Some(Ranking::excluding(self.mimic.used(), &mut self.rng));
        }
    }
}

impl OnlineAlgorithm for TamState {
    fn on_arrival(&mut self, arrival: &VertexType) -> Decision {
        let d = match self.phase {
            Phase::MimicRest => self.mimic.on_arrival(arrival),
            Phase::BaselineRest | Phase::BaselineWhole => self
                .baseline
                .as_mut()
                .expect("baseline exists in baseline phases")
                .on_arrival(arrival),
            Phase::Sampling => {
                let sym = self.domain.classify(arrival) as u32;
                let counts = &mut self.counts;
                self.sampler.take_arrival(sym, |s| counts[s as usize] += 1);
                let d = self.mimic.on_arrival(arrival);
                self.advance_sampling();
                d
            }
        };
        if let Decision::Match(_) = d {
            self.matches += 1;
        }
        d
    }

    fn finish(&mut self) {
        if self.phase != Phase::Sampling {
            return;
        }
        self.log.exhausted = true;
        let counts = &mut self.counts;
        if self
            .sampler
            .finish_from_prefix(&mut self.rng, |s| counts[s as usize] += 1)
        {
            self.decide();
        } else {
            self.log.k_prime = 0;
            self.enter_baseline_whole();
        }
    }

    fn branch(&self) -> Option<Branch> {
        self.log.branch
    }
}

/// Outcome of feeding an arrival order to an algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub matches: usize,
    pub branch: Option<Branch>,
    pub decisions: Vec<Decision>,
}

/// Serialized form of a single Test-and-Match+ run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub branch: String,
    pub matches: usize,
    pub k: u64,
    pub k_prime: usize,
    pub l1_hat: Option<f64>,
    pub seed: u64,
}

impl RunReport {
    pub fn new(state: &TamState, seed: u64) -> Self {
        let log = state.log();
        RunReport {
            branch: log.branch.map_or_else(|| "none".to_string(), |b| b.to_string()),
            matches: state.matches(),
            k: log.k,
            k_prime: log.k_prime,
            l1_hat: log.l1_hat,
            seed,
        }
    }
}

/// Uniformly random arrival order of `n` online vertices.
pub fn random_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Feeds the instance's online vertices in `permutation` order, indexing the
/// expansion of the true profile. Rejects decisions that reuse an offline
/// vertex or pick a non-neighbor.
pub fn run_online(
    alg: &mut dyn OnlineAlgorithm,
    instance: &Instance,
    permutation: &[usize],
) -> Result<RunResult> {
    let vertices = instance.truth().expand();
    let n = instance.n();
    if permutation.len() != vertices.len() {
        return Err(Error::validation(format!(
            "arrival order has length {}, expected {}",
            permutation.len(),
            vertices.len()
        )));
    }
    let mut hit = vec![false; vertices.len()];
    for &j in permutation {
        if j >= vertices.len() || std::mem::replace(&mut hit[j], true) {
            return Err(Error::validation(format!("arrival order is not a permutation (entry {j})")));
        }
    }

    let mut used = vec![false; n];
    let mut decisions = Vec::with_capacity(permutation.len());
    let mut matches = 0;
    for (step, &j) in permutation.iter().enumerate() {
        let v = vertices[j];
        let d = alg.on_arrival(v);
        if let Decision::Match(u) = d {
            if !v.contains(u) {
                return Err(Error::InvalidDecision {
                    arrival: step,
                    reason: format!("offline vertex {u} is not adjacent"),
                });
            }
            if std::mem::replace(&mut used[u as usize], true) {
                return Err(Error::InvalidDecision {
                    arrival: step,
                    reason: format!("offline vertex {u} matched twice"),
                });
            }
            matches += 1;
        }
        decisions.push(d);
    }
    alg.finish();
    Ok(RunResult {
        matches,
        branch: alg.branch(),
        decisions,
    })
}

//! Predicted profiles: exact L1 distances and controlled error injection.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{TypeProfile, VertexType};
use crate::scalar::Scalar;

/// Truth `c*` together with the advice `c_hat` handed to the algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PairRepr", into = "PairRepr")]
pub struct PredictionPair {
    truth: TypeProfile,
    advice: TypeProfile,
}

#[derive(Serialize, Deserialize)]
struct PairRepr {
    truth: TypeProfile,
    advice: TypeProfile,
}

impl TryFrom<PairRepr> for PredictionPair {
    type Error = Error;
    fn try_from(r: PairRepr) -> Result<Self> {
        PredictionPair::new(r.truth, r.advice)
    }
}

impl From<PredictionPair> for PairRepr {
    fn from(p: PredictionPair) -> Self {
        PairRepr {
            truth: p.truth,
            advice: p.advice,
        }
    }
}

impl PredictionPair {
    pub fn new(truth: TypeProfile, advice: TypeProfile) -> Result<Self> {
        if truth.n() != advice.n() {
            return Err(Error::validation(format!(
                "truth has n = {} but advice has n = {}",
                truth.n(),
                advice.n()
            )));
        }
        Ok(PredictionPair { truth, advice })
    }

    pub fn truth(&self) -> &TypeProfile {
        &self.truth
    }

    pub fn advice(&self) -> &TypeProfile {
        &self.advice
    }

    pub fn n(&self) -> usize {
        self.truth.n()
    }

    /// `L1(c*, c_hat)` in vertex counts; always even.
    pub fn l1_counts(&self) -> usize {
        l1_counts(&self.truth, &self.advice).expect("pair sizes checked at construction")
    }

    /// `L1(p, q) = L1(c*, c_hat) / n`.
    pub fn l1_distribution<T: Scalar>(&self) -> T {
        T::of_usize(self.l1_counts()) / T::of_usize(self.n())
    }
}

/// `sum_t |a(t) - b(t)|` over the union of supports.
pub fn l1_counts(a: &TypeProfile, b: &TypeProfile) -> Result<usize> {
    if a.n() != b.n() {
        return Err(Error::validation(format!(
            "cannot compare profiles with n = {} and n = {}",
            a.n(),
            b.n()
        )));
    }
    let mut total = 0;
    for (t, ca) in a.iter() {
        total += ca.abs_diff(b.count(t));
    }
    for (t, cb) in b.iter() {
        if a.count(t) == 0 {
            total += cb;
        }
    }
    Ok(total)
}

/// Upper bound on the true optimum, `n_hat + L1(c*, c_hat) / 2`.
pub fn upper_bound_opt<T: Scalar>(pair: &PredictionPair, n_hat: usize) -> T {
    T::of_usize(n_hat) + T::of_usize(pair.l1_counts()) * T::half()
}

/// Number of arrivals that exceed the predicted count of their type, i.e. the
/// `j`-th arrival of type `t` with `j > c_hat(t)`.
pub fn unpredicted_count<'a>(
    advice: &TypeProfile,
    arrivals: impl IntoIterator<Item = &'a VertexType>,
) -> usize {
    let mut seen: BTreeMap<&VertexType, usize> = BTreeMap::new();
    let mut unpredicted = 0;
    for t in arrivals {
        let k = seen.entry(t).or_insert(0);
        *k += 1;
        if *k > advice.count(t) {
            unpredicted += 1;
        }
    }
    unpredicted
}

/// Returns advice at exactly `target_l1_counts` from `truth`.
///
/// Moves `target / 2` whole vertices from randomly chosen truth types to types
/// outside the truth's support. Fresh neighbor sets copy the cardinality of a
/// randomly chosen truth vertex.
pub fn perturb(truth: &TypeProfile, target_l1_counts: usize, seed: u64) -> Result<TypeProfile> {
    let n = truth.n();
    if !target_l1_counts.is_multiple_of(2) {
        return Err(Error::validation(format!(
            "target L1 count {target_l1_counts} must be even"
        )));
    }
    if target_l1_counts > 2 * n {
        return Err(Error::validation(format!(
            "target L1 count {target_l1_counts} exceeds 2n = {}",
            2 * n
        )));
    }
    let moves = target_l1_counts / 2;
    if moves == 0 {
        return Ok(truth.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Remove `moves` vertices uniformly at random (without replacement).
    let mut vertices: Vec<&VertexType> = truth.expand();
    let mut remaining: BTreeMap<VertexType, usize> =
        truth.iter().map(|(t, c)| (t.clone(), c)).collect();
    for i in 0..moves {
        let j = rng.random_range(i..vertices.len());
        vertices.swap(i, j);
        let t = vertices[i];
        *remaining.get_mut(t).expect("type from truth") -= 1;
    }

    let cardinalities: Vec<usize> = truth.expand().iter().map(|t| t.len()).collect();
    let mut added: BTreeMap<VertexType, usize> = BTreeMap::new();
    for _ in 0..moves {
        let d = *cardinalities.choose(&mut rng).expect("n >= 1");
        let t = fresh_type(truth, d, n, &mut rng);
        *added.entry(t).or_insert(0) += 1;
    }
    TypeProfile::new(n, remaining.into_iter().chain(added))
}

/// A random neighbor set of size `d` outside the truth's support. Falls back
/// to other sizes when every `d`-subset is taken.
fn fresh_type(truth: &TypeProfile, d: usize, n: usize, rng: &mut ChaCha8Rng) -> VertexType {
    for _ in 0..64 {
        let t = random_subset(d, n, rng);
        if truth.count(&t) == 0 {
            return t;
        }
    }
    // The support has at most n types, and there are 2^n subsets, so some
    // size has a free subset; scan outward from d.
    for delta in 0..=n {
        for size in [d.saturating_sub(delta), (d + delta).min(n)] {
            for _ in 0..64 {
                let t = random_subset(size, n, rng);
                if truth.count(&t) == 0 {
                    return t;
                }
            }
        }
    }
    exhaustive_fresh(truth, n)
}

fn exhaustive_fresh(truth: &TypeProfile, n: usize) -> VertexType {
    assert!(n < 32, "random search failed on a large instance");
    (0u64..(1 << n))
        .map(|mask| {
            let nb = (0..n as u32).filter(|&u| mask & (1 << u) != 0).collect();
            VertexType::new(nb, n).expect("indices ascending and in range")
        })
        .find(|t| truth.count(t) == 0)
        .expect("fewer than 2^n types in the support")
}

pub(crate) fn random_subset(d: usize, n: usize, rng: &mut impl Rng) -> VertexType {
    let picked = rand::seq::index::sample(rng, n, d.min(n));
    let nb = picked.into_iter().map(|u| u as u32).collect();
    VertexType::from_unsorted(nb, n).expect("indices in range")
}

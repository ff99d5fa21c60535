//! Bipartite instances described by vertex types, and maximum matchings on
//! them.
//!
//! An online vertex is identified with its neighborhood among the `n` offline
//! vertices (its *type*). A [`TypeProfile`] counts how many online vertices of
//! each type there are; the graph it describes has `profile.n()` online
//! vertices, `count(t)` of which share the neighborhood `t`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted, duplicate-free set of offline indices.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VertexType(Vec<u32>);

impl VertexType {
    /// Builds a type from strictly increasing offline indices, all `< n`.
    pub fn new(neighbors: Vec<u32>, n: usize) -> Result<Self> {
        if let Some(w) = neighbors.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "neighbors must be strictly increasing, found {} before {}",
                w[0], w[1]
            )));
        }
        if let Some(&last) = neighbors.last() {
            if last as usize >= n {
                return Err(Error::validation(format!(
                    "offline index {last} out of range for n = {n}"
                )));
            }
        }
        Ok(VertexType(neighbors))
    }

    /// Sorts and deduplicates before validating the range.
    pub fn from_unsorted(mut neighbors: Vec<u32>, n: usize) -> Result<Self> {
        neighbors.sort_unstable();
        neighbors.dedup();
        Self::new(neighbors, n)
    }

    pub fn empty() -> Self {
        VertexType(Vec::new())
    }

    pub fn neighbors(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, u: u32) -> bool {
        self.0.binary_search(&u).is_ok()
    }
}

impl fmt::Debug for VertexType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

/// Count of online vertices per type.
///
/// Invariants: counts are positive, they sum to `n`, and every neighbor index
/// is `< n` (offline and online sides have the same size).
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct TypeProfile {
    n: usize,
    entries: BTreeMap<VertexType, usize>,
}

#[derive(Serialize, Deserialize)]
struct ProfileRepr {
    n: usize,
    types: Vec<TypeEntryRepr>,
}

#[derive(Serialize, Deserialize)]
struct TypeEntryRepr {
    neighbors: Vec<u32>,
    count: usize,
}

impl TryFrom<ProfileRepr> for TypeProfile {
    type Error = Error;

    fn try_from(repr: ProfileRepr) -> Result<Self> {
        let mut entries = Vec::with_capacity(repr.types.len());
        for e in repr.types {
            entries.push((VertexType::new(e.neighbors, repr.n)?, e.count));
        }
        TypeProfile::new(repr.n, entries)
    }
}

impl From<TypeProfile> for ProfileRepr {
    fn from(p: TypeProfile) -> Self {
        ProfileRepr {
            n: p.n,
            types: p
                .entries
                .into_iter()
                .map(|(t, count)| TypeEntryRepr {
                    neighbors: t.0,
                    count,
                })
                .collect(),
        }
    }
}

impl TypeProfile {
    /// Builds a profile. Repeated types are merged; zero counts are dropped.
    pub fn new(n: usize, entries: impl IntoIterator<Item = (VertexType, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("profile must have n >= 1"));
        }
        let mut map = BTreeMap::new();
        for (t, c) in entries {
            if let Some(&last) = t.neighbors().last() {
                if last as usize >= n {
                    return Err(Error::validation(format!(
                        "offline index {last} out of range for n = {n}"
                    )));
                }
            }
            if c > 0 {
                *map.entry(t).or_insert(0) += c;
            }
        }
        let total: usize = map.values().sum();
        if total != n {
            return Err(Error::validation(format!(
                "type counts sum to {total}, expected n = {n}"
            )));
        }
        Ok(TypeProfile { n, entries: map })
    }

    /// Convenience constructor from raw neighbor lists.
    pub fn from_lists(n: usize, entries: &[(&[u32], usize)]) -> Result<Self> {
        let typed = entries
            .iter()
            .map(|&(nb, c)| VertexType::from_unsorted(nb.to_vec(), n).map(|t| (t, c)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, typed)
    }

    /// Total online count (equal to the offline count).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, t: &VertexType) -> usize {
        self.entries.get(t).copied().unwrap_or(0)
    }

    /// Number of distinct types with positive count.
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VertexType, usize)> + '_ {
        self.entries.iter().map(|(t, &c)| (t, c))
    }

    pub fn types(&self) -> impl Iterator<Item = &VertexType> + '_ {
        self.entries.keys()
    }

    /// One entry per online vertex, types in sorted order, each repeated
    /// `count` times.
    pub fn expand(&self) -> Vec<&VertexType> {
        let mut out = Vec::with_capacity(self.n);
        for (t, &c) in &self.entries {
            out.extend(std::iter::repeat_n(t, c));
        }
        out
    }
}

impl fmt::Debug for TypeProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TypeProfile")
            .field("n", &self.n)
            .field("entries", &self.entries)
            .finish()
    }
}

/// A bipartite instance: `n` offline vertices and the true online profile.
#[derive(Debug, Clone)]
pub struct Instance {
    n: usize,
    truth: TypeProfile,
    opt_size: OnceLock<usize>,
}

impl Instance {
    pub fn new(truth: TypeProfile) -> Self {
        Instance {
            n: truth.n(),
            truth,
            opt_size: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn truth(&self) -> &TypeProfile {
        &self.truth
    }

    /// Size of a maximum matching of the true graph, computed on first use.
    pub fn opt_size(&self) -> usize {
        *self.opt_size.get_or_init(|| {
            maximum_matching(&self.truth, self.n)
                .expect("instance profile is valid by construction")
                .size()
        })
    }
}

/// Offline partners a maximum matching assigns to each type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingPlan {
    per_type: BTreeMap<VertexType, Vec<u32>>,
    size: usize,
}

impl MatchingPlan {
    pub fn size(&self) -> usize {
        self.size
    }

    /// Partners assigned to type `t`, ascending. Empty if none.
    pub fn partners(&self, t: &VertexType) -> &[u32] {
        self.per_type.get(t).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VertexType, &[u32])> + '_ {
        self.per_type.iter().map(|(t, v)| (t, v.as_slice()))
    }

    /// Checks the structural invariants of a plan against its profile.
    pub fn validate(&self, profile: &TypeProfile, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        let mut total = 0;
        for (t, partners) in &self.per_type {
            if partners.len() > profile.count(t) {
                return Err(Error::validation(format!(
                    "type {t:?} has {} partners but count {}",
                    partners.len(),
                    profile.count(t)
                )));
            }
            for &u in partners {
                let slot = seen.get_mut(u as usize).ok_or_else(|| {
                    Error::validation(format!("partner {u} out of range for n = {n}"))
                })?;
                if *slot {
                    return Err(Error::validation(format!("offline vertex {u} used twice")));
                }
                *slot = true;
                if !t.contains(u) {
                    return Err(Error::validation(format!(
                        "offline vertex {u} is not a neighbor of type {t:?}"
                    )));
                }
            }
            total += partners.len();
        }
        if total != self.size {
            return Err(Error::validation(format!(
                "plan size {} disagrees with partner total {total}",
                self.size
            )));
        }
        Ok(())
    }
}

const NIL: usize = usize::MAX;
const INF: u32 = u32::MAX;

/// Maximum-cardinality matching of the graph described by `profile`, via
/// Hopcroft-Karp on the expanded graph.
///
/// Types are expanded in sorted order and adjacency lists are ascending, so
/// the returned plan is a deterministic function of the input.
pub fn maximum_matching(profile: &TypeProfile, n: usize) -> Result<MatchingPlan> {
    if n == 0 {
        return Err(Error::validation("offline count must be >= 1"));
    }
    if profile.n() != n {
        return Err(Error::validation(format!(
            "profile counts sum to {}, expected n = {n}",
            profile.n()
        )));
    }
    let left = profile.expand();
    let adj: Vec<&[u32]> = left.iter().map(|t| t.neighbors()).collect();
    let (match_left, size) = hopcroft_karp(&adj, n);

    let mut per_type: BTreeMap<VertexType, Vec<u32>> = BTreeMap::new();
    for (i, &m) in match_left.iter().enumerate() {
        if m != NIL {
            per_type.entry(left[i].clone()).or_default().push(m as u32);
        }
    }
    for v in per_type.values_mut() {
        v.sort_unstable();
    }
    Ok(MatchingPlan { per_type, size })
}

/// Returns the right partner of each left vertex (`NIL` if unmatched) and the
/// matching size.
fn hopcroft_karp(adj: &[&[u32]], n_right: usize) -> (Vec<usize>, usize) {
    let n_left = adj.len();
    let mut match_left = vec![NIL; n_left];
    let mut match_right = vec![NIL; n_right];
    let mut dist = vec![INF; n_left];
    let mut cursor = vec![0usize; n_left];
    let mut queue = Vec::with_capacity(n_left);
    let mut stack: Vec<usize> = Vec::new();
    let mut size = 0;

    loop {
        // Layer the graph from the free left vertices.
        queue.clear();
        for u in 0..n_left {
            if match_left[u] == NIL {
                dist[u] = 0;
                queue.push(u);
            } else {
                dist[u] = INF;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in adj[u] {
                let w = match_right[v as usize];
                if w == NIL {
                    found = true;
                } else if dist[w] == INF {
                    dist[w] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            break;
        }

        cursor.iter_mut().for_each(|c| *c = 0);
        for root in 0..n_left {
            if match_left[root] != NIL || dist[root] != 0 {
                continue;
            }
            stack.clear();
            stack.push(root);
            while let Some(&u) = stack.last() {
                if cursor[u] == adj[u].len() {
                    dist[u] = INF;
                    stack.pop();
                    if let Some(&parent) = stack.last() {
                        cursor[parent] += 1;
                    }
                    continue;
                }
                let v = adj[u][cursor[u]] as usize;
                let w = match_right[v];
                if w == NIL {
                    for &x in &stack {
                        let y = adj[x][cursor[x]] as usize;
                        match_left[x] = y;
                        match_right[y] = x;
                    }
                    size += 1;
                    break;
                } else if dist[w] != INF && dist[w] == dist[u] + 1 {
                    stack.push(w);
                } else {
                    cursor[u] += 1;
                }
            }
        }
    }
    (match_left, size)
}

/// Largest instance accepted by [`brute_force_matching`].
pub const BRUTE_FORCE_LIMIT: usize = 10;

/// Exact maximum matching size by exhaustive search over assignments of online
/// vertices to unused offline vertices (memoized on the used set).
pub fn brute_force_matching(profile: &TypeProfile, n: usize) -> Result<usize> {
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleTooLarge {
            what: "offline count",
            size: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if profile.n() > BRUTE_FORCE_LIMIT {
        return Err(Error::OracleTooLarge {
            what: "online count",
            size: profile.n(),
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if profile.n() != n {
        return Err(Error::validation(format!(
            "profile counts sum to {}, expected n = {n}",
            profile.n()
        )));
    }
    let masks: Vec<u32> = profile
        .expand()
        .into_iter()
        .map(|t| t.neighbors().iter().fold(0u32, |m, &u| m | (1 << u)))
        .collect();
    let mut memo = vec![vec![u8::MAX; 1 << n]; masks.len() + 1];
    Ok(best_from(0, 0, &masks, &mut memo) as usize)
}

fn best_from(i: usize, used: u32, masks: &[u32], memo: &mut [Vec<u8>]) -> u8 {
    if i == masks.len() {
        return 0;
    }
    if memo[i][used as usize] != u8::MAX {
        return memo[i][used as usize];
    }
    let mut best = best_from(i + 1, used, masks, memo);
    let mut free = masks[i] & !used;
    while free != 0 {
        let bit = free & free.wrapping_neg();
        free ^= bit;
        best = best.max(1 + best_from(i + 1, used | bit, masks, memo));
    }
    memo[i][used as usize] = best;
    best
}

//! Attraction metrics, greedy factor clustering and cluster merging.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use super::CspError;
use crate::factor::{FactorError, SparseFactor};
use crate::graph::{intersection, union};
use crate::scalar::Potential;
use crate::var::VariableId;

/// How strongly two factors pull towards each other.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttractionMetric {
    /// Number of shared variables.
    Overlap,
    /// Upper-bound entropy of the shared variables.
    Entropy,
    /// `m_i / r²`, with `m` the informedness of a factor and `r` the log
    /// ratio of union to intersection upper-bound entropy.
    #[default]
    Gravity,
}

impl AttractionMetric {
    pub const ALL: [AttractionMetric; 3] = [AttractionMetric::Overlap, AttractionMetric::Entropy, AttractionMetric::Gravity];

    pub fn name(self) -> &'static str {
        match self {
            AttractionMetric::Overlap => "overlap",
            AttractionMetric::Entropy => "entropy",
            AttractionMetric::Gravity => "gravity",
        }
    }
}

impl std::fmt::Display for AttractionMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AttractionMetric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "overlap" => Ok(Self::Overlap),
            "entropy" => Ok(Self::Entropy),
            "gravity" => Ok(Self::Gravity),
            _ => Err(format!("unknown metric `{s}` (expected overlap, entropy or gravity)")),
        }
    }
}

/// `log2` cardinality per variable.
pub type EntropyMap = HashMap<VariableId, f64>;

pub fn entropy_map<'a, P: Potential>(factors: impl IntoIterator<Item = &'a SparseFactor<P>>) -> EntropyMap {
    let mut out = EntropyMap::new();
    for f in factors {
        for (v, d) in f.scope().iter().zip(f.domains()) {
            out.entry(*v).or_insert_with(|| d.entropy_bound());
        }
    }
    out
}

pub(crate) fn scope_entropy(scope: &[VariableId], h: &EntropyMap) -> f64 {
    scope.iter().map(|v| h[v]).sum()
}

/// Gravity distance `log2(Ĥ(∪) / Ĥ(∩))`.
pub fn distance(a: &[VariableId], b: &[VariableId], h: &EntropyMap) -> f64 {
    let hi = scope_entropy(&intersection(a, b), h);
    let hu = scope_entropy(&union(a, b), h);
    if hi <= 0.0 {
        return if hu <= 0.0 { 0.0 } else { f64::INFINITY };
    }
    (hu / hi).log2().max(0.0)
}

/// Attraction of `b` towards `a` for clusters with the given scopes and
/// masses. `r = 0` yields `+∞`; an infinite distance yields 0.
pub(crate) fn pull(metric: AttractionMetric, a: &[VariableId], b: &[VariableId], mass_a: f64, h: &EntropyMap) -> f64 {
    match metric {
        AttractionMetric::Overlap => intersection(a, b).len() as f64,
        AttractionMetric::Entropy => scope_entropy(&intersection(a, b), h),
        AttractionMetric::Gravity => {
            let r = distance(a, b, h);
            if r == 0.0 {
                f64::INFINITY
            } else {
                mass_a / (r * r)
            }
        }
    }
}

/// `(a_{i←j}, a_{j←i})` for two factors with intersecting scopes.
pub fn attraction<P: Potential>(
    fi: &SparseFactor<P>,
    fj: &SparseFactor<P>,
    metric: AttractionMetric,
) -> Result<(f64, f64), CspError> {
    if intersection(fi.scope(), fj.scope()).is_empty() {
        return Err(CspError::DisjointScopes);
    }
    let h = entropy_map([fi, fj]);
    let (mi, mj) = match metric {
        AttractionMetric::Gravity => (fi.mass()?, fj.mass()?),
        _ => (0.0, 0.0),
    };
    Ok((pull(metric, fi.scope(), fj.scope(), mi, &h), pull(metric, fj.scope(), fi.scope(), mj, &h)))
}

/// A directed attraction candidate; the heap yields the largest value,
/// then the lexicographically smallest `(i, j)`.
#[derive(PartialEq)]
struct Candidate {
    value: f64,
    i: usize,
    j: usize,
    stamp: (u32, u32),
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        self.value.total_cmp(&o.value).then_with(|| (o.i, o.j).cmp(&(self.i, self.j)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Greedy agglomeration under the entropy budget `tau`.
///
/// Repeatedly takes the most attracted pair `a_{i←j}` among clusters with
/// intersecting scopes. If the union's upper-bound entropy fits, `j` joins
/// `i` (masses add, attractions of `i` are recomputed); otherwise only that
/// directed attraction is retired. Returns member indices per cluster,
/// ordered by smallest member.
pub fn cluster_factors<P: Potential>(
    factors: &[SparseFactor<P>],
    tau: f64,
    metric: AttractionMetric,
) -> Result<Vec<Vec<usize>>, CspError> {
    let h = entropy_map(factors);
    let n = factors.len();
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut scopes: Vec<Vec<VariableId>> = factors.iter().map(|f| f.scope().to_vec()).collect();
    let mut mass: Vec<f64> = match metric {
        AttractionMetric::Gravity => factors.iter().map(|f| f.mass()).collect::<Result<_, _>>()?,
        _ => vec![0.0; n],
    };
    // Bumped whenever a cluster changes, invalidating its queued candidates.
    let mut version = vec![0u32; n];

    let mut by_var: HashMap<VariableId, Vec<usize>> = HashMap::new();
    for (i, s) in scopes.iter().enumerate() {
        for &v in s {
            by_var.entry(v).or_default().push(i);
        }
    }
    let neighbours = |i: usize, scopes: &[Vec<VariableId>], by_var: &HashMap<VariableId, Vec<usize>>, alive: &[Option<Vec<usize>>]| {
        let mut ns: Vec<usize> = scopes[i].iter().flat_map(|v| by_var[v].iter().copied()).filter(|&k| k != i && alive[k].is_some()).collect();
        ns.sort_unstable();
        ns.dedup();
        ns
    };

    let mut heap = BinaryHeap::new();
    for i in 0..n {
        for k in neighbours(i, &scopes, &by_var, &members) {
            if k > i {
                let (a, b) = (&scopes[i], &scopes[k]);
                heap.push(Candidate { value: pull(metric, a, b, mass[i], &h), i, j: k, stamp: (0, 0) });
                heap.push(Candidate { value: pull(metric, b, a, mass[k], &h), i: k, j: i, stamp: (0, 0) });
            }
        }
    }

    while let Some(c) = heap.pop() {
        let (i, j) = (c.i, c.j);
        if members[i].is_none() || members[j].is_none() || c.stamp != (version[i], version[j]) {
            continue;
        }
        let joint = union(&scopes[i], &scopes[j]);
        if scope_entropy(&joint, &h) > tau {
            continue;
        }
        let taken = members[j].take().unwrap();
        members[i].as_mut().unwrap().extend(taken);
        for &v in &joint {
            let list = by_var.get_mut(&v).unwrap();
            if !list.contains(&i) {
                list.push(i);
            }
        }
        scopes[i] = joint;
        mass[i] += mass[j];
        version[i] += 1;
        for k in neighbours(i, &scopes, &by_var, &members) {
            let (a, b) = (&scopes[i], &scopes[k]);
            heap.push(Candidate { value: pull(metric, a, b, mass[i], &h), i, j: k, stamp: (version[i], version[k]) });
            heap.push(Candidate { value: pull(metric, b, a, mass[k], &h), i: k, j: i, stamp: (version[k], version[i]) });
        }
    }

    let mut out: Vec<Vec<usize>> = members
        .into_iter()
        .flatten()
        .map(|mut m| {
            m.sort_unstable();
            m
        })
        .collect();
    out.sort_unstable_by_key(|m| m[0]);
    Ok(out)
}

/// Product of a cluster's factors. Starts from the smallest table and then
/// repeatedly joins the member sharing the most variables with the running
/// product, so intermediate tables stay as small as the join allows.
pub fn merge_cluster<P: Potential>(members: &[SparseFactor<P>], cap: usize) -> Result<SparseFactor<P>, FactorError> {
    let Some(start) = (0..members.len()).min_by_key(|&k| (members[k].len(), k)) else {
        return Ok(SparseFactor::scalar(P::one()));
    };
    let mut prod = members[start].clone();
    let mut left: Vec<usize> = (0..members.len()).filter(|&k| k != start).collect();
    while !left.is_empty() {
        let pos = (0..left.len())
            .max_by(|&a, &b| {
                let (fa, fb) = (&members[left[a]], &members[left[b]]);
                let oa = intersection(prod.scope(), fa.scope()).len();
                let ob = intersection(prod.scope(), fb.scope()).len();
                oa.cmp(&ob).then_with(|| fb.len().cmp(&fa.len())).then_with(|| left[b].cmp(&left[a]))
            })
            .unwrap();
        let k = left.remove(pos);
        prod = prod.multiply_capped(&members[k], cap)?;
    }
    Ok(prod)
}

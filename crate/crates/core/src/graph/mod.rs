//! Cluster graphs: Bethe and LTRIP construction, RIP validation.

mod ltrip;

pub use ltrip::{connection_weights, ltrip, ltrip_with, max_spanning_tree, LayerWeights};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::{FactorError, SparseFactor, DEFAULT_TABLE_CAP};
use crate::scalar::Potential;
use crate::var::{Domain, VariableId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error(transparent)]
    Factor(#[from] FactorError),
    #[error("edge ({0}, {1}) references a missing cluster")]
    MissingCluster(usize, usize),
    #[error("self edge on cluster {0}")]
    SelfEdge(usize),
    #[error("clusters {0} and {1} are linked twice")]
    DuplicateEdge(usize, usize),
}

/// A graph node carrying a prior factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Cluster<P: Potential> {
    pub id: usize,
    pub scope: Vec<VariableId>,
    pub factor: SparseFactor<P>,
}

/// Edge between clusters `i < j` with its separation set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sepset {
    pub i: usize,
    pub j: usize,
    pub vars: Vec<VariableId>,
}

impl Sepset {
    pub fn new(a: usize, b: usize, mut vars: Vec<VariableId>) -> Self {
        vars.sort_unstable();
        vars.dedup();
        Sepset { i: a.min(b), j: a.max(b), vars }
    }

    /// The endpoint opposite to `k`.
    pub fn other(&self, k: usize) -> usize {
        if k == self.i {
            self.j
        } else {
            self.i
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterGraph<P: Potential> {
    clusters: Vec<Cluster<P>>,
    sepsets: Vec<Sepset>,
    /// Per cluster: `(neighbour, edge index)` in edge order.
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl<P: Potential> ClusterGraph<P> {
    /// Assembles a graph. Only structural sanity is checked here (endpoints
    /// exist, no self or parallel edges); RIP is checked by [`validate_rip`].
    pub fn new(factors: Vec<SparseFactor<P>>, sepsets: Vec<Sepset>) -> Result<Self, GraphError> {
        let clusters: Vec<Cluster<P>> = factors
            .into_iter()
            .enumerate()
            .map(|(id, factor)| Cluster { id, scope: factor.scope().to_vec(), factor })
            .collect();
        let mut adjacency = vec![Vec::new(); clusters.len()];
        let mut seen = rustc_hash::FxHashSet::default();
        for (e, s) in sepsets.iter().enumerate() {
            if s.i == s.j {
                return Err(GraphError::SelfEdge(s.i));
            }
            if s.j >= clusters.len() {
                return Err(GraphError::MissingCluster(s.i, s.j));
            }
            if !seen.insert((s.i, s.j)) {
                return Err(GraphError::DuplicateEdge(s.i, s.j));
            }
            adjacency[s.i].push((s.j, e));
            adjacency[s.j].push((s.i, e));
        }
        Ok(ClusterGraph { clusters, sepsets, adjacency })
    }

    pub fn clusters(&self) -> &[Cluster<P>] {
        &self.clusters
    }

    pub fn cluster(&self, i: usize) -> &Cluster<P> {
        &self.clusters[i]
    }

    pub fn sepsets(&self) -> &[Sepset] {
        &self.sepsets
    }

    pub fn sepset(&self, e: usize) -> &Sepset {
        &self.sepsets[e]
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.sepsets.len()
    }

    pub fn neighbours(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn edge_between(&self, i: usize, j: usize) -> Option<usize> {
        self.adjacency[i].iter().find(|&&(k, _)| k == j).map(|&(_, e)| e)
    }

    pub fn factors(&self) -> impl Iterator<Item = &SparseFactor<P>> + '_ {
        self.clusters.iter().map(|c| &c.factor)
    }

    pub fn into_factors(self) -> Vec<SparseFactor<P>> {
        self.clusters.into_iter().map(|c| c.factor).collect()
    }

    pub fn dump(&self) -> GraphDump {
        GraphDump {
            clusters: self.clusters.iter().map(|c| ClusterDump { id: c.id, scope: c.scope.clone() }).collect(),
            sepsets: self.sepsets.clone(),
        }
    }
}

/// Serializable structure of a graph, without potentials.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDump {
    pub clusters: Vec<ClusterDump>,
    pub sepsets: Vec<Sepset>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterDump {
    pub id: usize,
    pub scope: Vec<VariableId>,
}

fn is_subset(a: &[VariableId], b: &[VariableId]) -> bool {
    // Both sorted.
    let mut it = b.iter();
    a.iter().all(|x| it.by_ref().any(|y| y == x))
}

pub(crate) fn intersection(a: &[VariableId], b: &[VariableId]) -> Vec<VariableId> {
    let (mut i, mut j, mut out) = (0, 0, Vec::new());
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

pub(crate) fn union(a: &[VariableId], b: &[VariableId]) -> Vec<VariableId> {
    let mut out: Vec<VariableId> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Multiplies every factor whose scope is contained in another factor's
/// scope into the lowest-index such superset. Equal scopes collapse into
/// the earliest of them. Survivors keep their relative order.
pub fn absorb_subsets<P: Potential>(factors: Vec<SparseFactor<P>>) -> Result<Vec<SparseFactor<P>>, FactorError> {
    absorb_subsets_capped(factors, DEFAULT_TABLE_CAP)
}

pub fn absorb_subsets_capped<P: Potential>(
    factors: Vec<SparseFactor<P>>,
    cap: usize,
) -> Result<Vec<SparseFactor<P>>, FactorError> {
    let mut slots: Vec<Option<SparseFactor<P>>> = factors.into_iter().map(Some).collect();
    let n = slots.len();
    // Index variables to limit superset candidates to factors sharing one.
    let mut occurs: BTreeMap<VariableId, Vec<usize>> = BTreeMap::new();
    for (i, f) in slots.iter().enumerate() {
        for &v in f.as_ref().unwrap().scope() {
            occurs.entry(v).or_default().push(i);
        }
    }
    for i in 0..n {
        let scope = slots[i].as_ref().unwrap().scope().to_vec();
        let candidates: Vec<usize> = match scope.first() {
            Some(v) => occurs[v].clone(),
            None => (0..n).collect(),
        };
        let target = candidates.into_iter().find(|&j| {
            j != i
                && slots[j].as_ref().is_some_and(|g| {
                    is_subset(&scope, g.scope()) && (g.arity() > scope.len() || j < i)
                })
        });
        if let Some(j) = target {
            let f = slots[i].take().unwrap();
            let g = slots[j].as_ref().unwrap();
            slots[j] = Some(g.multiply_capped(&f, cap)?);
        }
    }
    Ok(slots.into_iter().flatten().collect())
}

/// Factor graph: one vacuous univariate hub per variable (ascending id),
/// appended after the factors, linked to every factor containing it.
pub fn bethe<P: Potential>(factors: Vec<SparseFactor<P>>) -> Result<ClusterGraph<P>, GraphError> {
    let mut occurs: BTreeMap<VariableId, (Domain, Vec<usize>)> = BTreeMap::new();
    for (i, f) in factors.iter().enumerate() {
        for (v, d) in f.scope().iter().zip(f.domains()) {
            occurs.entry(*v).or_insert_with(|| (d.clone(), Vec::new())).1.push(i);
        }
    }
    let mut all = factors;
    let mut sepsets = Vec::new();
    for (v, (d, members)) in occurs {
        let hub = all.len();
        all.push(SparseFactor::vacuous(vec![(v, d)])?);
        for i in members {
            sepsets.push(Sepset::new(i, hub, vec![v]));
        }
    }
    ClusterGraph::new(all, sepsets)
}

/// A reason a graph fails the running intersection property.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RipViolation {
    EmptySepset { i: usize, j: usize },
    NotInIntersection { i: usize, j: usize, var: VariableId },
    Cycle { var: VariableId },
    Disconnected { var: VariableId },
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    /// False when `a` and `b` were already connected.
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Lists every RIP violation; empty iff, for each variable, the edges whose
/// sepset carries it form a spanning tree over the clusters containing it.
pub fn validate_rip<P: Potential>(graph: &ClusterGraph<P>) -> Vec<RipViolation> {
    let mut out = Vec::new();
    // Clusters holding each variable and the edges carrying it.
    type Layer = (Vec<usize>, Vec<(usize, usize)>);
    let mut layers: BTreeMap<VariableId, Layer> = BTreeMap::new();
    for c in graph.clusters() {
        for &v in &c.scope {
            layers.entry(v).or_default().0.push(c.id);
        }
    }
    for s in graph.sepsets() {
        if s.vars.is_empty() {
            out.push(RipViolation::EmptySepset { i: s.i, j: s.j });
        }
        for &v in &s.vars {
            let ok = graph.cluster(s.i).factor.contains(v) && graph.cluster(s.j).factor.contains(v);
            if ok {
                layers.get_mut(&v).expect("variable occurs in a cluster").1.push((s.i, s.j));
            } else {
                out.push(RipViolation::NotInIntersection { i: s.i, j: s.j, var: v });
            }
        }
    }
    for (var, (members, edges)) in layers {
        let local: BTreeMap<usize, usize> = members.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        let mut uf = UnionFind::new(members.len());
        let mut cyclic = false;
        for (i, j) in &edges {
            cyclic |= !uf.union(local[i], local[j]);
        }
        if cyclic {
            out.push(RipViolation::Cycle { var });
        }
        let root = uf.find(0);
        if (1..members.len()).any(|k| uf.find(k) != root) {
            out.push(RipViolation::Disconnected { var });
        }
    }
    out
}

/// True iff the graph is a forest (each connected component is a tree).
pub fn is_tree<P: Potential>(graph: &ClusterGraph<P>) -> bool {
    let mut uf = UnionFind::new(graph.len());
    graph.sepsets().iter().all(|s| uf.union(s.i, s.j))
}

//! Layered-trees construction of cluster graphs.

use std::collections::BTreeMap;

use super::{intersection, ClusterGraph, GraphError, Sepset};
use crate::factor::SparseFactor;
use crate::scalar::Potential;
use crate::var::VariableId;

/// Connection weights among the clusters containing one variable.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerWeights {
    pub variable: VariableId,
    /// Cluster ids of the layer, ascending.
    pub nodes: Vec<usize>,
    /// Symmetric matrix indexed by positions in `nodes`.
    pub weights: Vec<Vec<f64>>,
    /// Per node, how many of its initial weights hit the layer maximum.
    pub maximal_count: Vec<usize>,
}

impl LayerWeights {
    /// Weight between cluster ids `i` and `j`.
    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        let a = self.nodes.iter().position(|&n| n == i)?;
        let b = self.nodes.iter().position(|&n| n == j)?;
        Some(self.weights[a][b])
    }
}

/// Default weights: shared-variable count, then each node's number of
/// maximal edges is added to every edge touching it.
pub fn connection_weights(variable: VariableId, layer: &[(usize, &[VariableId])]) -> LayerWeights {
    let n = layer.len();
    let mut weights = vec![vec![0.0; n]; n];
    let mut m = f64::NEG_INFINITY;
    for a in 0..n {
        for b in a + 1..n {
            let w = intersection(layer[a].1, layer[b].1).len() as f64;
            weights[a][b] = w;
            weights[b][a] = w;
            m = m.max(w);
        }
    }
    let maximal_count: Vec<usize> =
        (0..n).map(|a| (0..n).filter(|&b| b != a && weights[a][b] == m).count()).collect();
    for a in 0..n {
        for b in 0..n {
            if a != b {
                weights[a][b] += (maximal_count[a] + maximal_count[b]) as f64;
            }
        }
    }
    LayerWeights { variable, nodes: layer.iter().map(|p| p.0).collect(), weights, maximal_count }
}

/// Prim's algorithm on a complete graph, seeded at node 0. Among equally
/// heavy candidate edges the lexicographically smallest `(low, high)` pair
/// wins. Returns edges as `(low, high)` local indices in insertion order.
pub fn max_spanning_tree(n: usize, weight: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    if n == 0 {
        return Vec::new();
    }
    let better = |w: f64, e: (usize, usize), bw: f64, be: (usize, usize)| w > bw || (w == bw && e < be);
    let mut in_tree = vec![false; n];
    // Best connecting edge for every node outside the tree.
    let mut best: Vec<(f64, (usize, usize))> = vec![(f64::NEG_INFINITY, (usize::MAX, usize::MAX)); n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut latest = 0;
    in_tree[0] = true;
    for _ in 1..n {
        for v in 0..n {
            if !in_tree[v] {
                let w = weight(latest, v);
                let e = (latest.min(v), latest.max(v));
                if better(w, e, best[v].0, best[v].1) {
                    best[v] = (w, e);
                }
            }
        }
        let mut pick: Option<usize> = None;
        for v in (0..n).filter(|&v| !in_tree[v]) {
            if pick.is_none_or(|p| better(best[v].0, best[v].1, best[p].0, best[p].1)) {
                pick = Some(v);
            }
        }
        let v = pick.expect("a node remains outside the tree");
        in_tree[v] = true;
        edges.push(best[v].1);
        latest = v;
    }
    edges
}

/// LTRIP with the default connection weights. Input factors should already
/// be subset-absorbed; cluster ids follow input order.
pub fn ltrip<P: Potential>(factors: Vec<SparseFactor<P>>) -> Result<ClusterGraph<P>, GraphError> {
    ltrip_with(factors, connection_weights)
}

/// LTRIP with a custom weighting of each variable's layer.
pub fn ltrip_with<P: Potential>(
    factors: Vec<SparseFactor<P>>,
    weights: impl Fn(VariableId, &[(usize, &[VariableId])]) -> LayerWeights,
) -> Result<ClusterGraph<P>, GraphError> {
    let mut occurs: BTreeMap<VariableId, Vec<usize>> = BTreeMap::new();
    for (i, f) in factors.iter().enumerate() {
        for &v in f.scope() {
            occurs.entry(v).or_default().push(i);
        }
    }
    let mut sepsets: BTreeMap<(usize, usize), Vec<VariableId>> = BTreeMap::new();
    for (v, members) in occurs {
        if members.len() < 2 {
            continue;
        }
        let layer: Vec<(usize, &[VariableId])> = members.iter().map(|&i| (i, factors[i].scope())).collect();
        let w = weights(v, &layer);
        for (a, b) in max_spanning_tree(members.len(), |a, b| w.weights[a][b]) {
            sepsets.entry((members[a], members[b])).or_default().push(v);
        }
    }
    let sepsets = sepsets.into_iter().map(|((i, j), vars)| Sepset { i, j, vars }).collect();
    ClusterGraph::new(factors, sepsets)
}

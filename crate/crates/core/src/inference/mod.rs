//! Exact belief propagation on trees and residual-scheduled loopy belief
//! update on general cluster graphs.

mod schedule;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::{FactorError, NormMode, SparseFactor};
use crate::graph::{is_tree, ClusterGraph};
use crate::scalar::Potential;

use schedule::Schedule;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferenceError {
    #[error("graph is not a tree")]
    NotATree,
    #[error("message {from} -> {to} has empty support: the model is contradictory")]
    Contradiction { from: usize, to: usize },
    #[error("cluster {0} has empty support: the model is contradictory")]
    EmptyCluster(usize),
    #[error("propagation exceeded its deadline")]
    Timeout,
    #[error(transparent)]
    Factor(#[from] FactorError),
}

/// Stopping rules for loopy propagation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceConfig {
    /// Messages whose divergence from their predecessor stays at or below
    /// this value do not trigger further updates.
    pub threshold: f64,
    /// Damping weight of the fresh message; 1 disables damping.
    pub lambda: f64,
    /// Update budget; `None` means 200 per edge.
    pub max_updates: Option<usize>,
    pub mode: NormMode,
    pub deadline: Option<Instant>,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig { threshold: 1e-6, lambda: 1.0, max_updates: None, mode: NormMode::Max, deadline: None }
    }
}

impl ConvergenceConfig {
    pub fn with_mode(mode: NormMode) -> Self {
        ConvergenceConfig { mode, ..Self::default() }
    }
}

/// A sepset-scoped message `from -> to`.
#[derive(Clone, Debug, PartialEq)]
pub struct Message<P: Potential> {
    pub from: usize,
    pub to: usize,
    pub table: SparseFactor<P>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub updates: usize,
    pub converged: bool,
    pub final_max_deviation: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopyOutcome<P: Potential> {
    /// Normalised posterior per cluster, in cluster order.
    pub beliefs: Vec<SparseFactor<P>>,
    /// Final messages; two per edge, `i -> j` then `j -> i`.
    pub messages: Vec<Message<P>>,
    pub stats: PropagationStats,
}

/// Directed message storage: slot `2e` holds `i -> j` and `2e + 1` holds
/// `j -> i` for edge `e = (i, j)`. `None` is the vacuous message.
pub type MessageSlots<P> = Vec<Option<SparseFactor<P>>>;

fn slot<P: Potential>(graph: &ClusterGraph<P>, e: usize, from: usize) -> usize {
    2 * e + usize::from(graph.sepset(e).j == from)
}

/// Message `i -> j`: the prior of `i` times every incoming message except
/// the one from `j`, marginalised onto the sepset and normalised.
pub fn compute_message<P: Potential>(
    graph: &ClusterGraph<P>,
    messages: &[Option<SparseFactor<P>>],
    i: usize,
    j: usize,
    mode: NormMode,
) -> Result<Message<P>, InferenceError> {
    let e = graph.edge_between(i, j).ok_or(InferenceError::NotATree)?;
    let mut prod = graph.cluster(i).factor.clone();
    for &(k, ek) in graph.neighbours(i) {
        if k != j {
            if let Some(m) = &messages[slot(graph, ek, k)] {
                prod = prod.multiply(m)?;
            }
        }
    }
    let table = prod
        .marginalize(&graph.sepset(e).vars, mode)?
        .normalize(mode)
        .map_err(|_| InferenceError::Contradiction { from: i, to: j })?;
    Ok(Message { from: i, to: j, table })
}

fn belief<P: Potential>(
    graph: &ClusterGraph<P>,
    messages: &[Option<SparseFactor<P>>],
    i: usize,
    mode: NormMode,
) -> Result<SparseFactor<P>, InferenceError> {
    let mut b = graph.cluster(i).factor.clone();
    for &(k, e) in graph.neighbours(i) {
        if let Some(m) = &messages[slot(graph, e, k)] {
            b = b.multiply(m)?;
        }
    }
    b.normalize(mode).map_err(|_| InferenceError::EmptyCluster(i))
}

fn collect_messages<P: Potential>(graph: &ClusterGraph<P>, slots: MessageSlots<P>) -> Result<Vec<Message<P>>, InferenceError> {
    slots
        .into_iter()
        .enumerate()
        .map(|(k, m)| {
            let s = graph.sepset(k / 2);
            let (from, to) = if k % 2 == 0 { (s.i, s.j) } else { (s.j, s.i) };
            let table = match m {
                Some(t) => t,
                None => {
                    let f = &graph.cluster(from).factor;
                    let scope = s.vars.iter().map(|&v| (v, f.domain_of(v).expect("sepset var in cluster").clone()));
                    SparseFactor::vacuous(scope.collect())?
                }
            };
            Ok(Message { from, to, table })
        })
        .collect()
}

/// Two-pass propagation on a forest. Each component is rooted at its lowest
/// cluster index; messages flow leaves-inward, then outward.
pub fn tree_propagate<P: Potential>(graph: &ClusterGraph<P>, mode: NormMode) -> Result<Vec<SparseFactor<P>>, InferenceError> {
    tree_propagate_full(graph, mode).map(|o| o.beliefs)
}

pub fn tree_propagate_full<P: Potential>(graph: &ClusterGraph<P>, mode: NormMode) -> Result<LoopyOutcome<P>, InferenceError> {
    if !is_tree(graph) {
        return Err(InferenceError::NotATree);
    }
    let n = graph.len();
    let mut parent: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut stack = vec![root];
        while let Some(c) = stack.pop() {
            order.push(c);
            for &(k, _) in graph.neighbours(c).iter().rev() {
                if !seen[k] {
                    seen[k] = true;
                    parent[k] = Some(c);
                    stack.push(k);
                }
            }
        }
    }
    let mut slots: MessageSlots<P> = vec![None; 2 * graph.edge_count()];
    for &c in order.iter().rev() {
        if let Some(p) = parent[c] {
            let m = compute_message(graph, &slots, c, p, mode)?;
            let e = graph.edge_between(c, p).expect("tree edge");
            slots[slot(graph, e, c)] = Some(m.table);
        }
    }
    for &c in &order {
        if let Some(p) = parent[c] {
            let m = compute_message(graph, &slots, p, c, mode)?;
            let e = graph.edge_between(c, p).expect("tree edge");
            slots[slot(graph, e, p)] = Some(m.table);
        }
    }
    let beliefs = (0..n).map(|i| belief(graph, &slots, i, mode)).collect::<Result<Vec<_>, _>>()?;
    let updates = 2 * graph.edge_count();
    Ok(LoopyOutcome {
        beliefs,
        messages: collect_messages(graph, slots)?,
        stats: PropagationStats { updates, converged: true, final_max_deviation: 0.0 },
    })
}

/// Deviation of a new message from the previous one: KL divergence of the
/// sum-normalised copies, with support loss clamped to a large finite value.
fn deviation<P: Potential>(
    prev: Option<&SparseFactor<P>>,
    new: &SparseFactor<P>,
    dense: impl FnOnce() -> Option<SparseFactor<P>>,
) -> f64 {
    const SUPPORT_CHANGE: f64 = 1e9;
    let d = match prev {
        Some(p) => p.divergence(new),
        None => match dense() {
            Some(u) => u.divergence(new),
            None => return SUPPORT_CHANGE,
        },
    };
    match d {
        Ok(d) if d.is_finite() => d,
        _ => SUPPORT_CHANGE,
    }
}

/// Loopy belief update with a residual priority schedule.
///
/// Each cluster keeps its current belief; a message `i -> j` is the
/// marginal of `β_i` divided by the reverse message, and `β_j` is updated by
/// the ratio of new to old message instead of re-multiplying every
/// incoming message. On trees the result equals [`tree_propagate`].
pub fn loopy_propagate<P: Potential>(
    graph: &ClusterGraph<P>,
    config: &ConvergenceConfig,
) -> Result<LoopyOutcome<P>, InferenceError> {
    let mode = config.mode;
    let n = graph.len();
    let mut beliefs: Vec<SparseFactor<P>> = Vec::with_capacity(n);
    for i in 0..n {
        beliefs.push(graph.cluster(i).factor.normalize(mode).map_err(|_| InferenceError::EmptyCluster(i))?);
    }
    let mut slots: MessageSlots<P> = vec![None; 2 * graph.edge_count()];
    let max_updates = config.max_updates.unwrap_or(200 * graph.edge_count().max(1));
    let lambda = P::from_f64_lossy(config.lambda);

    let mut queue = Schedule::new(slots.len());
    for (e, s) in graph.sepsets().iter().enumerate() {
        let bias = 1e-10 / (graph.neighbours(s.i).len() + graph.neighbours(s.j).len()) as f64;
        queue.push(2 * e, bias);
        queue.push(2 * e + 1, bias);
    }

    let mut updates = 0usize;
    let mut converged = false;
    let mut final_max_deviation;
    loop {
        if updates >= max_updates && !queue.is_empty() {
            final_max_deviation = queue.max_priority().unwrap_or(0.0);
            break;
        }
        let Some(k) = queue.pop() else {
            // Sweep: requeue anything that would still move.
            let mut worst = 0.0f64;
            for k in 0..slots.len() {
                let (i, j) = endpoints(graph, k);
                let fresh = fresh_message(graph, &beliefs, &slots, k, i, j, mode)?;
                let d = deviation(slots[k].as_ref(), &fresh, || vacuous_like(&fresh));
                if d > config.threshold {
                    queue.push(k, d);
                }
                worst = worst.max(d);
            }
            final_max_deviation = worst;
            if queue.is_empty() {
                converged = true;
                break;
            }
            continue;
        };
        if config.deadline.is_some_and(|t| Instant::now() >= t) {
            return Err(InferenceError::Timeout);
        }
        let (i, j) = endpoints(graph, k);
        let fresh = fresh_message(graph, &beliefs, &slots, k, i, j, mode)?;
        let new = match &slots[k] {
            Some(old) if config.lambda < 1.0 => fresh.damp(old, lambda)?.normalize(mode)?,
            _ => fresh,
        };
        let d = deviation(slots[k].as_ref(), &new, || vacuous_like(&new));
        updates += 1;

        let updated = match &slots[k] {
            None => beliefs[j].multiply(&new).ok(),
            Some(old) => new.divide(old).ok().and_then(|r| beliefs[j].multiply(&r).ok()),
        };
        slots[k] = Some(new);
        let bj = match updated {
            Some(b) => b,
            None => recompute_belief(graph, &slots, j)?,
        };
        beliefs[j] = bj.normalize(mode).map_err(|_| InferenceError::Contradiction { from: i, to: j })?;

        if d > config.threshold {
            for &(m, e) in graph.neighbours(j) {
                if m != i {
                    queue.push(slot(graph, e, j), d);
                }
            }
        }
    }
    Ok(LoopyOutcome { beliefs, messages: collect_messages(graph, slots)?, stats: PropagationStats { updates, converged, final_max_deviation } })
}

fn endpoints<P: Potential>(graph: &ClusterGraph<P>, k: usize) -> (usize, usize) {
    let s = graph.sepset(k / 2);
    if k.is_multiple_of(2) {
        (s.i, s.j)
    } else {
        (s.j, s.i)
    }
}

/// Uniform table over the dense space of `f`, or `None` when that space is
/// larger than `f`; the divergence from uniform is then infinite anyway.
fn vacuous_like<P: Potential>(f: &SparseFactor<P>) -> Option<SparseFactor<P>> {
    let dense = f.domains().iter().try_fold(1usize, |acc, d| acc.checked_mul(d.cardinality()))?;
    if dense > f.len() {
        return None;
    }
    Some(SparseFactor::vacuous(f.scope_domains()).expect("no larger than an existing table"))
}

/// `normalize(marginal(β_i) / δ_{j→i})`, falling back to the direct product
/// form when the division is undefined.
fn fresh_message<P: Potential>(
    graph: &ClusterGraph<P>,
    beliefs: &[SparseFactor<P>],
    slots: &[Option<SparseFactor<P>>],
    k: usize,
    i: usize,
    j: usize,
    mode: NormMode,
) -> Result<SparseFactor<P>, InferenceError> {
    let vars = &graph.sepset(k / 2).vars;
    let marginal = beliefs[i].marginalize(vars, mode)?;
    let quotient = match &slots[k ^ 1] {
        None => Ok(marginal),
        Some(rev) => marginal.divide(rev),
    };
    match quotient {
        Ok(q) => q.normalize(mode).map_err(|_| InferenceError::Contradiction { from: i, to: j }),
        Err(_) => compute_message(graph, slots, i, j, mode).map(|m| m.table),
    }
}

fn recompute_belief<P: Potential>(
    graph: &ClusterGraph<P>,
    slots: &[Option<SparseFactor<P>>],
    j: usize,
) -> Result<SparseFactor<P>, InferenceError> {
    let mut b = graph.cluster(j).factor.clone();
    for &(k, e) in graph.neighbours(j) {
        if let Some(m) = &slots[slot(graph, e, k)] {
            b = b.multiply(m)?;
        }
    }
    Ok(b)
}

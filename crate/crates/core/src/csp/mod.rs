//! Exact constraint satisfaction by purge-and-merge: alternate zero-purging
//! belief propagation with entropy-bounded factor merging until the cluster
//! graph is a tree.

mod cluster;
mod enumerate;
mod purge;
mod single;
#[cfg(test)]
mod tests;

pub use cluster::{attraction, cluster_factors, distance, entropy_map, merge_cluster, AttractionMetric, EntropyMap};
pub use enumerate::{enumerate_solutions, Enumeration};
pub use purge::{domain_map, reduce_domains, reduce_domains_with, reduce_variables, DomainMap};
pub use single::{single_pass, SinglePass, Topology};

use std::time::{Duration, Instant};

use log::debug;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::factor::{FactorError, NormMode, SparseFactor};
use crate::graph::{absorb_subsets_capped, is_tree, ltrip, GraphError};
use crate::inference::{loopy_propagate, ConvergenceConfig, InferenceError};
use crate::scalar::Potential;
use crate::var::{Assignment, Domain, VariableId};

/// Default per-factor entry cap while merging.
pub const DEFAULT_MERGE_CAP: usize = 1 << 22;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CspError {
    #[error("contradiction: {0}")]
    Contradiction(String),
    #[error("merging needs {required} entries, above the cap of {cap}")]
    CapacityExceeded { required: u128, cap: usize },
    #[error("the residual graph is not a tree")]
    NotATree,
    #[error("factor scopes do not intersect")]
    DisjointScopes,
    #[error("solve exceeded its deadline")]
    Timeout,
    #[error("no tree after {0} rounds")]
    RoundLimit(usize),
    #[error(transparent)]
    Factor(FactorError),
    #[error(transparent)]
    Graph(GraphError),
}

impl CspError {
    pub(crate) fn contradiction(msg: impl Into<String>) -> Self {
        CspError::Contradiction(msg.into())
    }
}

impl From<FactorError> for CspError {
    fn from(e: FactorError) -> Self {
        match e {
            FactorError::CapacityExceeded { required, cap } => CspError::CapacityExceeded { required, cap },
            FactorError::EmptySupport => CspError::contradiction("a factor has empty support"),
            e => CspError::Factor(e),
        }
    }
}

impl From<GraphError> for CspError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Factor(f) => f.into(),
            e => CspError::Graph(e),
        }
    }
}

impl From<InferenceError> for CspError {
    fn from(e: InferenceError) -> Self {
        match e {
            InferenceError::Timeout => CspError::Timeout,
            InferenceError::NotATree => CspError::NotATree,
            InferenceError::Factor(f) => f.into(),
            e => CspError::Contradiction(e.to_string()),
        }
    }
}

/// Entropy budget per round: `start + k * step` bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSchedule {
    /// Defaults to the largest factor's upper-bound entropy plus one
    /// variable's worth of the widest domain.
    pub start: Option<f64>,
    /// Defaults to `log2` of the widest domain (at least 1).
    pub step: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PurgeMergeConfig {
    pub metric: AttractionMetric,
    pub schedule: ThresholdSchedule,
    /// Largest table a merge may produce.
    pub table_cap: usize,
    pub inference: ConvergenceConfig,
    pub max_rounds: usize,
    pub deadline: Option<Instant>,
}

impl Default for PurgeMergeConfig {
    fn default() -> Self {
        PurgeMergeConfig {
            metric: AttractionMetric::Gravity,
            schedule: ThresholdSchedule::default(),
            table_cap: DEFAULT_MERGE_CAP,
            inference: ConvergenceConfig::with_mode(NormMode::Max),
            max_rounds: 10_000,
            deadline: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub rounds: usize,
    /// Largest table present after any merge step.
    pub max_table_entries: usize,
    /// Largest upper-bound entropy of any factor scope, in bits.
    pub max_upper_bound_entropy: f64,
    pub merges: usize,
    pub capacity_failures: usize,
    pub propagation_updates: usize,
    pub runtime: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult<P: Potential> {
    /// Variables pinned to a single value.
    pub solved: Assignment,
    /// Remaining factors over unsolved variables.
    pub residual_factors: Vec<SparseFactor<P>>,
    /// Current domain of every problem variable.
    pub domains: DomainMap,
    pub graph_is_tree: bool,
    pub stats: SolveStats,
}

impl<P: Potential> SolveResult<P> {
    /// True when every variable has a single value.
    pub fn is_unique(&self) -> bool {
        self.graph_is_tree && self.solved.len() == self.domains.len()
    }
}

/// A constraint problem: variables with domains and constraint factors.
#[derive(Clone, Debug, PartialEq)]
pub struct CspProblem<P: Potential> {
    pub domains: DomainMap,
    pub factors: Vec<SparseFactor<P>>,
    /// Values fixed up front (for example puzzle clues).
    pub evidence: Assignment,
}

impl<P: Potential> CspProblem<P> {
    pub fn new(factors: Vec<SparseFactor<P>>) -> Result<Self, CspError> {
        let domains = domain_map(&factors)?;
        Ok(CspProblem { domains, factors, evidence: Assignment::new() })
    }

    /// Adds a variable that may appear in no factor.
    pub fn with_variable(mut self, v: VariableId, d: Domain) -> Self {
        self.domains.entry(v).or_insert(d);
        self
    }

    pub fn solve(&self, config: &PurgeMergeConfig) -> Result<SolveResult<P>, CspError> {
        let start = Instant::now();
        for (v, s) in self.evidence.iter() {
            if !self.domains.get(&v).is_some_and(|d| d.contains(s)) {
                return Err(CspError::contradiction(format!("clue {v}={s} is outside its domain")));
            }
        }
        let mut factors = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let g = f.observe(&self.evidence);
            if g.is_empty() {
                return Err(CspError::contradiction(format!("clues rule out every entry of the factor over {:?}", f.scope())));
            }
            if g.arity() > 0 {
                factors.push(g);
            }
        }
        let mut result = purge_and_merge(factors, config)?;
        result.solved.merge(&self.evidence).map_err(|v| CspError::contradiction(format!("clue on {v} conflicts")))?;
        for (v, d) in &self.domains {
            if let Some(s) = result.solved.get(*v) {
                result.domains.insert(*v, Domain::new(vec![s]).expect("single state"));
            } else {
                result.domains.entry(*v).or_insert_with(|| d.clone());
            }
        }
        result.stats.runtime = start.elapsed();
        Ok(result)
    }
}

fn purge<P: Potential>(
    factors: Vec<SparseFactor<P>>,
    domains: &mut DomainMap,
    solved: &mut Assignment,
) -> Result<Vec<SparseFactor<P>>, CspError> {
    let mut factors = factors;
    loop {
        factors = reduce_domains_with(factors, domains)?;
        let (evidence, next) = reduce_variables(factors)?;
        factors = next;
        if evidence.is_empty() {
            return Ok(factors);
        }
        for (v, s) in evidence.iter() {
            domains.insert(v, Domain::new(vec![s]).expect("single state"));
        }
        solved.merge(&evidence).map_err(|v| CspError::contradiction(format!("{v} solved twice differently")))?;
    }
}

/// Runs purge-and-merge until the cluster graph of the remaining factors is
/// a tree. All solutions of the input are preserved; on success the residual
/// factors are exact max-marginals.
pub fn purge_and_merge<P: Potential>(
    factors: Vec<SparseFactor<P>>,
    config: &PurgeMergeConfig,
) -> Result<SolveResult<P>, CspError> {
    let start = Instant::now();
    let mut stats = SolveStats::default();
    let mut domains = domain_map(&factors)?;
    let mut solved = Assignment::new();
    if let Some(f) = factors.iter().find(|f| f.is_empty()) {
        return Err(CspError::contradiction(format!("factor over {:?} has no entries", f.scope())));
    }
    let mut factors = purge(factors, &mut domains, &mut solved)?;

    let widest = domains.values().map(Domain::cardinality).max().unwrap_or(1);
    let step = config.schedule.step.unwrap_or_else(|| (widest as f64).log2().max(1.0));
    let largest = factors.iter().map(SparseFactor::upper_bound_entropy).fold(0.0, f64::max);
    let mut tau = config.schedule.start.unwrap_or(largest + (widest as f64).log2());
    let inference = ConvergenceConfig { deadline: config.deadline, ..config.inference };

    loop {
        if stats.rounds >= config.max_rounds {
            return Err(CspError::RoundLimit(stats.rounds));
        }
        if config.deadline.is_some_and(|t| Instant::now() >= t) {
            return Err(CspError::Timeout);
        }
        stats.rounds += 1;

        let partition = cluster_factors(&factors, tau, config.metric)?;
        let mut merged = Vec::with_capacity(partition.len());
        let mut merges = 0;
        let mut failures = 0;
        let mut required = 0u128;
        let mut slots: Vec<Option<SparseFactor<P>>> = factors.into_iter().map(Some).collect();
        for members in partition {
            let group: Vec<SparseFactor<P>> = members.iter().map(|&k| slots[k].take().unwrap()).collect();
            if group.len() == 1 {
                merged.extend(group);
                continue;
            }
            match merge_cluster(&group, config.table_cap) {
                Ok(f) => {
                    merges += 1;
                    merged.push(f);
                }
                Err(FactorError::CapacityExceeded { required: r, .. }) => {
                    failures += 1;
                    required = required.max(r);
                    merged.extend(group);
                }
                Err(e) => return Err(e.into()),
            }
        }
        stats.merges += merges;
        stats.capacity_failures += failures;

        let factors_now = absorb_subsets_capped(merged, config.table_cap)?;
        for f in &factors_now {
            stats.max_table_entries = stats.max_table_entries.max(f.len());
            stats.max_upper_bound_entropy = stats.max_upper_bound_entropy.max(f.upper_bound_entropy());
        }
        let graph = ltrip(factors_now)?;
        let tree = is_tree(&graph);
        let outcome = loopy_propagate(&graph, &inference)?;
        stats.propagation_updates += outcome.stats.updates;
        debug!(
            "round {}: tau {:.2}, {} factors, {} merges, {} failures, tree {}, largest table {}",
            stats.rounds,
            tau,
            graph.len(),
            merges,
            failures,
            tree,
            stats.max_table_entries
        );
        factors = purge(outcome.beliefs, &mut domains, &mut solved)?;

        if tree || factors.is_empty() {
            stats.runtime = start.elapsed();
            return Ok(SolveResult { solved, residual_factors: factors, domains, graph_is_tree: true, stats });
        }
        if merges == 0 && failures > 0 {
            return Err(CspError::CapacityExceeded { required, cap: config.table_cap });
        }
        tau += step;
    }
}

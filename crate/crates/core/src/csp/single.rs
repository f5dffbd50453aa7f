//! One loopy propagation run on a fixed topology, without merging.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CspError, CspProblem, DomainMap};
use crate::factor::SparseFactor;
use crate::graph::{bethe, ltrip};
use crate::inference::{loopy_propagate, ConvergenceConfig, PropagationStats};
use crate::scalar::Potential;
use crate::var::{Assignment, Domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// Factor graph with univariate hubs.
    Bethe,
    /// Layered running-intersection trees.
    Ltrip,
}

impl Topology {
    pub const ALL: [Topology; 2] = [Topology::Bethe, Topology::Ltrip];

    pub fn name(self) -> &'static str {
        match self {
            Topology::Bethe => "bethe",
            Topology::Ltrip => "ltrip",
        }
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Topology {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bethe" | "factor" => Ok(Topology::Bethe),
            "ltrip" | "cluster" => Ok(Topology::Ltrip),
            _ => Err(format!("unknown topology `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SinglePass {
    pub topology: Topology,
    /// States each variable keeps in every belief that mentions it.
    pub domains: DomainMap,
    /// Evidence plus every variable left with one state.
    pub assignment: Assignment,
    pub clusters: usize,
    pub edges: usize,
    pub stats: PropagationStats,
}

impl SinglePass {
    /// True when every variable is left with exactly one state.
    pub fn is_solved(&self) -> bool {
        self.domains.values().all(|d| d.cardinality() == 1)
    }
}

/// Observes the evidence, builds `topology` over the factors and runs
/// loopy propagation once.
pub fn single_pass<P: Potential>(
    problem: &CspProblem<P>,
    topology: Topology,
    config: &ConvergenceConfig,
) -> Result<SinglePass, CspError> {
    let mut factors: Vec<SparseFactor<P>> = Vec::with_capacity(problem.factors.len());
    for f in &problem.factors {
        let g = f.observe(&problem.evidence);
        if g.is_empty() {
            return Err(CspError::contradiction(format!("clues rule out every entry of the factor over {:?}", f.scope())));
        }
        if g.arity() > 0 {
            factors.push(g);
        }
    }
    let graph = match topology {
        Topology::Bethe => bethe(factors)?,
        Topology::Ltrip => ltrip(factors)?,
    };
    let outcome = loopy_propagate(&graph, config)?;

    let mut domains = problem.domains.clone();
    for (v, s) in problem.evidence.iter() {
        domains.insert(v, Domain::new(vec![s]).expect("single state"));
    }
    for belief in &outcome.beliefs {
        for &v in belief.scope() {
            let support = belief.support_states(v).unwrap_or_default();
            let cur = domains.get(&v).cloned().unwrap_or_else(|| Domain::new(support.clone()).expect("non-empty support"));
            let meet = cur
                .restrict(|s| support.contains(&s))
                .ok_or_else(|| CspError::contradiction(format!("no state of {v} survives propagation")))?;
            domains.insert(v, meet);
        }
    }
    let assignment = domains.iter().filter(|(_, d)| d.cardinality() == 1).map(|(&v, d)| (v, d.states()[0])).collect();
    Ok(SinglePass {
        topology,
        domains,
        assignment,
        clusters: graph.len(),
        edges: graph.edge_count(),
        stats: outcome.stats,
    })
}

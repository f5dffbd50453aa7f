//! Domain and variable reduction.

use std::collections::BTreeMap;

use super::CspError;
use crate::factor::SparseFactor;
use crate::scalar::Potential;
use crate::var::{Assignment, Domain, VariableId};

/// Current domain of every variable.
pub type DomainMap = BTreeMap<VariableId, Domain>;

/// Intersection of the domains each factor declares for its variables.
pub fn domain_map<P: Potential>(factors: &[SparseFactor<P>]) -> Result<DomainMap, CspError> {
    let mut out = DomainMap::new();
    for f in factors {
        for (v, d) in f.scope().iter().zip(f.domains()) {
            match out.get(v) {
                None => {
                    out.insert(*v, d.clone());
                }
                Some(cur) if cur != d => {
                    let meet = cur.intersect(d).ok_or_else(|| CspError::contradiction(format!("domain of {v} is empty")))?;
                    out.insert(*v, meet);
                }
                Some(_) => {}
            }
        }
    }
    Ok(out)
}

/// Deletes every state that has no support in some factor containing its
/// variable, from the domain and from every table, until nothing changes.
pub fn reduce_domains<P: Potential>(factors: Vec<SparseFactor<P>>) -> Result<Vec<SparseFactor<P>>, CspError> {
    let mut domains = domain_map(&factors)?;
    reduce_domains_with(factors, &mut domains)
}

pub fn reduce_domains_with<P: Potential>(
    mut factors: Vec<SparseFactor<P>>,
    domains: &mut DomainMap,
) -> Result<Vec<SparseFactor<P>>, CspError> {
    let mut dirty = true;
    loop {
        if dirty {
            factors = factors.into_iter().map(|f| f.restrict_domains(|v| domains.get(&v))).collect();
        }
        if let Some(f) = factors.iter().find(|f| f.is_empty()) {
            return Err(CspError::contradiction(format!("factor over {:?} has no consistent entry", f.scope())));
        }
        dirty = false;
        for f in &factors {
            for &v in f.scope() {
                let support = f.support_states(v).expect("variable in scope");
                let cur = &domains[&v];
                if support.len() < cur.cardinality() {
                    let next = cur
                        .restrict(|s| support.binary_search(&s).is_ok())
                        .ok_or_else(|| CspError::contradiction(format!("domain of {v} is empty")))?;
                    domains.insert(v, next);
                    dirty = true;
                }
            }
        }
        if !dirty {
            return Ok(factors);
        }
    }
}

/// Observes every variable that some factor pins to a single state, drops
/// it from all scopes, and repeats until no factor pins a variable. Factors
/// left with an empty scope are removed.
pub fn reduce_variables<P: Potential>(
    mut factors: Vec<SparseFactor<P>>,
) -> Result<(Assignment, Vec<SparseFactor<P>>), CspError> {
    let mut evidence = Assignment::new();
    loop {
        let mut fresh = Assignment::new();
        for f in &factors {
            if f.is_empty() {
                return Err(CspError::contradiction(format!("factor over {:?} has no consistent entry", f.scope())));
            }
            for &v in f.scope() {
                let support = f.support_states(v).expect("variable in scope");
                if let [s] = support[..] {
                    if let Some(prev) = fresh.insert(v, s) {
                        if prev != s {
                            return Err(CspError::contradiction(format!("{v} is forced to both {prev} and {s}")));
                        }
                    }
                }
            }
        }
        if fresh.is_empty() {
            return Ok((evidence, factors));
        }
        let mut next = Vec::with_capacity(factors.len());
        for f in factors {
            let g = f.observe(&fresh);
            if g.is_empty() {
                return Err(CspError::contradiction(format!("observing {fresh:?} empties a factor")));
            }
            if g.arity() > 0 {
                next.push(g);
            }
        }
        factors = next;
        evidence.extend(fresh.iter());
    }
}

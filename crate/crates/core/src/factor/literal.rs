//! JSON literal form of a factor, used by fixtures and tests:
//! `{"scope":[names], "domains":{name:[values]}, "entries":[{"assign":[indices],"p":real}]}`.
//! `assign` holds indices into each variable's listed domain values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FactorError, SparseFactor};
use crate::scalar::Potential;
use crate::var::{Domain, State, VarRegistry};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorLiteral {
    pub scope: Vec<String>,
    pub domains: BTreeMap<String, Vec<State>>,
    pub entries: Vec<EntryLiteral>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryLiteral {
    pub assign: Vec<usize>,
    pub p: f64,
}

impl<P: Potential> SparseFactor<P> {
    /// Builds a factor from its literal, interning variable names in `reg`.
    pub fn from_literal(lit: &FactorLiteral, reg: &mut VarRegistry) -> Result<Self, FactorError> {
        let mut scope = Vec::with_capacity(lit.scope.len());
        for name in &lit.scope {
            let v = reg.intern(name);
            let values = lit.domains.get(name).ok_or(FactorError::UnknownVariable(v))?;
            let domain = Domain::new(values.clone()).map_err(|_| FactorError::ScopeMismatch)?;
            scope.push((v, domain, values));
        }
        let mut entries = Vec::with_capacity(lit.entries.len());
        for e in &lit.entries {
            if e.assign.len() != scope.len() {
                return Err(FactorError::ArityMismatch { expected: scope.len(), found: e.assign.len() });
            }
            let mut row = Vec::with_capacity(scope.len());
            for (&ix, (v, _, values)) in e.assign.iter().zip(&scope) {
                let s = *values
                    .get(ix)
                    .ok_or(FactorError::OutOfDomainValue { variable: *v, state: ix as State })?;
                row.push(s);
            }
            entries.push((row, P::from_f64_lossy(e.p)));
        }
        SparseFactor::new(scope.into_iter().map(|(v, d, _)| (v, d)).collect(), entries)
    }

    pub fn to_literal(&self, reg: &VarRegistry) -> FactorLiteral {
        let scope: Vec<String> = self.scope.iter().map(|&v| reg.name(v)).collect();
        let domains = scope
            .iter()
            .zip(&self.domains)
            .map(|(n, d)| (n.clone(), d.states().to_vec()))
            .collect();
        let entries = self
            .iter()
            .map(|(row, p)| EntryLiteral {
                assign: row
                    .iter()
                    .zip(&self.domains)
                    .map(|(&s, d)| d.position(s).expect("stored state lies in its domain"))
                    .collect(),
                p: p.as_f64(),
            })
            .collect();
        FactorLiteral { scope, domains, entries }
    }
}

//! Sparse discrete factors.
//!
//! A [`SparseFactor`] lists only the joint assignments with a strictly
//! positive potential; every assignment that is not stored has potential
//! zero. Rows are kept sorted lexicographically over a scope that is itself
//! sorted by [`VariableId`], so iteration order and tie-breaking are
//! reproducible.
//!
//! Factors are immutable values: every operation returns a new factor.

mod literal;
mod ops;

pub use literal::{EntryLiteral, FactorLiteral};

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Potential;
use crate::var::{Assignment, Domain, State, VariableId};

/// Largest number of rows any single factor operation may materialise.
pub const DEFAULT_TABLE_CAP: usize = 1 << 27;

/// Normalisation and marginalisation semantics.
///
/// `Max` is the constraint-satisfaction setting: potentials stay in `{0, 1}`
/// once normalised. `Sum` gives ordinary probabilistic marginals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    Sum,
    #[default]
    Max,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactorError {
    #[error("assignment listed twice")]
    DuplicateEntry,
    #[error("variable {0} appears twice in the scope")]
    DuplicateVariable(VariableId),
    #[error("state {state} is outside the domain of {variable}")]
    OutOfDomainValue { variable: VariableId, state: State },
    #[error("potentials must be finite and strictly positive")]
    NonPositivePotential,
    #[error("assignment has {found} states but the scope has {expected} variables")]
    ArityMismatch { expected: usize, found: usize },
    #[error("shared variable {0} has different domains in the two operands")]
    DomainMismatch(VariableId),
    #[error("divisor scope is not a subset of the dividend scope")]
    ScopeNotSubset,
    #[error("division of a positive entry by zero")]
    DivisionByZero,
    #[error("variable {0} is not in the scope")]
    UnknownVariable(VariableId),
    #[error("factor has an empty support")]
    EmptySupport,
    #[error("operands have different scopes or domains")]
    ScopeMismatch,
    #[error("operation needs {required} entries, above the cap of {cap}")]
    CapacityExceeded { required: u128, cap: usize },
}

/// A potential table over an ordered scope, storing only positive entries.
#[derive(Clone, PartialEq)]
pub struct SparseFactor<P> {
    scope: Vec<VariableId>,
    domains: Vec<Domain>,
    states: Vec<State>,
    values: Vec<P>,
}

impl<P: Potential> SparseFactor<P> {
    /// Builds a factor from `(variable, domain)` pairs and entries whose
    /// states follow the order of `scope` as given.
    pub fn new<I>(scope: Vec<(VariableId, Domain)>, entries: I) -> Result<Self, FactorError>
    where
        I: IntoIterator<Item = (Vec<State>, P)>,
    {
        let arity = scope.len();
        let mut order: Vec<usize> = (0..arity).collect();
        order.sort_by_key(|&c| scope[c].0);
        if let Some(w) = order.windows(2).find(|w| scope[w[0]].0 == scope[w[1]].0) {
            return Err(FactorError::DuplicateVariable(scope[w[0]].0));
        }
        let vars: Vec<VariableId> = order.iter().map(|&c| scope[c].0).collect();
        let domains: Vec<Domain> = order.iter().map(|&c| scope[c].1.clone()).collect();

        let mut states = Vec::new();
        let mut values = Vec::new();
        for (row, p) in entries {
            if row.len() != arity {
                return Err(FactorError::ArityMismatch { expected: arity, found: row.len() });
            }
            if !(p.is_finite() && p > P::zero()) {
                return Err(FactorError::NonPositivePotential);
            }
            for &c in &order {
                let s = row[c];
                if !scope[c].1.contains(s) {
                    return Err(FactorError::OutOfDomainValue { variable: scope[c].0, state: s });
                }
                states.push(s);
            }
            values.push(p);
        }
        let (states, values, dup) = sort_rows(arity, states, values);
        if dup {
            return Err(FactorError::DuplicateEntry);
        }
        Ok(SparseFactor { scope: vars, domains, states, values })
    }

    /// All-ones factor over the full dense assignment space of `scope`.
    pub fn vacuous(scope: Vec<(VariableId, Domain)>) -> Result<Self, FactorError> {
        Self::vacuous_capped(scope, DEFAULT_TABLE_CAP)
    }

    pub fn vacuous_capped(
        mut scope: Vec<(VariableId, Domain)>,
        cap: usize,
    ) -> Result<Self, FactorError> {
        scope.sort_by_key(|(v, _)| *v);
        if let Some(w) = scope.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(FactorError::DuplicateVariable(w[0].0));
        }
        let required = scope
            .iter()
            .map(|(_, d)| d.cardinality() as u128)
            .try_fold(1u128, |acc, c| acc.checked_mul(c))
            .unwrap_or(u128::MAX);
        if required > cap as u128 {
            return Err(FactorError::CapacityExceeded { required, cap });
        }
        let (vars, domains): (Vec<_>, Vec<_>) = scope.into_iter().unzip();
        let arity = vars.len();
        let rows = required as usize;
        let mut states = Vec::with_capacity(rows * arity);
        let mut digits = vec![0usize; arity];
        for _ in 0..rows {
            states.extend(digits.iter().zip(&domains).map(|(&d, dom)| dom.states()[d]));
            for c in (0..arity).rev() {
                digits[c] += 1;
                if digits[c] < domains[c].cardinality() {
                    break;
                }
                digits[c] = 0;
            }
        }
        Ok(SparseFactor { scope: vars, domains, states, values: vec![P::one(); rows] })
    }

    /// Factor over an empty scope holding a single value (or nothing when
    /// `p` is zero).
    pub fn scalar(p: P) -> Self {
        let values = if p > P::zero() { vec![p] } else { Vec::new() };
        SparseFactor { scope: Vec::new(), domains: Vec::new(), states: Vec::new(), values }
    }

    /// Assembles a factor from already-validated parts; rows are sorted and
    /// non-positive values dropped.
    pub(crate) fn from_parts(
        scope: Vec<VariableId>,
        domains: Vec<Domain>,
        states: Vec<State>,
        values: Vec<P>,
    ) -> Self {
        debug_assert!(scope.windows(2).all(|w| w[0] < w[1]));
        let arity = scope.len();
        let (states, values) = drop_zeros(arity, states, values);
        let (states, values, dup) = sort_rows(arity, states, values);
        debug_assert!(!dup, "duplicate rows in from_parts");
        SparseFactor { scope, domains, states, values }
    }

    pub fn scope(&self) -> &[VariableId] {
        &self.scope
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    /// `(variable, domain)` pairs, suitable for rebuilding a related factor.
    pub fn scope_domains(&self) -> Vec<(VariableId, Domain)> {
        self.scope.iter().copied().zip(self.domains.iter().cloned()).collect()
    }

    pub fn arity(&self) -> usize {
        self.scope.len()
    }

    /// Number of stored (non-zero) entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when no entry is stored: the factor rules out every outcome.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn position(&self, v: VariableId) -> Option<usize> {
        self.scope.binary_search(&v).ok()
    }

    pub fn contains(&self, v: VariableId) -> bool {
        self.position(v).is_some()
    }

    pub fn domain_of(&self, v: VariableId) -> Option<&Domain> {
        self.position(v).map(|c| &self.domains[c])
    }

    pub fn row(&self, i: usize) -> &[State] {
        let k = self.arity();
        &self.states[i * k..(i + 1) * k]
    }

    pub fn value(&self, i: usize) -> P {
        self.values[i]
    }

    pub fn values(&self) -> &[P] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[State], P)> + '_ {
        (0..self.len()).map(move |i| (self.row(i), self.values[i]))
    }

    /// Potential of a full row over the scope; zero when absent.
    pub fn get(&self, row: &[State]) -> P {
        self.find_row(row).map_or_else(P::zero, |i| self.values[i])
    }

    pub(crate) fn find_row(&self, row: &[State]) -> Option<usize> {
        if row.len() != self.arity() {
            return None;
        }
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.row(mid).cmp(row) {
                Ordering::Less => lo = mid + 1,
                Ordering::Greater => hi = mid,
                Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    /// Potential of the projection of `a` onto the scope, or `None` when `a`
    /// does not cover the scope.
    pub fn evaluate(&self, a: &Assignment) -> Option<P> {
        let row: Option<Vec<State>> = self.scope.iter().map(|&v| a.get(v)).collect();
        row.map(|r| self.get(&r))
    }

    /// Entry at row `i` as an assignment.
    pub fn assignment(&self, i: usize) -> Assignment {
        self.scope.iter().copied().zip(self.row(i).iter().copied()).collect()
    }

    /// Distinct states of `v` occurring in the support, ascending.
    pub fn support_states(&self, v: VariableId) -> Option<Vec<State>> {
        let c = self.position(v)?;
        let d = &self.domains[c];
        let mut seen = vec![false; d.cardinality()];
        for i in 0..self.len() {
            seen[d.position(self.row(i)[c]).expect("stored state lies in its domain")] = true;
        }
        Some(d.states().iter().zip(seen).filter(|p| p.1).map(|p| *p.0).collect())
    }

    /// Size of the dense assignment space, saturating at `u128::MAX`.
    pub fn dense_size(&self) -> u128 {
        self.domains
            .iter()
            .map(|d| d.cardinality() as u128)
            .try_fold(1u128, |acc, c| acc.checked_mul(c))
            .unwrap_or(u128::MAX)
    }

    pub fn upper_bound_entropy(&self) -> f64 {
        upper_bound_entropy(self.domains.iter())
    }

    pub fn total(&self) -> P {
        self.values.iter().fold(P::zero(), |a, &b| a + b)
    }

    pub fn max_value(&self) -> P {
        self.values.iter().fold(P::zero(), |a, &b| a.max(b))
    }

    pub(crate) fn same_layout(&self, other: &Self) -> bool {
        self.scope == other.scope && self.domains == other.domains
    }
}

impl<P: Potential> fmt::Debug for SparseFactor<P> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("SparseFactor");
        d.field("scope", &self.scope).field("len", &self.len());
        if self.len() <= 16 {
            let rows: Vec<_> = self.iter().map(|(r, p)| (r.to_vec(), p)).collect();
            d.field("entries", &rows);
        }
        d.finish()
    }
}

/// `log2` of the dense assignment-space size of a set of domains; zero for
/// an empty scope.
pub fn upper_bound_entropy<'a>(domains: impl IntoIterator<Item = &'a Domain>) -> f64 {
    domains.into_iter().map(Domain::entropy_bound).sum()
}

fn drop_zeros<P: Potential>(arity: usize, states: Vec<State>, values: Vec<P>) -> (Vec<State>, Vec<P>) {
    if values.iter().all(|&v| v > P::zero()) {
        return (states, values);
    }
    let mut s2 = Vec::with_capacity(states.len());
    let mut v2 = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if v > P::zero() {
            s2.extend_from_slice(&states[i * arity..(i + 1) * arity]);
            v2.push(v);
        }
    }
    (s2, v2)
}

/// Sorts rows lexicographically; the flag reports duplicate rows.
fn sort_rows<P: Copy>(arity: usize, states: Vec<State>, values: Vec<P>) -> (Vec<State>, Vec<P>, bool) {
    let n = values.len();
    if arity == 0 {
        return (states, values, n > 1);
    }
    let row = |i: usize| &states[i * arity..(i + 1) * arity];
    let mut sorted = true;
    for i in 1..n {
        match row(i - 1).cmp(row(i)) {
            Ordering::Less => {}
            Ordering::Equal => return (states, values, true),
            Ordering::Greater => {
                sorted = false;
                break;
            }
        }
    }
    if sorted {
        return (states, values, false);
    }
    let mut idx: Vec<u32> = (0..n as u32).collect();
    idx.sort_unstable_by(|&a, &b| row(a as usize).cmp(row(b as usize)));
    let dup = idx.windows(2).any(|w| row(w[0] as usize) == row(w[1] as usize));
    let mut s2 = Vec::with_capacity(states.len());
    let mut v2 = Vec::with_capacity(n);
    for &i in &idx {
        s2.extend_from_slice(row(i as usize));
        v2.push(values[i as usize]);
    }
    (s2, v2, dup)
}

#[cfg(test)]
mod tests;

//! Variables, domains and assignments.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Opaque handle of a discrete random variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VariableId(pub u32);

impl fmt::Display for VariableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

/// A value a variable can take. States are small integer symbols (digits,
/// colours, bits); assignments carry the symbol itself so that shrinking a
/// domain never renumbers stored entries.
pub type State = u16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("domain must contain at least one state")]
    Empty,
    #[error("duplicate state {0} in domain")]
    Duplicate(State),
}

/// The admissible states of one variable, kept in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<State>", into = "Vec<State>")]
pub struct Domain {
    states: Vec<State>,
}

impl Domain {
    pub fn new(mut states: Vec<State>) -> Result<Self, DomainError> {
        if states.is_empty() {
            return Err(DomainError::Empty);
        }
        states.sort_unstable();
        if let Some(w) = states.windows(2).find(|w| w[0] == w[1]) {
            return Err(DomainError::Duplicate(w[0]));
        }
        Ok(Domain { states })
    }

    /// States `lo..=hi`.
    pub fn range(lo: State, hi: State) -> Self {
        assert!(lo <= hi, "empty domain range {lo}..={hi}");
        Domain { states: (lo..=hi).collect() }
    }

    pub fn binary() -> Self {
        Domain::range(0, 1)
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn cardinality(&self) -> usize {
        self.states.len()
    }

    pub fn contains(&self, s: State) -> bool {
        self.states.binary_search(&s).is_ok()
    }

    /// Index of `s` within the ordered state list.
    pub fn position(&self, s: State) -> Option<usize> {
        self.states.binary_search(&s).ok()
    }

    /// Keeps the states accepted by `keep`; `None` when nothing survives.
    pub fn restrict(&self, mut keep: impl FnMut(State) -> bool) -> Option<Domain> {
        let states: Vec<State> = self.states.iter().copied().filter(|&s| keep(s)).collect();
        (!states.is_empty()).then_some(Domain { states })
    }

    pub fn intersect(&self, other: &Domain) -> Option<Domain> {
        self.restrict(|s| other.contains(s))
    }

    /// `log2` of the cardinality.
    pub fn entropy_bound(&self) -> f64 {
        (self.states.len() as f64).log2()
    }
}

impl TryFrom<Vec<State>> for Domain {
    type Error = DomainError;
    fn try_from(v: Vec<State>) -> Result<Self, Self::Error> {
        Domain::new(v)
    }
}

impl From<Domain> for Vec<State> {
    fn from(d: Domain) -> Self {
        d.states
    }
}

/// A (partial) joint assignment of states to variables.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<VariableId, State>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, v: VariableId) -> Option<State> {
        self.0.get(&v).copied()
    }

    pub fn insert(&mut self, v: VariableId, s: State) -> Option<State> {
        self.0.insert(v, s)
    }

    pub fn remove(&mut self, v: VariableId) -> Option<State> {
        self.0.remove(&v)
    }

    pub fn contains(&self, v: VariableId) -> bool {
        self.0.contains_key(&v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VariableId, State)> + '_ {
        self.0.iter().map(|(&v, &s)| (v, s))
    }

    pub fn variables(&self) -> impl Iterator<Item = VariableId> + '_ {
        self.0.keys().copied()
    }

    /// Adds every pair of `other`; fails with the first conflicting variable.
    pub fn merge(&mut self, other: &Assignment) -> Result<(), VariableId> {
        for (v, s) in other.iter() {
            match self.0.insert(v, s) {
                Some(prev) if prev != s => {
                    self.0.insert(v, prev);
                    return Err(v);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

impl FromIterator<(VariableId, State)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (VariableId, State)>>(iter: I) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

impl Extend<(VariableId, State)> for Assignment {
    fn extend<I: IntoIterator<Item = (VariableId, State)>>(&mut self, iter: I) {
        self.0.extend(iter)
    }
}

/// Bijective mapping between variable labels and dense ids `0..n`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VarRegistry {
    labels: Vec<String>,
    index: HashMap<String, VariableId>,
}

impl VarRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `label`, registering it when unseen.
    pub fn intern(&mut self, label: &str) -> VariableId {
        if let Some(&id) = self.index.get(label) {
            return id;
        }
        let id = VariableId(self.labels.len() as u32);
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<VariableId> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: VariableId) -> Option<&str> {
        self.labels.get(id.0 as usize).map(String::as_str)
    }

    /// Label when registered, otherwise the numeric form `x<id>`.
    pub fn name(&self, id: VariableId) -> String {
        self.label(id).map_or_else(|| id.to_string(), str::to_owned)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = VariableId> {
        (0..self.labels.len() as u32).map(VariableId)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_rejects_duplicates_and_empty() {
        assert_eq!(Domain::new(vec![]), Err(DomainError::Empty));
        assert_eq!(Domain::new(vec![1, 2, 1]), Err(DomainError::Duplicate(1)));
        let d = Domain::new(vec![3, 1, 2]).unwrap();
        assert_eq!(d.states(), &[1, 2, 3]);
        assert_eq!(d.position(3), Some(2));
    }

    #[test]
    fn restriction_only_shrinks() {
        let d = Domain::range(1, 9);
        let odd = d.restrict(|s| s % 2 == 1).unwrap();
        assert_eq!(odd.cardinality(), 5);
        assert!(odd.restrict(|s| s > 9).is_none());
    }

    #[test]
    fn registry_is_bijective() {
        let mut reg = VarRegistry::new();
        let a = reg.intern("A");
        let b = reg.intern("B");
        assert_eq!(reg.intern("A"), a);
        assert_ne!(a, b);
        assert_eq!(reg.label(b), Some("B"));
        assert_eq!(reg.id("B"), Some(b));
        assert_eq!(reg.name(VariableId(7)), "x7");
    }

    #[test]
    fn merge_detects_conflicts() {
        let mut a: Assignment = [(VariableId(0), 1)].into_iter().collect();
        let b: Assignment = [(VariableId(0), 2)].into_iter().collect();
        assert_eq!(a.merge(&b), Err(VariableId(0)));
        assert_eq!(a.get(VariableId(0)), Some(1));
    }
}

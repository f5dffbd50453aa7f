use std::cmp::Ordering;

use rustc_hash::FxHashMap;

use super::{FactorError, NormMode, SparseFactor, DEFAULT_TABLE_CAP};
use crate::scalar::Potential;
use crate::var::{Assignment, Domain, State, VariableId};

const NIL: u32 = u32::MAX;

/// Hash index from the projection of each row onto `cols` to the rows
/// sharing it, chained through `next`.
struct RowIndex<'a> {
    heads: FxHashMap<&'a [State], (u32, u32)>,
    next: Vec<u32>,
}

impl<'a> RowIndex<'a> {
    fn build(keys: &'a [State], width: usize, rows: usize) -> Self {
        let mut heads: FxHashMap<&[State], (u32, u32)> = FxHashMap::default();
        heads.reserve(rows.min(1 << 20));
        let mut next = vec![NIL; rows];
        for r in 0..rows {
            let key = &keys[r * width..(r + 1) * width];
            let slot = heads.entry(key).or_insert((NIL, 0));
            next[r] = slot.0;
            *slot = (r as u32, slot.1 + 1);
        }
        RowIndex { heads, next }
    }

    fn count(&self, key: &[State]) -> u32 {
        self.heads.get(key).map_or(0, |&(_, c)| c)
    }

    fn rows(&self, key: &[State]) -> impl Iterator<Item = usize> + '_ {
        let mut cur = self.heads.get(key).map_or(NIL, |&(h, _)| h);
        std::iter::from_fn(move || {
            (cur != NIL).then(|| {
                let r = cur as usize;
                cur = self.next[r];
                r
            })
        })
    }
}

fn project(f: &[State], arity: usize, rows: usize, cols: &[usize]) -> Vec<State> {
    let mut out = Vec::with_capacity(rows * cols.len());
    for r in 0..rows {
        let row = &f[r * arity..(r + 1) * arity];
        out.extend(cols.iter().map(|&c| row[c]));
    }
    out
}

#[derive(Clone, Copy)]
enum Src {
    Left(usize),
    Right(usize),
}

impl<P: Potential> SparseFactor<P> {
    /// Factor product over the union of both scopes.
    pub fn multiply(&self, other: &Self) -> Result<Self, FactorError> {
        self.multiply_capped(other, DEFAULT_TABLE_CAP)
    }

    /// Number of rows `multiply` would produce, computed without
    /// materialising the product.
    pub fn product_size(&self, other: &Self) -> Result<u128, FactorError> {
        let layout = Layout::of(self, other)?;
        let rkeys = project(&other.states, other.arity(), other.len(), &layout.right_shared);
        let index = RowIndex::build(&rkeys, layout.right_shared.len(), other.len());
        let mut key = Vec::with_capacity(layout.left_shared.len());
        let mut total: u128 = 0;
        for i in 0..self.len() {
            key.clear();
            key.extend(layout.left_shared.iter().map(|&c| self.row(i)[c]));
            total += index.count(&key) as u128;
        }
        Ok(total)
    }

    pub fn multiply_capped(&self, other: &Self, cap: usize) -> Result<Self, FactorError> {
        let layout = Layout::of(self, other)?;
        let width = layout.right_shared.len();
        let rkeys = project(&other.states, other.arity(), other.len(), &layout.right_shared);
        let index = RowIndex::build(&rkeys, width, other.len());

        let mut key = Vec::with_capacity(width);
        let mut required: u128 = 0;
        for i in 0..self.len() {
            key.clear();
            key.extend(layout.left_shared.iter().map(|&c| self.row(i)[c]));
            required += index.count(&key) as u128;
        }
        if required > cap as u128 {
            return Err(FactorError::CapacityExceeded { required, cap });
        }

        let arity = layout.scope.len();
        let mut states = Vec::with_capacity(required as usize * arity);
        let mut values = Vec::with_capacity(required as usize);
        for i in 0..self.len() {
            let lrow = self.row(i);
            key.clear();
            key.extend(layout.left_shared.iter().map(|&c| lrow[c]));
            for r in index.rows(&key) {
                let rrow = other.row(r);
                states.extend(layout.src.iter().map(|s| match *s {
                    Src::Left(c) => lrow[c],
                    Src::Right(c) => rrow[c],
                }));
                values.push(self.values[i] * other.values[r]);
            }
        }
        Ok(SparseFactor::from_parts(layout.scope, layout.domains, states, values))
    }

    /// Element-wise quotient `self / other` where `scope(other) ⊆ scope(self)`.
    /// Entries absent from `self` stay absent (`0/0 = 0`).
    pub fn divide(&self, other: &Self) -> Result<Self, FactorError> {
        let mut cols = Vec::with_capacity(other.arity());
        for (k, &v) in other.scope.iter().enumerate() {
            let c = self.position(v).ok_or(FactorError::ScopeNotSubset)?;
            if self.domains[c] != other.domains[k] {
                return Err(FactorError::DomainMismatch(v));
            }
            cols.push(c);
        }
        let mut key = Vec::with_capacity(cols.len());
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            key.clear();
            key.extend(cols.iter().map(|&c| self.row(i)[c]));
            match other.find_row(&key) {
                Some(r) => values.push(self.values[i] / other.values[r]),
                None => return Err(FactorError::DivisionByZero),
            }
        }
        Ok(SparseFactor::from_parts(
            self.scope.clone(),
            self.domains.clone(),
            self.states.clone(),
            values,
        ))
    }

    /// Eliminates every variable not in `keep`, summing or maximising.
    pub fn marginalize(&self, keep: &[VariableId], mode: NormMode) -> Result<Self, FactorError> {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let cols = keep
            .iter()
            .map(|&v| self.position(v).ok_or(FactorError::UnknownVariable(v)))
            .collect::<Result<Vec<_>, _>>()?;
        if cols.len() == self.arity() {
            return Ok(self.clone());
        }
        let width = cols.len();
        let keys = project(&self.states, self.arity(), self.len(), &cols);
        let mut slots: FxHashMap<&[State], usize> = FxHashMap::default();
        let mut states = Vec::new();
        let mut values: Vec<P> = Vec::new();
        for i in 0..self.len() {
            let key = &keys[i * width..(i + 1) * width];
            let v = self.values[i];
            match slots.get(key) {
                Some(&o) => {
                    values[o] = match mode {
                        NormMode::Sum => values[o] + v,
                        NormMode::Max => values[o].max(v),
                    }
                }
                None => {
                    slots.insert(key, values.len());
                    states.extend_from_slice(key);
                    values.push(v);
                }
            }
        }
        let domains = cols.iter().map(|&c| self.domains[c].clone()).collect();
        Ok(SparseFactor::from_parts(keep, domains, states, values))
    }

    /// Keeps the entries consistent with `evidence` and drops the observed
    /// variables from the scope. The result is not renormalised.
    pub fn reduce(&self, evidence: &Assignment) -> Result<Self, FactorError> {
        let mut fixed = Vec::with_capacity(evidence.len());
        for (v, s) in evidence.iter() {
            let c = self.position(v).ok_or(FactorError::UnknownVariable(v))?;
            if !self.domains[c].contains(s) {
                return Err(FactorError::OutOfDomainValue { variable: v, state: s });
            }
            fixed.push((c, s));
        }
        Ok(self.reduce_columns(&fixed))
    }

    /// Like [`reduce`](Self::reduce) but ignores evidence on variables outside
    /// the scope; an observed state outside a domain empties the factor.
    pub fn observe(&self, evidence: &Assignment) -> Self {
        let fixed: Vec<(usize, State)> = evidence
            .iter()
            .filter_map(|(v, s)| self.position(v).map(|c| (c, s)))
            .collect();
        if fixed.is_empty() {
            return self.clone();
        }
        self.reduce_columns(&fixed)
    }

    fn reduce_columns(&self, fixed: &[(usize, State)]) -> Self {
        let kept: Vec<usize> = (0..self.arity()).filter(|c| !fixed.iter().any(|f| f.0 == *c)).collect();
        let mut states = Vec::new();
        let mut values = Vec::new();
        for i in 0..self.len() {
            let row = self.row(i);
            if fixed.iter().all(|&(c, s)| row[c] == s) {
                states.extend(kept.iter().map(|&c| row[c]));
                values.push(self.values[i]);
            }
        }
        let scope = kept.iter().map(|&c| self.scope[c]).collect();
        let domains = kept.iter().map(|&c| self.domains[c].clone()).collect();
        // Filtering a sorted table by fixed columns keeps the remaining rows sorted.
        SparseFactor { scope, domains, states, values }
    }

    /// Restricts each variable to the domain returned by `lookup` (variables
    /// for which it returns `None` keep their domain), removing entries that
    /// fall outside.
    pub fn restrict_domains<'d>(&self, lookup: impl Fn(VariableId) -> Option<&'d Domain>) -> Self {
        let domains: Vec<Domain> = self
            .scope
            .iter()
            .zip(&self.domains)
            .map(|(&v, d)| lookup(v).cloned().unwrap_or_else(|| d.clone()))
            .collect();
        if domains == self.domains {
            return self.clone();
        }
        let mut states = Vec::with_capacity(self.states.len());
        let mut values = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let row = self.row(i);
            if row.iter().zip(&domains).all(|(&s, d)| d.contains(s)) {
                states.extend_from_slice(row);
                values.push(self.values[i]);
            }
        }
        SparseFactor { scope: self.scope.clone(), domains, states, values }
    }

    /// Divides by the total (`Sum`) or the maximum (`Max`).
    pub fn normalize(&self, mode: NormMode) -> Result<Self, FactorError> {
        if self.is_empty() {
            return Err(FactorError::EmptySupport);
        }
        let z = match mode {
            NormMode::Sum => self.total(),
            NormMode::Max => self.max_value(),
        };
        let mut out = self.clone();
        for v in &mut out.values {
            *v = *v / z;
        }
        if out.values.iter().any(|&v| v.partial_cmp(&P::zero()) != Some(std::cmp::Ordering::Greater)) {
            let (s, v) = super::drop_zeros(out.arity(), out.states, out.values);
            out.states = s;
            out.values = v;
        }
        Ok(out)
    }

    /// `lambda * self + (1 - lambda) * prev` over the union of both supports.
    pub fn damp(&self, prev: &Self, lambda: P) -> Result<Self, FactorError> {
        if !self.same_layout(prev) {
            return Err(FactorError::ScopeMismatch);
        }
        let keep = P::one() - lambda;
        let mut states = Vec::with_capacity(self.states.len().max(prev.states.len()));
        let mut values = Vec::with_capacity(self.len().max(prev.len()));
        merge_join(self, prev, |row, a, b| {
            let v = lambda * a + keep * b;
            if v > P::zero() {
                states.extend_from_slice(row);
                values.push(v);
            }
        });
        Ok(SparseFactor { scope: self.scope.clone(), domains: self.domains.clone(), states, values })
    }

    /// Kullback-Leibler divergence `D(self || q)` in nats after
    /// sum-normalising both operands. Returns `f64::INFINITY` when `self`
    /// has mass where `q` has none.
    pub fn divergence(&self, q: &Self) -> Result<f64, FactorError> {
        if !self.same_layout(q) {
            return Err(FactorError::ScopeMismatch);
        }
        if self.is_empty() {
            return Ok(0.0);
        }
        let zp = self.total().as_f64();
        let zq = q.total().as_f64();
        let mut d = 0.0;
        let mut infinite = false;
        merge_join(self, q, |_, a, b| {
            let p = a.as_f64() / zp;
            if p > 0.0 {
                if b > P::zero() {
                    d += p * (p / (b.as_f64() / zq)).ln();
                } else {
                    infinite = true;
                }
            }
        });
        Ok(if infinite { f64::INFINITY } else { d.max(0.0) })
    }

    /// Informedness of the factor: base-2 KL divergence of the
    /// sum-normalised table from the uniform distribution over its dense
    /// assignment space. For a 0/1 table with `k` of `N` entries this is
    /// `log2(N / k)`.
    pub fn mass(&self) -> Result<f64, FactorError> {
        if self.is_empty() {
            return Err(FactorError::EmptySupport);
        }
        let z = self.total().as_f64();
        let neg_entropy: f64 = self
            .values
            .iter()
            .map(|&v| {
                let p = v.as_f64() / z;
                p * p.log2()
            })
            .sum();
        Ok((self.upper_bound_entropy() + neg_entropy).max(0.0))
    }
}

/// Walks two factors with identical layout in row order, calling `f` with
/// the potentials from each side (zero when absent).
fn merge_join<P: Potential>(a: &SparseFactor<P>, b: &SparseFactor<P>, mut f: impl FnMut(&[State], P, P)) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ord = match (i < a.len(), j < b.len()) {
            (true, true) => a.row(i).cmp(b.row(j)),
            (true, false) => Ordering::Less,
            _ => Ordering::Greater,
        };
        match ord {
            Ordering::Less => {
                f(a.row(i), a.values[i], P::zero());
                i += 1;
            }
            Ordering::Greater => {
                f(b.row(j), P::zero(), b.values[j]);
                j += 1;
            }
            Ordering::Equal => {
                f(a.row(i), a.values[i], b.values[j]);
                i += 1;
                j += 1;
            }
        }
    }
}

struct Layout {
    scope: Vec<VariableId>,
    domains: Vec<Domain>,
    src: Vec<Src>,
    left_shared: Vec<usize>,
    right_shared: Vec<usize>,
}

impl Layout {
    fn of<P: Potential>(l: &SparseFactor<P>, r: &SparseFactor<P>) -> Result<Self, FactorError> {
        let mut out = Layout {
            scope: Vec::with_capacity(l.arity() + r.arity()),
            domains: Vec::with_capacity(l.arity() + r.arity()),
            src: Vec::with_capacity(l.arity() + r.arity()),
            left_shared: Vec::new(),
            right_shared: Vec::new(),
        };
        let (mut i, mut j) = (0, 0);
        while i < l.arity() || j < r.arity() {
            let ord = match (i < l.arity(), j < r.arity()) {
                (true, true) => l.scope[i].cmp(&r.scope[j]),
                (true, false) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.scope.push(l.scope[i]);
                    out.domains.push(l.domains[i].clone());
                    out.src.push(Src::Left(i));
                    i += 1;
                }
                Ordering::Greater => {
                    out.scope.push(r.scope[j]);
                    out.domains.push(r.domains[j].clone());
                    out.src.push(Src::Right(j));
                    j += 1;
                }
                Ordering::Equal => {
                    if l.domains[i] != r.domains[j] {
                        return Err(FactorError::DomainMismatch(l.scope[i]));
                    }
                    out.scope.push(l.scope[i]);
                    out.domains.push(l.domains[i].clone());
                    out.src.push(Src::Left(i));
                    out.left_shared.push(i);
                    out.right_shared.push(j);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(out)
    }
}

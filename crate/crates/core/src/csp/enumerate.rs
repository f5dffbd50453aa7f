//! Listing every solution from a calibrated tree of residual factors.

use rustc_hash::FxHashMap;

use super::{CspError, SolveResult};
use crate::factor::SparseFactor;
use crate::scalar::Potential;
use crate::var::{Assignment, Domain, State, VariableId};

#[derive(Clone, Debug, PartialEq)]
pub struct Enumeration {
    pub solutions: Vec<Assignment>,
    /// True when more than `cap` solutions exist.
    pub truncated: bool,
}

/// Per factor: positions of columns bound by earlier factors, the columns it
/// binds, and an index from the bound states to matching rows.
struct Step<'a, P> {
    factor: &'a SparseFactor<P>,
    bound: Vec<(usize, VariableId)>,
    free: Vec<(usize, VariableId)>,
    index: FxHashMap<Vec<State>, Vec<usize>>,
}

/// Joins the residual factors of a tree-structured result by backtracking,
/// adding the solved variables and every combination of unconstrained
/// variables. Complete and exact when fewer than `cap` solutions exist.
pub fn enumerate_solutions<P: Potential>(result: &SolveResult<P>, cap: usize) -> Result<Enumeration, CspError> {
    if !result.graph_is_tree {
        return Err(CspError::NotATree);
    }
    let factors = &result.residual_factors;
    let order = traversal_order(factors);
    let mut seen: Vec<VariableId> = Vec::new();
    let mut steps = Vec::with_capacity(order.len());
    for &k in &order {
        let f = &factors[k];
        let (mut bound, mut free) = (Vec::new(), Vec::new());
        for (c, &v) in f.scope().iter().enumerate() {
            if seen.contains(&v) {
                bound.push((c, v));
            } else {
                free.push((c, v));
            }
        }
        seen.extend(free.iter().map(|p| p.1));
        let mut index: FxHashMap<Vec<State>, Vec<usize>> = FxHashMap::default();
        for i in 0..f.len() {
            let row = f.row(i);
            index.entry(bound.iter().map(|&(c, _)| row[c]).collect()).or_default().push(i);
        }
        steps.push(Step { factor: f, bound, free, index });
    }
    let loose: Vec<(VariableId, &Domain)> = result
        .domains
        .iter()
        .filter(|(v, _)| !seen.contains(v) && !result.solved.contains(**v))
        .map(|(v, d)| (*v, d))
        .collect();

    let mut out = Enumeration { solutions: Vec::new(), truncated: false };
    let mut partial = result.solved.clone();
    join(&steps, 0, &mut partial, &loose, cap, &mut out);
    Ok(out)
}

fn join<P: Potential>(
    steps: &[Step<'_, P>],
    depth: usize,
    partial: &mut Assignment,
    loose: &[(VariableId, &Domain)],
    cap: usize,
    out: &mut Enumeration,
) {
    if out.truncated {
        return;
    }
    let Some(step) = steps.get(depth) else {
        spread(loose, partial, cap, out);
        return;
    };
    let key: Vec<State> = step.bound.iter().map(|&(_, v)| partial.get(v).expect("bound earlier")).collect();
    let Some(rows) = step.index.get(&key) else { return };
    for &i in rows {
        let row = step.factor.row(i);
        for &(c, v) in &step.free {
            partial.insert(v, row[c]);
        }
        join(steps, depth + 1, partial, loose, cap, out);
        if out.truncated {
            break;
        }
    }
    for &(_, v) in &step.free {
        partial.remove(v);
    }
}

fn spread(loose: &[(VariableId, &Domain)], partial: &mut Assignment, cap: usize, out: &mut Enumeration) {
    match loose.split_first() {
        None => {
            if out.solutions.len() == cap {
                out.truncated = true;
            } else {
                out.solutions.push(partial.clone());
            }
        }
        Some(((v, d), rest)) => {
            for &s in d.states() {
                partial.insert(*v, s);
                spread(rest, partial, cap, out);
                if out.truncated {
                    break;
                }
            }
            partial.remove(*v);
        }
    }
}

/// Breadth-first order over factors linked by shared variables, so each
/// factor after the first in a component binds against earlier ones.
fn traversal_order<P: Potential>(factors: &[SparseFactor<P>]) -> Vec<usize> {
    let n = factors.len();
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for root in 0..n {
        if done[root] {
            continue;
        }
        done[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(k) = queue.pop_front() {
            order.push(k);
            for m in 0..n {
                if !done[m] && factors[m].scope().iter().any(|v| factors[k].contains(*v)) {
                    done[m] = true;
                    queue.push_back(m);
                }
            }
        }
    }
    order
}

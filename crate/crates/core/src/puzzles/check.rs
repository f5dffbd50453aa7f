//! Direct constraint checking and a backtracking oracle. Neither touches
//! factors: both read the rules straight from the spec.

use std::collections::BTreeMap;

use super::build::{neighbourhood, PARITY};
use super::{cell_id, CageOp, PuzzleError, PuzzleSpec};
use crate::var::{Assignment, State, VariableId};

#[derive(Clone, Debug)]
enum Rule {
    Fixed(VariableId, State),
    AllDifferent(Vec<VariableId>),
    Cage { cells: Vec<VariableId>, op: CageOp, target: u32, distinct: bool, lo: State, hi: State },
    Count { cells: Vec<VariableId>, target: u32 },
    Parity(Vec<VariableId>),
}

impl Rule {
    fn cells(&self) -> &[VariableId] {
        match self {
            Rule::Fixed(v, _) => std::slice::from_ref(v),
            Rule::AllDifferent(c) | Rule::Parity(c) => c,
            Rule::Cage { cells, .. } | Rule::Count { cells, .. } => cells,
        }
    }

    /// False when the values set so far already break the rule.
    fn admits(&self, get: &dyn Fn(VariableId) -> Option<State>) -> bool {
        let vals: Vec<Option<State>> = self.cells().iter().map(|&v| get(v)).collect();
        let set: Vec<State> = vals.iter().flatten().copied().collect();
        let complete = set.len() == vals.len();
        let no_repeats = || {
            let mut s = set.clone();
            s.sort_unstable();
            s.windows(2).all(|w| w[0] != w[1])
        };
        match self {
            Rule::Fixed(_, want) => set.first().is_none_or(|s| s == want),
            Rule::AllDifferent(_) => no_repeats(),
            Rule::Parity(_) => !complete || set.iter().fold(0, |a, &b| a ^ b) == 0,
            Rule::Count { target, .. } => {
                let on = set.iter().filter(|&&s| s == 1).count() as u32;
                on <= *target && *target <= on + (vals.len() - set.len()) as u32
            }
            Rule::Cage { op, target, distinct, lo, hi, .. } => {
                if *distinct && !no_repeats() {
                    return false;
                }
                if complete {
                    return op.holds(&set, *target);
                }
                let t = u64::from(*target);
                let rest = (vals.len() - set.len()) as u64;
                match op {
                    CageOp::Sum | CageOp::Add => {
                        let s: u64 = set.iter().map(|&x| u64::from(x)).sum();
                        s + rest * u64::from(*lo) <= t && t <= s + rest * u64::from(*hi)
                    }
                    CageOp::Mul => {
                        let p: u64 = set.iter().map(|&x| u64::from(x)).product();
                        p != 0 && t % p == 0
                    }
                    _ => true,
                }
            }
        }
    }
}

type Candidates = BTreeMap<VariableId, Vec<State>>;

/// Variables with their candidate values, and the rules over them.
fn rules(spec: &PuzzleSpec) -> Result<(Candidates, Vec<Rule>), PuzzleError> {
    spec.validate()?;
    let mut vars = BTreeMap::new();
    let mut out = Vec::new();
    let latin = |n: usize, boxes: Option<(usize, usize)>, out: &mut Vec<Rule>| {
        for i in 0..n {
            out.push(Rule::AllDifferent((0..n).map(|j| cell_id(n, i, j)).collect()));
            out.push(Rule::AllDifferent((0..n).map(|j| cell_id(n, j, i)).collect()));
        }
        if let Some((bh, bw)) = boxes {
            for br in (0..n).step_by(bh) {
                for bc in (0..n).step_by(bw) {
                    let cells = (0..bh * bw).map(|k| cell_id(n, br + k / bw, bc + k % bw)).collect();
                    out.push(Rule::AllDifferent(cells));
                }
            }
        }
    };
    let square = |n: usize, vars: &mut BTreeMap<VariableId, Vec<State>>| {
        for k in 0..n * n {
            vars.insert(VariableId(k as u32), (1..=n as State).collect());
        }
    };
    match spec {
        PuzzleSpec::Sudoku(s) => {
            square(s.size, &mut vars);
            latin(s.size, Some(s.box_shape()), &mut out);
            for (k, &v) in s.grid.iter().enumerate() {
                if v != 0 {
                    out.push(Rule::Fixed(VariableId(k as u32), v));
                }
            }
        }
        PuzzleSpec::Killer(g) | PuzzleSpec::Calcudoku(g) | PuzzleSpec::Kakuro(g) => {
            let killer = matches!(spec, PuzzleSpec::Killer(_));
            let kakuro = matches!(spec, PuzzleSpec::Kakuro(_));
            let hi = if kakuro || killer { 9 } else { g.rows as State };
            if kakuro {
                for &(r, c) in g.cages.iter().flat_map(|run| run.cells.iter()) {
                    vars.insert(cell_id(g.cols, r, c), (1..=9).collect());
                }
            } else {
                square(g.rows, &mut vars);
                latin(g.rows, killer.then_some((3, 3)), &mut out);
            }
            for cage in &g.cages {
                out.push(Rule::Cage {
                    cells: cage.cells.iter().map(|&(r, c)| cell_id(g.cols, r, c)).collect(),
                    op: cage.op,
                    target: cage.target,
                    distinct: killer || kakuro,
                    lo: 1,
                    hi,
                });
            }
            for &(r, c, v) in &g.clues {
                out.push(Rule::Fixed(cell_id(g.cols, r, c), v));
            }
        }
        PuzzleSpec::FillAPix(g) => {
            for k in 0..g.rows * g.cols {
                vars.insert(VariableId(k as u32), vec![0, 1]);
            }
            for &(r, c, v) in &g.clues {
                let cells = neighbourhood(g.rows, g.cols, r, c).into_iter().map(|(i, j)| cell_id(g.cols, i, j)).collect();
                out.push(Rule::Count { cells, target: u32::from(v) });
            }
        }
        PuzzleSpec::GraphColouring(g) => {
            for k in 0..g.nodes.len() {
                vars.insert(VariableId(k as u32), (1..=g.colours).collect());
            }
            for &(a, b) in &g.edges {
                out.push(Rule::AllDifferent(vec![VariableId(a as u32), VariableId(b as u32)]));
            }
        }
        PuzzleSpec::Hamming74(_) => {
            for k in 0..7 {
                vars.insert(VariableId(k), vec![0, 1]);
            }
            for check in PARITY {
                out.push(Rule::Parity(check.iter().map(|&i| VariableId(i as u32)).collect()));
            }
        }
    }
    Ok((vars, out))
}

/// True iff `assignment` meets every rule of the puzzle. For Hamming specs
/// this checks that the bits form a codeword.
pub fn verify_solution(spec: &PuzzleSpec, assignment: &Assignment) -> Result<bool, PuzzleError> {
    let (vars, rules) = rules(spec)?;
    for (&v, states) in &vars {
        match assignment.get(v) {
            None => return Err(PuzzleError::IncompleteAssignment(v)),
            Some(s) if !states.contains(&s) => return Ok(false),
            Some(_) => {}
        }
    }
    Ok(rules.iter().all(|r| r.admits(&|v| assignment.get(v))))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    pub solutions: Vec<Assignment>,
    /// True when more than `cap` solutions exist.
    pub truncated: bool,
}

struct Search {
    vars: Vec<VariableId>,
    candidates: Vec<Vec<State>>,
    rules: Vec<Rule>,
    /// Rule indices per variable position.
    touching: Vec<Vec<usize>>,
    position: BTreeMap<VariableId, usize>,
    value: Vec<Option<State>>,
    cap: usize,
    out: BruteForce,
}

impl Search {
    fn get(&self, v: VariableId) -> Option<State> {
        self.position.get(&v).and_then(|&k| self.value[k])
    }

    fn run(&mut self) {
        if self.out.truncated {
            return;
        }
        // Most constrained variable first, lowest position on ties.
        let Some(k) = (0..self.vars.len()).filter(|&k| self.value[k].is_none()).min_by_key(|&k| (self.candidates[k].len(), k))
        else {
            if self.out.solutions.len() == self.cap {
                self.out.truncated = true;
            } else {
                self.out.solutions.push(self.vars.iter().zip(&self.value).map(|(&v, s)| (v, s.unwrap())).collect());
            }
            return;
        };
        let options = self.candidates[k].clone();
        for s in options {
            self.value[k] = Some(s);
            let mut trail: Vec<(usize, Vec<State>)> = Vec::new();
            if self.forward_check(k, &mut trail) {
                self.run();
            }
            for (u, old) in trail.into_iter().rev() {
                self.candidates[u] = old;
            }
            if self.out.truncated {
                break;
            }
        }
        self.value[k] = None;
    }

    /// Checks the rules on `k` and prunes the candidates of their unset
    /// variables. Old candidate lists go on `trail`.
    fn forward_check(&mut self, k: usize, trail: &mut Vec<(usize, Vec<State>)>) -> bool {
        for &ri in &self.touching[k] {
            if !self.rules[ri].admits(&|v| self.get(v)) {
                return false;
            }
        }
        for &ri in &self.touching[k].clone() {
            let cells: Vec<VariableId> = self.rules[ri].cells().to_vec();
            for v in cells {
                let u = self.position[&v];
                if self.value[u].is_some() {
                    continue;
                }
                let keep: Vec<State> = self.candidates[u]
                    .iter()
                    .copied()
                    .filter(|&s| self.rules[ri].admits(&|w| if w == v { Some(s) } else { self.get(w) }))
                    .collect();
                if keep.len() < self.candidates[u].len() {
                    let empty = keep.is_empty();
                    trail.push((u, std::mem::replace(&mut self.candidates[u], keep)));
                    if empty {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Every solution by backtracking with forward checking, choosing the
/// variable with the fewest remaining values. Complete when `truncated` is
/// false; the order is deterministic.
pub fn brute_force(spec: &PuzzleSpec, cap: usize) -> Result<BruteForce, PuzzleError> {
    let (domains, rules) = rules(spec)?;
    let vars: Vec<VariableId> = domains.keys().copied().collect();
    let position: BTreeMap<VariableId, usize> = vars.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let mut touching = vec![Vec::new(); vars.len()];
    for (ri, r) in rules.iter().enumerate() {
        for v in r.cells() {
            touching[position[v]].push(ri);
        }
    }
    let mut candidates: Vec<Vec<State>> = domains.into_values().collect();
    // Single-variable rules (clues, one-cell cages) narrow the start.
    for r in &rules {
        if let [v] = r.cells() {
            let k = position[v];
            candidates[k].retain(|&s| r.admits(&|w| (w == *v).then_some(s)));
        }
    }
    let mut search = Search {
        value: vec![None; vars.len()],
        vars,
        candidates,
        rules,
        touching,
        position,
        cap,
        out: BruteForce { solutions: Vec::new(), truncated: false },
    };
    if search.candidates.iter().all(|c| !c.is_empty()) {
        search.run();
    }
    Ok(search.out)
}

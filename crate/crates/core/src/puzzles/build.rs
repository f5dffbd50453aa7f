//! Compiling puzzle specs into constraint factors.

use std::collections::BTreeSet;

use super::{cell_id, CageOp, GraphSpec, GridSpec, HammingSpec, PuzzleError, PuzzleSpec, SudokuSpec};
use crate::csp::{CspProblem, DomainMap};
use crate::factor::SparseFactor;
use crate::scalar::Potential;
use crate::var::{Assignment, Domain, State, VarRegistry, VariableId};

/// A compiled puzzle: the labelled variables and the CSP over them.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<P: Potential> {
    pub registry: VarRegistry,
    pub problem: CspProblem<P>,
}

/// Compiles a puzzle. Clues become evidence and are folded into every factor
/// while it is generated, so tables never hold rows that contradict them.
pub fn build_factors<P: Potential>(spec: &PuzzleSpec) -> Result<Model<P>, PuzzleError> {
    spec.validate()?;
    match spec {
        PuzzleSpec::Sudoku(s) => sudoku(s),
        PuzzleSpec::Killer(g) => killer(g),
        PuzzleSpec::Calcudoku(g) => calcudoku(g),
        PuzzleSpec::Kakuro(g) => kakuro(g),
        PuzzleSpec::FillAPix(g) => fill_a_pix(g),
        PuzzleSpec::GraphColouring(g) => colouring(g),
        PuzzleSpec::Hamming74(h) => hamming(h),
    }
}

/// Factor over `cells` whose rows pass `accept`, generated depth first.
/// `accept(prefix, complete)` may reject partial rows to prune. Clued cells
/// are fixed during generation and left out of the scope. Returns `None`
/// when every cell is clued and the clues pass.
fn constraint_factor<P: Potential>(
    cells: &[VariableId],
    domain: &Domain,
    clues: &Assignment,
    distinct: bool,
    accept: &dyn Fn(&[State], bool) -> bool,
) -> Result<Option<SparseFactor<P>>, PuzzleError> {
    // Clued cells go first so they prune as early as possible.
    let mut order: Vec<VariableId> = cells.iter().copied().filter(|&v| clues.contains(v)).collect();
    let fixed = order.len();
    order.extend(cells.iter().copied().filter(|&v| !clues.contains(v)));
    let options: Vec<Vec<State>> =
        order.iter().map(|&v| clues.get(v).map_or_else(|| domain.states().to_vec(), |s| vec![s])).collect();

    let mut rows: Vec<(Vec<State>, P)> = Vec::new();
    let mut any = false;
    let mut prefix = Vec::with_capacity(order.len());
    extend(&options, distinct, accept, &mut prefix, &mut |row: &[State]| {
        any = true;
        if row.len() > fixed {
            rows.push((row[fixed..].to_vec(), P::one()));
        }
    });
    if order.len() == fixed {
        return Ok(if any { None } else { Some(SparseFactor::new(Vec::new(), Vec::new())?) });
    }
    let scope = order[fixed..].iter().map(|&v| (v, domain.clone())).collect();
    Ok(Some(SparseFactor::new(scope, rows)?))
}

fn extend(
    options: &[Vec<State>],
    distinct: bool,
    accept: &dyn Fn(&[State], bool) -> bool,
    prefix: &mut Vec<State>,
    emit: &mut dyn FnMut(&[State]),
) {
    let depth = prefix.len();
    if depth == options.len() {
        emit(prefix);
        return;
    }
    for &s in &options[depth] {
        if distinct && prefix.contains(&s) {
            continue;
        }
        prefix.push(s);
        if accept(prefix, prefix.len() == options.len()) {
            extend(options, distinct, accept, prefix, emit);
        }
        prefix.pop();
    }
}

fn any_row(_: &[State], _: bool) -> bool {
    true
}

/// Prunes with the domain bounds `lo..=hi` on the cells still unset.
fn cage_check(op: CageOp, target: u32, len: usize, lo: State, hi: State) -> impl Fn(&[State], bool) -> bool {
    move |prefix: &[State], complete: bool| {
        if complete {
            return op.holds(prefix, target);
        }
        let t = u64::from(target);
        match op {
            CageOp::Sum | CageOp::Add => {
                let s: u64 = prefix.iter().map(|&x| u64::from(x)).sum();
                let rest = (len - prefix.len()) as u64;
                s + rest * u64::from(lo) <= t && t <= s + rest * u64::from(hi)
            }
            CageOp::Mul => {
                let p = prefix.iter().try_fold(1u64, |p, &x| p.checked_mul(u64::from(x)));
                p.is_some_and(|p| p != 0 && t % p == 0)
            }
            _ => true,
        }
    }
}

fn count_check(target: u32, len: usize) -> impl Fn(&[State], bool) -> bool {
    move |prefix: &[State], _| {
        let on = prefix.iter().filter(|&&s| s == 1).count() as u32;
        on <= target && target <= on + (len - prefix.len()) as u32
    }
}

fn push<P: Potential>(out: &mut Vec<SparseFactor<P>>, f: Option<SparseFactor<P>>) {
    out.extend(f);
}

fn grid_registry(rows: usize, cols: usize) -> VarRegistry {
    let mut reg = VarRegistry::new();
    for r in 0..rows {
        for c in 0..cols {
            reg.intern(&format!("r{}c{}", r + 1, c + 1));
        }
    }
    reg
}

fn grid_clues(cols: usize, clues: impl IntoIterator<Item = (usize, usize, State)>) -> Assignment {
    clues.into_iter().map(|(r, c, s)| (cell_id(cols, r, c), s)).collect()
}

/// Row, column and (for Sudoku) box all-different factors of an `n x n`
/// Latin square.
fn latin_factors<P: Potential>(
    n: usize,
    boxes: Option<(usize, usize)>,
    domain: &Domain,
    clues: &Assignment,
) -> Result<Vec<SparseFactor<P>>, PuzzleError> {
    let mut groups: Vec<Vec<VariableId>> = Vec::new();
    for r in 0..n {
        groups.push((0..n).map(|c| cell_id(n, r, c)).collect());
    }
    for c in 0..n {
        groups.push((0..n).map(|r| cell_id(n, r, c)).collect());
    }
    if let Some((bh, bw)) = boxes {
        for br in (0..n).step_by(bh) {
            for bc in (0..n).step_by(bw) {
                groups.push((0..bh).flat_map(|i| (0..bw).map(move |j| cell_id(n, br + i, bc + j))).collect());
            }
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        push(&mut out, constraint_factor(&g, domain, clues, true, &any_row)?);
    }
    Ok(out)
}

fn all_cells(rows: usize, cols: usize, domain: &Domain) -> DomainMap {
    (0..rows).flat_map(|r| (0..cols).map(move |c| cell_id(cols, r, c))).map(|v| (v, domain.clone())).collect()
}

fn sudoku<P: Potential>(s: &SudokuSpec) -> Result<Model<P>, PuzzleError> {
    let n = s.size;
    let domain = Domain::range(1, n as State);
    let clues = grid_clues(n, s.grid.iter().enumerate().filter(|(_, &v)| v != 0).map(|(k, &v)| (k / n, k % n, v)));
    let factors = latin_factors(n, Some(s.box_shape()), &domain, &clues)?;
    Ok(Model {
        registry: grid_registry(n, n),
        problem: CspProblem { domains: all_cells(n, n, &domain), factors, evidence: clues },
    })
}

fn cage_factors<P: Potential>(
    g: &GridSpec,
    domain: &Domain,
    clues: &Assignment,
    distinct: bool,
    out: &mut Vec<SparseFactor<P>>,
) -> Result<(), PuzzleError> {
    let (lo, hi) = (domain.states()[0], *domain.states().last().unwrap());
    for cage in &g.cages {
        let cells: Vec<VariableId> = cage.cells.iter().map(|&(r, c)| cell_id(g.cols, r, c)).collect();
        let check = cage_check(cage.op, cage.target, cells.len(), lo, hi);
        push(out, constraint_factor(&cells, domain, clues, distinct, &check)?);
    }
    Ok(())
}

fn killer<P: Potential>(g: &GridSpec) -> Result<Model<P>, PuzzleError> {
    let domain = Domain::range(1, 9);
    let clues = grid_clues(9, g.clues.iter().copied());
    let mut factors = latin_factors(9, Some((3, 3)), &domain, &clues)?;
    cage_factors(g, &domain, &clues, true, &mut factors)?;
    Ok(Model { registry: grid_registry(9, 9), problem: CspProblem { domains: all_cells(9, 9, &domain), factors, evidence: clues } })
}

fn calcudoku<P: Potential>(g: &GridSpec) -> Result<Model<P>, PuzzleError> {
    let n = g.rows;
    let domain = Domain::range(1, n as State);
    let clues = grid_clues(n, g.clues.iter().copied());
    let mut factors = latin_factors(n, None, &domain, &clues)?;
    cage_factors(g, &domain, &clues, false, &mut factors)?;
    Ok(Model { registry: grid_registry(n, n), problem: CspProblem { domains: all_cells(n, n, &domain), factors, evidence: clues } })
}

fn kakuro<P: Potential>(g: &GridSpec) -> Result<Model<P>, PuzzleError> {
    let domain = Domain::range(1, 9);
    let clues = grid_clues(g.cols, g.clues.iter().copied());
    let mut factors = Vec::with_capacity(g.cages.len());
    cage_factors(g, &domain, &clues, true, &mut factors)?;
    let domains: DomainMap =
        g.cages.iter().flat_map(|run| run.cells.iter()).map(|&(r, c)| (cell_id(g.cols, r, c), domain.clone())).collect();
    Ok(Model { registry: grid_registry(g.rows, g.cols), problem: CspProblem { domains, factors, evidence: clues } })
}

/// Cells of the 3x3 block centred on `(r, c)`, clipped to the grid.
pub(crate) fn neighbourhood(rows: usize, cols: usize, r: usize, c: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(9);
    for i in r.saturating_sub(1)..=(r + 1).min(rows - 1) {
        for j in c.saturating_sub(1)..=(c + 1).min(cols - 1) {
            out.push((i, j));
        }
    }
    out
}

fn fill_a_pix<P: Potential>(g: &GridSpec) -> Result<Model<P>, PuzzleError> {
    let domain = Domain::binary();
    let none = Assignment::new();
    let mut factors = Vec::with_capacity(g.clues.len());
    for &(r, c, count) in &g.clues {
        let cells: Vec<VariableId> = neighbourhood(g.rows, g.cols, r, c).into_iter().map(|(i, j)| cell_id(g.cols, i, j)).collect();
        let check = count_check(u32::from(count), cells.len());
        push(&mut factors, constraint_factor(&cells, &domain, &none, false, &check)?);
    }
    Ok(Model {
        registry: grid_registry(g.rows, g.cols),
        problem: CspProblem { domains: all_cells(g.rows, g.cols, &domain), factors, evidence: none },
    })
}

/// Maximal cliques of an undirected graph by Bron–Kerbosch with pivoting,
/// each sorted, in ascending order.
pub fn maximal_cliques(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        adj[a].insert(b);
        adj[b].insert(a);
    }
    let mut out = Vec::new();
    bron_kerbosch(&adj, &mut Vec::new(), (0..n).collect(), BTreeSet::new(), &mut out);
    for c in &mut out {
        c.sort_unstable();
    }
    out.sort();
    out
}

fn bron_kerbosch(
    adj: &[BTreeSet<usize>],
    r: &mut Vec<usize>,
    mut p: BTreeSet<usize>,
    mut x: BTreeSet<usize>,
    out: &mut Vec<Vec<usize>>,
) {
    if p.is_empty() && x.is_empty() {
        out.push(r.clone());
        return;
    }
    let pivot = *p.union(&x).max_by_key(|&&u| adj[u].intersection(&p).count()).unwrap();
    let candidates: Vec<usize> = p.difference(&adj[pivot]).copied().collect();
    for v in candidates {
        r.push(v);
        bron_kerbosch(adj, r, p.intersection(&adj[v]).copied().collect(), x.intersection(&adj[v]).copied().collect(), out);
        r.pop();
        p.remove(&v);
        x.insert(v);
    }
}

fn colouring<P: Potential>(g: &GraphSpec) -> Result<Model<P>, PuzzleError> {
    let domain = Domain::range(1, g.colours);
    let mut registry = VarRegistry::new();
    for name in &g.nodes {
        registry.intern(name);
    }
    let none = Assignment::new();
    let mut factors = Vec::new();
    for clique in maximal_cliques(g.nodes.len(), &g.edges) {
        if clique.len() < 2 {
            continue;
        }
        let cells: Vec<VariableId> = clique.iter().map(|&k| VariableId(k as u32)).collect();
        push(&mut factors, constraint_factor(&cells, &domain, &none, true, &any_row)?);
    }
    let domains = (0..g.nodes.len()).map(|k| (VariableId(k as u32), domain.clone())).collect();
    Ok(Model { registry, problem: CspProblem { domains, factors, evidence: none } })
}

/// Parity checks: the first bit of each triple is the xor of the rest.
pub(crate) const PARITY: [[usize; 4]; 3] = [[4, 0, 1, 2], [5, 1, 2, 3], [6, 0, 2, 3]];

/// Bits `B1..B7` get ids 0..7 and received bits `R1..R7` ids 7..14. The
/// channel factors are reduced by the received bits, so only the `B`
/// variables appear in the model.
fn hamming<P: Potential>(h: &HammingSpec) -> Result<Model<P>, PuzzleError> {
    let mut registry = VarRegistry::new();
    for i in 1..=7 {
        registry.intern(&format!("B{i}"));
    }
    for i in 1..=7 {
        registry.intern(&format!("R{i}"));
    }
    let bit = Domain::binary();
    let b = |i: usize| (VariableId(i as u32), bit.clone());
    let mut factors = Vec::with_capacity(10);
    for check in PARITY {
        let rows = (0u8..8).map(|m| {
            let x: Vec<State> = (0..3).map(|k| State::from(m >> k & 1)).collect();
            (vec![x[0] ^ x[1] ^ x[2], x[0], x[1], x[2]], P::one())
        });
        factors.push(SparseFactor::new(check.iter().map(|&i| b(i)).collect(), rows)?);
    }
    let keep = P::from_f64_lossy(1.0 - h.flip_prob);
    let flip = P::from_f64_lossy(h.flip_prob);
    for i in 0..7 {
        let r = VariableId(7 + i as u32);
        let channel = SparseFactor::new(
            vec![(r, bit.clone()), b(i)],
            [(vec![0, 0], keep), (vec![0, 1], flip), (vec![1, 0], flip), (vec![1, 1], keep)],
        )?;
        let observed: Assignment = [(r, State::from(h.received[i]))].into_iter().collect();
        factors.push(channel.reduce(&observed)?);
    }
    let domains = (0..7).map(b).collect();
    Ok(Model { registry, problem: CspProblem { domains, factors, evidence: Assignment::new() } })
}

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use super::*;
use crate::factor::SparseFactor;
use crate::var::{Assignment, Domain, State, VariableId};

fn v(i: u32) -> VariableId {
    VariableId(i)
}

fn permutations(items: &[State]) -> Vec<Vec<State>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn all_different(vars: &[u32], card: State) -> SparseFactor<f64> {
    let scope = vars.iter().map(|&i| (v(i), Domain::range(1, card))).collect();
    let digits: Vec<State> = (1..=card).collect();
    SparseFactor::new(scope, permutations(&digits).into_iter().map(|r| (r, 1.0))).unwrap()
}

/// A factor with a single entry, used where only the scope matters.
fn single(vars: &[u32], card: State) -> SparseFactor<f64> {
    let scope = vars.iter().map(|&i| (v(i), Domain::range(1, card))).collect();
    SparseFactor::new(scope, [(vec![1; vars.len()], 1.0)]).unwrap()
}

fn binary_table(a: u32, b: u32, card: State, allowed: &[(State, State)]) -> SparseFactor<f64> {
    let scope = vec![(v(a), Domain::range(1, card)), (v(b), Domain::range(1, card))];
    SparseFactor::new(scope, allowed.iter().map(|&(x, y)| (vec![x, y], 1.0))).unwrap()
}

fn not_equal(a: u32, b: u32, card: State) -> SparseFactor<f64> {
    let pairs: Vec<(State, State)> = (1..=card).flat_map(|x| (1..=card).filter(move |&y| y != x).map(move |y| (x, y))).collect();
    binary_table(a, b, card, &pairs)
}

/// Every full assignment with positive product, by exhaustive enumeration.
fn brute_force(factors: &[SparseFactor<f64>]) -> BTreeSet<Vec<(VariableId, State)>> {
    let domains = domain_map(factors).unwrap();
    let vars: Vec<(VariableId, Domain)> = domains.into_iter().collect();
    let mut out = BTreeSet::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let mut a = Assignment::new();
        for (k, (var, d)) in vars.iter().enumerate() {
            a.insert(*var, d.states()[idx[k]]);
        }
        if factors.iter().all(|f| f.evaluate(&a).unwrap() > 0.0) {
            out.insert(a.iter().collect());
        }
        let mut k = 0;
        loop {
            if k == vars.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < vars[k].1.cardinality() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn as_set(e: &Enumeration) -> BTreeSet<Vec<(VariableId, State)>> {
    e.solutions.iter().map(|a| a.iter().collect()).collect()
}

/// Arc consistency by the textbook queue algorithm over binary factors.
fn ac3(factors: &[SparseFactor<f64>]) -> Option<BTreeMap<VariableId, BTreeSet<State>>> {
    let mut dom: BTreeMap<VariableId, BTreeSet<State>> =
        domain_map(factors).unwrap().into_iter().map(|(k, d)| (k, d.states().iter().copied().collect())).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for f in factors {
            let (x, y) = (f.scope()[0], f.scope()[1]);
            for (a, b, ca) in [(x, y, 0usize), (y, x, 1usize)] {
                let keep: BTreeSet<State> = dom[&a]
                    .iter()
                    .copied()
                    .filter(|&sa| {
                        dom[&b].iter().any(|&sb| {
                            let row = if ca == 0 { [sa, sb] } else { [sb, sa] };
                            f.get(&row) > 0.0
                        })
                    })
                    .collect();
                if keep.len() < dom[&a].len() {
                    if keep.is_empty() {
                        return None;
                    }
                    dom.insert(a, keep);
                    changed = true;
                }
            }
        }
    }
    Some(dom)
}

fn gravity(mass: f64, h_union: f64, h_inter: f64) -> f64 {
    let r = (h_union / h_inter).log2();
    mass / (r * r)
}

#[test]
fn overlap_and_entropy_attraction() {
    let a = single(&[0, 1, 2], 2);
    let b = single(&[1, 2, 3], 2);
    assert_eq!(attraction(&a, &b, AttractionMetric::Overlap).unwrap(), (2.0, 2.0));

    let a = single(&[0, 1, 2, 3, 4], 9);
    let b = single(&[2, 3, 4, 5], 9);
    let (x, y) = attraction(&a, &b, AttractionMetric::Entropy).unwrap();
    let want = 3.0 * 9f64.log2();
    assert!((x - want).abs() < 1e-12 && (y - want).abs() < 1e-12);
}

#[test]
fn gravity_attraction_of_two_wide_factors() {
    // Nine card-9 variables each, three shared: r = log2(15 / 3).
    let a = single(&(0..9).collect::<Vec<_>>(), 9);
    let b = single(&(6..15).collect::<Vec<_>>(), 9);
    let h = entropy_map([&a, &b]);
    let r = distance(a.scope(), b.scope(), &h);
    assert!((r - 5f64.log2()).abs() < 1e-12);
    let (x, y) = attraction(&a, &b, AttractionMetric::Gravity).unwrap();
    let m = 9.0 * 9f64.log2();
    assert!((x - m / (r * r)).abs() < 1e-9);
    assert!((y - m / (r * r)).abs() < 1e-9);
}

#[test]
fn gravity_is_asymmetric_in_mass() {
    let tight = binary_table(0, 1, 3, &[(1, 2)]);
    let loose = not_equal(1, 2, 3);
    let (x, y) = attraction(&tight, &loose, AttractionMetric::Gravity).unwrap();
    let h3 = 3f64.log2();
    assert!((x - gravity(tight.mass().unwrap(), 3.0 * h3, h3)).abs() < 1e-12);
    assert!((y - gravity(loose.mass().unwrap(), 3.0 * h3, h3)).abs() < 1e-12);
    assert!(x > y);
}

#[test]
fn same_scope_attracts_infinitely_and_disjoint_scopes_error() {
    let a = not_equal(0, 1, 3);
    let b = binary_table(0, 1, 3, &[(1, 2), (2, 1)]);
    let (x, y) = attraction(&a, &b, AttractionMetric::Gravity).unwrap();
    assert!(x.is_infinite() && y.is_infinite());
    let c = not_equal(2, 3, 3);
    assert_eq!(attraction(&a, &c, AttractionMetric::Gravity), Err(CspError::DisjointScopes));
}

#[test]
fn metric_parses_from_lowercase_names() {
    assert_eq!("gravity".parse::<AttractionMetric>().unwrap(), AttractionMetric::Gravity);
    assert_eq!("overlap".parse::<AttractionMetric>().unwrap(), AttractionMetric::Overlap);
    assert_eq!("entropy".parse::<AttractionMetric>().unwrap(), AttractionMetric::Entropy);
    assert!("mass".parse::<AttractionMetric>().is_err());
    assert_eq!(serde_json::to_string(&AttractionMetric::Entropy).unwrap(), "\"entropy\"");
}

#[test]
fn clustering_respects_the_threshold_extremes() {
    let fs = vec![not_equal(0, 1, 2), not_equal(1, 2, 2), not_equal(2, 3, 2)];
    assert_eq!(cluster_factors(&fs, 1.5, AttractionMetric::Gravity).unwrap(), vec![vec![0], vec![1], vec![2]]);
    assert_eq!(cluster_factors(&fs, f64::INFINITY, AttractionMetric::Gravity).unwrap(), vec![vec![0, 1, 2]]);
}

#[test]
fn clustering_a_chain_under_three_bits() {
    let fs = vec![not_equal(0, 1, 2), not_equal(1, 2, 2), not_equal(2, 3, 2)];
    // Every pair starts at 1 / log2(3)^2, so the tie goes to (0, 1), whose
    // union fits in 3 bits. The merged cluster would need 4 bits with {C,D}.
    let first = gravity(1.0, 3.0, 1.0);
    let (a01, a10) = attraction(&fs[0], &fs[1], AttractionMetric::Gravity).unwrap();
    assert!((a01 - first).abs() < 1e-12 && (a10 - first).abs() < 1e-12);
    assert_eq!(cluster_factors(&fs, 3.0, AttractionMetric::Gravity).unwrap(), vec![vec![0, 1], vec![2]]);
    assert_eq!(cluster_factors(&fs, 4.0, AttractionMetric::Gravity).unwrap(), vec![vec![0, 1, 2]]);
}

#[test]
fn disconnected_factors_never_cluster() {
    let fs = vec![not_equal(0, 1, 2), not_equal(2, 3, 2)];
    assert_eq!(cluster_factors(&fs, f64::INFINITY, AttractionMetric::Overlap).unwrap(), vec![vec![0], vec![1]]);
}

#[test]
fn merge_cluster_is_the_product() {
    let fs = vec![not_equal(0, 1, 3), not_equal(1, 2, 3), not_equal(0, 2, 3)];
    let m = merge_cluster(&fs, 1 << 20).unwrap();
    let want = fs[0].multiply(&fs[1]).unwrap().multiply(&fs[2]).unwrap();
    assert_eq!(m, want);
    assert_eq!(m.len(), 6);
    assert_eq!(merge_cluster(&fs[..1], 1 << 20).unwrap(), fs[0]);
    assert!(matches!(merge_cluster(&fs, 4), Err(crate::FactorError::CapacityExceeded { .. })));
}

#[test]
fn merging_contradictory_factors_gives_an_empty_table() {
    let fs = vec![not_equal(0, 1, 2), not_equal(1, 2, 2), not_equal(0, 2, 2)];
    assert!(merge_cluster(&fs, 1 << 20).unwrap().is_empty());
}

#[test]
fn reduce_variables_cascades() {
    // x0 is forced to 1, which forces x1 to 2, which forces x2 to 1.
    let fs = vec![
        binary_table(0, 3, 3, &[(1, 1), (1, 2)]),
        binary_table(0, 1, 3, &[(1, 2), (2, 3)]),
        binary_table(1, 2, 3, &[(2, 1), (3, 3)]),
    ];
    let (ev, rest) = reduce_variables(fs).unwrap();
    assert_eq!(ev.get(v(0)), Some(1));
    assert_eq!(ev.get(v(1)), Some(2));
    assert_eq!(ev.get(v(2)), Some(1));
    assert_eq!(rest.len(), 1);
    assert_eq!(rest[0].scope(), &[v(3)]);
}

#[test]
fn reduce_variables_detects_conflicts() {
    let fs = vec![binary_table(0, 1, 2, &[(1, 1), (1, 2)]), binary_table(0, 2, 2, &[(2, 1), (2, 2)])];
    assert!(matches!(reduce_variables(fs), Err(CspError::Contradiction(_))));
}

#[test]
fn reduce_domains_matches_arc_consistency_on_a_chain() {
    // x0 < x1 < x2 < x3 over 1..=4 pins everything.
    let lt: Vec<(State, State)> = (1..=4).flat_map(|a| (a + 1..=4).map(move |b| (a, b))).collect();
    let fs = vec![binary_table(0, 1, 4, &lt), binary_table(1, 2, 4, &lt), binary_table(2, 3, 4, &lt)];
    let oracle = ac3(&fs).unwrap();
    let reduced = reduce_domains(fs).unwrap();
    let got = domain_map(&reduced).unwrap();
    for (var, d) in got {
        assert_eq!(d.states().iter().copied().collect::<BTreeSet<_>>(), oracle[&var]);
    }
    assert!(reduced.iter().all(|f| f.len() == 1));
}

#[test]
fn reduce_domains_reports_contradiction() {
    let fs = vec![binary_table(0, 1, 2, &[(1, 1)]), binary_table(1, 2, 2, &[(2, 2)])];
    assert!(matches!(reduce_domains(fs), Err(CspError::Contradiction(_))));
}

fn sudoku4_factors() -> Vec<SparseFactor<f64>> {
    let cell = |r: u32, c: u32| r * 4 + c;
    let mut out = Vec::new();
    for r in 0..4 {
        out.push(all_different(&(0..4).map(|c| cell(r, c)).collect::<Vec<_>>(), 4));
    }
    for c in 0..4 {
        out.push(all_different(&(0..4).map(|r| cell(r, c)).collect::<Vec<_>>(), 4));
    }
    for br in [0, 2] {
        for bc in [0, 2] {
            out.push(all_different(&[cell(br, bc), cell(br, bc + 1), cell(br + 1, bc), cell(br + 1, bc + 1)], 4));
        }
    }
    out
}

#[test]
fn empty_four_by_four_sudoku_has_288_grids() {
    let result = purge_and_merge(sudoku4_factors(), &PurgeMergeConfig::default()).unwrap();
    assert!(result.graph_is_tree);
    let e = enumerate_solutions(&result, 1000).unwrap();
    assert!(!e.truncated);
    assert_eq!(e.solutions.len(), 288);
    let fs = sudoku4_factors();
    for a in &e.solutions {
        assert!(fs.iter().all(|f| f.evaluate(a).unwrap() > 0.0));
    }
}

/// All completions of a 4x4 grid by plain backtracking, row-major.
fn sudoku4_completions(grid: &mut [State; 16], at: usize, out: &mut Vec<[State; 16]>) {
    if at == 16 {
        out.push(*grid);
        return;
    }
    if grid[at] != 0 {
        return sudoku4_completions(grid, at + 1, out);
    }
    let (r, c) = (at / 4, at % 4);
    for s in 1..=4 {
        let clash = (0..4).any(|k| grid[r * 4 + k] == s || grid[k * 4 + c] == s)
            || (0..4).any(|k| grid[((r / 2) * 2 + k / 2) * 4 + (c / 2) * 2 + k % 2] == s);
        if !clash {
            grid[at] = s;
            sudoku4_completions(grid, at + 1, out);
            grid[at] = 0;
        }
    }
}

#[test]
fn clued_four_by_four_sudoku_is_solved_uniquely() {
    // 1 . | . 4
    // . . | . .
    // ----+----
    // . . | . .
    // . 3 | 2 .
    let clues = [(0, 1), (3, 4), (13, 3), (14, 2)];
    let mut grid = [0; 16];
    let mut p = CspProblem::new(sudoku4_factors()).unwrap();
    for (cell, s) in clues {
        grid[cell] = s;
        p.evidence.insert(v(cell as u32), s);
    }
    let mut oracle = Vec::new();
    sudoku4_completions(&mut grid, 0, &mut oracle);
    assert_eq!(oracle.len(), 1);

    let result = p.solve(&PurgeMergeConfig::default()).unwrap();
    let e = enumerate_solutions(&result, 10).unwrap();
    assert_eq!(e.solutions.len(), 1);
    let a = &e.solutions[0];
    for (cell, &s) in oracle[0].iter().enumerate() {
        assert_eq!(a.get(v(cell as u32)), Some(s));
    }
    assert!(result.is_unique());
}

#[test]
fn empty_grid_oracle_agrees_on_288() {
    let mut out = Vec::new();
    sudoku4_completions(&mut [0; 16], 0, &mut out);
    assert_eq!(out.len(), 288);
}

#[test]
fn clue_outside_domain_is_a_contradiction() {
    let mut p = CspProblem::new(sudoku4_factors()).unwrap();
    p.evidence.insert(v(0), 7);
    assert!(matches!(p.solve(&PurgeMergeConfig::default()), Err(CspError::Contradiction(_))));
}

#[test]
fn two_colouring_a_triangle_fails() {
    let fs = vec![not_equal(0, 1, 2), not_equal(1, 2, 2), not_equal(0, 2, 2)];
    assert!(matches!(purge_and_merge(fs, &PurgeMergeConfig::default()), Err(CspError::Contradiction(_))));
}

#[test]
fn loose_variables_are_enumerated() {
    let p = CspProblem::new(vec![binary_table(0, 1, 2, &[(1, 2)])]).unwrap().with_variable(v(5), Domain::range(1, 3));
    let result = p.solve(&PurgeMergeConfig::default()).unwrap();
    let e = enumerate_solutions(&result, 10).unwrap();
    assert_eq!(e.solutions.len(), 3);
    let e = enumerate_solutions(&result, 2).unwrap();
    assert!(e.truncated);
    assert_eq!(e.solutions.len(), 2);
}

#[test]
fn tiny_cap_reports_capacity() {
    let config = PurgeMergeConfig { table_cap: 8, ..Default::default() };
    let got = purge_and_merge(sudoku4_factors(), &config);
    assert!(matches!(got, Err(CspError::CapacityExceeded { cap: 8, .. })), "{got:?}");
}

#[test]
fn round_limit_and_deadline() {
    let config = PurgeMergeConfig { max_rounds: 0, ..Default::default() };
    assert_eq!(purge_and_merge(sudoku4_factors(), &config), Err(CspError::RoundLimit(0)));
    let config = PurgeMergeConfig { deadline: Some(std::time::Instant::now()), ..Default::default() };
    assert_eq!(purge_and_merge(sudoku4_factors(), &config), Err(CspError::Timeout));
}

#[test]
fn stats_serialise() {
    let result = purge_and_merge(sudoku4_factors(), &PurgeMergeConfig::default()).unwrap();
    assert!(result.stats.rounds >= 1);
    let json = serde_json::to_value(result.stats).unwrap();
    assert!(json.get("max_table_entries").is_some());
}

#[test]
fn single_pass_on_a_chain_agrees_across_topologies() {
    // x0 != x1 != x2 over two states with x0 observed: a tree, so both solve.
    let mut problem = CspProblem::new(vec![not_equal(0, 1, 2), not_equal(1, 2, 2)]).unwrap();
    problem.evidence.insert(v(0), 1);
    for topology in Topology::ALL {
        let pass = single_pass(&problem, topology, &ConvergenceConfig::default()).unwrap();
        assert!(pass.is_solved(), "{topology}");
        assert_eq!(pass.assignment.iter().collect::<Vec<_>>(), vec![(v(0), 1), (v(1), 2), (v(2), 1)]);
        assert!(pass.stats.converged);
    }
}

#[test]
fn single_pass_leaves_an_empty_sudoku_open() {
    let problem = CspProblem::new(sudoku4_factors()).unwrap();
    for topology in Topology::ALL {
        let pass = single_pass(&problem, topology, &ConvergenceConfig::default()).unwrap();
        assert!(!pass.is_solved());
        assert!(pass.domains.values().all(|d| d.cardinality() == 4));
    }
    let bethe = single_pass(&problem, Topology::Bethe, &ConvergenceConfig::default()).unwrap();
    assert_eq!(bethe.clusters, 12 + 16);
    assert_eq!(bethe.edges, 48);
}

#[test]
fn topology_names_round_trip() {
    for t in Topology::ALL {
        assert_eq!(t.name().parse::<Topology>().unwrap(), t);
    }
    assert!("kikuchi".parse::<Topology>().is_err());
}

/// Random binary CSP: `n` variables over 1..=3 and a constraint per edge.
fn arb_csp() -> impl Strategy<Value = Vec<SparseFactor<f64>>> {
    (3u32..7).prop_flat_map(|n| {
        let edges: Vec<(u32, u32)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let m = edges.len();
        (Just(edges), prop::collection::vec(any::<bool>(), m), prop::collection::vec(1u16..512, m)).prop_map(
            |(edges, used, masks)| {
                let mut out = Vec::new();
                for (k, &(a, b)) in edges.iter().enumerate() {
                    // Keep the graph connected along the path 0-1-..-n.
                    if !used[k] && b != a + 1 {
                        continue;
                    }
                    let pairs: Vec<(State, State)> =
                        (0..9).filter(|bit| masks[k] >> bit & 1 == 1).map(|bit| (bit / 3 + 1, bit % 3 + 1)).collect();
                    out.push(binary_table(a, b, 3, &pairs));
                }
                out
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solutions_are_preserved(fs in arb_csp()) {
        let want = brute_force(&fs);
        match purge_and_merge(fs.clone(), &PurgeMergeConfig::default()) {
            Ok(result) => {
                let e = enumerate_solutions(&result, 100_000).unwrap();
                prop_assert_eq!(as_set(&e), want);
            }
            Err(CspError::Contradiction(_)) => prop_assert!(want.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e:?}"),
        }
    }

    #[test]
    fn merge_order_does_not_change_the_solutions(fs in arb_csp(), seed in any::<u64>()) {
        let mut shuffled = fs.clone();
        let n = shuffled.len();
        for k in (1..n).rev() {
            shuffled.swap(k, (seed.rotate_left(k as u32) % (k as u64 + 1)) as usize);
        }
        let a = purge_and_merge(fs, &PurgeMergeConfig::default());
        let b = purge_and_merge(shuffled, &PurgeMergeConfig::default());
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(
                as_set(&enumerate_solutions(&a, 100_000).unwrap()),
                as_set(&enumerate_solutions(&b, 100_000).unwrap())
            ),
            (Err(CspError::Contradiction(_)), Err(CspError::Contradiction(_))) => {}
            (a, b) => prop_assert!(false, "diverged: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn purging_only_shrinks_domains_and_keeps_solutions(fs in arb_csp()) {
        let before = domain_map(&fs).unwrap();
        let want = brute_force(&fs);
        match reduce_domains(fs.clone()) {
            Ok(reduced) => {
                let after = domain_map(&reduced).unwrap();
                for (var, d) in &after {
                    prop_assert!(d.states().iter().all(|s| before[var].contains(*s)));
                }
                for sol in &want {
                    for (var, s) in sol {
                        prop_assert!(after[var].contains(*s));
                    }
                }
                prop_assert_eq!(Some(after.into_iter().map(|(k, d)| (k, d.states().iter().copied().collect())).collect()), ac3(&fs));
            }
            Err(_) => {
                prop_assert!(want.is_empty());
                prop_assert!(ac3(&fs).is_none());
            }
        }
    }

    #[test]
    fn clusters_fit_the_budget(fs in arb_csp(), tau in 2.0f64..12.0) {
        let h = entropy_map(&fs);
        for members in cluster_factors(&fs, tau, AttractionMetric::Gravity).unwrap() {
            if members.len() > 1 {
                let mut scope: Vec<VariableId> = members.iter().flat_map(|&k| fs[k].scope().to_vec()).collect();
                scope.sort_unstable();
                scope.dedup();
                let bits: f64 = scope.iter().map(|x| h[x]).sum();
                prop_assert!(bits <= tau + 1e-9);
            }
        }
    }
    #[test]
    fn single_pass_never_drops_a_solution(fs in arb_csp()) {
        let want = brute_force(&fs);
        let problem = CspProblem::new(fs).unwrap();
        for topology in Topology::ALL {
            match single_pass(&problem, topology, &ConvergenceConfig::default()) {
                Ok(pass) => {
                    for sol in &want {
                        for (var, s) in sol {
                            prop_assert!(pass.domains[var].contains(*s));
                        }
                    }
                }
                Err(_) => prop_assert!(want.is_empty()),
            }
        }
    }
}

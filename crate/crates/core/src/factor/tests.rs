use proptest::prelude::*;

use super::*;
use crate::var::{Assignment, Domain, VariableId};

fn v(i: u32) -> VariableId {
    VariableId(i)
}

fn table(vars: &[(u32, State, State)], rows: &[(&[State], f64)]) -> SparseFactor<f64> {
    let scope = vars.iter().map(|&(i, lo, hi)| (v(i), Domain::range(lo, hi))).collect();
    SparseFactor::new(scope, rows.iter().map(|(r, p)| (r.to_vec(), *p))).unwrap()
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

#[test]
fn map_colouring_table_has_24_entries() {
    let f = all_different(&[0, 2, 3, 5], 4);
    assert_eq!(f.len(), 24);
    assert_eq!(f.dense_size(), 256);
}

#[test]
fn empty_entry_list_is_the_contradiction_factor() {
    let f = table(&[(0, 1, 2)], &[]);
    assert!(f.is_empty());
    assert_eq!(f.normalize(NormMode::Max), Err(FactorError::EmptySupport));
}

#[test]
fn construction_errors() {
    let scope = vec![(v(0), Domain::range(1, 2))];
    let dup = SparseFactor::<f64>::new(scope.clone(), vec![(vec![1], 1.0), (vec![1], 0.5)]);
    assert_eq!(dup.unwrap_err(), FactorError::DuplicateEntry);
    let ood = SparseFactor::<f64>::new(scope.clone(), vec![(vec![3], 1.0)]);
    assert_eq!(ood.unwrap_err(), FactorError::OutOfDomainValue { variable: v(0), state: 3 });
    let zero = SparseFactor::<f64>::new(scope, vec![(vec![1], 0.0)]);
    assert_eq!(zero.unwrap_err(), FactorError::NonPositivePotential);
}

#[test]
fn scope_is_canonicalised() {
    let f = SparseFactor::<f64>::new(
        vec![(v(3), Domain::range(0, 1)), (v(1), Domain::range(5, 6))],
        vec![(vec![1, 5], 2.0), (vec![0, 6], 3.0)],
    )
    .unwrap();
    assert_eq!(f.scope(), &[v(1), v(3)]);
    assert_eq!(f.row(0), &[5, 1]);
    assert_eq!(f.row(1), &[6, 0]);
    assert_eq!(f.get(&[6, 0]), 3.0);
}

#[test]
fn vacuous_is_dense_and_identity() {
    let vac = SparseFactor::<f64>::vacuous(vec![(v(0), Domain::range(1, 4))]).unwrap();
    assert_eq!(vac.len(), 4);
    assert!(vac.values().iter().all(|&p| p == 1.0));
    assert!(vac.mass().unwrap().abs() < 1e-12);

    let f = table(&[(0, 1, 2), (1, 1, 2)], &[(&[1, 2], 0.3), (&[2, 2], 0.7)]);
    let vac2 = SparseFactor::vacuous(f.scope_domains()).unwrap();
    assert_eq!(f.multiply(&vac2).unwrap(), f);
    assert_eq!(vac2.multiply(&f).unwrap(), f);
}

#[test]
fn vacuous_respects_capacity() {
    let scope: Vec<_> = (0..10).map(|i| (v(i), Domain::range(1, 9))).collect();
    let err = SparseFactor::<f64>::vacuous_capped(scope, 1000).unwrap_err();
    assert!(matches!(err, FactorError::CapacityExceeded { cap: 1000, .. }));
}

#[test]
fn product_of_disjoint_scopes_has_12_potentials() {
    let px = table(&[(0, 1, 3)], &[(&[1], 0.2), (&[2], 0.3), (&[3], 0.5)]);
    let pyz = table(
        &[(1, 1, 2), (2, 1, 2)],
        &[(&[1, 1], 0.1), (&[1, 2], 0.2), (&[2, 1], 0.3), (&[2, 2], 0.4)],
    );
    let joint = px.multiply(&pyz).unwrap();
    assert_eq!(joint.arity(), 3);
    assert_eq!(joint.len(), 12);
    assert!((joint.total() - 1.0).abs() < 1e-12);
}

/// Dense oracle: enumerate every joint assignment of the union scope and
/// multiply the two looked-up potentials.
fn dense_product(f: &SparseFactor<f64>, g: &SparseFactor<f64>) -> Vec<(Assignment, f64)> {
    let mut vars: Vec<(VariableId, Domain)> = f.scope_domains();
    for (var, d) in g.scope_domains() {
        if !vars.iter().any(|(w, _)| *w == var) {
            vars.push((var, d));
        }
    }
    vars.sort_by_key(|p| p.0);
    let mut out = Vec::new();
    let mut stack = vec![Assignment::new()];
    for (var, d) in &vars {
        stack = stack
            .into_iter()
            .flat_map(|a| {
                d.states().iter().map(move |&s| {
                    let mut b = a.clone();
                    b.insert(*var, s);
                    b
                })
            })
            .collect();
    }
    for a in stack {
        let p = f.evaluate(&a).unwrap() * g.evaluate(&a).unwrap();
        if p > 0.0 {
            out.push((a, p));
        }
    }
    out
}

#[test]
fn multiply_matches_dense_enumeration() {
    let f1 = table(&[(0, 1, 3), (1, 1, 3)], &[(&[1, 2], 1.0), (&[2, 1], 1.0)]);
    let f2 = table(&[(1, 1, 3), (2, 1, 3)], &[(&[2, 3], 1.0)]);
    let oracle = dense_product(&f1, &f2);
    assert_eq!(oracle.len(), 1);
    let expected: Assignment = [(v(0), 1), (v(1), 2), (v(2), 3)].into_iter().collect();
    assert_eq!(oracle[0], (expected.clone(), 1.0));

    let prod = f1.multiply(&f2).unwrap();
    assert_eq!(prod.len(), 1);
    assert_eq!(prod.assignment(0), expected);
    assert_eq!(prod.value(0), 1.0);
}

#[test]
fn multiply_rejects_domain_mismatch() {
    let f = table(&[(0, 1, 3)], &[(&[1], 1.0)]);
    let g = table(&[(0, 1, 2)], &[(&[1], 1.0)]);
    assert_eq!(f.multiply(&g), Err(FactorError::DomainMismatch(v(0))));
}

#[test]
fn multiply_capacity_guard() {
    let f = SparseFactor::<f64>::vacuous(vec![(v(0), Domain::range(1, 9))]).unwrap();
    let g = SparseFactor::<f64>::vacuous(vec![(v(1), Domain::range(1, 9))]).unwrap();
    assert_eq!(f.product_size(&g).unwrap(), 81);
    assert!(matches!(f.multiply_capped(&g, 80), Err(FactorError::CapacityExceeded { required: 81, .. })));
    assert_eq!(f.multiply_capped(&g, 81).unwrap().len(), 81);
}

#[test]
fn conditional_from_division() {
    let pyz = table(
        &[(1, 1, 2), (2, 1, 2)],
        &[(&[1, 1], 0.1), (&[1, 2], 0.2), (&[2, 1], 0.3), (&[2, 2], 0.4)],
    );
    let pz = pyz.marginalize(&[v(2)], NormMode::Sum).unwrap();
    let cond = pyz.divide(&pz).unwrap();
    // P(Y|Z) sums to one over Y for every Z.
    let back = cond.marginalize(&[v(2)], NormMode::Sum).unwrap();
    assert!(back.values().iter().all(|&p| (p - 1.0).abs() < 1e-12));
    assert!((cond.get(&[1, 1]) - 0.25).abs() < 1e-12);
}

#[test]
fn self_division_and_zero_over_zero() {
    let f = table(&[(0, 1, 3)], &[(&[1], 0.4), (&[3], 0.6)]);
    let q = f.divide(&f).unwrap();
    assert_eq!(q.len(), 2);
    assert!(q.values().iter().all(|&p| (p - 1.0).abs() < 1e-15));
    assert_eq!(q.get(&[2]), 0.0);
}

#[test]
fn division_errors() {
    let f = table(&[(0, 1, 2)], &[(&[1], 1.0), (&[2], 1.0)]);
    let g = table(&[(0, 1, 2)], &[(&[1], 1.0)]);
    assert_eq!(f.divide(&g), Err(FactorError::DivisionByZero));
    let h = table(&[(5, 1, 2)], &[(&[1], 1.0)]);
    assert_eq!(f.divide(&h), Err(FactorError::ScopeNotSubset));
}

#[test]
fn max_marginal_matches_projection_oracle() {
    let f = table(&[(0, 1, 3), (1, 1, 3)], &[(&[1, 2], 1.0), (&[1, 3], 1.0), (&[2, 3], 1.0)]);
    // Oracle: maximum over the eliminated variable for each kept state.
    let mut oracle = [0.0f64; 4];
    for (row, p) in f.iter() {
        oracle[row[0] as usize] = oracle[row[0] as usize].max(p);
    }
    let m = f.marginalize(&[v(0)], NormMode::Max).unwrap();
    assert_eq!(m.len(), 2);
    for s in 1..=3u16 {
        assert_eq!(m.get(&[s]), oracle[s as usize]);
    }
    assert_eq!(m.get(&[1]), 1.0);
    assert_eq!(m.get(&[2]), 1.0);
}

#[test]
fn single_entry_marginal_under_both_modes() {
    let f = table(&[(0, 1, 3), (1, 1, 3)], &[(&[2, 3], 0.5)]);
    for mode in [NormMode::Sum, NormMode::Max] {
        let m = f.marginalize(&[v(1)], mode).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(&[3]), 0.5);
    }
    assert_eq!(f.marginalize(&[v(9)], NormMode::Sum), Err(FactorError::UnknownVariable(v(9))));
}

#[test]
fn reduction_slices_and_contradicts() {
    let pxyz = SparseFactor::<f64>::vacuous(vec![
        (v(0), Domain::range(1, 3)),
        (v(1), Domain::range(1, 2)),
        (v(2), Domain::range(1, 2)),
    ])
    .unwrap();
    let obs: Assignment = [(v(0), 1)].into_iter().collect();
    let slice = pxyz.reduce(&obs).unwrap();
    assert_eq!(slice.scope(), &[v(1), v(2)]);
    assert_eq!(slice.len(), 4);

    let full: Assignment = [(v(0), 2), (v(1), 1), (v(2), 2)].into_iter().collect();
    let scalar = pxyz.reduce(&full).unwrap();
    assert_eq!(scalar.arity(), 0);
    assert_eq!(scalar.len(), 1);
    assert_eq!(scalar.value(0), 1.0);

    let sparse = table(&[(0, 1, 3)], &[(&[1], 1.0)]);
    let none = sparse.reduce(&[(v(0), 2)].into_iter().collect()).unwrap();
    assert!(none.is_empty());

    assert!(matches!(
        sparse.reduce(&[(v(0), 7)].into_iter().collect()),
        Err(FactorError::OutOfDomainValue { .. })
    ));
    assert_eq!(sparse.reduce(&[(v(4), 1)].into_iter().collect()), Err(FactorError::UnknownVariable(v(4))));
}

#[test]
fn normalisation_modes() {
    let f = table(&[(0, 1, 2)], &[(&[1], 2.0), (&[2], 2.0)]);
    let s = f.normalize(NormMode::Sum).unwrap();
    assert_eq!(s.values(), &[0.5, 0.5]);
    let b = table(&[(0, 1, 3)], &[(&[1], 1.0), (&[3], 1.0)]);
    assert_eq!(b.normalize(NormMode::Max).unwrap(), b);
}

#[test]
fn damping_endpoints_and_midpoint() {
    let a = table(&[(0, 1, 2)], &[(&[1], 1.0)]);
    let b = table(&[(0, 1, 2)], &[(&[2], 1.0)]);
    assert_eq!(a.damp(&b, 1.0).unwrap(), a);
    assert_eq!(a.damp(&b, 0.0).unwrap(), b);
    let mid = a.damp(&b, 0.5).unwrap();
    assert_eq!(mid.values(), &[0.5, 0.5]);
    let c = table(&[(1, 1, 2)], &[(&[2], 1.0)]);
    assert_eq!(a.damp(&c, 0.5), Err(FactorError::ScopeMismatch));
}

#[test]
fn divergence_values() {
    let p = table(&[(0, 1, 2)], &[(&[1], 0.9), (&[2], 0.1)]);
    let q = table(&[(0, 1, 2)], &[(&[1], 0.5), (&[2], 0.5)]);
    assert_eq!(p.divergence(&p).unwrap(), 0.0);

    let point = table(&[(0, 1, 2)], &[(&[1], 1.0)]);
    assert!((point.divergence(&q).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    assert_eq!(q.divergence(&point).unwrap(), f64::INFINITY);

    // Direct evaluation of both orderings.
    let pq = 0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln();
    let qp = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
    let d_pq = p.divergence(&q).unwrap();
    let d_qp = q.divergence(&p).unwrap();
    assert!((d_pq - pq).abs() < 1e-12);
    assert!((d_qp - qp).abs() < 1e-12);
    assert!((d_pq - d_qp).abs() > 0.1);
}

#[test]
fn upper_bound_entropy_values() {
    let nine = Domain::range(1, 9);
    assert!((upper_bound_entropy([&nine, &nine]) - 2.0 * 9f64.log2()).abs() < 1e-12);
    assert!((upper_bound_entropy([&nine, &nine]) - 6.3399).abs() < 1e-4);
    assert_eq!(upper_bound_entropy(std::iter::empty()), 0.0);
    assert_eq!(upper_bound_entropy([&Domain::binary()]), 1.0);
}

#[test]
fn mass_of_permutation_tables() {
    let colouring = all_different(&[0, 1, 2, 3], 4);
    let expected = (256.0f64 / 24.0).log2();
    assert!((colouring.mass().unwrap() - expected).abs() < 1e-12);
    assert!((expected - 3.415).abs() < 1e-3);

    let row = all_different(&[0, 1, 2, 3, 4, 5, 6, 7, 8], 9);
    assert_eq!(row.len(), 362_880);
    // Direct KL against the uniform distribution over 9^9 outcomes.
    let n = 9f64.powi(9);
    let k = row.len() as f64;
    let direct: f64 = row.values().iter().map(|_| (1.0 / k) * ((1.0 / k) / (1.0 / n)).log2()).sum();
    let closed = (n / k).log2();
    assert!((direct - closed).abs() < 1e-9);
    assert!((row.mass().unwrap() - closed).abs() < 1e-9);
    assert!((closed - 10.0602).abs() < 1e-3);
}

#[test]
fn literal_round_trip() {
    let mut reg = crate::var::VarRegistry::new();
    let json = r#"{"scope":["A","B"],"domains":{"A":[1,2],"B":[5,7]},
        "entries":[{"assign":[0,1],"p":0.25},{"assign":[1,0],"p":0.75}]}"#;
    let lit: FactorLiteral = serde_json::from_str(json).unwrap();
    let f = SparseFactor::<f64>::from_literal(&lit, &mut reg).unwrap();
    assert_eq!(f.get(&[1, 7]), 0.25);
    assert_eq!(f.get(&[2, 5]), 0.75);
    let back = f.to_literal(&reg);
    assert_eq!(SparseFactor::<f64>::from_literal(&back, &mut reg).unwrap(), f);
}

#[test]
fn works_with_single_precision() {
    let f = SparseFactor::<f32>::new(
        vec![(v(0), Domain::range(1, 2))],
        vec![(vec![1], 3.0f32), (vec![2], 1.0)],
    )
    .unwrap();
    let n = f.normalize(NormMode::Sum).unwrap();
    assert_eq!(n.values(), &[0.75f32, 0.25]);
}

// ---------------------------------------------------------------------------
// Properties over random small tables.

fn arb_factor(vars: &'static [u32]) -> impl Strategy<Value = SparseFactor<f64>> {
    let cards: Vec<State> = vars.iter().map(|&i| 2 + (i % 2) as State).collect();
    let dense: usize = cards.iter().map(|&c| c as usize).product();
    proptest::collection::vec(prop_oneof![Just(0.0), 0.05f64..2.0], dense).prop_map(move |ps| {
        let scope: Vec<_> = vars.iter().zip(&cards).map(|(&i, &c)| (v(i), Domain::range(0, c - 1))).collect();
        let mut rows = Vec::new();
        for (idx, p) in ps.into_iter().enumerate() {
            if p > 0.0 {
                let mut rem = idx;
                let mut row = vec![0; cards.len()];
                for c in (0..cards.len()).rev() {
                    row[c] = (rem % cards[c] as usize) as State;
                    rem /= cards[c] as usize;
                }
                rows.push((row, p));
            }
        }
        SparseFactor::new(scope, rows).unwrap()
    })
}

fn approx_eq(a: &SparseFactor<f64>, b: &SparseFactor<f64>, tol: f64) -> bool {
    a.scope() == b.scope()
        && a.len() == b.len()
        && a.iter().zip(b.iter()).all(|((ra, pa), (rb, pb))| ra == rb && (pa - pb).abs() <= tol * pa.abs().max(1.0))
}

proptest! {
    #[test]
    fn multiplication_commutes(f in arb_factor(&[0, 1]), g in arb_factor(&[1, 2])) {
        let fg = f.multiply(&g).unwrap();
        let gf = g.multiply(&f).unwrap();
        prop_assert!(approx_eq(&fg, &gf, 1e-12));
        prop_assert!(fg.values().iter().all(|&p| p > 0.0));
    }

    #[test]
    fn multiplication_associates(f in arb_factor(&[0, 1]), g in arb_factor(&[1, 2]), h in arb_factor(&[0, 2])) {
        let a = f.multiply(&g).unwrap().multiply(&h).unwrap();
        let b = f.multiply(&g.multiply(&h).unwrap()).unwrap();
        prop_assert!(approx_eq(&a, &b, 1e-12));
    }

    #[test]
    fn division_undoes_multiplication(f in arb_factor(&[0, 1]), g in arb_factor(&[1])) {
        let fg = f.multiply(&g).unwrap();
        let back = fg.divide(&g).unwrap();
        for (row, p) in back.iter() {
            prop_assert!((p - f.get(row)).abs() < 1e-12 * p.max(1.0));
        }
    }

    #[test]
    fn marginalising_a_normalised_conditional_recovers_f(f in arb_factor(&[0, 1]), g in arb_factor(&[1, 2])) {
        // Make g a conditional over its private variable 2 given 1.
        let g1 = g.marginalize(&[v(1)], NormMode::Sum).unwrap();
        let cond = g.divide(&g1).unwrap();
        let fg = f.multiply(&cond).unwrap();
        let m = fg.marginalize(&[v(0), v(1)], NormMode::Sum).unwrap();
        // Wherever the conditional has support, the marginal equals f.
        for (row, p) in m.iter() {
            prop_assert!((p - f.get(row)).abs() < 1e-9);
        }
    }

    #[test]
    fn reduce_and_marginalise_commute(f in arb_factor(&[0, 1, 2]), s in 0u16..2) {
        let ev: Assignment = [(v(0), s)].into_iter().collect();
        for mode in [NormMode::Sum, NormMode::Max] {
            let a = f.reduce(&ev).unwrap().marginalize(&[v(1)], mode).unwrap();
            let b = f.marginalize(&[v(0), v(1)], mode).unwrap().reduce(&ev).unwrap();
            prop_assert!(approx_eq(&a, &b, 1e-12));
        }
    }

    #[test]
    fn divergence_is_nonnegative(p in arb_factor(&[0, 1]), q in arb_factor(&[0, 1])) {
        let d = p.divergence(&q).unwrap();
        prop_assert!(d >= 0.0);
        if !p.is_empty() {
            prop_assert!(p.divergence(&p).unwrap().abs() < 1e-12);
            let scaled = p.normalize(NormMode::Max).unwrap();
            prop_assert!(p.divergence(&scaled).unwrap().abs() < 1e-12);
        }
        if d < 1e-12 && !p.is_empty() && !q.is_empty() {
            let pn = p.normalize(NormMode::Sum).unwrap();
            let qn = q.normalize(NormMode::Sum).unwrap();
            prop_assert!(approx_eq(&pn, &qn, 1e-5));
        }
    }

    #[test]
    fn uniform_support_mass_is_closed_form(f in arb_factor(&[0, 1, 2])) {
        prop_assume!(!f.is_empty());
        let binary = f.normalize(NormMode::Max).unwrap().restrict_domains(|_| None);
        let ones = SparseFactor::new(
            binary.scope_domains(),
            binary.iter().map(|(r, _)| (r.to_vec(), 1.0f64)),
        ).unwrap();
        let closed = (ones.dense_size() as f64 / ones.len() as f64).log2();
        prop_assert!((ones.mass().unwrap() - closed).abs() < 1e-12);
    }
}

mod common;

use clausecut::formula::{
    clause_inequality, cnfopt_to_wcnf, evaluate, parse_cnfopt, parse_dimacs_cnf,
    parse_dimacs_with_comments, parse_wcnf, wcnf_to_cnfopt, write_cnfopt, write_dimacs_cnf,
    write_wcnf, Assignment, Clause, CnfFormula, CnfOptInstance, FormulaError, Literal,
    WcnfInstance,
};
use common::*;
use proptest::prelude::*;
use rand::Rng;

fn arb_clause(n: u32) -> impl Strategy<Value = Clause> {
    prop::collection::btree_map(1..=n, any::<bool>(), 1..=(n as usize).min(5))
        .prop_map(|m| Clause::new(m.into_iter().map(|(v, s)| Literal::new(v, s))).unwrap())
}

fn arb_formula() -> impl Strategy<Value = CnfFormula> {
    (1u32..=8).prop_flat_map(|n| {
        prop::collection::vec(arb_clause(n), 0..12)
            .prop_map(move |cs| CnfFormula::new(n, cs).unwrap())
    })
}

fn arb_instance() -> impl Strategy<Value = CnfOptInstance> {
    arb_formula().prop_flat_map(|f| {
        let n = f.num_vars();
        prop::collection::vec(-20i64..=20, n as usize).prop_map(move |c| {
            CnfOptInstance::new(f.clone(), (1..=n).zip(c)).unwrap()
        })
    })
}

fn arb_wcnf() -> impl Strategy<Value = WcnfInstance> {
    (1u32..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(arb_clause(n), 0..6),
            prop::collection::vec((arb_clause(n), 1u64..50), 0..6),
        )
            .prop_map(move |(hard, soft)| WcnfInstance {
                num_vars: n,
                hard,
                soft,
            })
    })
}

proptest! {
    #[test]
    fn dimacs_round_trip(f in arb_formula()) {
        let text = write_dimacs_cnf(&f);
        let back = parse_dimacs_cnf(&text).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(write_dimacs_cnf(&back), text);
    }

    #[test]
    fn cnfopt_round_trip(p in arb_instance()) {
        let text = write_cnfopt(&p);
        let back = parse_cnfopt(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(write_cnfopt(&back), text);
    }

    #[test]
    fn wcnf_round_trip_is_bit_exact(w in arb_wcnf()) {
        let text = write_wcnf(&w);
        let back = parse_wcnf(&text).unwrap();
        prop_assert_eq!(write_wcnf(&back), text);
        prop_assert_eq!(back.hard, w.hard);
        prop_assert_eq!(back.soft, w.soft);
    }

    #[test]
    fn cnfopt_to_wcnf_offset_identity(p in arb_instance()) {
        let (w, offset) = cnfopt_to_wcnf(&p);
        prop_assert!(w.hard.len() == p.formula().clauses().len());
        for a in all_assignments(p.num_vars()) {
            prop_assert_eq!(w.hard_satisfied_by(&a), formula_holds(p.formula(), &a));
            prop_assert_eq!(w.falsified_weight(&a) as i64 + offset, objective(&p, &a));
        }
    }

    #[test]
    fn wcnf_to_cnfopt_preserves_optimum(w in arb_wcnf()) {
        let p = wcnf_to_cnfopt(&w);
        let direct = all_assignments(w.num_vars)
            .filter(|a| w.hard_satisfied_by(a))
            .map(|a| w.falsified_weight(&a) as i64)
            .min();
        prop_assert_eq!(brute_optimum(&p), direct);
        // Each satisfying extension of an original assignment costs at least
        // the falsified weight, and the cheapest one costs exactly that.
        let n0 = w.num_vars as usize;
        for a in all_assignments(w.num_vars) {
            if !w.hard_satisfied_by(&a) {
                continue;
            }
            let best_ext = all_assignments(p.num_vars())
                .filter(|b| b[..n0] == a[..] && formula_holds(p.formula(), b))
                .map(|b| objective(&p, &b))
                .min();
            prop_assert_eq!(best_ext, Some(w.falsified_weight(&a) as i64));
        }
    }

    #[test]
    fn evaluate_matches_independent_check(p in arb_instance(), bits in any::<u32>()) {
        let a: Vec<bool> = (0..p.num_vars()).map(|i| bits >> i & 1 == 1).collect();
        let (sat, obj) = evaluate(&Assignment::from_bools(&a), &p).unwrap();
        prop_assert_eq!(sat, formula_holds(p.formula(), &a));
        prop_assert_eq!(obj, objective(&p, &a));
    }
}

#[test]
fn clause_inequality_is_faithful_on_all_short_clauses() {
    for c in all_clauses(4, 4) {
        let row = clause_inequality::<f64>(&c).unwrap();
        for a in all_assignments(4) {
            let x: Vec<f64> = a.iter().map(|&b| b as u8 as f64).collect();
            assert_eq!(
                row.is_satisfied(&x, 0.0),
                clause_holds(c.lits(), &a),
                "{c} at {a:?}"
            );
        }
    }
}

#[test]
fn clause_inequality_is_faithful_on_random_long_clauses() {
    let mut r = rng(7);
    for _ in 0..200 {
        let n = r.gen_range(5..=12);
        let w = r.gen_range(5..=n as usize);
        let c = random_clause(&mut r, n, w);
        let row = clause_inequality::<f64>(&c).unwrap();
        for _ in 0..50 {
            let a: Vec<bool> = (0..n).map(|_| r.gen_bool(0.5)).collect();
            let x: Vec<f64> = a.iter().map(|&b| b as u8 as f64).collect();
            assert_eq!(row.is_satisfied(&x, 0.0), clause_holds(c.lits(), &a));
        }
    }
}

#[test]
fn clause_inequality_matches_dense_form() {
    let c = Clause::from_dimacs(&[1, -2, 3]).unwrap();
    let row = clause_inequality::<f64>(&c).unwrap();
    assert_eq!(row.coeffs(), &[(1, 1.0), (2, -1.0), (3, 1.0)]);
    assert_eq!(row.rhs(), 0.0);
    let d = clause_dense_row(&c, 3);
    assert_eq!(d.b, row.rhs());
}

#[test]
fn evaluate_on_every_assignment_of_an_eight_variable_instance() {
    let mut r = rng(11);
    let f = random_3cnf(&mut r, 8, 20);
    let p = CnfOptInstance::new(f, random_objective(&mut r, 8, 10)).unwrap();
    let mut count = 0;
    for a in all_assignments(8) {
        let (sat, obj) = evaluate(&Assignment::from_bools(&a), &p).unwrap();
        assert_eq!(sat, formula_holds(p.formula(), &a));
        assert_eq!(obj, objective(&p, &a));
        count += 1;
    }
    assert_eq!(count, 256);
}

#[test]
fn evaluate_rejects_partial_assignment() {
    let p = motivating_instance();
    let mut a = Assignment::new(3);
    a.set(1, true);
    assert!(matches!(
        evaluate(&a, &p),
        Err(FormulaError::PartialAssignment(_))
    ));
}

#[test]
fn satlib_style_file_parses() {
    let mut r = rng(250);
    let f = random_3cnf(&mut r, 250, 1065);
    let body = write_dimacs_cnf(&f);
    let text = format!(
        "c This Formular is generated by mcnf\nc\nc    horn? no\nc\n{body}%\n0\n\n"
    );
    let (g, comments) = parse_dimacs_with_comments(&text).unwrap();
    assert_eq!(g.num_vars(), 250);
    assert_eq!(g.clauses().len(), 1065);
    assert_eq!(g, f);
    assert_eq!(comments.len(), 4);
}

#[test]
fn malformed_inputs_are_typed_errors() {
    assert!(parse_dimacs_cnf("1 2 0\n").is_err());
    assert!(parse_dimacs_cnf("p cnf 2 1\n1 3 0\n").is_err());
    assert!(parse_dimacs_cnf("p cnf 2 1\n1 2\n").is_err());
    assert!(parse_dimacs_cnf("p cnf 2 2\n1 2 0\n").is_err());
    assert!(parse_dimacs_cnf("p cnf 2 1\n1 x 0\n").is_err());
    assert!(parse_wcnf("h 1 0\n0 1 0\n").is_err());
    assert!(Clause::from_dimacs(&[1, -1]).is_err());
    assert!(Clause::from_dimacs(&[]).is_err());
}

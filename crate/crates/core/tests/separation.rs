mod common;

use clausecut::formula::{Clause, CnfFormula, Literal};
use clausecut::sat_engine::SatEngine;
use clausecut::separation::{
    check_known_clauses_for_violation, cut_from_core, icca, integral_assumptions, lcca,
    minimize_core, write_cut_log, ClauseCut, CutOrigin, KnownClauseDb, SeparationConfig,
    SeparationError,
};
use common::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A point mixing integral and fractional components.
fn random_point(r: &mut ChaCha8Rng, n: u32, frac_prob: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if r.gen_bool(frac_prob) {
                [0.25, 0.5, 0.75][r.gen_range(0..3)]
            } else if r.gen_bool(0.5) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

fn assert_cut_properties(f: &CnfFormula, cut: &ClauseCut, xbar: &[f64], ctx: &str) {
    assert!(implied(f, &cut.clause), "{ctx}: {} not implied", cut.clause);
    assert!(
        clause_lhs(&cut.clause, xbar) < 1.0 - 1e-6,
        "{ctx}: {} does not separate {xbar:?}",
        cut.clause
    );
    for skip in 0..cut.clause.len() {
        let rest: Vec<Literal> = cut
            .clause
            .lits()
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != skip)
            .map(|(_, &l)| l)
            .collect();
        let weaker_implied = if rest.is_empty() {
            models(f).is_empty()
        } else {
            implied(f, &Clause::new(rest).unwrap())
        };
        assert!(!weaker_implied, "{ctx}: {} is not minimal", cut.clause);
    }
    // Some model makes exactly one literal true.
    assert!(
        models(f).iter().any(|a| {
            cut.clause
                .lits()
                .iter()
                .filter(|l| a[l.var() as usize - 1] == l.is_positive())
                .count()
                == 1
        }),
        "{ctx}: {} is not tight at any model",
        cut.clause
    );
    assert_eq!(cut.length_after, cut.clause.len());
    assert!(cut.length_before >= cut.length_after);
    for a in all_assignments(f.num_vars()) {
        let x: Vec<f64> = a.iter().map(|&b| b as u8 as f64).collect();
        assert_eq!(cut.row.is_satisfied(&x, 0.0), clause_holds(cut.clause.lits(), &a));
    }
}

fn satisfiable_3cnf(r: &mut ChaCha8Rng, n: u32, ratio: f64) -> CnfFormula {
    loop {
        let f = random_3cnf(r, n, (n as f64 * ratio) as usize);
        if !models(&f).is_empty() {
            return f;
        }
    }
}

#[test]
fn icca_cuts_are_valid_separating_and_minimal() {
    let mut r = rng(31);
    let cfg = SeparationConfig::default();
    let mut found = 0;
    for case in 0..300 {
        let n = r.gen_range(4..=10);
        let f = satisfiable_3cnf(&mut r, n, 4.0);
        let mut e = SatEngine::new(&f);
        let xbar = random_point(&mut r, n, 0.3);
        let fixed = integral_assumptions(&xbar, 1e-6);
        let cut = icca(&mut e, &xbar, &cfg);
        assert_eq!(cut.is_some(), !fixed.is_empty() && !sat_under(&f, &fixed), "case {case}");
        if let Some(cut) = cut {
            assert_eq!(cut.origin, CutOrigin::Icca);
            assert_eq!(cut.length_before, fixed.len());
            assert_cut_properties(&f, &cut, &xbar, &format!("case {case}"));
            found += 1;
        }
    }
    assert!(found > 50, "only {found} cuts");
}

#[test]
fn lcca_cuts_are_valid_separating_and_minimal() {
    let mut r = rng(32);
    let cfg = SeparationConfig::default();
    let mut found = 0;
    for case in 0..200 {
        let n = r.gen_range(4..=10);
        let f = satisfiable_3cnf(&mut r, n, 4.0);
        let mut e = SatEngine::new(&f);
        let mut db = KnownClauseDb::new();
        // a sequence of points on one engine and database, as in the cut loop
        for step in 0..4 {
            let xbar = random_point(&mut r, n, 0.5);
            if let Some(cut) = lcca(&mut e, &mut db, &xbar, &cfg) {
                assert_eq!(cut.origin, CutOrigin::Lcca);
                assert_cut_properties(&f, &cut, &xbar, &format!("case {case} step {step}"));
                found += 1;
            }
            for c in db.clauses() {
                assert!(implied(&f, c), "database holds non-implied {c}");
            }
        }
    }
    assert!(found > 50, "only {found} cuts");
}

#[test]
fn lcca_finds_a_cut_whenever_icca_does() {
    let mut r = rng(33);
    let cfg = SeparationConfig::default();
    let mut both = 0;
    let mut lcca_only = 0;
    for case in 0..300 {
        let n = r.gen_range(4..=10);
        let f = satisfiable_3cnf(&mut r, n, 4.2);
        let xbar = random_point(&mut r, n, 0.4);
        let a = icca(&mut SatEngine::new(&f), &xbar, &cfg);
        let b = lcca(&mut SatEngine::new(&f), &mut KnownClauseDb::new(), &xbar, &cfg);
        if a.is_some() {
            assert!(b.is_some(), "case {case}: LCCA missed a cut ICCA found");
            both += 1;
        } else if b.is_some() {
            lcca_only += 1;
        }
    }
    assert!(both > 50);
    println!("both {both}, lcca only {lcca_only}");
}

#[test]
fn no_integral_components_defeat_icca() {
    let f = no_integral_formula();
    let mut e = SatEngine::new(&f);
    assert!(icca(&mut e, &[0.5, 0.5], &SeparationConfig::default()).is_none());
}

#[test]
fn lcca_uses_learned_unit_when_available() {
    let f = no_integral_formula();
    let cfg = SeparationConfig::default();

    let mut fresh = SatEngine::new(&f);
    assert!(lcca(&mut fresh, &mut KnownClauseDb::new(), &[0.5, 0.5], &cfg).is_none());

    let mut e = SatEngine::new(&f);
    let not_x = Clause::new([Literal::neg(1)]).unwrap();
    assert!(e.is_implied(&not_x));
    assert!(e.learned_log().contains(&not_x));
    let mut db = KnownClauseDb::new();
    let cut = lcca(&mut e, &mut db, &[0.5, 0.5], &cfg).expect("learned (¬x) separates");
    assert_eq!(cut.clause, not_x);
    assert_eq!(cut.row.coeffs(), &[(1, -1.0)]);
    assert_eq!(cut.row.rhs(), 0.0);
}

#[test]
fn minimize_core_matches_exhaustive_deletion() {
    let mut r = rng(34);
    for case in 0..300 {
        let n = r.gen_range(3..=9);
        let f = random_3cnf(&mut r, n, (n as f64 * 4.0) as usize);
        let a = random_assumptions(&mut r, n, n as usize);
        let mut e = SatEngine::new(&f);
        let got = minimize_core(&mut e, &a);
        if sat_under(&f, &a) {
            assert_eq!(got, Err(SeparationError::SatisfiableCore));
            continue;
        }
        // The same deletion order, run against the oracle.
        let mut want = a.clone();
        want.sort_by_key(|l| l.var());
        let mut i = 0;
        while i < want.len() {
            let mut trial = want.clone();
            trial.remove(i);
            if !sat_under(&f, &trial) {
                want = trial;
            } else {
                i += 1;
            }
        }
        let got = got.unwrap();
        assert_eq!(got, want, "case {case}");
        for skip in 0..got.len() {
            let mut weaker = got.clone();
            weaker.remove(skip);
            assert!(sat_under(&f, &weaker), "case {case}: not minimal");
        }
    }
}

#[test]
fn known_clause_database_dedups_and_orders() {
    let mut db = KnownClauseDb::new();
    let c = |d: &[i64]| Clause::from_dimacs(d).unwrap();
    assert!(db.insert(c(&[1, -2, 3])));
    assert!(!db.insert(c(&[3, 1, -2])));
    assert!(db.insert(c(&[2, 4])));
    assert!(db.insert(c(&[-1, -3])));
    assert!(db.insert(c(&[4])));
    assert_eq!(db.len(), 4);
    assert!(db.contains(&c(&[-2, 3, 1])));

    let x = [1.0, 0.0, 1.0, 0.5];
    // (¬1 ∨ ¬3) and (4) are violated; the shorter wins.
    assert_eq!(check_known_clauses_for_violation(&db, &x, 1e-6), Some(&c(&[4])));
    let x = [1.0, 0.0, 1.0, 1.0];
    assert_eq!(check_known_clauses_for_violation(&db, &x, 1e-6), Some(&c(&[-1, -3])));
    let x = [0.0, 0.0, 1.0, 1.0];
    assert_eq!(check_known_clauses_for_violation(&db, &x, 1e-6), None);

    // Among equal lengths, the first inserted.
    let mut db = KnownClauseDb::new();
    db.insert(c(&[2, 3]));
    db.insert(c(&[1, 2]));
    assert_eq!(
        check_known_clauses_for_violation(&db, &[0.0, 0.0, 0.0], 1e-6),
        Some(&c(&[2, 3]))
    );
}

#[test]
fn cut_from_core_negates_literals() {
    let core = [Literal::pos(1), Literal::neg(3)];
    let cut = cut_from_core(&core, CutOrigin::Icca).unwrap();
    assert_eq!(cut.clause, Clause::from_dimacs(&[-1, 3]).unwrap());
    assert_eq!(cut_from_core(&[], CutOrigin::Icca), Err(SeparationError::EmptyCore));
    let log = write_cut_log([&cut]);
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some("origin,length_before,length_after,seconds,clause"));
    assert!(lines.next().unwrap().starts_with("icca,2,2,"));
}

#[test]
fn integral_assumptions_respect_tolerance() {
    let a = integral_assumptions(&[1.0, 0.0, 0.5, 1.0 - 1e-7, 2e-7, 0.999], 1e-6);
    assert_eq!(
        a,
        vec![Literal::pos(1), Literal::neg(2), Literal::pos(4), Literal::neg(5)]
    );
}

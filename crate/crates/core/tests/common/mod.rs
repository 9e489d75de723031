//! Exhaustive oracles shared by the integration suites. Nothing here calls
//! into the SAT engine, the simplex or the separators.
#![allow(dead_code)]

use clausecut::formula::{Clause, CnfFormula, CnfOptInstance, Literal};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All 2^n assignments, variable `v` at index `v - 1`.
pub fn all_assignments(n: u32) -> impl Iterator<Item = Vec<bool>> {
    assert!(n <= 20);
    (0u32..1 << n).map(move |bits| (0..n).map(|i| bits >> i & 1 == 1).collect())
}

pub fn clause_holds(lits: &[Literal], a: &[bool]) -> bool {
    lits.iter()
        .any(|l| a[l.var() as usize - 1] == l.is_positive())
}

pub fn formula_holds(f: &CnfFormula, a: &[bool]) -> bool {
    f.clauses().iter().all(|c| clause_holds(c.lits(), a))
}

pub fn models(f: &CnfFormula) -> Vec<Vec<bool>> {
    all_assignments(f.num_vars())
        .filter(|a| formula_holds(f, a))
        .collect()
}

pub fn sat_under(f: &CnfFormula, assumptions: &[Literal]) -> bool {
    all_assignments(f.num_vars()).any(|a| {
        formula_holds(f, &a)
            && assumptions
                .iter()
                .all(|l| a[l.var() as usize - 1] == l.is_positive())
    })
}

pub fn implied(f: &CnfFormula, c: &Clause) -> bool {
    all_assignments(f.num_vars()).all(|a| !formula_holds(f, &a) || clause_holds(c.lits(), &a))
}

pub fn objective(p: &CnfOptInstance, a: &[bool]) -> i64 {
    (1..=p.num_vars())
        .map(|v| if a[v as usize - 1] { p.coef(v) } else { 0 })
        .sum()
}

/// Minimum objective over satisfying assignments.
pub fn brute_optimum(p: &CnfOptInstance) -> Option<i64> {
    all_assignments(p.num_vars())
        .filter(|a| formula_holds(p.formula(), a))
        .map(|a| objective(p, &a))
        .min()
}

pub fn random_clause(r: &mut ChaCha8Rng, n: u32, width: usize) -> Clause {
    let width = width.min(n as usize);
    let mut lits: Vec<Literal> = Vec::new();
    while lits.len() < width {
        let v = r.gen_range(1..=n);
        if lits.iter().all(|l| l.var() != v) {
            lits.push(Literal::new(v, r.gen_bool(0.5)));
        }
    }
    Clause::new(lits).unwrap()
}

pub fn random_3cnf(r: &mut ChaCha8Rng, n: u32, m: usize) -> CnfFormula {
    let clauses = (0..m).map(|_| random_clause(r, n, 3)).collect();
    CnfFormula::new(n, clauses).unwrap()
}

/// Random duplicate-free, conflict-free assumption set.
pub fn random_assumptions(r: &mut ChaCha8Rng, n: u32, max_len: usize) -> Vec<Literal> {
    let k = r.gen_range(0..=max_len.min(n as usize));
    let mut vars: Vec<u32> = (1..=n).collect();
    for i in 0..k {
        let j = r.gen_range(i..vars.len());
        vars.swap(i, j);
    }
    vars[..k]
        .iter()
        .map(|&v| Literal::new(v, r.gen_bool(0.5)))
        .collect()
}

pub fn random_objective(r: &mut ChaCha8Rng, n: u32, w: i64) -> Vec<(u32, i64)> {
    (1..=n).map(|v| (v, r.gen_range(-w..=w))).collect()
}

/// Dense `a · x >= b` for the vertex oracle.
#[derive(Debug, Clone)]
pub struct DenseRow {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Solves the square system `m x = rhs` by Gaussian elimination with
/// partial pivoting; `None` when singular.
#[allow(clippy::needless_range_loop)]
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let k = rhs.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..k {
            if r != col {
                let f = m[r][col] / m[col][col];
                if f != 0.0 {
                    for c in col..k {
                        m[r][c] -= f * m[col][c];
                    }
                    rhs[r] -= f * rhs[col];
                }
            }
        }
    }
    Some((0..k).map(|i| rhs[i] / m[i][i]).collect())
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::with_capacity(k), f);
}

/// Minimum of `c · x` over `{x in [0,1]^n : rows}` by enumerating every
/// basic point: each variable sits at 0, at 1 or is free, and the free ones
/// are pinned by as many tight rows. `None` when no feasible vertex exists.
pub fn vertex_optimum(c: &[f64], rows: &[DenseRow]) -> Option<f64> {
    let n = c.len();
    let mut best: Option<f64> = None;
    let mut states = vec![0u8; n];
    loop {
        let free: Vec<usize> = (0..n).filter(|&i| states[i] == 2).collect();
        let fixed_val = |i: usize| if states[i] == 1 { 1.0 } else { 0.0 };
        let k = free.len();
        let mut check = |x: &[f64]| {
            let ok = x.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v))
                && rows
                    .iter()
                    .all(|r| r.a.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() >= r.b - 1e-9);
            if ok {
                let val: f64 = c.iter().zip(x).map(|(a, v)| a * v).sum();
                best = Some(best.map_or(val, |b: f64| b.min(val)));
            }
        };
        if k == 0 {
            let x: Vec<f64> = (0..n).map(fixed_val).collect();
            check(&x);
        } else if k <= rows.len() {
            combinations(rows.len(), k, &mut |sel| {
                let m: Vec<Vec<f64>> = sel
                    .iter()
                    .map(|&r| free.iter().map(|&j| rows[r].a[j]).collect())
                    .collect();
                let rhs: Vec<f64> = sel
                    .iter()
                    .map(|&r| {
                        rows[r].b
                            - (0..n)
                                .filter(|&j| states[j] != 2)
                                .map(|j| rows[r].a[j] * fixed_val(j))
                                .sum::<f64>()
                    })
                    .collect();
                if let Some(sol) = solve_square(m, rhs) {
                    let mut x: Vec<f64> = (0..n).map(fixed_val).collect();
                    for (t, &j) in free.iter().enumerate() {
                        x[j] = sol[t];
                    }
                    check(&x);
                }
            });
        }
        // next state vector in base 3
        let mut i = 0;
        loop {
            if i == n {
                return best;
            }
            states[i] += 1;
            if states[i] < 3 {
                break;
            }
            states[i] = 0;
            i += 1;
        }
    }
}

/// Clause as a dense row: `+1` positive, `-1` negative, rhs `1 - #neg`.
pub fn clause_dense_row(c: &Clause, n: usize) -> DenseRow {
    let mut a = vec![0.0; n];
    let mut neg = 0.0;
    for l in c.lits() {
        if l.is_positive() {
            a[l.var() as usize - 1] = 1.0;
        } else {
            a[l.var() as usize - 1] = -1.0;
            neg += 1.0;
        }
    }
    DenseRow { a, b: 1.0 - neg }
}

/// Value of the clause inequality's left side at a point.
pub fn clause_lhs(c: &Clause, x: &[f64]) -> f64 {
    c.lits()
        .iter()
        .map(|l| {
            let v = x[l.var() as usize - 1];
            if l.is_positive() {
                v
            } else {
                1.0 - v
            }
        })
        .sum()
}

/// The motivating example: `x ⇔ y`, `z ⇔ (x = y)`, minimize `z`.
pub fn motivating_instance() -> CnfOptInstance {
    let f = CnfFormula::from_dimacs(
        3,
        &[
            &[-1, 2],
            &[1, -2],
            &[-1, -2, 3],
            &[-1, 2, -3],
            &[1, -2, -3],
            &[1, 2, 3],
        ],
    )
    .unwrap();
    CnfOptInstance::new(f, [(3, 1)]).unwrap()
}

/// `(¬x ∨ ¬y) ∧ (¬x ∨ y)`.
pub fn no_integral_formula() -> CnfFormula {
    CnfFormula::from_dimacs(2, &[&[-1, -2], &[-1, 2]]).unwrap()
}

/// Pairwise conflicts `(¬x_i ∨ ¬x_j)` for all `i < j`.
pub fn pairwise_conflicts(n: u32) -> CnfFormula {
    let mut clauses = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            clauses.push(Clause::new([Literal::neg(i), Literal::neg(j)]).unwrap());
        }
    }
    CnfFormula::new(n, clauses).unwrap()
}

/// Every non-tautological clause over variables `1..=n` with at most
/// `max_len` literals.
pub fn all_clauses(n: u32, max_len: usize) -> Vec<Clause> {
    let mut out = Vec::new();
    for len in 1..=max_len.min(n as usize) {
        combinations(n as usize, len, &mut |vars| {
            for signs in 0u32..1 << len {
                let lits = vars
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| Literal::new(v as u32 + 1, signs >> i & 1 == 1));
                out.push(Clause::new(lits).unwrap());
            }
        });
    }
    out
}

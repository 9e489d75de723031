//! Propositional and CNFOPT data model.
//!
//! Literals, clauses and formulas, the DIMACS / WCNF / CNFOPT text formats,
//! and the translations between weighted partial MaxSAT and CNFOPT (a CNF
//! plus an integer objective to be minimized over its satisfying assignments).

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::Not;

use thiserror::Error;

use crate::lp::LinearRow;
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("line {line}: malformed header: {msg}")]
    MalformedHeader { line: usize, msg: String },
    #[error("line {line}: missing `p cnf` header before clauses")]
    MissingHeader { line: usize },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {lit} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange { line: usize, lit: i64, num_vars: u32 },
    #[error("clause not terminated by 0 at end of input")]
    MissingTerminator,
    #[error("tautological clause contains both {0} and its negation")]
    Tautology(Literal),
    #[error("empty clause")]
    EmptyClause,
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCount { declared: usize, found: usize },
    #[error("line {line}: soft clause weight must be a positive integer, got `{token}`")]
    InvalidWeight { line: usize, token: String },
    #[error("variable index 0 is not a valid literal")]
    ZeroVariable,
    #[error("variable {var} exceeds formula variable count {num_vars}")]
    VariableOutOfRange { var: u32, num_vars: u32 },
    #[error("assignment leaves variable {0} unassigned")]
    PartialAssignment(u32),
}

/// A boolean variable (1-based) or its negation.
///
/// Ordering is by variable index, then negative before positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    /// Panics if `var == 0`.
    pub fn new(var: u32, positive: bool) -> Literal {
        assert!(var >= 1, "variables are 1-based");
        Literal { var, positive }
    }

    pub fn pos(var: u32) -> Literal {
        Literal::new(var, true)
    }

    pub fn neg(var: u32) -> Literal {
        Literal::new(var, false)
    }

    /// Signed DIMACS encoding: `v` or `-v`.
    pub fn from_dimacs(x: i64) -> Result<Literal, FormulaError> {
        if x == 0 {
            return Err(FormulaError::ZeroVariable);
        }
        let var = u32::try_from(x.unsigned_abs()).map_err(|_| FormulaError::InvalidToken {
            line: 0,
            token: x.to_string(),
        })?;
        Ok(Literal::new(var, x > 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    /// Value of the literal when its variable takes `value`.
    pub fn eval(self, value: bool) -> bool {
        value == self.positive
    }
}

impl Not for Literal {
    type Output = Literal;
    fn not(self) -> Literal {
        Literal {
            var: self.var,
            positive: !self.positive,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A normalized disjunction of literals: non-empty, duplicate-free and not
/// tautological. Literal order is the order of first occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    lits: Vec<Literal>,
}

impl Clause {
    /// Normalizes `lits`: drops repeated literals and rejects empty or
    /// tautological input.
    pub fn new(lits: impl IntoIterator<Item = Literal>) -> Result<Clause, FormulaError> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for l in lits {
            if seen.contains(&!l) {
                return Err(FormulaError::Tautology(l));
            }
            if seen.insert(l) {
                out.push(l);
            }
        }
        if out.is_empty() {
            return Err(FormulaError::EmptyClause);
        }
        Ok(Clause { lits: out })
    }

    pub fn from_dimacs(lits: &[i64]) -> Result<Clause, FormulaError> {
        let lits = lits
            .iter()
            .map(|&x| Literal::from_dimacs(x))
            .collect::<Result<Vec<_>, _>>()?;
        Clause::new(lits)
    }

    pub fn lits(&self) -> &[Literal] {
        &self.lits
    }

    pub fn len(&self) -> usize {
        self.lits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lits.is_empty()
    }

    pub fn max_var(&self) -> u32 {
        self.lits.iter().map(|l| l.var()).max().unwrap_or(0)
    }

    /// Literals sorted by (variable, polarity); equal for clauses that
    /// differ only in literal order.
    pub fn canonical(&self) -> Vec<Literal> {
        let mut lits = self.lits.clone();
        lits.sort_unstable();
        lits
    }

    /// `values[v - 1]` is the value of variable `v`.
    pub fn is_satisfied_by(&self, values: &[bool]) -> bool {
        self.lits
            .iter()
            .any(|l| l.eval(values[l.var() as usize - 1]))
    }

    /// Left-hand side of the clause inequality at a fractional point:
    /// `x` for positive literals, `1 - x` for negative ones.
    pub fn activity_at<T: Scalar>(&self, point: &[T]) -> T {
        self.lits.iter().fold(T::zero(), |acc, l| {
            let x = point[l.var() as usize - 1];
            acc + if l.is_positive() { x } else { T::one() - x }
        })
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lits {
            write!(f, "{} ", l)?;
        }
        write!(f, "0")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CnfFormula {
    num_vars: u32,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Result<CnfFormula, FormulaError> {
        for c in &clauses {
            let var = c.max_var();
            if var > num_vars {
                return Err(FormulaError::VariableOutOfRange { var, num_vars });
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    /// Builds a formula from signed DIMACS literal lists.
    pub fn from_dimacs(num_vars: u32, clauses: &[&[i64]]) -> Result<CnfFormula, FormulaError> {
        let clauses = clauses
            .iter()
            .map(|c| Clause::from_dimacs(c))
            .collect::<Result<Vec<_>, _>>()?;
        CnfFormula::new(num_vars, clauses)
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn is_satisfied_by(&self, values: &[bool]) -> bool {
        self.clauses.iter().all(|c| c.is_satisfied_by(values))
    }
}

/// Minimize `sum objective[v] * x_v` over the satisfying assignments of
/// `formula`. Zero coefficients are not stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CnfOptInstance {
    formula: CnfFormula,
    objective: BTreeMap<u32, i64>,
}

impl CnfOptInstance {
    pub fn new(
        formula: CnfFormula,
        objective: impl IntoIterator<Item = (u32, i64)>,
    ) -> Result<CnfOptInstance, FormulaError> {
        let mut obj = BTreeMap::new();
        for (var, c) in objective {
            if var == 0 {
                return Err(FormulaError::ZeroVariable);
            }
            if var > formula.num_vars() {
                return Err(FormulaError::VariableOutOfRange {
                    var,
                    num_vars: formula.num_vars(),
                });
            }
            *obj.entry(var).or_insert(0) += c;
        }
        obj.retain(|_, c| *c != 0);
        Ok(CnfOptInstance {
            formula,
            objective: obj,
        })
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.formula
    }

    pub fn num_vars(&self) -> u32 {
        self.formula.num_vars()
    }

    /// Nonzero coefficients in ascending variable order.
    pub fn objective(&self) -> &BTreeMap<u32, i64> {
        &self.objective
    }

    pub fn coef(&self, var: u32) -> i64 {
        self.objective.get(&var).copied().unwrap_or(0)
    }

    /// Dense objective vector indexed by `var - 1`.
    pub fn dense_objective(&self) -> Vec<i64> {
        let mut c = vec![0; self.num_vars() as usize];
        for (&v, &k) in &self.objective {
            c[v as usize - 1] = k;
        }
        c
    }

    pub fn objective_value(&self, values: &[bool]) -> i64 {
        self.objective
            .iter()
            .filter(|(&v, _)| values[v as usize - 1])
            .map(|(_, &c)| c)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WcnfInstance {
    pub num_vars: u32,
    pub hard: Vec<Clause>,
    pub soft: Vec<(Clause, u64)>,
}

impl WcnfInstance {
    /// Total weight of the soft clauses falsified by a total assignment.
    pub fn falsified_weight(&self, values: &[bool]) -> u64 {
        self.soft
            .iter()
            .filter(|(c, _)| !c.is_satisfied_by(values))
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn hard_satisfied_by(&self, values: &[bool]) -> bool {
        self.hard.iter().all(|c| c.is_satisfied_by(values))
    }
}

/// A possibly partial map from variables to truth values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn new(num_vars: u32) -> Assignment {
        Assignment {
            values: vec![None; num_vars as usize],
        }
    }

    /// Total assignment where `values[v - 1]` is the value of `v`.
    pub fn from_bools(values: &[bool]) -> Assignment {
        Assignment {
            values: values.iter().map(|&b| Some(b)).collect(),
        }
    }

    pub fn set(&mut self, var: u32, value: bool) {
        let idx = var as usize - 1;
        if idx >= self.values.len() {
            self.values.resize(idx + 1, None);
        }
        self.values[idx] = Some(value);
    }

    pub fn get(&self, var: u32) -> Option<bool> {
        self.values.get(var as usize - 1).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }

    /// Dense values for variables `1..=num_vars`, or the first unassigned
    /// variable.
    pub fn to_bools(&self, num_vars: u32) -> Result<Vec<bool>, u32> {
        (1..=num_vars)
            .map(|v| self.get(v).ok_or(v))
            .collect()
    }

    /// Satisfied literals, one per assigned variable, in variable order.
    pub fn literals(&self) -> Vec<Literal> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| Literal::new(i as u32 + 1, b)))
            .collect()
    }
}

/// Checks `a` against the formula of `p` and computes the objective.
///
/// Every variable that occurs in a clause or carries a nonzero coefficient
/// must be assigned.
pub fn evaluate(a: &Assignment, p: &CnfOptInstance) -> Result<(bool, i64), FormulaError> {
    let need = |v: u32| a.get(v).ok_or(FormulaError::PartialAssignment(v));
    let mut sat = true;
    for c in p.formula().clauses() {
        let mut clause_sat = false;
        for l in c.lits() {
            if l.eval(need(l.var())?) {
                clause_sat = true;
            }
        }
        sat &= clause_sat;
    }
    let mut obj = 0;
    for (&v, &c) in p.objective() {
        if need(v)? {
            obj += c;
        }
    }
    Ok((sat, obj))
}

/// The clause as `sum(x_i for positive) - sum(x_j for negative) >= 1 - #neg`.
pub fn clause_inequality<T: Scalar>(c: &Clause) -> Result<LinearRow<T>, FormulaError> {
    if c.is_empty() {
        return Err(FormulaError::EmptyClause);
    }
    let mut negatives = 0i64;
    let coeffs = c.lits().iter().map(|l| {
        if l.is_positive() {
            (l.var(), T::one())
        } else {
            negatives += 1;
            (l.var(), -T::one())
        }
    });
    let coeffs: Vec<_> = coeffs.collect();
    let rhs = <T as Scalar>::from_i64(1 - negatives);
    Ok(LinearRow::greater_eq(coeffs, rhs).expect("normalized clause yields a nonzero row"))
}

/// Soft clause `C` with weight `w` becomes hard `C ∨ x_C` with objective
/// coefficient `w` on the fresh variable `x_C`. Fresh variables are numbered
/// after the original ones in soft-clause order.
pub fn wcnf_to_cnfopt(w: &WcnfInstance) -> CnfOptInstance {
    let mut clauses = w.hard.clone();
    let mut objective = Vec::with_capacity(w.soft.len());
    for (i, (c, weight)) in w.soft.iter().enumerate() {
        let aux = w.num_vars + 1 + i as u32;
        let mut lits = c.lits().to_vec();
        lits.push(Literal::pos(aux));
        clauses.push(Clause { lits });
        objective.push((aux, *weight as i64));
    }
    let n = w.num_vars + w.soft.len() as u32;
    let formula = CnfFormula::new(n, clauses).expect("auxiliary encoding stays in range");
    CnfOptInstance::new(formula, objective).expect("auxiliary objective stays in range")
}

/// Rewrites the objective into soft unit clauses. Returns the instance and a
/// constant such that `objective(a) = falsified_weight(a) + offset` for every
/// assignment `a`.
pub fn cnfopt_to_wcnf(p: &CnfOptInstance) -> (WcnfInstance, i64) {
    let mut offset = 0;
    let mut soft = Vec::new();
    for (&v, &c) in p.objective() {
        if c > 0 {
            soft.push((Clause::new([Literal::neg(v)]).unwrap(), c as u64));
        } else {
            soft.push((Clause::new([Literal::pos(v)]).unwrap(), c.unsigned_abs()));
            offset += c;
        }
    }
    let w = WcnfInstance {
        num_vars: p.num_vars(),
        hard: p.formula().clauses().to_vec(),
        soft,
    };
    (w, offset)
}

fn parse_int(tok: &str, line: usize) -> Result<i64, FormulaError> {
    tok.parse::<i64>().map_err(|_| FormulaError::InvalidToken {
        line,
        token: tok.to_string(),
    })
}

/// Parses DIMACS CNF, returning the formula and its comment lines (without
/// the leading `c`).
///
/// The SATLIB end marker (`%` followed by a stray `0`) ends the input.
pub fn parse_dimacs_with_comments(text: &str) -> Result<(CnfFormula, Vec<String>), FormulaError> {
    let mut comments = Vec::new();
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut pending: Vec<i64> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                comments.push(rest.trim_start().to_string());
                continue;
            }
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(FormulaError::MalformedHeader {
                    line: line_no,
                    msg: "duplicate header".into(),
                });
            }
            header = Some(parse_cnf_header(line, line_no)?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(FormulaError::MissingHeader { line: line_no });
        };
        for tok in line.split_whitespace() {
            let x = parse_int(tok, line_no)?;
            if x == 0 {
                let clause = Clause::from_dimacs(&pending)?;
                clauses.push(clause);
                pending.clear();
            } else {
                if x.unsigned_abs() > num_vars as u64 {
                    return Err(FormulaError::LiteralOutOfRange {
                        line: line_no,
                        lit: x,
                        num_vars,
                    });
                }
                pending.push(x);
            }
        }
    }
    if !pending.is_empty() {
        return Err(FormulaError::MissingTerminator);
    }
    let Some((num_vars, declared)) = header else {
        return Err(FormulaError::MissingHeader { line: 0 });
    };
    if declared != clauses.len() {
        return Err(FormulaError::ClauseCount {
            declared,
            found: clauses.len(),
        });
    }
    Ok((CnfFormula::new(num_vars, clauses)?, comments))
}

fn parse_cnf_header(line: &str, line_no: usize) -> Result<(u32, usize), FormulaError> {
    let bad = |msg: &str| FormulaError::MalformedHeader {
        line: line_no,
        msg: msg.to_string(),
    };
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
        return Err(bad("expected `p cnf <vars> <clauses>`"));
    }
    let v = parts[2].parse::<u32>().map_err(|_| bad("bad variable count"))?;
    let c = parts[3].parse::<usize>().map_err(|_| bad("bad clause count"))?;
    Ok((v, c))
}

pub fn parse_dimacs_cnf(text: &str) -> Result<CnfFormula, FormulaError> {
    parse_dimacs_with_comments(text).map(|(f, _)| f)
}

/// DIMACS CNF text. Comments are not written.
pub fn write_dimacs_cnf(f: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars(), f.clauses().len());
    for c in f.clauses() {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

/// Parses WCNF. Accepts the `h`-prefixed format and the legacy
/// `p wcnf V C [TOP]` format, where weights `>= TOP` mark hard clauses.
pub fn parse_wcnf(text: &str) -> Result<WcnfInstance, FormulaError> {
    let mut hard = Vec::new();
    let mut soft = Vec::new();
    let mut max_var = 0u32;
    let mut declared_vars: Option<u32> = None;
    let mut top: Option<u64> = None;
    // (is_hard, weight, literals) of the clause being read
    let mut pending: Option<(bool, u64, Vec<i64>)> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = |msg: &str| FormulaError::MalformedHeader {
                line: line_no,
                msg: msg.to_string(),
            };
            if parts.len() < 4 || parts.len() > 5 || parts[0] != "p" || parts[1] != "wcnf" {
                return Err(bad("expected `p wcnf <vars> <clauses> [top]`"));
            }
            declared_vars = Some(parts[2].parse().map_err(|_| bad("bad variable count"))?);
            if let Some(t) = parts.get(4) {
                top = Some(t.parse().map_err(|_| bad("bad top weight"))?);
            }
            continue;
        }
        for tok in line.split_whitespace() {
            match pending.as_mut() {
                None => {
                    if tok == "h" {
                        pending = Some((true, 0, Vec::new()));
                    } else {
                        let w = tok.parse::<i64>().map_err(|_| FormulaError::InvalidWeight {
                            line: line_no,
                            token: tok.to_string(),
                        })?;
                        if w <= 0 {
                            return Err(FormulaError::InvalidWeight {
                                line: line_no,
                                token: tok.to_string(),
                            });
                        }
                        let w = w as u64;
                        let is_hard = top.is_some_and(|t| w >= t);
                        pending = Some((is_hard, w, Vec::new()));
                    }
                }
                Some((is_hard, w, lits)) => {
                    let x = parse_int(tok, line_no)?;
                    if x != 0 {
                        if let Some(n) = declared_vars {
                            if x.unsigned_abs() > n as u64 {
                                return Err(FormulaError::LiteralOutOfRange {
                                    line: line_no,
                                    lit: x,
                                    num_vars: n,
                                });
                            }
                        }
                        lits.push(x);
                        continue;
                    }
                    let clause = Clause::from_dimacs(lits)?;
                    max_var = max_var.max(clause.max_var());
                    if *is_hard {
                        hard.push(clause);
                    } else {
                        soft.push((clause, *w));
                    }
                    pending = None;
                }
            }
        }
    }
    if pending.is_some() {
        return Err(FormulaError::MissingTerminator);
    }
    Ok(WcnfInstance {
        num_vars: declared_vars.unwrap_or(0).max(max_var),
        hard,
        soft,
    })
}

/// WCNF in the `h`-prefixed format: hard clauses first, then soft clauses,
/// one newline-terminated line each.
pub fn write_wcnf(w: &WcnfInstance) -> String {
    let mut out = String::new();
    for c in &w.hard {
        out.push_str(&format!("h {c}\n"));
    }
    for (c, weight) in &w.soft {
        out.push_str(&format!("{weight} {c}\n"));
    }
    out
}

/// Parses the CNFOPT text format: a DIMACS CNF whose `c obj <var> <coef>`
/// comment lines carry the objective. Other comments are ignored.
pub fn parse_cnfopt(text: &str) -> Result<CnfOptInstance, FormulaError> {
    let (formula, comments) = parse_dimacs_with_comments(text)?;
    let mut objective = Vec::new();
    for (i, c) in comments.iter().enumerate() {
        let mut parts = c.split_whitespace();
        if parts.next() != Some("obj") {
            continue;
        }
        let rest: Vec<&str> = parts.collect();
        let bad = || FormulaError::InvalidToken {
            line: i,
            token: format!("c {c}"),
        };
        if rest.len() != 2 {
            return Err(bad());
        }
        let var = rest[0].parse::<u32>().map_err(|_| bad())?;
        let coef = rest[1].parse::<i64>().map_err(|_| bad())?;
        objective.push((var, coef));
    }
    CnfOptInstance::new(formula, objective)
}

/// Header, then one `c obj` line per nonzero coefficient, then the clauses.
pub fn write_cnfopt(p: &CnfOptInstance) -> String {
    let f = p.formula();
    let mut out = format!("p cnf {} {}\n", f.num_vars(), f.clauses().len());
    for (v, c) in p.objective() {
        out.push_str(&format!("c obj {v} {c}\n"));
    }
    for c in f.clauses() {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

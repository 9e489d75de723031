//! Clause-cut separation.
//!
//! Both separators read the integral components of a fractional point as
//! SAT assumptions. The integral separator ([`icca`]) cuts only when those
//! assumptions are an unsatisfiable core. The learned separator ([`lcca`])
//! also keeps every clause the engine has learned in a [`KnownClauseDb`] and
//! cuts with the first shortest one violated by the point. Either way the
//! core is shrunk by deletion before the cut is emitted, so the final cut is
//! a supporting hyperplane of the integer hull.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::formula::{clause_inequality, Clause, Literal};
use crate::lp::LinearRow;
use crate::sat_engine::{SatEngine, SolveResult};

/// Default distance from 0 or 1 within which an LP value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-6;
/// Default margin below 1 for a clause inequality to count as violated.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeparationError {
    #[error("core is satisfiable together with the formula")]
    SatisfiableCore,
    #[error("cannot build a cut from an empty core")]
    EmptyCore,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CutOrigin {
    Icca,
    Lcca,
}

impl CutOrigin {
    pub fn as_str(self) -> &'static str {
        match self {
            CutOrigin::Icca => "icca",
            CutOrigin::Lcca => "lcca",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    pub integrality_tol: f64,
    pub violation_tol: f64,
    /// Start the deletion loop from the engine's failed-assumption subset
    /// instead of the full assumption set.
    pub preshrink: bool,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            integrality_tol: INTEGRALITY_TOL,
            violation_tol: VIOLATION_TOL,
            preshrink: false,
        }
    }
}

/// A clause implied by the formula together with its clause inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseCut {
    pub clause: Clause,
    pub row: LinearRow<f64>,
    pub origin: CutOrigin,
    pub length_before: usize,
    pub length_after: usize,
    pub separation_time: Duration,
}

impl ClauseCut {
    /// `origin,length_before,length_after,seconds,<literals> 0`
    pub fn log_line(&self) -> String {
        format!(
            "{},{},{},{:.6},{}",
            self.origin.as_str(),
            self.length_before,
            self.length_after,
            self.separation_time.as_secs_f64(),
            self.clause
        )
    }
}

/// Clauses known to be implied by the formula, unique up to literal order.
#[derive(Debug, Clone, Default)]
pub struct KnownClauseDb {
    clauses: Vec<Clause>,
    index: HashMap<Vec<Literal>, usize>,
    /// clause length -> positions in `clauses`, in insertion order
    by_len: BTreeMap<usize, Vec<usize>>,
}

impl KnownClauseDb {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if an equal clause is already stored.
    pub fn insert(&mut self, c: Clause) -> bool {
        let key = c.canonical();
        if self.index.contains_key(&key) {
            return false;
        }
        let pos = self.clauses.len();
        self.index.insert(key, pos);
        self.by_len.entry(c.len()).or_default().push(pos);
        self.clauses.push(c);
        true
    }

    pub fn contains(&self, c: &Clause) -> bool {
        self.index.contains_key(&c.canonical())
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// Clauses in insertion order.
    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }
}

/// Literals fixed by the integral components of `xbar`, in variable order:
/// `x_i` when `xbar_i >= 1 - tol`, `¬x_i` when `xbar_i <= tol`.
pub fn integral_assumptions(xbar: &[f64], tol: f64) -> Vec<Literal> {
    xbar.iter()
        .enumerate()
        .filter_map(|(i, &x)| {
            let var = i as u32 + 1;
            if x >= 1.0 - tol {
                Some(Literal::pos(var))
            } else if x <= tol {
                Some(Literal::neg(var))
            } else {
                None
            }
        })
        .collect()
}

fn solve_unchecked(e: &mut SatEngine, assumptions: &[Literal]) -> SolveResult {
    e.solve(assumptions)
        .expect("separation only builds duplicate-free, conflict-free assumptions")
}

/// Deletion loop on a core known to be unsatisfiable.
fn knock_out(e: &mut SatEngine, mut core: Vec<Literal>) -> Vec<Literal> {
    let mut i = 0;
    while i < core.len() {
        let mut trial = core.clone();
        trial.remove(i);
        if solve_unchecked(e, &trial) == SolveResult::Unsat {
            core = trial;
        } else {
            i += 1;
        }
    }
    core
}

/// Shrinks an unsatisfiable assumption set to a minimal one. Literals are
/// tried for removal in ascending variable order and removals take effect
/// immediately.
pub fn minimize_core(
    e: &mut SatEngine,
    core: &[Literal],
) -> Result<Vec<Literal>, SeparationError> {
    let mut core = core.to_vec();
    core.sort_by_key(|l| l.var());
    if solve_unchecked(e, &core).is_sat() {
        return Err(SeparationError::SatisfiableCore);
    }
    Ok(knock_out(e, core))
}

/// The clause `⋁ ¬l` over the core and its inequality `Σ (1 - l) >= 1`.
pub fn cut_from_core(
    core: &[Literal],
    origin: CutOrigin,
) -> Result<ClauseCut, SeparationError> {
    if core.is_empty() {
        return Err(SeparationError::EmptyCore);
    }
    let clause = Clause::new(core.iter().map(|&l| !l)).map_err(|_| SeparationError::EmptyCore)?;
    let row = clause_inequality(&clause).expect("non-empty clause");
    Ok(ClauseCut {
        length_before: clause.len(),
        length_after: clause.len(),
        clause,
        row,
        origin,
        separation_time: Duration::ZERO,
    })
}

/// Integral clause-cut separation. Returns a cut iff the integral part of
/// `xbar` is an unsatisfiable core.
pub fn icca(e: &mut SatEngine, xbar: &[f64], cfg: &SeparationConfig) -> Option<ClauseCut> {
    let start = Instant::now();
    let assumptions = integral_assumptions(xbar, cfg.integrality_tol);
    if solve_unchecked(e, &assumptions).is_sat() {
        return None;
    }
    let before = assumptions.len();
    let mut core = assumptions;
    if cfg.preshrink {
        let failed = e.failed_assumptions();
        core.retain(|l| failed.contains(l));
    }
    let core = knock_out(e, core);
    let mut cut = cut_from_core(&core, CutOrigin::Icca).ok()?;
    cut.length_before = before;
    cut.separation_time = start.elapsed();
    Some(cut)
}

/// First-inserted clause of minimum length whose inequality is violated at
/// `xbar` by more than `tol`.
pub fn check_known_clauses_for_violation<'a>(
    db: &'a KnownClauseDb,
    xbar: &[f64],
    tol: f64,
) -> Option<&'a Clause> {
    db.by_len.values().find_map(|positions| {
        positions
            .iter()
            .map(|&p| &db.clauses[p])
            .find(|c| c.activity_at(xbar) < 1.0 - tol)
    })
}

/// Learned clause-cut separation. Finds every cut [`icca`] would find and
/// may find more through the clause database.
pub fn lcca(
    e: &mut SatEngine,
    db: &mut KnownClauseDb,
    xbar: &[f64],
    cfg: &SeparationConfig,
) -> Option<ClauseCut> {
    let start = Instant::now();
    let assumptions = integral_assumptions(xbar, cfg.integrality_tol);
    if solve_unchecked(e, &assumptions) == SolveResult::Unsat && !assumptions.is_empty() {
        let no_good = Clause::new(assumptions.iter().map(|&l| !l)).expect("non-empty core");
        db.insert(no_good);
    }
    for c in e.get_learned_clauses() {
        db.insert(c);
    }
    let chosen = check_known_clauses_for_violation(db, xbar, cfg.violation_tol)?;
    let before = chosen.len();
    let mut core: Vec<Literal> = chosen.lits().iter().map(|&l| !l).collect();
    core.sort_by_key(|l| l.var());
    let core = knock_out(e, core);
    let mut cut = cut_from_core(&core, CutOrigin::Lcca).ok()?;
    cut.length_before = before;
    cut.separation_time = start.elapsed();
    Some(cut)
}

/// One line per cut, see [`ClauseCut::log_line`], under a header row.
pub fn write_cut_log<'a>(cuts: impl IntoIterator<Item = &'a ClauseCut>) -> String {
    let mut out = String::from("origin,length_before,length_after,seconds,clause\n");
    for c in cuts {
        let _ = writeln!(out, "{}", c.log_line());
    }
    out
}

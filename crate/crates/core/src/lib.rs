//! Clause-cut optimization for CNF-constrained 0-1 programs.
//!
//! A CNFOPT instance minimizes an integer objective over the satisfying
//! assignments of a CNF. Each clause becomes a linear row, a CDCL engine
//! separates *clause cuts* (clause inequalities of implied clauses) that cut
//! off fractional LP optima, and an LP-based branch-and-bound finishes the
//! strengthened model.
//!
//! The LP layer is generic over [`num::Scalar`] (`f32`, `f64`); the solver
//! pipeline runs on `f64` through the aliases below.

pub mod formula;
pub mod harness;
pub mod lp;
pub mod num;
pub mod sat_engine;
pub mod separation;
pub mod solver;

pub use formula::{Assignment, Clause, CnfFormula, CnfOptInstance, Literal, WcnfInstance};
pub use num::Scalar;
pub use sat_engine::{SatEngine, SolveResult};
pub use separation::{ClauseCut, CutOrigin, KnownClauseDb};
pub use solver::{solve_instance, CutLoopLimits, SeparationMode, SolveOutcome, SolveStats};

/// Row of the `f64` pipeline.
pub type LinearRow = lp::LinearRow<f64>;
/// LP of the `f64` pipeline.
pub type LpProblem = lp::LpProblem<f64>;
pub type LpSolution = lp::LpSolution<f64>;
/// Single-precision LP, useful for quick screening.
pub type LpProblemF32 = lp::LpProblem<f32>;

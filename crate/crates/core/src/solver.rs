//! End-to-end CNFOPT optimization.
//!
//! 1. An initial SAT call checks feasibility and seeds the incumbent.
//! 2. At the root, LP relaxation and clause-cut separation alternate until
//!    the separator finds nothing, the cut limit is hit or the time budget
//!    runs out.
//! 3. Depth-first LP branch-and-bound on the strengthened model proves
//!    optimality.

use std::collections::HashSet;
use std::time::{Duration, Instant};

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::formula::{clause_inequality, Assignment, CnfOptInstance, Literal};
use crate::lp::{solve_lp, IncrementalLp, LpError, LpProblem, LpSolution, LpStatus};
use crate::sat_engine::{SatConfig, SatEngine, SolveResult};
use crate::separation::{
    icca, integral_assumptions, lcca, ClauseCut, KnownClauseDb, SeparationConfig,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("LP failure: {0}")]
    Lp(#[from] LpError),
    #[error("LP relaxation of a satisfiable formula reported infeasible")]
    InconsistentRelaxation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SeparationMode {
    None,
    Icca,
    Lcca,
}

impl SeparationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SeparationMode::None => "none",
            SeparationMode::Icca => "icca",
            SeparationMode::Lcca => "lcca",
        }
    }
}

impl std::str::FromStr for SeparationMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(SeparationMode::None),
            "icca" => Ok(SeparationMode::Icca),
            "lcca" => Ok(SeparationMode::Lcca),
            other => Err(format!("unknown mode `{other}` (expected icca, lcca or none)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CutLoopLimits {
    pub max_cuts: usize,
    pub time_budget: Duration,
}

impl Default for CutLoopLimits {
    fn default() -> Self {
        CutLoopLimits {
            max_cuts: 150,
            time_budget: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub mode: SeparationMode,
    pub limits: CutLoopLimits,
    pub seed: u64,
    /// Probe every branch-and-bound node's integral part with a SAT call.
    pub probe_nodes: bool,
    pub separation: SeparationConfig,
    /// Abort branch-and-bound with [`SolveStatus::TimedOut`] past this point.
    pub deadline: Option<Instant>,
    /// Re-solve the cut loop's LP with dual simplex pivots from the previous
    /// basis instead of from scratch.
    pub warm_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: SeparationMode::Lcca,
            limits: CutLoopLimits::default(),
            seed: 0,
            probe_nodes: true,
            separation: SeparationConfig::default(),
            deadline: None,
            warm_start: false,
        }
    }
}

fn secs<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolveStats {
    #[serde(serialize_with = "secs")]
    pub initial_sat_time: Duration,
    #[serde(serialize_with = "secs")]
    pub cut_loop_time: Duration,
    #[serde(serialize_with = "secs")]
    pub bnb_time: Duration,
    #[serde(serialize_with = "secs")]
    pub total_time: Duration,
    pub n_cuts: usize,
    pub avg_clause_length_after_min: f64,
    pub avg_clause_length_before_min: f64,
    pub nodes_visited: u64,
    pub feasible_nodes: u64,
    /// Whether `feasible_nodes` was measured.
    pub probed_nodes: bool,
    pub solved_at_root: bool,
    pub lp_objective_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    TimedOut,
}

/// A cut together with the LP point it was separated from.
#[derive(Debug, Clone, PartialEq)]
pub struct CutEvent {
    pub cut: ClauseCut,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Best assignment found; proven optimal when `status` is optimal.
    pub model: Option<Assignment>,
    pub objective: Option<i64>,
    pub stats: SolveStats,
    pub cuts: Vec<CutEvent>,
    /// Root relaxation of the strengthened model.
    pub root_lp: Option<LpSolution<f64>>,
    /// Objective of the model returned by the initial SAT call.
    pub initial_objective: Option<i64>,
}

impl SolveOutcome {
    /// One JSON object: status, objective and every statistics field.
    pub fn to_json(&self, cut_log: Option<&str>) -> serde_json::Value {
        let mut v = serde_json::to_value(&self.stats).expect("stats serialize");
        let obj = v.as_object_mut().expect("stats is an object");
        obj.insert("status".into(), serde_json::to_value(self.status).unwrap());
        obj.insert("objective".into(), serde_json::to_value(self.objective).unwrap());
        obj.insert("cut_log".into(), serde_json::to_value(cut_log).unwrap());
        v
    }
}

/// The CNFOPT instance as an LP over its clause rows plus appended cuts.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub instance: CnfOptInstance,
    pub cuts: Vec<ClauseCut>,
    lp: LpProblem<f64>,
    cut_keys: HashSet<Vec<Literal>>,
}

impl MilpModel {
    pub fn new(instance: CnfOptInstance) -> Self {
        let objective = instance
            .dense_objective()
            .into_iter()
            .map(|c| c as f64)
            .collect();
        let mut lp = LpProblem::new(objective);
        for c in instance.formula().clauses() {
            lp.push_row(clause_inequality(c).expect("formula clauses are non-empty"))
                .expect("formula clauses are in range");
        }
        MilpModel {
            instance,
            cuts: Vec::new(),
            lp,
            cut_keys: HashSet::new(),
        }
    }

    pub fn lp(&self) -> &LpProblem<f64> {
        &self.lp
    }

    /// Appends the cut unless its clause is already present.
    pub fn add_cut(&mut self, cut: ClauseCut) -> bool {
        if !self.cut_keys.insert(cut.clause.canonical()) {
            return false;
        }
        self.lp
            .push_row(cut.row.clone())
            .expect("cut variables are formula variables");
        self.cuts.push(cut);
        true
    }
}

/// `solve(e, integral_assumptions(xbar))` is satisfiable.
pub fn node_feasibility_probe(e: &mut SatEngine, xbar: &[f64], tol: f64) -> bool {
    let a = integral_assumptions(xbar, tol);
    e.solve(&a).expect("integral assumptions are well formed").is_sat()
}

#[derive(Debug, Clone)]
struct BnbNode {
    fixings: Vec<(u32, bool)>,
    parent_bound: f64,
    depth: usize,
}

#[derive(Debug, Clone)]
pub struct BnbResult {
    /// `None` with no incumbent means the model has no integral point.
    pub model: Option<Vec<bool>>,
    pub objective: Option<i64>,
    pub nodes_visited: u64,
    pub feasible_nodes: u64,
    pub root_lp: Option<LpSolution<f64>>,
    pub timed_out: bool,
    pub max_depth: usize,
}

const BOUND_EPS: f64 = 1e-6;

fn is_integral(x: &[f64], tol: f64) -> bool {
    x.iter().all(|&v| v <= tol || v >= 1.0 - tol)
}

/// Exact minimization of the model's objective over 0/1 points.
///
/// Depth-first; branches on the most fractional variable (lowest index on
/// ties) and explores first the value the incumbent gives that variable.
/// A node is pruned when `ceil(bound - eps) >= incumbent`, which is exact
/// because the objective is integral.
pub fn branch_and_bound(
    m: &MilpModel,
    incumbent: Option<(Vec<bool>, i64)>,
    mut probe: Option<&mut SatEngine>,
    tol: f64,
    deadline: Option<Instant>,
) -> Result<BnbResult, SolverError> {
    let (mut best, mut best_obj) = match incumbent {
        Some((x, o)) => (Some(x), Some(o)),
        None => (None, None),
    };
    let prunable = |bound: f64, inc: Option<i64>| {
        inc.is_some_and(|i| (bound - BOUND_EPS).ceil() >= i as f64)
    };
    let mut res = BnbResult {
        model: None,
        objective: None,
        nodes_visited: 0,
        feasible_nodes: 0,
        root_lp: None,
        timed_out: false,
        max_depth: 0,
    };
    let mut stack = vec![BnbNode {
        fixings: Vec::new(),
        parent_bound: f64::NEG_INFINITY,
        depth: 0,
    }];
    while let Some(node) = stack.pop() {
        if prunable(node.parent_bound, best_obj) {
            continue;
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            res.timed_out = true;
            break;
        }
        res.nodes_visited += 1;
        res.max_depth = res.max_depth.max(node.depth);
        let mut lp = m.lp().clone();
        for &(v, val) in &node.fixings {
            lp.fix(v, if val { 1.0 } else { 0.0 })?;
        }
        let sol = solve_lp(&lp)?;
        if node.depth == 0 {
            res.root_lp = Some(sol.clone());
        }
        if sol.status == LpStatus::Infeasible {
            continue;
        }
        if let Some(e) = probe.as_deref_mut() {
            if node_feasibility_probe(e, &sol.values, tol) {
                res.feasible_nodes += 1;
            }
        }
        if prunable(sol.objective, best_obj) {
            continue;
        }
        if is_integral(&sol.values, tol) {
            let point: Vec<bool> = sol.values.iter().map(|&v| v > 0.5).collect();
            debug_assert!(m.instance.formula().is_satisfied_by(&point));
            let obj = m.instance.objective_value(&point);
            if best_obj.is_none_or(|b| obj < b) {
                best_obj = Some(obj);
                best = Some(point);
            }
            continue;
        }
        // Most fractional variable.
        let (idx, _) = sol
            .values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > tol && v < 1.0 - tol)
            .map(|(i, &v)| (i, (v - 0.5).abs()))
            .fold(None, |acc: Option<(usize, f64)>, (i, d)| match acc {
                Some((_, bd)) if bd <= d => acc,
                _ => Some((i, d)),
            })
            .expect("fractional point has a fractional variable");
        let var = idx as u32 + 1;
        let first = match &best {
            Some(x) => x[idx],
            None => sol.values[idx] >= 0.5,
        };
        for val in [!first, first] {
            let mut fixings = node.fixings.clone();
            fixings.push((var, val));
            stack.push(BnbNode {
                fixings,
                parent_bound: sol.objective,
                depth: node.depth + 1,
            });
        }
    }
    res.model = best;
    res.objective = best_obj;
    Ok(res)
}

/// Runs the full pipeline with study defaults (node probing on).
pub fn solve_instance(
    p: &CnfOptInstance,
    mode: SeparationMode,
    limits: CutLoopLimits,
    seed: u64,
) -> Result<SolveOutcome, SolverError> {
    let cfg = SolverConfig {
        mode,
        limits,
        seed,
        ..SolverConfig::default()
    };
    solve_with_config(p, &cfg)
}

pub fn solve_with_config(
    p: &CnfOptInstance,
    cfg: &SolverConfig,
) -> Result<SolveOutcome, SolverError> {
    let start = Instant::now();
    let mut stats = SolveStats {
        probed_nodes: cfg.probe_nodes,
        ..SolveStats::default()
    };
    let sat_cfg = SatConfig {
        seed: cfg.seed,
        ..SatConfig::default()
    };
    let mut engine = SatEngine::with_config(p.formula(), sat_cfg);
    let first = engine.solve(&[]).expect("empty assumption set");
    stats.initial_sat_time = start.elapsed();
    let SolveResult::Sat(initial) = first else {
        stats.total_time = start.elapsed();
        return Ok(SolveOutcome {
            status: SolveStatus::Infeasible,
            model: None,
            objective: None,
            stats,
            cuts: Vec::new(),
            root_lp: None,
            initial_objective: None,
        });
    };
    let n = p.num_vars();
    let initial_bools = initial.to_bools(n).expect("SAT model is total");
    let initial_obj = p.objective_value(&initial_bools);

    let mut model = MilpModel::new(p.clone());
    let mut events = Vec::new();
    let loop_start = Instant::now();
    if cfg.mode != SeparationMode::None {
        let mut db = KnownClauseDb::new();
        let mut lp = IncrementalLp::new(model.lp().clone(), cfg.warm_start);
        loop {
            let sol = lp.solve()?;
            if sol.status == LpStatus::Infeasible {
                return Err(SolverError::InconsistentRelaxation);
            }
            stats.lp_objective_trace.push(sol.objective);
            let cut = match cfg.mode {
                SeparationMode::Icca => icca(&mut engine, &sol.values, &cfg.separation),
                SeparationMode::Lcca => lcca(&mut engine, &mut db, &sol.values, &cfg.separation),
                SeparationMode::None => unreachable!(),
            };
            let Some(cut) = cut else { break };
            if !model.add_cut(cut.clone()) {
                break;
            }
            lp.push_row(cut.row.clone())?;
            events.push(CutEvent {
                cut,
                point: sol.values,
            });
            if model.cuts.len() >= cfg.limits.max_cuts
                || start.elapsed() >= cfg.limits.time_budget
            {
                break;
            }
        }
    }
    stats.cut_loop_time = loop_start.elapsed();
    stats.n_cuts = model.cuts.len();
    if !model.cuts.is_empty() {
        let k = model.cuts.len() as f64;
        stats.avg_clause_length_after_min =
            model.cuts.iter().map(|c| c.length_after as f64).sum::<f64>() / k;
        stats.avg_clause_length_before_min =
            model.cuts.iter().map(|c| c.length_before as f64).sum::<f64>() / k;
    }

    let bnb_start = Instant::now();
    let probe = cfg.probe_nodes.then_some(&mut engine);
    let bnb = branch_and_bound(
        &model,
        Some((initial_bools, initial_obj)),
        probe,
        cfg.separation.integrality_tol,
        cfg.deadline,
    )?;
    stats.bnb_time = bnb_start.elapsed();
    stats.nodes_visited = bnb.nodes_visited;
    stats.feasible_nodes = bnb.feasible_nodes;
    stats.solved_at_root = bnb.nodes_visited == 1 && !bnb.timed_out;
    stats.total_time = start.elapsed();

    let bools = bnb.model.expect("incumbent seeded from the SAT model");
    Ok(SolveOutcome {
        status: if bnb.timed_out {
            SolveStatus::TimedOut
        } else {
            SolveStatus::Optimal
        },
        model: Some(Assignment::from_bools(&bools)),
        objective: bnb.objective,
        stats,
        cuts: events,
        root_lp: bnb.root_lp,
        initial_objective: Some(initial_obj),
    })
}

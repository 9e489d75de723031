//! Instance generation, batch benchmarking and CSV output.
//!
//! # Objective generator
//!
//! Objectives come from the `clausecut-objective-v1` scheme: a ChaCha8
//! stream seeded with `ChaCha8Rng::seed_from_u64(seed)`; for variables
//! `1..=n` in order, one coefficient each, drawn uniformly from `[-W, W]` by
//! rejection sampling on raw `next_u64` outputs (values at or above the
//! largest multiple of `2W + 1` are redrawn, then reduced modulo `2W + 1`
//! and shifted by `-W`). The scheme depends only on the ChaCha8 keystream,
//! so instances regenerate identically on every platform.
//!
//! # CSV files written by [`run_benchmark`]
//!
//! | file | columns |
//! |------|---------|
//! | `results.csv` | [`RESULTS_HEADER`] |
//! | `initial_sat.csv` | [`INITIAL_SAT_HEADER`] |
//! | `nodes.csv` | [`NODES_HEADER`] |
//! | `cactus.csv` | [`CACTUS_HEADER`] |
//!
//! All files are comma-separated UTF-8 with a header row and LF endings.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use log::warn;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{
    parse_cnfopt, parse_wcnf, wcnf_to_cnfopt, Clause, CnfFormula, CnfOptInstance, FormulaError,
    Literal,
};
use crate::sat_engine::SatEngine;
use crate::separation::write_cut_log;
use crate::solver::{
    solve_with_config, CutLoopLimits, SeparationMode, SolveOutcome, SolveStatus, SolverConfig,
    SolverError,
};

pub const RESULTS_HEADER: &str = "instance,mode,weight_range,seed,status,objective,\
n_cuts,avg_clause_length_before_min,avg_clause_length_after_min,nodes_visited,feasible_nodes,\
solved_at_root,initial_sat_time,cut_loop_time,bnb_time,total_time,error";
pub const INITIAL_SAT_HEADER: &str =
    "instance,mode,initial_sat_time,avg_clause_length_after_min,avg_clause_length_before_min,total_time";
pub const NODES_HEADER: &str = "instance,mode,nodes_visited,feasible_nodes";
pub const CACTUS_HEADER: &str = "mode,n,runtime,cumulative_runtime";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: FormulaError,
    },
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("could not build worker pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Uniform integer in `[-w, w]`, see the module docs.
fn draw_coefficient(rng: &mut ChaCha8Rng, w: u64) -> i64 {
    let span = 2 * w + 1;
    let zone = u64::MAX - (u64::MAX % span);
    loop {
        let r = rng.next_u64();
        if r < zone {
            return (r % span) as i64 - w as i64;
        }
    }
}

/// Random integral objective over all variables of `f`.
pub fn generate_instance(f: &CnfFormula, weight_range: u64, seed: u64) -> CnfOptInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective: Vec<(u32, i64)> = (1..=f.num_vars())
        .map(|v| (v, draw_coefficient(&mut rng, weight_range)))
        .collect();
    CnfOptInstance::new(f.clone(), objective).expect("objective over formula variables")
}

/// Uniform random k-CNF: every clause has `k` distinct variables with
/// independent random signs.
pub fn random_kcnf(num_vars: u32, num_clauses: usize, k: usize, seed: u64) -> CnfFormula {
    assert!(k as u32 <= num_vars, "clause width exceeds variable count");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clauses = Vec::with_capacity(num_clauses);
    while clauses.len() < num_clauses {
        let mut lits: Vec<Literal> = Vec::with_capacity(k);
        while lits.len() < k {
            let v = (rng.next_u64() % num_vars as u64) as u32 + 1;
            if lits.iter().any(|l| l.var() == v) {
                continue;
            }
            lits.push(Literal::new(v, rng.next_u64() & 1 == 1));
        }
        clauses.push(Clause::new(lits).expect("distinct variables"));
    }
    CnfFormula::new(num_vars, clauses).expect("variables in range")
}

/// Satisfiable uniform random 3-CNF in the style of the SATLIB `uf`
/// families. Candidate formulas are drawn from derived seeds until one is
/// satisfiable.
pub fn random_satisfiable_3cnf(num_vars: u32, num_clauses: usize, seed: u64) -> CnfFormula {
    (0u64..)
        .map(|attempt| {
            random_kcnf(
                num_vars,
                num_clauses,
                3,
                seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(attempt),
            )
        })
        .find(|f| SatEngine::new(f).solve(&[]).expect("no assumptions").is_sat())
        .expect("random 3-CNF below the threshold is eventually satisfiable")
}

/// Kind of input file, by extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// `.cnf`: plain CNF or CNFOPT (`c obj` lines).
    Cnf,
    Wcnf,
}

pub fn input_kind(path: &Path) -> Option<InputKind> {
    match path.extension()?.to_str()? {
        "cnf" | "cnfopt" => Some(InputKind::Cnf),
        "wcnf" => Some(InputKind::Wcnf),
        _ => None,
    }
}

/// Reads a CNFOPT instance from `.cnf`/`.cnfopt` (objective from `c obj`
/// lines, zero if none) or `.wcnf` (via auxiliary variables).
pub fn load_instance(path: &Path) -> Result<CnfOptInstance, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let parsed = match input_kind(path) {
        Some(InputKind::Wcnf) => parse_wcnf(&text).map(|w| wcnf_to_cnfopt(&w)),
        _ => parse_cnfopt(&text),
    };
    parsed.map_err(|source| HarnessError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Files, or directories scanned (non-recursively) for `.cnf`, `.cnfopt`
    /// and `.wcnf` files.
    pub inputs: Vec<PathBuf>,
    pub modes: Vec<SeparationMode>,
    /// Objective coefficients for plain CNF inputs are drawn from
    /// `[-weight_range, weight_range]`.
    pub weight_range: u64,
    pub seed: u64,
    pub limits: CutLoopLimits,
    pub probe_nodes: bool,
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
    pub timeout: Duration,
    pub warm_start: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            inputs: Vec::new(),
            modes: vec![SeparationMode::None, SeparationMode::Icca, SeparationMode::Lcca],
            weight_range: 10,
            seed: 0,
            limits: CutLoopLimits::default(),
            probe_nodes: true,
            output_dir: None,
            jobs: 1,
            timeout: Duration::from_secs(7200),
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordStatus {
    Optimal,
    Infeasible,
    Timeout,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub instance: String,
    pub mode: SeparationMode,
    pub weight_range: u64,
    pub seed: u64,
    pub status: RecordStatus,
    pub objective: Option<i64>,
    pub n_cuts: usize,
    pub avg_clause_length_before_min: f64,
    pub avg_clause_length_after_min: f64,
    pub nodes_visited: u64,
    pub feasible_nodes: u64,
    pub solved_at_root: bool,
    pub initial_sat_time: f64,
    pub cut_loop_time: f64,
    pub bnb_time: f64,
    pub total_time: f64,
    /// Clauses of the emitted cuts, in order.
    #[serde(skip)]
    pub cut_clauses: Vec<Clause>,
    #[serde(skip)]
    pub cut_log: String,
    pub error: Option<String>,
}

impl BenchRecord {
    fn failed(instance: String, mode: SeparationMode, cfg: &BenchConfig, err: String) -> Self {
        BenchRecord {
            instance,
            mode,
            weight_range: cfg.weight_range,
            seed: cfg.seed,
            status: RecordStatus::Failed,
            objective: None,
            n_cuts: 0,
            avg_clause_length_before_min: 0.0,
            avg_clause_length_after_min: 0.0,
            nodes_visited: 0,
            feasible_nodes: 0,
            solved_at_root: false,
            initial_sat_time: 0.0,
            cut_loop_time: 0.0,
            bnb_time: 0.0,
            total_time: 0.0,
            cut_clauses: Vec::new(),
            cut_log: String::new(),
            error: Some(err),
        }
    }

    fn from_outcome(
        instance: String,
        mode: SeparationMode,
        cfg: &BenchConfig,
        out: &SolveOutcome,
    ) -> Self {
        let s = &out.stats;
        BenchRecord {
            instance,
            mode,
            weight_range: cfg.weight_range,
            seed: cfg.seed,
            status: match out.status {
                SolveStatus::Optimal => RecordStatus::Optimal,
                SolveStatus::Infeasible => RecordStatus::Infeasible,
                SolveStatus::TimedOut => RecordStatus::Timeout,
            },
            objective: out.objective,
            n_cuts: s.n_cuts,
            avg_clause_length_before_min: s.avg_clause_length_before_min,
            avg_clause_length_after_min: s.avg_clause_length_after_min,
            nodes_visited: s.nodes_visited,
            feasible_nodes: s.feasible_nodes,
            solved_at_root: s.solved_at_root,
            initial_sat_time: s.initial_sat_time.as_secs_f64(),
            cut_loop_time: s.cut_loop_time.as_secs_f64(),
            bnb_time: s.bnb_time.as_secs_f64(),
            total_time: s.total_time.as_secs_f64(),
            cut_clauses: out.cuts.iter().map(|e| e.cut.clause.clone()).collect(),
            cut_log: write_cut_log(out.cuts.iter().map(|e| &e.cut)),
            error: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    /// Files written, in a fixed order.
    pub files: Vec<PathBuf>,
}

/// Expands directories and keeps recognized instance files, sorted by path.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found = Vec::new();
            for entry in fs::read_dir(p).map_err(io_err(p))? {
                let path = entry.map_err(io_err(p))?.path();
                if path.is_file() && input_kind(&path).is_some() {
                    found.push(path);
                }
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

/// Instance as benchmarked: plain CNF inputs (no `c obj` lines) receive a
/// generated objective.
pub fn prepare_instance(path: &Path, cfg: &BenchConfig) -> Result<CnfOptInstance, HarnessError> {
    let inst = load_instance(path)?;
    if input_kind(path) == Some(InputKind::Cnf) && inst.objective().is_empty() {
        return Ok(generate_instance(inst.formula(), cfg.weight_range, cfg.seed));
    }
    Ok(inst)
}

fn instance_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn run_one(path: &Path, mode: SeparationMode, cfg: &BenchConfig) -> BenchRecord {
    let name = instance_name(path);
    let inst = match prepare_instance(path, cfg) {
        Ok(i) => i,
        Err(e) => return BenchRecord::failed(name, mode, cfg, e.to_string()),
    };
    let solver_cfg = SolverConfig {
        mode,
        limits: cfg.limits,
        seed: cfg.seed,
        probe_nodes: cfg.probe_nodes,
        deadline: Some(Instant::now() + cfg.timeout),
        warm_start: cfg.warm_start,
        ..SolverConfig::default()
    };
    match solve_with_config(&inst, &solver_cfg) {
        Ok(out) => BenchRecord::from_outcome(name, mode, cfg, &out),
        Err(e) => BenchRecord::failed(name, mode, cfg, e.to_string()),
    }
}

/// Solves every (instance, mode) pair and writes the CSV files when an
/// output directory is set. Unreadable instances become failed records.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport, HarnessError> {
    let inputs = collect_inputs(&cfg.inputs)?;
    if inputs.is_empty() {
        warn!("no instance files found");
    }
    let jobs: Vec<(usize, usize)> = (0..inputs.len())
        .flat_map(|i| (0..cfg.modes.len()).map(move |m| (i, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;
    let records: Vec<BenchRecord> = pool.install(|| {
        jobs.par_iter()
            .map(|&(i, m)| run_one(&inputs[i], cfg.modes[m], cfg))
            .collect()
    });
    let mut report = BenchReport {
        records,
        files: Vec::new(),
    };
    if let Some(dir) = &cfg.output_dir {
        report.files = write_outputs(dir, &report.records)?;
    }
    Ok(report)
}

fn csv_string(header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header.split(',')).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn results_csv(records: &[BenchRecord]) -> String {
    csv_string(
        RESULTS_HEADER,
        records.iter().map(|r| {
            vec![
                r.instance.clone(),
                r.mode.as_str().to_string(),
                r.weight_range.to_string(),
                r.seed.to_string(),
                serde_json::to_value(r.status).unwrap().as_str().unwrap().to_string(),
                opt(&r.objective),
                r.n_cuts.to_string(),
                r.avg_clause_length_before_min.to_string(),
                r.avg_clause_length_after_min.to_string(),
                r.nodes_visited.to_string(),
                r.feasible_nodes.to_string(),
                r.solved_at_root.to_string(),
                r.initial_sat_time.to_string(),
                r.cut_loop_time.to_string(),
                r.bnb_time.to_string(),
                r.total_time.to_string(),
                opt(&r.error),
            ]
        }),
    )
}

/// Initial SAT time against mean cut length and total runtime.
pub fn initial_sat_csv(records: &[BenchRecord]) -> String {
    csv_string(
        INITIAL_SAT_HEADER,
        records
            .iter()
            .filter(|r| r.status != RecordStatus::Failed)
            .map(|r| {
                vec![
                    r.instance.clone(),
                    r.mode.as_str().to_string(),
                    r.initial_sat_time.to_string(),
                    r.avg_clause_length_after_min.to_string(),
                    r.avg_clause_length_before_min.to_string(),
                    r.total_time.to_string(),
                ]
            }),
    )
}

pub fn nodes_csv(records: &[BenchRecord]) -> String {
    csv_string(
        NODES_HEADER,
        records
            .iter()
            .filter(|r| r.status != RecordStatus::Failed)
            .map(|r| {
                vec![
                    r.instance.clone(),
                    r.mode.as_str().to_string(),
                    r.nodes_visited.to_string(),
                    r.feasible_nodes.to_string(),
                ]
            }),
    )
}

/// Per mode, runtimes of the optimally solved instances sorted ascending
/// with their running sums.
pub fn emit_cactus_data(records: &[BenchRecord]) -> String {
    let mut by_mode: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.status == RecordStatus::Optimal) {
        by_mode.entry(r.mode.as_str()).or_default().push(r.total_time);
    }
    let mut rows = Vec::new();
    for (mode, mut times) in by_mode {
        times.sort_by(f64::total_cmp);
        let mut acc = 0.0;
        for (i, t) in times.into_iter().enumerate() {
            acc += t;
            rows.push(vec![
                mode.to_string(),
                (i + 1).to_string(),
                t.to_string(),
                acc.to_string(),
            ]);
        }
    }
    csv_string(CACTUS_HEADER, rows)
}

/// Writes the four CSV files and one cut log per record with cuts.
pub fn write_outputs(dir: &Path, records: &[BenchRecord]) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = [
        ("results.csv", results_csv(records)),
        ("initial_sat.csv", initial_sat_csv(records)),
        ("nodes.csv", nodes_csv(records)),
        ("cactus.csv", emit_cactus_data(records)),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(io_err(&path))?;
        written.push(path);
    }
    let cut_dir = dir.join("cuts");
    for r in records.iter().filter(|r| r.n_cuts > 0) {
        fs::create_dir_all(&cut_dir).map_err(io_err(&cut_dir))?;
        let path = cut_dir.join(format!("{}.{}.csv", r.instance, r.mode.as_str()));
        fs::write(&path, &r.cut_log).map_err(io_err(&path))?;
    }
    Ok(written)
}

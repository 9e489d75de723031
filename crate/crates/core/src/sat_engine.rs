//! Incremental CDCL SAT solver.
//!
//! Two-watched-literal propagation, first-UIP conflict analysis with local
//! clause minimization, VSIDS branching with phase saving, Luby restarts and
//! LBD-based reduction of the learned-clause database. Assumptions are
//! installed as the first decisions of every call.
//!
//! Every clause produced by conflict analysis is also appended to a learned
//! log that [`SatEngine::get_learned_clauses`] drains incrementally. The log
//! is independent of database reduction: a clause deleted from the watch
//! lists stays in the log.

use std::collections::HashSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{Assignment, Clause, CnfFormula, Literal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SatError {
    #[error("assumptions contain both {0} and its negation")]
    ConflictingAssumptions(Literal),
    #[error("assumption {0} listed twice")]
    DuplicateAssumption(Literal),
    #[error("assumption {lit} is outside the formula's {num_vars} variables")]
    UnknownVariable { lit: Literal, num_vars: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SatConfig {
    /// Seed for randomized branching decisions.
    pub seed: u64,
    /// Probability of a uniformly random branching variable.
    pub random_var_freq: f64,
    pub var_decay: f64,
    /// Conflicts per Luby unit.
    pub restart_base: u64,
    /// Initial learned-clause limit before the first reduction.
    pub min_learnts: usize,
}

impl Default for SatConfig {
    fn default() -> Self {
        SatConfig {
            seed: 0,
            random_var_freq: 0.0,
            var_decay: 0.95,
            restart_base: 100,
            min_learnts: 2000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SatStats {
    pub solves: u64,
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub reductions: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolveResult {
    Sat(Assignment),
    Unsat,
}

impl SolveResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SolveResult::Sat(_))
    }
}

type Lit = u32;
type CRef = usize;

const UNDEF: u8 = 2;

#[inline]
fn code(l: Literal) -> Lit {
    2 * (l.var() - 1) + u32::from(!l.is_positive())
}

#[inline]
fn decode(l: Lit) -> Literal {
    Literal::new(l / 2 + 1, l & 1 == 0)
}

#[inline]
fn var_of(l: Lit) -> usize {
    (l >> 1) as usize
}

#[derive(Debug, Clone)]
struct ClauseData {
    lits: Vec<Lit>,
    learnt: bool,
    lbd: u32,
    deleted: bool,
}

#[derive(Debug, Clone, Copy)]
struct Watcher {
    cref: CRef,
    blocker: Lit,
}

/// Max-heap of variables keyed by activity; ties go to the lower index.
#[derive(Debug, Clone, Default)]
struct VarOrder {
    heap: Vec<usize>,
    pos: Vec<usize>,
}

impl VarOrder {
    const ABSENT: usize = usize::MAX;

    fn with_vars(n: usize) -> Self {
        VarOrder {
            heap: (0..n).collect(),
            pos: (0..n).collect(),
        }
    }

    fn less(act: &[f64], a: usize, b: usize) -> bool {
        // "a before b"
        act[a] > act[b] || (act[a] == act[b] && a < b)
    }

    fn contains(&self, v: usize) -> bool {
        self.pos[v] != Self::ABSENT
    }

    fn sift_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            if !Self::less(act, v, self.heap[parent]) {
                break;
            }
            self.heap[i] = self.heap[parent];
            self.pos[self.heap[i]] = i;
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v] = i;
    }

    fn sift_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n && Self::less(act, self.heap[r], self.heap[l]) {
                r
            } else {
                l
            };
            if !Self::less(act, self.heap[c], v) {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i]] = i;
            i = c;
        }
        self.heap[i] = v;
        self.pos[v] = i;
    }

    fn insert(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.pos[v] = self.heap.len();
        self.heap.push(v);
        self.sift_up(self.heap.len() - 1, act);
    }

    fn increased(&mut self, v: usize, act: &[f64]) {
        if self.contains(v) {
            self.sift_up(self.pos[v], act);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<usize> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().unwrap();
        self.pos[top] = Self::ABSENT;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last] = 0;
            self.sift_down(0, act);
        }
        Some(top)
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let (mut size, mut seq) = (1u64, 0i32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq)
}

#[derive(Debug, Clone)]
pub struct SatEngine {
    num_vars: u32,
    config: SatConfig,
    rng: ChaCha8Rng,
    ok: bool,

    clauses: Vec<ClauseData>,
    watches: Vec<Vec<Watcher>>,
    num_learnts: usize,
    max_learnts: f64,

    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Option<CRef>>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,

    activity: Vec<f64>,
    var_inc: f64,
    order: VarOrder,
    phase: Vec<bool>,

    seen: Vec<bool>,
    lbd_stamp: Vec<u64>,
    lbd_epoch: u64,

    learned_log: Vec<Clause>,
    log_mark: usize,
    model: Option<Assignment>,
    failed: Vec<Literal>,
    stats: SatStats,
}

impl SatEngine {
    pub fn new(f: &CnfFormula) -> SatEngine {
        SatEngine::with_config(f, SatConfig::default())
    }

    pub fn with_config(f: &CnfFormula, config: SatConfig) -> SatEngine {
        let n = f.num_vars() as usize;
        let mut e = SatEngine {
            num_vars: f.num_vars(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            max_learnts: config.min_learnts.max(f.clauses().len() / 3) as f64,
            config,
            ok: true,
            clauses: Vec::with_capacity(f.clauses().len()),
            watches: vec![Vec::new(); 2 * n],
            num_learnts: 0,
            assigns: vec![UNDEF; n],
            level: vec![0; n],
            reason: vec![None; n],
            trail: Vec::with_capacity(n),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; n],
            var_inc: 1.0,
            order: VarOrder::with_vars(n),
            phase: vec![false; n],
            seen: vec![false; n],
            lbd_stamp: vec![0; n + 1],
            lbd_epoch: 0,
            learned_log: Vec::new(),
            log_mark: 0,
            model: None,
            failed: Vec::new(),
            stats: SatStats::default(),
        };
        for c in f.clauses() {
            e.add_problem_clause(c);
        }
        e
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn stats(&self) -> &SatStats {
        &self.stats
    }

    /// Model of the last satisfiable call.
    pub fn model(&self) -> Option<&Assignment> {
        self.model.as_ref()
    }

    /// Subset of the assumptions of the last unsatisfiable call that is
    /// already unsatisfiable together with the formula. Empty when the
    /// formula itself is unsatisfiable.
    pub fn failed_assumptions(&self) -> &[Literal] {
        &self.failed
    }

    #[inline]
    fn value(&self, l: Lit) -> u8 {
        let a = self.assigns[var_of(l)];
        if a == UNDEF {
            UNDEF
        } else {
            a ^ (l & 1) as u8
        }
    }

    #[inline]
    fn is_true(&self, l: Lit) -> bool {
        self.value(l) == 1
    }

    #[inline]
    fn is_false(&self, l: Lit) -> bool {
        self.value(l) == 0
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, from: Option<CRef>) {
        let v = var_of(l);
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = u8::from(l & 1 == 0);
        self.level[v] = self.decision_level();
        self.reason[v] = from;
        self.trail.push(l);
    }

    fn attach(&mut self, cref: CRef) {
        let c = &self.clauses[cref].lits;
        let (a, b) = (c[0], c[1]);
        self.watches[a as usize].push(Watcher { cref, blocker: b });
        self.watches[b as usize].push(Watcher { cref, blocker: a });
    }

    fn add_problem_clause(&mut self, c: &Clause) {
        if !self.ok {
            return;
        }
        debug_assert_eq!(self.decision_level(), 0);
        let mut lits = Vec::with_capacity(c.len());
        for &l in c.lits() {
            let l = code(l);
            if self.is_true(l) {
                return;
            }
            if !self.is_false(l) {
                lits.push(l);
            }
        }
        match lits.len() {
            0 => self.ok = false,
            1 => {
                self.enqueue(lits[0], None);
                if self.propagate().is_some() {
                    self.ok = false;
                }
            }
            _ => {
                let cref = self.clauses.len();
                self.clauses.push(ClauseData {
                    lits,
                    learnt: false,
                    lbd: 0,
                    deleted: false,
                });
                self.attach(cref);
            }
        }
    }

    /// Unit propagation; returns a conflicting clause.
    fn propagate(&mut self) -> Option<CRef> {
        let mut conflict = None;
        while self.qhead < self.trail.len() && conflict.is_none() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = p ^ 1;
            let mut ws = std::mem::take(&mut self.watches[false_lit as usize]);
            let mut i = 0;
            let mut j = 0;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.clauses[w.cref].deleted {
                    continue;
                }
                if self.is_true(w.blocker) {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.cref;
                let lits = &mut self.clauses[cref].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                let kept = Watcher {
                    cref,
                    blocker: first,
                };
                if first != w.blocker && self.value(first) == 1 {
                    ws[j] = kept;
                    j += 1;
                    continue;
                }
                // Look for a new literal to watch.
                let mut moved = false;
                let len = self.clauses[cref].lits.len();
                for k in 2..len {
                    let lk = self.clauses[cref].lits[k];
                    if !self.is_false(lk) {
                        self.clauses[cref].lits.swap(1, k);
                        self.watches[lk as usize].push(kept);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = kept;
                j += 1;
                if self.is_false(first) {
                    conflict = Some(cref);
                    self.qhead = self.trail.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                }
            }
            ws.truncate(j);
            // A false literal is never picked as a new watch, so the slot is
            // still empty.
            debug_assert!(self.watches[false_lit as usize].is_empty());
            self.watches[false_lit as usize] = ws;
        }
        conflict
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for k in (lim..self.trail.len()).rev() {
            let l = self.trail[k];
            let v = var_of(l);
            self.assigns[v] = UNDEF;
            self.reason[v] = None;
            self.phase[v] = l & 1 == 0;
            self.order.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level as usize);
        self.qhead = lim;
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.order.increased(v, &self.activity);
    }

    /// First-UIP analysis. Returns the learned clause (asserting literal
    /// first), the backjump level and its LBD.
    fn analyze(&mut self, mut confl: CRef) -> (Vec<Lit>, u32, u32) {
        let mut learnt: Vec<Lit> = vec![0];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        let current = self.decision_level();
        loop {
            let start = usize::from(p.is_some());
            let len = self.clauses[confl].lits.len();
            for k in start..len {
                let q = self.clauses[confl].lits[k];
                let v = var_of(q);
                if !self.seen[v] && self.level[v] > 0 {
                    self.bump_var(v);
                    self.seen[v] = true;
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[var_of(self.trail[idx])] {
                    break;
                }
            }
            let pl = self.trail[idx];
            p = Some(pl);
            self.seen[var_of(pl)] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            confl = self.reason[var_of(pl)].expect("non-decision literal on conflict path");
            // The propagated literal sits at position 0 of its reason.
            debug_assert_eq!(self.clauses[confl].lits[0], pl);
        }
        learnt[0] = p.unwrap() ^ 1;

        // Local minimization: drop literals whose reason is covered.
        let mut keep = vec![learnt[0]];
        for &q in &learnt[1..] {
            let v = var_of(q);
            let redundant = match self.reason[v] {
                None => false,
                Some(r) => self.clauses[r].lits[1..]
                    .iter()
                    .all(|&x| self.seen[var_of(x)] || self.level[var_of(x)] == 0),
            };
            if !redundant {
                keep.push(q);
            }
        }
        for &q in &learnt[1..] {
            self.seen[var_of(q)] = false;
        }
        let mut learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for k in 2..learnt.len() {
                if self.level[var_of(learnt[k])] > self.level[var_of(learnt[max_i])] {
                    max_i = k;
                }
            }
            learnt.swap(1, max_i);
            self.level[var_of(learnt[1])]
        };

        self.lbd_epoch += 1;
        let mut lbd = 0;
        for &q in &learnt {
            let lv = self.level[var_of(q)] as usize;
            if self.lbd_stamp[lv] != self.lbd_epoch {
                self.lbd_stamp[lv] = self.lbd_epoch;
                lbd += 1;
            }
        }
        (learnt, bt, lbd)
    }

    /// Assumptions implying `¬p` where `p` is a falsified assumption.
    fn analyze_final(&mut self, p: Lit) -> Vec<Literal> {
        let mut out = vec![decode(p)];
        if self.decision_level() == 0 {
            return out;
        }
        self.seen[var_of(p)] = true;
        for k in (self.trail_lim[0]..self.trail.len()).rev() {
            let x = self.trail[k];
            let v = var_of(x);
            if !self.seen[v] {
                continue;
            }
            match self.reason[v] {
                None => {
                    if self.level[v] > 0 {
                        out.push(decode(x ^ 1));
                    }
                }
                Some(r) => {
                    for &q in &self.clauses[r].lits[1..] {
                        if self.level[var_of(q)] > 0 {
                            self.seen[var_of(q)] = true;
                        }
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[var_of(p)] = false;
        out
    }

    fn record_learnt(&mut self, lits: Vec<Lit>, lbd: u32) {
        let logged = Clause::new(lits.iter().map(|&l| decode(l)))
            .expect("learned clauses are non-empty and non-tautological");
        self.learned_log.push(logged);
        if lits.len() == 1 {
            self.enqueue(lits[0], None);
            return;
        }
        let cref = self.clauses.len();
        let asserting = lits[0];
        self.clauses.push(ClauseData {
            lits,
            learnt: true,
            lbd,
            deleted: false,
        });
        self.num_learnts += 1;
        self.attach(cref);
        self.enqueue(asserting, Some(cref));
    }

    /// Drops about half of the learned clauses with LBD > 2 and length > 2,
    /// highest LBD first. Only called at decision level 0.
    fn reduce_db(&mut self) {
        debug_assert_eq!(self.decision_level(), 0);
        self.stats.reductions += 1;
        let mut cands: Vec<CRef> = (0..self.clauses.len())
            .filter(|&c| {
                let cl = &self.clauses[c];
                cl.learnt && !cl.deleted && cl.lits.len() > 2 && cl.lbd > 2
            })
            .collect();
        cands.sort_by_key(|&c| (std::cmp::Reverse(self.clauses[c].lbd), c));
        let remove = self.num_learnts / 2;
        for &c in cands.iter().take(remove) {
            self.clauses[c].deleted = true;
            self.clauses[c].lits = Vec::new();
            self.num_learnts -= 1;
        }
        for ws in &mut self.watches {
            ws.retain(|w| !self.clauses[w.cref].deleted);
        }
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        if self.config.random_var_freq > 0.0
            && !self.order.heap.is_empty()
            && self.rng.gen::<f64>() < self.config.random_var_freq
        {
            let v = self.order.heap[self.rng.gen_range(0..self.order.heap.len())];
            if self.assigns[v] == UNDEF {
                return Some(2 * v as u32 + u32::from(!self.phase[v]));
            }
        }
        while let Some(v) = self.order.pop(&self.activity) {
            if self.assigns[v] == UNDEF {
                return Some(2 * v as u32 + u32::from(!self.phase[v]));
            }
        }
        None
    }

    fn check_assumptions(&self, assumptions: &[Literal]) -> Result<(), SatError> {
        let mut seen = HashSet::with_capacity(assumptions.len());
        for &l in assumptions {
            if l.var() > self.num_vars {
                return Err(SatError::UnknownVariable {
                    lit: l,
                    num_vars: self.num_vars,
                });
            }
            if seen.contains(&!l) {
                return Err(SatError::ConflictingAssumptions(l));
            }
            if !seen.insert(l) {
                return Err(SatError::DuplicateAssumption(l));
            }
        }
        Ok(())
    }

    /// Satisfiability of the formula with every literal of `assumptions`
    /// forced true for this call only.
    pub fn solve(&mut self, assumptions: &[Literal]) -> Result<SolveResult, SatError> {
        self.check_assumptions(assumptions)?;
        self.stats.solves += 1;
        self.model = None;
        self.failed.clear();
        if !self.ok {
            return Ok(SolveResult::Unsat);
        }
        let assumps: Vec<Lit> = assumptions.iter().map(|&l| code(l)).collect();
        let result = self.search(&assumps);
        self.cancel_until(0);
        Ok(result)
    }

    fn search(&mut self, assumps: &[Lit]) -> SolveResult {
        let mut restart_no = 0u64;
        loop {
            let budget =
                (luby(2.0, restart_no) * self.config.restart_base as f64).max(1.0) as u64;
            let mut conflicts = 0u64;
            loop {
                if let Some(confl) = self.propagate() {
                    self.stats.conflicts += 1;
                    conflicts += 1;
                    if self.decision_level() == 0 {
                        self.ok = false;
                        return SolveResult::Unsat;
                    }
                    let (learnt, bt, lbd) = self.analyze(confl);
                    self.cancel_until(bt);
                    self.record_learnt(learnt, lbd);
                    self.var_inc /= self.config.var_decay;
                    continue;
                }
                if conflicts >= budget {
                    self.stats.restarts += 1;
                    self.cancel_until(0);
                    if self.num_learnts as f64 >= self.max_learnts {
                        self.reduce_db();
                        self.max_learnts *= 1.1;
                    }
                    break;
                }
                let dl = self.decision_level() as usize;
                let next = if dl < assumps.len() {
                    let p = assumps[dl];
                    if self.is_true(p) {
                        self.trail_lim.push(self.trail.len());
                        continue;
                    }
                    if self.is_false(p) {
                        self.failed = self.analyze_final(p ^ 1);
                        for l in &mut self.failed {
                            *l = !*l;
                        }
                        return SolveResult::Unsat;
                    }
                    p
                } else {
                    self.stats.decisions += 1;
                    match self.pick_branch() {
                        Some(l) => l,
                        None => {
                            let mut model = Assignment::new(self.num_vars);
                            for v in 0..self.num_vars as usize {
                                model.set(v as u32 + 1, self.assigns[v] == 1);
                            }
                            self.model = Some(model.clone());
                            return SolveResult::Sat(model);
                        }
                    }
                };
                self.trail_lim.push(self.trail.len());
                self.enqueue(next, None);
            }
            restart_no += 1;
        }
    }

    /// Clauses learned since the previous call, in learning order.
    pub fn get_learned_clauses(&mut self) -> Vec<Clause> {
        let out = self.learned_log[self.log_mark..].to_vec();
        self.log_mark = self.learned_log.len();
        out
    }

    /// Every clause learned so far, regardless of the retrieval mark.
    pub fn learned_log(&self) -> &[Clause] {
        &self.learned_log
    }

    /// Whether the formula implies `c`, i.e. the negations of its literals
    /// are jointly unsatisfiable with it.
    pub fn is_implied(&mut self, c: &Clause) -> bool {
        let negated: Vec<Literal> = c.lits().iter().map(|&l| !l).collect();
        !self
            .solve(&negated)
            .expect("negation of a normalized clause is a valid assumption set")
            .is_sat()
    }

    /// The learned log as DIMACS clause lines.
    pub fn dump_learned_log(&self) -> String {
        let mut out = String::new();
        for c in &self.learned_log {
            let _ = writeln!(out, "{c}");
        }
        out
    }
}

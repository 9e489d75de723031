//! Linear programming over box-bounded variables.
//!
//! Rows have the form `sum a_j x_j >= b`. Every variable lives in
//! `[lower, upper] ⊆ [0, 1]` (the full unit interval unless narrowed for a
//! branch-and-bound node). The solver is a dense-tableau, bounded-variable
//! primal simplex: nonbasic variables rest at one of their bounds, so the box
//! never appears as explicit rows.
//!
//! Phase 1 introduces one artificial per row that is violated at the start
//! point and minimizes their sum. Pricing is Dantzig's rule; after
//! [`STALL_LIMIT`] consecutive degenerate pivots the phase switches to Bland's
//! rule, which cannot cycle.

use std::fmt::Write as _;

use thiserror::Error;

use crate::num::Scalar;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
pub const STALL_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("row references variable {var}, problem has {num_vars}")]
    VariableOutOfRange { var: u32, num_vars: u32 },
    #[error("row has no nonzero coefficient")]
    EmptyRow,
    #[error("invalid bounds [{lower}, {upper}] for variable {var}")]
    InvalidBounds { var: u32, lower: String, upper: String },
    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
}

/// Sparse `coeffs · x >= rhs`, coefficients sorted by variable, no zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow<T> {
    coeffs: Vec<(u32, T)>,
    rhs: T,
}

impl<T: Scalar> LinearRow<T> {
    /// Merges repeated variables and drops zero coefficients.
    pub fn greater_eq(coeffs: impl IntoIterator<Item = (u32, T)>, rhs: T) -> Result<Self, LpError> {
        let mut coeffs: Vec<(u32, T)> = coeffs.into_iter().collect();
        coeffs.sort_by_key(|&(v, _)| v);
        let mut merged: Vec<(u32, T)> = Vec::with_capacity(coeffs.len());
        for (v, a) in coeffs {
            match merged.last_mut() {
                Some((w, b)) if *w == v => *b = *b + a,
                _ => merged.push((v, a)),
            }
        }
        merged.retain(|&(_, a)| a != T::zero());
        if merged.is_empty() {
            return Err(LpError::EmptyRow);
        }
        Ok(LinearRow { coeffs: merged, rhs })
    }

    /// `coeffs · x <= rhs`, stored negated.
    pub fn less_eq(coeffs: impl IntoIterator<Item = (u32, T)>, rhs: T) -> Result<Self, LpError> {
        Self::greater_eq(coeffs.into_iter().map(|(v, a)| (v, -a)), -rhs)
    }

    pub fn coeffs(&self) -> &[(u32, T)] {
        &self.coeffs
    }

    pub fn rhs(&self) -> T {
        self.rhs
    }

    /// Left-hand side at `x`, where `x[v - 1]` is the value of variable `v`.
    pub fn lhs(&self, x: &[T]) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, &(v, a)| acc + a * x[v as usize - 1])
    }

    pub fn is_satisfied(&self, x: &[T], tol: T) -> bool {
        self.lhs(x) >= self.rhs - tol
    }

    pub fn max_var(&self) -> u32 {
        self.coeffs.last().map_or(0, |&(v, _)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem<T> {
    num_vars: u32,
    objective: Vec<T>,
    rows: Vec<LinearRow<T>>,
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Scalar> LpProblem<T> {
    /// Minimize `objective · x` over the unit box; `objective[v - 1]` belongs
    /// to variable `v`.
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        LpProblem {
            num_vars: n as u32,
            objective,
            rows: Vec::new(),
            lower: vec![T::zero(); n],
            upper: vec![T::one(); n],
        }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn rows(&self) -> &[LinearRow<T>] {
        &self.rows
    }

    pub fn bounds(&self, var: u32) -> (T, T) {
        let i = var as usize - 1;
        (self.lower[i], self.upper[i])
    }

    fn check_row(&self, r: &LinearRow<T>) -> Result<(), LpError> {
        let var = r.max_var();
        if var > self.num_vars || r.coeffs.first().is_some_and(|&(v, _)| v == 0) {
            return Err(LpError::VariableOutOfRange {
                var,
                num_vars: self.num_vars,
            });
        }
        Ok(())
    }

    /// Appends in place.
    pub fn push_row(&mut self, r: LinearRow<T>) -> Result<(), LpError> {
        self.check_row(&r)?;
        self.rows.push(r);
        Ok(())
    }

    /// Copy of `self` with one more row.
    pub fn add_row(&self, r: LinearRow<T>) -> Result<Self, LpError> {
        let mut p = self.clone();
        p.push_row(r)?;
        Ok(p)
    }

    /// Narrows the bounds of `var`; requires `0 <= lower <= upper <= 1`.
    pub fn set_bounds(&mut self, var: u32, lower: T, upper: T) -> Result<(), LpError> {
        if var == 0 || var > self.num_vars {
            return Err(LpError::VariableOutOfRange {
                var,
                num_vars: self.num_vars,
            });
        }
        if !(T::zero() <= lower && lower <= upper && upper <= T::one()) {
            return Err(LpError::InvalidBounds {
                var,
                lower: lower.to_string(),
                upper: upper.to_string(),
            });
        }
        let i = var as usize - 1;
        self.lower[i] = lower;
        self.upper[i] = upper;
        Ok(())
    }

    pub fn fix(&mut self, var: u32, value: T) -> Result<(), LpError> {
        self.set_bounds(var, value, value)
    }

    pub fn objective_at(&self, x: &[T]) -> T {
        self.objective
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (&c, &v)| acc + c * v)
    }

    /// Plain-text dump: a `min:` line, one `rN:` line per row, and a
    /// `bound` line per variable whose bounds differ from `[0, 1]`.
    pub fn dump(&self) -> String {
        let mut out = String::from("min:");
        for (i, c) in self.objective.iter().enumerate() {
            if *c != T::zero() {
                let _ = write!(out, " {:+} x{}", c, i + 1);
            }
        }
        out.push('\n');
        for (k, r) in self.rows.iter().enumerate() {
            let _ = write!(out, "r{}:", k + 1);
            for (v, a) in &r.coeffs {
                let _ = write!(out, " {:+} x{}", a, v);
            }
            let _ = writeln!(out, " >= {}", r.rhs);
        }
        for i in 0..self.num_vars as usize {
            if self.lower[i] != T::zero() || self.upper[i] != T::one() {
                let _ = writeln!(out, "bound x{} {} {}", i + 1, self.lower[i], self.upper[i]);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// `values[v - 1]` is the value of variable `v`; empty when infeasible.
    pub values: Vec<T>,
    pub objective: T,
    pub iterations: usize,
}

impl<T: Scalar> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    fn infeasible(iterations: usize) -> Self {
        LpSolution {
            status: LpStatus::Infeasible,
            values: Vec::new(),
            objective: T::infinity(),
            iterations,
        }
    }
}

/// Solves `p` from scratch.
///
/// Rows that hold everywhere in the current box are skipped and fixed
/// variables are folded into the right-hand sides before the tableau is
/// built. The returned point is re-checked against every row and bound of
/// `p`; a violation beyond [`Scalar::FEAS_TOL`] is reported as
/// [`LpError::NumericalBreakdown`] rather than as an optimum.
pub fn solve_lp<T: Scalar>(p: &LpProblem<T>) -> Result<LpSolution<T>, LpError> {
    solve_checked(p).map(|(sol, _)| sol)
}

fn verify<T: Scalar>(p: &LpProblem<T>, x: &[T]) -> bool {
    let tol = T::FEAS_TOL;
    let in_box = x
        .iter()
        .enumerate()
        .all(|(i, &v)| v >= p.lower[i] - tol && v <= p.upper[i] + tol);
    in_box && p.rows.iter().all(|r| r.is_satisfied(x, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

/// Dense tableau. Column layout: free structural variables, one slack per
/// kept row (`slack = a·x - b >= 0`), then artificials, then slacks of rows
/// appended after the build.
#[derive(Debug, Clone)]
struct Simplex<T> {
    p: LpProblem<T>,
    m: usize,
    ncols: usize,
    /// internal column -> problem variable index (0-based) for structurals
    structural: Vec<usize>,
    /// kept row -> index into `p.rows`
    kept_rows: Vec<usize>,
    /// kept row -> rhs with fixed variables folded in
    rhs: Vec<T>,
    /// kept row -> its slack column
    slack_col: Vec<usize>,
    /// artificial column -> its row
    art_rows: Vec<usize>,
    art_start: usize,
    /// problem variable index -> structural column
    col_of: Vec<usize>,
    n_struct: usize,
    tab: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    beta: Vec<T>,
    cost: Vec<T>,
    reduced: Vec<T>,
    /// scratch: nonzero columns of the pivot row
    nz: Vec<usize>,
    iterations: usize,
}

/// Right-hand side with fixed variables folded in, and whether the row is
/// violated everywhere in the box or holds everywhere in it.
fn fold_row<T: Scalar>(p: &LpProblem<T>, r: &LinearRow<T>) -> (T, bool, bool) {
    let fixed = |j: usize| p.upper[j] - p.lower[j] <= T::zero();
    let mut b = r.rhs;
    let mut max_act = T::zero();
    let mut min_act = T::zero();
    let mut has_free = false;
    for &(v, a) in &r.coeffs {
        let j = v as usize - 1;
        if fixed(j) {
            b = b - a * p.lower[j];
        } else {
            has_free = true;
            let (lo, hi) = (a * p.lower[j], a * p.upper[j]);
            min_act = min_act + lo.min(hi);
            max_act = max_act + lo.max(hi);
        }
    }
    (b, max_act < b - T::FEAS_TOL, !has_free || min_act >= b)
}

impl<T: Scalar> Simplex<T> {
    /// `Ok(None)` when a row is violated by every point of the box.
    fn build(p: &LpProblem<T>) -> Result<Option<Self>, LpError> {
        let n = p.num_vars as usize;
        let tol = T::FEAS_TOL;
        let fixed = |j: usize| p.upper[j] - p.lower[j] <= T::zero();
        let mut col_of = vec![usize::MAX; n];
        let mut structural = Vec::new();
        for (j, slot) in col_of.iter_mut().enumerate() {
            if !fixed(j) {
                *slot = structural.len();
                structural.push(j);
            }
        }
        let n_struct = structural.len();

        let mut kept_rows = Vec::new();
        let mut rhs = Vec::new();
        for (k, r) in p.rows.iter().enumerate() {
            let (b, violated, redundant) = fold_row(p, r);
            if violated {
                return Ok(None);
            }
            if !redundant {
                kept_rows.push(k);
                rhs.push(b);
            }
        }
        let m = kept_rows.len();

        // Start point: every free structural at its upper bound.
        let x0: Vec<T> = structural.iter().map(|&j| p.upper[j]).collect();
        let mut slack0 = Vec::with_capacity(m);
        let mut art_rows = Vec::new();
        for (i, &k) in kept_rows.iter().enumerate() {
            let act = p.rows[k]
                .coeffs
                .iter()
                .filter(|&&(v, _)| col_of[v as usize - 1] != usize::MAX)
                .fold(T::zero(), |acc, &(v, a)| acc + a * x0[col_of[v as usize - 1]]);
            let s = act - rhs[i];
            if s < -tol {
                art_rows.push(i);
            }
            slack0.push(s);
        }
        let ncols = n_struct + m + art_rows.len();
        let mut tab = vec![T::zero(); m * ncols];
        let mut lower = vec![T::zero(); ncols];
        let mut upper = vec![T::infinity(); ncols];
        let mut state = vec![VarState::AtLower; ncols];
        let mut basis = vec![0; m];
        let mut beta = vec![T::zero(); m];
        for (c, &j) in structural.iter().enumerate() {
            lower[c] = p.lower[j];
            upper[c] = p.upper[j];
            state[c] = VarState::AtUpper;
        }
        let mut art_iter = art_rows.iter().enumerate().peekable();
        for (i, &k) in kept_rows.iter().enumerate() {
            let row = &mut tab[i * ncols..(i + 1) * ncols];
            let slack = n_struct + i;
            match art_iter.peek() {
                Some(&(a, &ri)) if ri == i => {
                    // a·x - s + art = b, art basic
                    let art = n_struct + m + a;
                    for &(v, coef) in &p.rows[k].coeffs {
                        let c = col_of[v as usize - 1];
                        if c != usize::MAX {
                            row[c] = coef;
                        }
                    }
                    row[slack] = -T::one();
                    row[art] = T::one();
                    basis[i] = art;
                    state[art] = VarState::Basic;
                    beta[i] = -slack0[i];
                    art_iter.next();
                }
                _ => {
                    // s - a·x = -b, s basic
                    for &(v, coef) in &p.rows[k].coeffs {
                        let c = col_of[v as usize - 1];
                        if c != usize::MAX {
                            row[c] = -coef;
                        }
                    }
                    row[slack] = T::one();
                    basis[i] = slack;
                    state[slack] = VarState::Basic;
                    beta[i] = slack0[i].max(T::zero());
                }
            }
        }
        Ok(Some(Simplex {
            p: p.clone(),
            m,
            ncols,
            structural,
            kept_rows,
            rhs,
            slack_col: (n_struct..n_struct + m).collect(),
            art_start: n_struct + m,
            art_rows,
            col_of,
            n_struct,
            tab,
            lower,
            upper,
            state,
            basis,
            beta,
            cost: vec![T::zero(); ncols],
            reduced: vec![T::zero(); ncols],
            nz: Vec::with_capacity(ncols),
            iterations: 0,
        }))
    }

    fn iteration_cap(&self) -> usize {
        50 * (self.m + self.ncols) + 10_000
    }

    fn nonbasic_value(&self, j: usize) -> T {
        match self.state[j] {
            VarState::AtUpper => self.upper[j],
            _ => self.lower[j],
        }
    }

    fn compute_reduced_costs(&mut self) {
        self.reduced.copy_from_slice(&self.cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb == T::zero() {
                continue;
            }
            let row = &self.tab[r * self.ncols..(r + 1) * self.ncols];
            for (d, &t) in self.reduced.iter_mut().zip(row) {
                *d = *d - cb * t;
            }
        }
    }

    /// Recomputes basic values from the original rows. The slack columns of
    /// the tableau hold `B^-1` up to sign, which gives `x_B = B^-1 (b - N x_N)`.
    fn recompute_beta(&mut self) {
        let m = self.m;
        // residual_i = b_i - (a_i x_N - s_i [+ art_i]) over nonbasic columns
        let mut residual = self.rhs.clone();
        for (i, &k) in self.kept_rows.iter().enumerate() {
            for &(v, a) in &self.p.rows[k].coeffs {
                let c = self.col_of[v as usize - 1];
                if c != usize::MAX && self.state[c] != VarState::Basic {
                    residual[i] = residual[i] - a * self.nonbasic_value(c);
                }
            }
            let s = self.slack_col[i];
            if self.state[s] != VarState::Basic {
                residual[i] = residual[i] + self.nonbasic_value(s);
            }
        }
        for (a, &i) in self.art_rows.iter().enumerate() {
            let c = self.art_start + a;
            if self.state[c] != VarState::Basic {
                residual[i] = residual[i] - self.nonbasic_value(c);
            }
        }
        // Tableau slack column i equals B^-1 (-e_i).
        for r in 0..m {
            let row = &self.tab[r * self.ncols..(r + 1) * self.ncols];
            let mut v = T::zero();
            for (i, &res) in residual.iter().enumerate() {
                let t = row[self.slack_col[i]];
                if t != T::zero() {
                    v = v - t * res;
                }
            }
            self.beta[r] = v;
        }
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let ncols = self.ncols;
        let piv = self.tab[r * ncols + q];
        {
            let row = &mut self.tab[r * ncols..(r + 1) * ncols];
            for t in row.iter_mut() {
                *t = *t / piv;
            }
            row[q] = T::one();
        }
        let (before, rest) = self.tab.split_at_mut(r * ncols);
        let (prow, after) = rest.split_at_mut(ncols);
        self.nz.clear();
        self.nz.extend((0..ncols).filter(|&j| prow[j] != T::zero()));
        let nz = &self.nz;
        for other in before.chunks_exact_mut(ncols).chain(after.chunks_exact_mut(ncols)) {
            let f = other[q];
            if f == T::zero() {
                continue;
            }
            for &j in nz {
                other[j] = other[j] - f * prow[j];
            }
            other[q] = T::zero();
        }
        let f = self.reduced[q];
        if f != T::zero() {
            for &j in nz {
                self.reduced[j] = self.reduced[j] - f * prow[j];
            }
            self.reduced[q] = T::zero();
        }
    }

    /// Runs the simplex loop on the current cost vector until optimal.
    fn optimize(&mut self, mut bland: bool) -> Result<(), LpError> {
        self.compute_reduced_costs();
        let cap = self.iteration_cap();
        let mut stall = 0usize;
        loop {
            if self.iterations >= cap {
                return Err(LpError::IterationLimit(cap));
            }
            // Pricing.
            let mut enter: Option<(usize, T)> = None;
            for j in 0..self.ncols {
                if self.state[j] == VarState::Basic || self.upper[j] <= self.lower[j] {
                    continue;
                }
                let d = self.reduced[j];
                let gain = match self.state[j] {
                    VarState::AtLower if d < -T::OPT_TOL => -d,
                    VarState::AtUpper if d > T::OPT_TOL => d,
                    _ => continue,
                };
                if bland {
                    enter = Some((j, gain));
                    break;
                }
                if enter.is_none_or(|(_, g)| gain > g) {
                    enter = Some((j, gain));
                }
            }
            let Some((q, _)) = enter else {
                return Ok(());
            };
            let sigma = if self.state[q] == VarState::AtLower {
                T::one()
            } else {
                -T::one()
            };

            // Ratio test (two-pass, Harris-style tolerance on the bounds).
            let tol = T::FEAS_TOL;
            let mut relaxed_min = self.upper[q] - self.lower[q];
            for r in 0..self.m {
                let alpha = self.tab[r * self.ncols + q] * sigma;
                let b = self.basis[r];
                let bound_ratio = if alpha > T::PIVOT_TOL {
                    (self.beta[r] - self.lower[b] + tol) / alpha
                } else if alpha < -T::PIVOT_TOL && self.upper[b].is_finite() {
                    (self.upper[b] - self.beta[r] + tol) / -alpha
                } else {
                    continue;
                };
                relaxed_min = relaxed_min.min(bound_ratio);
            }
            let mut leave: Option<(usize, T, T)> = None; // (row, step, |alpha|)
            for r in 0..self.m {
                let alpha = self.tab[r * self.ncols + q] * sigma;
                let b = self.basis[r];
                let ratio = if alpha > T::PIVOT_TOL {
                    (self.beta[r] - self.lower[b]) / alpha
                } else if alpha < -T::PIVOT_TOL && self.upper[b].is_finite() {
                    (self.upper[b] - self.beta[r]) / -alpha
                } else {
                    continue;
                };
                let ratio = ratio.max(T::zero());
                if ratio > relaxed_min {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((lr, lstep, la)) => {
                        if bland {
                            ratio < lstep || (ratio == lstep && b < self.basis[lr])
                        } else {
                            alpha.abs() > la
                        }
                    }
                };
                if better {
                    leave = Some((r, ratio, alpha.abs()));
                }
            }
            if bland {
                // Bland needs the true minimum ratio.
                let mut best: Option<(usize, T)> = None;
                for r in 0..self.m {
                    let alpha = self.tab[r * self.ncols + q] * sigma;
                    let b = self.basis[r];
                    let ratio = if alpha > T::PIVOT_TOL {
                        (self.beta[r] - self.lower[b]) / alpha
                    } else if alpha < -T::PIVOT_TOL && self.upper[b].is_finite() {
                        (self.upper[b] - self.beta[r]) / -alpha
                    } else {
                        continue;
                    };
                    let ratio = ratio.max(T::zero());
                    if best.is_none_or(|(br, bs)| ratio < bs || (ratio == bs && b < self.basis[br])) {
                        best = Some((r, ratio));
                    }
                }
                leave = best.map(|(r, s)| (r, s, T::zero()));
            }
            let range = self.upper[q] - self.lower[q];
            self.iterations += 1;

            let (step, leaving_row) = match leave {
                Some((r, s, _)) if s < range => (s, Some(r)),
                _ if range.is_finite() => (range, None),
                _ => {
                    return Err(LpError::NumericalBreakdown(
                        "unbounded direction in a bounded problem".into(),
                    ))
                }
            };

            if step <= T::PIVOT_TOL {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stall = 0;
            }

            for r in 0..self.m {
                let t = self.tab[r * self.ncols + q];
                if t != T::zero() {
                    self.beta[r] = self.beta[r] - t * sigma * step;
                }
            }
            match leaving_row {
                None => {
                    self.state[q] = if sigma > T::zero() {
                        VarState::AtUpper
                    } else {
                        VarState::AtLower
                    };
                }
                Some(r) => {
                    let entering_value = self.nonbasic_value(q) + sigma * step;
                    let out = self.basis[r];
                    let alpha = self.tab[r * self.ncols + q] * sigma;
                    self.state[out] = if alpha > T::zero() {
                        VarState::AtLower
                    } else {
                        VarState::AtUpper
                    };
                    self.pivot(r, q);
                    self.basis[r] = q;
                    self.state[q] = VarState::Basic;
                    self.beta[r] = entering_value;
                }
            }
        }
    }

    fn is_artificial(&self, c: usize) -> bool {
        c >= self.art_start && c < self.art_start + self.art_rows.len()
    }

    /// Both phases. Returns false when the rows admit no point of the box.
    fn run(&mut self, bland: bool) -> Result<bool, LpError> {
        let arts = self.art_start..self.art_start + self.art_rows.len();
        if !arts.is_empty() {
            for c in arts.clone() {
                self.cost[c] = T::one();
            }
            self.optimize(bland)?;
            self.recompute_beta();
            let infeas = (0..self.m)
                .filter(|&r| self.is_artificial(self.basis[r]))
                .fold(T::zero(), |acc, r| acc + self.beta[r].max(T::zero()));
            if infeas > T::FEAS_TOL {
                return Ok(false);
            }
            for c in arts {
                self.cost[c] = T::zero();
                self.upper[c] = T::zero();
                if self.state[c] != VarState::Basic {
                    self.state[c] = VarState::AtLower;
                }
            }
            for r in 0..self.m {
                if self.is_artificial(self.basis[r]) {
                    self.beta[r] = T::zero();
                }
            }
        }
        for (c, &j) in self.structural.iter().enumerate() {
            self.cost[c] = self.p.objective[j];
        }
        self.optimize(bland)?;
        self.recompute_beta();
        Ok(true)
    }

    fn structural_values(&self) -> Vec<T> {
        let mut values: Vec<T> = self.p.lower.clone();
        for (c, &j) in self.structural.iter().enumerate() {
            if self.state[c] != VarState::Basic {
                values[j] = self.nonbasic_value(c);
            }
        }
        for r in 0..self.m {
            let b = self.basis[r];
            if b < self.n_struct {
                let j = self.structural[b];
                values[j] = self.beta[r].max(self.p.lower[j]).min(self.p.upper[j]);
            }
        }
        values
    }

    fn solution(&self) -> LpSolution<T> {
        let values = self.structural_values();
        let objective = self.p.objective_at(&values);
        LpSolution {
            status: LpStatus::Optimal,
            values,
            objective,
            iterations: self.iterations,
        }
    }

    /// Adds row `k` of `p` (already pushed) to an optimal tableau with its
    /// slack basic. Returns false when the row is violated on the whole box.
    fn append_row(&mut self, k: usize) -> bool {
        let (b, violated, redundant) = fold_row(&self.p, &self.p.rows[k]);
        if violated {
            return false;
        }
        if redundant {
            return true;
        }
        let old = self.ncols;
        let ncols = old + 1;
        let mut tab = vec![T::zero(); (self.m + 1) * ncols];
        for r in 0..self.m {
            tab[r * ncols..r * ncols + old].copy_from_slice(&self.tab[r * old..(r + 1) * old]);
        }
        // s - a·x = -b, then eliminate the basic columns.
        let mut row = vec![T::zero(); ncols];
        for &(v, a) in &self.p.rows[k].coeffs {
            let c = self.col_of[v as usize - 1];
            if c != usize::MAX {
                row[c] = -a;
            }
        }
        row[old] = T::one();
        for r in 0..self.m {
            let f = row[self.basis[r]];
            if f != T::zero() {
                let src = &tab[r * ncols..(r + 1) * ncols];
                for (d, &t) in row.iter_mut().zip(src) {
                    if t != T::zero() {
                        *d = *d - f * t;
                    }
                }
                row[self.basis[r]] = T::zero();
            }
        }
        tab[self.m * ncols..].copy_from_slice(&row);
        let x = self.structural_values();
        let act = self.p.rows[k].lhs(&x);
        // fixed variables are at their lower bound in `x`, so `act - rhs`
        // equals the slack of the folded row
        self.beta.push(act - self.p.rows[k].rhs);
        self.tab = tab;
        self.ncols = ncols;
        self.basis.push(old);
        self.state.push(VarState::Basic);
        self.lower.push(T::zero());
        self.upper.push(T::infinity());
        self.cost.push(T::zero());
        self.reduced.push(T::zero());
        self.kept_rows.push(k);
        self.rhs.push(b);
        self.slack_col.push(old);
        self.m += 1;
        true
    }

    /// Dual simplex from a dual feasible basis. Returns false when a row
    /// proves primal infeasibility.
    fn dual_optimize(&mut self) -> Result<bool, LpError> {
        let cap = self.iteration_cap();
        let tol = T::FEAS_TOL;
        loop {
            if self.iterations >= cap {
                return Err(LpError::IterationLimit(cap));
            }
            // Leaving row: largest bound violation.
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.m {
                let b = self.basis[r];
                let viol = if self.beta[r] < self.lower[b] - tol {
                    self.lower[b] - self.beta[r]
                } else if self.beta[r] > self.upper[b] + tol {
                    self.beta[r] - self.upper[b]
                } else {
                    continue;
                };
                if leave.is_none_or(|(_, v)| viol > v) {
                    leave = Some((r, viol));
                }
            }
            let Some((r, _)) = leave else {
                return Ok(true);
            };
            let out = self.basis[r];
            let to_lower = self.beta[r] < self.lower[out];
            let target = if to_lower { self.lower[out] } else { self.upper[out] };
            // x_out = beta_r - sum tab[r][j] dx_j; pick the nonbasic column
            // that moves x_out toward `target` with the smallest dual ratio.
            let row = &self.tab[r * self.ncols..(r + 1) * self.ncols];
            let mut enter: Option<(usize, T, T)> = None;
            for (j, &alpha) in row.iter().enumerate() {
                if self.state[j] == VarState::Basic
                    || self.upper[j] <= self.lower[j]
                    || alpha.abs() <= T::PIVOT_TOL
                {
                    continue;
                }
                // dx_j > 0 from lower, dx_j < 0 from upper
                let up = self.state[j] == VarState::AtLower;
                let moves_up = if up { alpha < T::zero() } else { alpha > T::zero() };
                if moves_up != to_lower {
                    continue;
                }
                let ratio = self.reduced[j].abs() / alpha.abs();
                let better = match enter {
                    None => true,
                    Some((_, br, ba)) => ratio < br || (ratio == br && alpha.abs() > ba),
                };
                if better {
                    enter = Some((j, ratio, alpha.abs()));
                }
            }
            let Some((q, _, _)) = enter else {
                return Ok(false);
            };
            self.iterations += 1;
            let alpha = self.tab[r * self.ncols + q];
            let dq = (self.beta[r] - target) / alpha;
            for i in 0..self.m {
                let t = self.tab[i * self.ncols + q];
                if t != T::zero() {
                    self.beta[i] = self.beta[i] - t * dq;
                }
            }
            let entering_value = self.nonbasic_value(q) + dq;
            self.state[out] = if to_lower {
                VarState::AtLower
            } else {
                VarState::AtUpper
            };
            self.pivot(r, q);
            self.basis[r] = q;
            self.state[q] = VarState::Basic;
            self.beta[r] = entering_value;
        }
    }
}

/// Builds and solves `p`, keeping the final tableau when optimal.
fn solve_fresh<T: Scalar>(
    p: &LpProblem<T>,
    bland: bool,
) -> Result<(LpSolution<T>, Option<Simplex<T>>), LpError> {
    let Some(mut s) = Simplex::build(p)? else {
        return Ok((LpSolution::infeasible(0), None));
    };
    if !s.run(bland)? {
        return Ok((LpSolution::infeasible(s.iterations), None));
    }
    let sol = s.solution();
    Ok((sol, Some(s)))
}

/// Solves from scratch with the verify-and-retry policy of [`solve_lp`].
fn solve_checked<T: Scalar>(
    p: &LpProblem<T>,
) -> Result<(LpSolution<T>, Option<Simplex<T>>), LpError> {
    let first = solve_fresh(p, false)?;
    if first.0.status == LpStatus::Infeasible || verify(p, &first.0.values) {
        return Ok(first);
    }
    // Retry once with Bland's rule from the start.
    let retry = solve_fresh(p, true)?;
    if retry.0.status == LpStatus::Infeasible || verify(p, &retry.0.values) {
        return Ok(retry);
    }
    Err(LpError::NumericalBreakdown(
        "reported optimum violates a row or bound".into(),
    ))
}

/// An LP that keeps its last optimal tableau. With `warm_start` on, rows
/// pushed after a solve are added to that tableau and re-optimized with
/// dual simplex pivots; any failure of that path falls back to
/// [`solve_lp`]. With it off every solve is from scratch.
#[derive(Debug, Clone)]
pub struct IncrementalLp<T> {
    problem: LpProblem<T>,
    warm_start: bool,
    tableau: Option<Simplex<T>>,
    /// rows of `problem` already in `tableau`
    synced: usize,
}

impl<T: Scalar> IncrementalLp<T> {
    pub fn new(problem: LpProblem<T>, warm_start: bool) -> Self {
        IncrementalLp {
            problem,
            warm_start,
            tableau: None,
            synced: 0,
        }
    }

    pub fn problem(&self) -> &LpProblem<T> {
        &self.problem
    }

    pub fn push_row(&mut self, r: LinearRow<T>) -> Result<(), LpError> {
        self.problem.push_row(r)
    }

    pub fn solve(&mut self) -> Result<LpSolution<T>, LpError> {
        if self.warm_start {
            if let Some(sol) = self.try_warm() {
                return Ok(sol);
            }
        }
        let (sol, tableau) = solve_checked(&self.problem)?;
        self.tableau = tableau.filter(|_| self.warm_start);
        self.synced = self.problem.rows.len();
        Ok(sol)
    }

    fn try_warm(&mut self) -> Option<LpSolution<T>> {
        let mut s = self.tableau.take()?;
        let start = s.iterations;
        for k in self.synced..self.problem.rows.len() {
            s.p.rows.push(self.problem.rows[k].clone());
            if !s.append_row(k) {
                return None;
            }
        }
        if !s.dual_optimize().ok()? {
            return None;
        }
        // clean up residual dual infeasibility
        s.optimize(false).ok()?;
        s.recompute_beta();
        let mut sol = s.solution();
        if !verify(&self.problem, &sol.values) {
            return None;
        }
        sol.iterations = s.iterations - start;
        self.tableau = Some(s);
        self.synced = self.problem.rows.len();
        Some(sol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(u32, f64)], rhs: f64) -> LinearRow<f64> {
        LinearRow::greater_eq(coeffs.iter().copied(), rhs).unwrap()
    }

    #[test]
    fn row_construction_merges_and_rejects_empty() {
        let r = row(&[(2, 1.0), (1, 2.0), (2, -1.0)], 1.0);
        assert_eq!(r.coeffs(), &[(1, 2.0)]);
        assert_eq!(
            LinearRow::<f64>::greater_eq([(1, 0.0)], 1.0),
            Err(LpError::EmptyRow)
        );
        let le = LinearRow::less_eq([(1, 1.0), (2, 1.0)], 1.0).unwrap();
        assert_eq!(le.coeffs(), &[(1, -1.0), (2, -1.0)]);
        assert_eq!(le.rhs(), -1.0);
    }

    #[test]
    fn unconstrained_box() {
        let p = LpProblem::new(vec![1.0, -2.0, 0.0]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(&s.values[..2], &[0.0, 1.0]);
        assert_eq!(s.objective, -2.0);
    }

    #[test]
    fn infeasible_rows() {
        let mut p = LpProblem::new(vec![0.0, 0.0]);
        p.push_row(row(&[(1, 1.0), (2, 1.0)], 1.5)).unwrap();
        p.push_row(row(&[(1, -1.0), (2, -1.0)], -1.2)).unwrap();
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);

        let mut q = LpProblem::new(vec![0.0]);
        q.push_row(row(&[(1, 1.0)], 2.0)).unwrap();
        assert_eq!(solve_lp(&q).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn add_row_has_value_semantics() {
        let p = LpProblem::new(vec![1.0]);
        let q = p.add_row(row(&[(1, 1.0)], 1.0)).unwrap();
        assert!(p.rows().is_empty());
        assert_eq!(q.rows().len(), 1);
        assert!(matches!(
            p.add_row(row(&[(3, 1.0)], 1.0)),
            Err(LpError::VariableOutOfRange { var: 3, .. })
        ));
    }

    #[test]
    fn fixed_bounds_fold_into_rows() {
        // min x1 + x2, x1 + x2 >= 1, x2 fixed at 0
        let mut p = LpProblem::new(vec![1.0, 1.0]);
        p.push_row(row(&[(1, 1.0), (2, 1.0)], 1.0)).unwrap();
        p.fix(2, 0.0).unwrap();
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.values, vec![1.0, 0.0]);
        assert!(p.set_bounds(1, 0.7, 0.2).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let mut p = LpProblem::<f32>::new(vec![1.0, 1.0]);
        p.push_row(LinearRow::greater_eq([(1, 1.0), (2, 2.0)], 1.0).unwrap())
            .unwrap();
        let s = solve_lp(&p).unwrap();
        assert!((s.objective - 0.5).abs() < 1e-5);
    }

    #[test]
    fn dump_format() {
        let mut p = LpProblem::new(vec![0.0, 1.0]);
        p.push_row(row(&[(1, 1.0), (2, -1.0)], 0.0)).unwrap();
        p.fix(1, 1.0).unwrap();
        assert_eq!(p.dump(), "min: +1 x2\nr1: +1 x1 -1 x2 >= 0\nbound x1 1 1\n");
    }
}

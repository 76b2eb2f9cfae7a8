//! Exact small-scale linear programming.
//!
//! A dense two-phase tableau simplex on row-equilibrated data. Entering
//! columns are picked by the most negative reduced cost, passing over
//! columns whose pivot would be tiny. The ratio test is Harris's two-pass
//! rule and takes the largest pivot among near-ties. After a run of
//! degenerate pivots the method switches to Bland's rule (lowest index
//! everywhere) so it cannot cycle. Once a basis is optimal the primal and
//! dual values are recomputed from the original data with a fresh
//! factorization, and every optimal result is checked against a
//! primal/dual certificate before it is returned.
//!
//! Problems have the form
//!
//! ```text
//! min  cᵀv
//! s.t. E v  = e
//!      G v <= g
//!      lower <= v <= upper        (entries may be ±inf)
//! ```
//!
//! Dual multipliers follow the Lagrangian `cᵀv + λᵀ(Ev − e) + μᵀ(Gv − g)` with
//! `μ >= 0`; reduced costs are `c + Eᵀλ + Gᵀμ`.

use crate::error::{Error, Result};

/// A sparse linear row `Σ coeffs · v (op) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub eq_rows: Vec<Row>,
    /// Rows of the form `a·v <= rhs`.
    pub ineq_rows: Vec<Row>,
}

impl LpProblem {
    /// `num_vars` free variables with zero cost.
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
            eq_rows: Vec::new(),
            ineq_rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends a variable and returns its index.
    pub fn add_var(&mut self, lower: f64, upper: f64, cost: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn add_eq(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        self.eq_rows.push(Row {
            coeffs: coeffs.into_iter().collect(),
            rhs,
        });
    }

    pub fn add_le(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        self.ineq_rows.push(Row {
            coeffs: coeffs.into_iter().collect(),
            rhs,
        });
    }

    pub fn add_ge(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, rhs: f64) {
        self.ineq_rows.push(Row {
            coeffs: coeffs.into_iter().map(|(j, a)| (j, -a)).collect(),
            rhs: -rhs,
        });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Shape(format!(
                "LP has {n} objective entries but {} lower / {} upper bounds",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::InconsistentBounds(format!(
                    "variable {j} has bounds [{lo}, {hi}]"
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(Error::InvalidArgument(format!("objective entry {j} not finite")));
            }
        }
        for row in self.eq_rows.iter().chain(&self.ineq_rows) {
            if !row.rhs.is_finite() {
                return Err(Error::InvalidArgument("non-finite row right-hand side".into()));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(Error::Shape(format!("row references variable {j} of {n}")));
                }
                if !a.is_finite() {
                    return Err(Error::InvalidArgument("non-finite row coefficient".into()));
                }
            }
        }
        Ok(())
    }

    /// Objective value of `v`.
    pub fn evaluate(&self, v: &[f64]) -> f64 {
        self.objective.iter().zip(v).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of any bound or row at `v`.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - v[j]).max(v[j] - self.upper[j]);
        }
        for row in &self.eq_rows {
            worst = worst.max((row_dot(row, v) - row.rhs).abs());
        }
        for row in &self.ineq_rows {
            worst = worst.max(row_dot(row, v) - row.rhs);
        }
        worst
    }
}

fn row_dot(row: &Row, v: &[f64]) -> f64 {
    row.coeffs.iter().map(|&(j, a)| a * v[j]).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    /// Optimal point; empty unless `status == Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    pub eq_duals: Vec<f64>,
    pub ineq_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
}

impl LpResult {
    fn without_solution(status: LpStatus) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            LpStatus::Optimal => f64::NAN,
        };
        Self {
            status,
            x: Vec::new(),
            objective,
            eq_duals: Vec::new(),
            ineq_duals: Vec::new(),
            reduced_costs: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub pivot_tol: f64,
    /// Column entries at or below this are treated as zero in the ratio
    /// test. Rows are equilibrated first, so this is relative.
    pub ratio_pivot_tol: f64,
    pub feasibility_tol: f64,
    /// Relative tolerance for the optimality certificate.
    pub certificate_tol: f64,
    pub max_pivots: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pivot_tol: 1e-9,
            ratio_pivot_tol: 1e-7,
            feasibility_tol: 1e-9,
            certificate_tol: 1e-8,
            max_pivots: 1_000_000,
            bland_after: 50,
        }
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpResult> {
    solve_lp_with(problem, &SimplexOptions::default())
}

pub fn solve_lp_with(problem: &LpProblem, opts: &SimplexOptions) -> Result<LpResult> {
    problem.validate()?;
    let std = StandardForm::build(problem)?;
    if std.trivially_infeasible {
        return Ok(LpResult::without_solution(LpStatus::Infeasible));
    }
    let mut tab = Tableau::new(&std);
    let mut pivots = 0usize;

    // phase 1
    let phase1_cost: Vec<f64> = (0..tab.ncols)
        .map(|j| if j >= tab.first_artificial { 1.0 } else { 0.0 })
        .collect();
    if tab.has_artificial_in_basis() {
        match tab.run(&phase1_cost, tab.ncols, opts, &mut pivots)? {
            Phase::Optimal => {}
            Phase::Unbounded => unreachable!("phase 1 objective is bounded below by zero"),
        }
        let infeas: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= tab.first_artificial)
            .map(|(i, _)| tab.rhs(i))
            .sum();
        let scale = 1.0 + std.rhs.iter().fold(0.0_f64, |m, b| m.max(b.abs()));
        if infeas > opts.feasibility_tol * scale {
            return Ok(LpResult::without_solution(LpStatus::Infeasible));
        }
        tab.drive_out_artificials(opts);
    }

    // phase 2
    let mut phase2_cost = std.cost.clone();
    phase2_cost.resize(tab.ncols, 0.0);
    match tab.run(&phase2_cost, tab.first_artificial, opts, &mut pivots)? {
        Phase::Unbounded => return Ok(LpResult::without_solution(LpStatus::Unbounded)),
        Phase::Optimal => {}
    }

    let (s, y) = tab.refined_solution(&std, &phase2_cost);
    let result = std.recover(problem, &s, &y);
    certify(problem, &result, opts.certificate_tol)?;
    Ok(result)
}

/// Pivots below this are taken only when no other column improves.
const STABLE_PIVOT: f64 = 1e-5;

/// Ranges this narrow are solved as fixed at their midpoint.
const FIXED_RANGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// v = lo + s
    Shift { col: usize, lo: f64 },
    /// v = hi − s
    Neg { col: usize, hi: f64 },
    /// v = s⁺ − s⁻
    Split { pos: usize, neg: usize },
    Fixed { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Eq(usize),
    Le(usize),
    UpperBound,
}

/// `min costᵀs  s.t.  A s = rhs, s >= 0`, with `rhs >= 0` after sign flips.
struct StandardForm {
    nstruct: usize,
    nslack: usize,
    maps: Vec<VarMap>,
    /// Dense rows over structural + slack columns.
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    kinds: Vec<RowKind>,
    /// Multiplier applied to each original row: equilibration times the
    /// sign flip that makes rhs non-negative. Slack columns stay at 1.
    scale: Vec<f64>,
    /// Slack column of each row, if any.
    slack_of: Vec<Option<usize>>,
    cost: Vec<f64>,
    trivially_infeasible: bool,
}

impl StandardForm {
    fn build(p: &LpProblem) -> Result<Self> {
        let n = p.num_vars();
        let mut maps = Vec::with_capacity(n);
        let mut nstruct = 0usize;
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        let mut trivially_infeasible = false;
        for j in 0..n {
            let (lo, hi) = (p.lower[j], p.upper[j]);
            if lo > hi {
                trivially_infeasible = true;
            }
            let map = if lo.is_finite() && hi.is_finite() && hi - lo <= FIXED_RANGE * (1.0 + lo.abs().max(hi.abs())) {
                VarMap::Fixed { value: if lo == hi { lo } else { 0.5 * (lo + hi) } }
            } else if lo.is_finite() {
                let col = nstruct;
                nstruct += 1;
                if hi.is_finite() {
                    bound_rows.push((col, hi - lo));
                }
                VarMap::Shift { col, lo }
            } else if hi.is_finite() {
                let col = nstruct;
                nstruct += 1;
                VarMap::Neg { col, hi }
            } else {
                let pos = nstruct;
                nstruct += 2;
                VarMap::Split { pos, neg: pos + 1 }
            };
            maps.push(map);
        }

        let nslack = p.ineq_rows.len() + bound_rows.len();
        let width = nstruct + nslack;
        let mut cost = vec![0.0; nstruct];
        for (j, map) in maps.iter().enumerate() {
            let c = p.objective[j];
            match *map {
                VarMap::Shift { col, .. } => cost[col] += c,
                VarMap::Neg { col, .. } => cost[col] -= c,
                VarMap::Split { pos, neg } => {
                    cost[pos] += c;
                    cost[neg] -= c;
                }
                VarMap::Fixed { .. } => {}
            }
        }

        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        let mut kinds = Vec::new();
        let mut slack_of = Vec::new();
        let mut slack = nstruct;
        let mut push_row = |row: &Row, kind: RowKind, slack_col: Option<usize>| {
            let mut dense = vec![0.0; width];
            let mut b = row.rhs;
            for &(j, a) in &row.coeffs {
                match maps[j] {
                    VarMap::Shift { col, lo } => {
                        dense[col] += a;
                        b -= a * lo;
                    }
                    VarMap::Neg { col, hi } => {
                        dense[col] -= a;
                        b -= a * hi;
                    }
                    VarMap::Split { pos, neg } => {
                        dense[pos] += a;
                        dense[neg] -= a;
                    }
                    VarMap::Fixed { value } => b -= a * value,
                }
            }
            if let Some(s) = slack_col {
                dense[s] = 1.0;
            }
            rows.push(dense);
            rhs.push(b);
            kinds.push(kind);
            slack_of.push(slack_col);
        };
        for (k, row) in p.eq_rows.iter().enumerate() {
            push_row(row, RowKind::Eq(k), None);
        }
        for (k, row) in p.ineq_rows.iter().enumerate() {
            push_row(row, RowKind::Le(k), Some(slack));
            slack += 1;
        }
        for &(col, ub) in &bound_rows {
            let mut dense = vec![0.0; width];
            dense[col] = 1.0;
            dense[slack] = 1.0;
            rows.push(dense);
            rhs.push(ub);
            kinds.push(RowKind::UpperBound);
            slack_of.push(Some(slack));
            slack += 1;
        }

        let mut scale = vec![1.0; rows.len()];
        for i in 0..rows.len() {
            let big = rows[i][..nstruct].iter().fold(0.0_f64, |m, a| m.max(a.abs()));
            let f = if big > 0.0 { 1.0 / big } else { 1.0 };
            scale[i] = if rhs[i] < 0.0 { -f } else { f };
            let f = scale[i];
            rhs[i] *= f;
            rows[i][..nstruct].iter_mut().for_each(|a| *a *= f);
            if let Some(sc) = slack_of[i] {
                rows[i][sc] = f.signum();
            }
        }
        Ok(Self {
            nstruct,
            nslack,
            maps,
            rows,
            rhs,
            kinds,
            scale,
            slack_of,
            cost,
            trivially_infeasible,
        })
    }

    fn recover(&self, p: &LpProblem, s: &[f64], y_rows: &[f64]) -> LpResult {
        let n = p.num_vars();
        let mut x = vec![0.0; n];
        for (j, map) in self.maps.iter().enumerate() {
            x[j] = match *map {
                VarMap::Shift { col, lo } => lo + s[col],
                VarMap::Neg { col, hi } => hi - s[col],
                VarMap::Split { pos, neg } => s[pos] - s[neg],
                VarMap::Fixed { value } => value,
            };
        }
        let mut eq_duals = vec![0.0; p.eq_rows.len()];
        let mut ineq_duals = vec![0.0; p.ineq_rows.len()];
        for (i, kind) in self.kinds.iter().enumerate() {
            let y = self.scale[i] * y_rows[i];
            match *kind {
                RowKind::Eq(k) => eq_duals[k] = -y,
                RowKind::Le(k) => ineq_duals[k] = (-y).max(0.0),
                RowKind::UpperBound => {}
            }
        }
        let mut reduced_costs = p.objective.clone();
        for (row, &l) in p.eq_rows.iter().zip(&eq_duals) {
            for &(j, a) in &row.coeffs {
                reduced_costs[j] += a * l;
            }
        }
        for (row, &m) in p.ineq_rows.iter().zip(&ineq_duals) {
            for &(j, a) in &row.coeffs {
                reduced_costs[j] += a * m;
            }
        }
        LpResult {
            status: LpStatus::Optimal,
            objective: p.evaluate(&x),
            x,
            eq_duals,
            ineq_duals,
            reduced_costs,
        }
    }
}

enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    /// Row-major `m × (ncols + 1)`; last column is the right-hand side.
    data: Vec<f64>,
    m: usize,
    ncols: usize,
    first_artificial: usize,
    basis: Vec<usize>,
    /// Standard-form row each tableau row came from.
    row_origin: Vec<usize>,
}

impl Tableau {
    fn new(std: &StandardForm) -> Self {
        let m = std.rows.len();
        let base = std.nstruct + std.nslack;
        // rows whose slack can start basic need no artificial
        let mut art_of = vec![None; m];
        let mut nart = 0;
        for i in 0..m {
            let usable = std.slack_of[i].is_some() && std.scale[i] > 0.0;
            if !usable {
                art_of[i] = Some(base + nart);
                nart += 1;
            }
        }
        let ncols = base + nart;
        let stride = ncols + 1;
        let mut data = vec![0.0; m * stride];
        let mut basis = vec![0; m];
        for i in 0..m {
            data[i * stride..i * stride + base].copy_from_slice(&std.rows[i]);
            data[i * stride + ncols] = std.rhs[i];
            match art_of[i] {
                Some(a) => {
                    data[i * stride + a] = 1.0;
                    basis[i] = a;
                }
                None => basis[i] = std.slack_of[i].expect("usable slack"),
            }
        }
        Self {
            data,
            m,
            ncols,
            first_artificial: base,
            basis,
            row_origin: (0..m).collect(),
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.ncols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.ncols)
    }

    fn has_artificial_in_basis(&self) -> bool {
        self.basis.iter().any(|&b| b >= self.first_artificial)
    }

    fn pivot(&mut self, r: usize, q: usize, reduced: &mut [f64]) {
        let stride = self.ncols + 1;
        // a leaving value a hair below zero would be divided by the pivot
        // and pushed into the entering variable
        let b = &mut self.data[r * stride + self.ncols];
        *b = b.max(0.0);
        let p = self.data[r * stride + q];
        for v in &mut self.data[r * stride..(r + 1) * stride] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[r * stride..(r + 1) * stride].to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.data[i * stride + q];
            if f != 0.0 {
                let row = &mut self.data[i * stride..(i + 1) * stride];
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[q] = 0.0;
            }
        }
        let f = reduced[q];
        if f != 0.0 {
            for (v, pv) in reduced.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            reduced[q] = 0.0;
        }
        self.basis[r] = q;
    }

    /// Reduced costs with the negated objective value in the last slot.
    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut reduced: Vec<f64> = cost.to_vec();
        reduced.push(0.0);
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=self.ncols {
                    reduced[j] -= cb * self.at(i, j);
                }
            }
        }
        reduced
    }

    /// Minimizes `cost` with entering columns restricted to `< allowed`.
    fn run(
        &mut self,
        cost: &[f64],
        allowed: usize,
        opts: &SimplexOptions,
        pivots: &mut usize,
    ) -> Result<Phase> {
        let mut reduced = self.reduced_costs(cost);
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run >= opts.bland_after;
            let mut candidates: Vec<(usize, f64)> = reduced
                .iter()
                .copied()
                .enumerate()
                .take(allowed)
                .filter(|&(_, d)| d < -opts.pivot_tol)
                .collect();
            if candidates.is_empty() {
                return Ok(Phase::Optimal);
            }
            if !bland {
                candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
            }
            // a tiny pivot wrecks the basis conditioning, so try the other
            // improving columns before accepting one; Bland's rule needs the
            // first column to keep its anti-cycling guarantee
            let mut fallback = None;
            let mut chosen = None;
            for &(q, _) in &candidates {
                let Some((r, ratio)) = self.leaving(q, bland, opts) else {
                    return Ok(Phase::Unbounded);
                };
                if bland || self.at(r, q) >= STABLE_PIVOT {
                    chosen = Some((r, q, ratio));
                    break;
                }
                if fallback.is_none_or(|(fr, fq, _)| self.at(r, q) > self.at(fr, fq)) {
                    fallback = Some((r, q, ratio));
                }
            }
            let (r, q, ratio) = chosen.or(fallback).expect("at least one candidate");
            if ratio <= 1e-12 {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, q, &mut reduced);
            *pivots += 1;
            if *pivots >= opts.max_pivots {
                return Err(Error::IterationLimit(opts.max_pivots));
            }
        }
    }

    /// Leaving row for entering column `q`, with the step length.
    fn leaving(&self, q: usize, bland: bool, opts: &SimplexOptions) -> Option<(usize, f64)> {
        // Harris two-pass test: bound the step with a small feasibility
        // allowance, then take the largest pivot that fits under it
        let mut bound = f64::INFINITY;
        for i in 0..self.m {
            let a = self.at(i, q);
            if a > opts.ratio_pivot_tol {
                bound = bound.min((self.rhs(i).max(0.0) + opts.feasibility_tol) / a);
            }
        }
        let mut leave: Option<(usize, f64)> = None;
        let mut best_pivot = 0.0;
        for i in 0..self.m {
            let a = self.at(i, q);
            if a > opts.ratio_pivot_tol {
                let ratio = self.rhs(i).max(0.0) / a;
                if ratio > bound {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((r, _)) if bland => self.basis[i] < self.basis[r],
                    Some(_) => a > best_pivot,
                };
                if better {
                    leave = Some((i, ratio));
                    best_pivot = a;
                }
            }
        }
        leave
    }

    fn drive_out_artificials(&mut self, opts: &SimplexOptions) {
        let mut i = 0;
        while i < self.m {
            if self.basis[i] >= self.first_artificial {
                let q = (0..self.first_artificial)
                    .map(|j| (j, self.at(i, j).abs()))
                    .filter(|&(_, a)| a > opts.pivot_tol)
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(j, _)| j);
                match q {
                    Some(q) => {
                        // phase 1 left it within tolerance of zero; pivoting
                        // the residue would spread it into other rows
                        let stride = self.ncols + 1;
                        self.data[i * stride + self.ncols] = 0.0;
                        let mut dummy = vec![0.0; self.ncols + 1];
                        self.pivot(i, q, &mut dummy);
                        i += 1;
                    }
                    None => {
                        // redundant row
                        let stride = self.ncols + 1;
                        self.data.drain(i * stride..(i + 1) * stride);
                        self.basis.remove(i);
                        self.row_origin.remove(i);
                        self.m -= 1;
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    /// Primal values over standard columns and row duals, recomputed from the
    /// original rows for the final basis.
    fn refined_solution(&self, std: &StandardForm, cost: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let width = std.nstruct + std.nslack;
        let m = self.m;
        let mut y_rows = vec![0.0; std.rows.len()];
        let mut b_mat = vec![0.0; m * m];
        for (k, &i) in self.row_origin.iter().enumerate() {
            for (c, &col) in self.basis.iter().enumerate() {
                b_mat[k * m + c] = std.rows[i][col];
            }
        }
        // the re-solve removes pivoting drift, but on an ill-conditioned
        // basis it can also magnify a tolerated infeasibility; keep
        // whichever point fits the rows better
        let place = |xb: &[f64]| {
            let mut s = vec![0.0; width];
            for (c, &col) in self.basis.iter().enumerate() {
                s[col] = xb[c].max(0.0);
            }
            let resid = std
                .rows
                .iter()
                .zip(&std.rhs)
                .map(|(row, b)| (row.iter().zip(&s).map(|(a, v)| a * v).sum::<f64>() - b).abs())
                .fold(0.0, f64::max);
            (s, resid)
        };
        let tableau: Vec<f64> = (0..m).map(|i| self.rhs(i)).collect();
        let mut s = place(&tableau);
        let mut xb: Vec<f64> = self.row_origin.iter().map(|&i| std.rhs[i]).collect();
        if solve_dense(&mut b_mat.clone(), m, &mut xb) {
            let exact = place(&xb);
            if exact.1 <= s.1 {
                s = exact;
            }
        }
        let s = s.0;
        let mut bt = vec![0.0; m * m];
        for r in 0..m {
            for c in 0..m {
                bt[c * m + r] = b_mat[r * m + c];
            }
        }
        let mut y: Vec<f64> = self.basis.iter().map(|&col| cost[col]).collect();
        if solve_dense(&mut bt, m, &mut y) {
            for (k, &i) in self.row_origin.iter().enumerate() {
                y_rows[i] = y[k];
            }
        }
        (s, y_rows)
    }
}

/// Gaussian elimination with partial pivoting; solves `a x = b` in place.
fn solve_dense(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|i| (i, a[i * n + k].abs()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv < 1e-14 {
            return false;
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let d = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / d;
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= a[k * n + j] * b[j];
        }
        b[k] = acc / a[k * n + k];
    }
    true
}

/// Checks primal feasibility, dual feasibility, complementary slackness and
/// the duality gap of an optimal result.
fn certify(p: &LpProblem, r: &LpResult, tol: f64) -> Result<()> {
    let x = &r.x;
    let xscale = 1.0 + x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for j in 0..p.num_vars() {
        let slack = tol * (1.0 + p.lower[j].abs().min(xscale));
        if x[j] < p.lower[j] - slack || x[j] > p.upper[j] + tol * (1.0 + p.upper[j].abs().min(xscale)) {
            return Err(Error::Certificate(format!(
                "variable {j} = {} outside [{}, {}]",
                x[j], p.lower[j], p.upper[j]
            )));
        }
    }
    let row_scale = |row: &Row| {
        1.0 + row.rhs.abs() + row.coeffs.iter().map(|&(j, a)| (a * x[j]).abs()).sum::<f64>()
    };
    for (k, row) in p.eq_rows.iter().enumerate() {
        let res = (row_dot(row, x) - row.rhs).abs();
        if res > tol * row_scale(row) {
            return Err(Error::Certificate(format!("equality row {k} residual {res:e}")));
        }
    }
    let mut comp = 0.0;
    for (k, row) in p.ineq_rows.iter().enumerate() {
        let act = row_dot(row, x);
        let sc = row_scale(row);
        if act - row.rhs > tol * sc {
            return Err(Error::Certificate(format!(
                "inequality row {k} violated by {:e}",
                act - row.rhs
            )));
        }
        comp += r.ineq_duals[k] * (row.rhs - act).max(0.0) / sc;
    }
    let dscale = 1.0
        + p.objective.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
        + r.eq_duals.iter().chain(&r.ineq_duals).fold(0.0_f64, |m, c| m.max(c.abs()));
    let mut dual_obj = 0.0;
    for (row, &l) in p.eq_rows.iter().zip(&r.eq_duals) {
        dual_obj -= l * row.rhs;
    }
    for (row, &m) in p.ineq_rows.iter().zip(&r.ineq_duals) {
        dual_obj -= m * row.rhs;
    }
    for j in 0..p.num_vars() {
        let rc = r.reduced_costs[j];
        let fixed = p.lower[j] == p.upper[j];
        if rc > tol * dscale && !fixed {
            if !p.lower[j].is_finite() || (x[j] - p.lower[j]) * rc > tol * dscale * xscale {
                return Err(Error::Certificate(format!(
                    "reduced cost {rc:e} of variable {j} not complementary"
                )));
            }
            dual_obj += rc * p.lower[j];
        } else if rc < -tol * dscale && !fixed {
            if !p.upper[j].is_finite() || (p.upper[j] - x[j]) * -rc > tol * dscale * xscale {
                return Err(Error::Certificate(format!(
                    "reduced cost {rc:e} of variable {j} not complementary"
                )));
            }
            dual_obj += rc * p.upper[j];
        } else {
            dual_obj += rc * x[j];
        }
    }
    if comp > tol * dscale * 10.0 {
        return Err(Error::Certificate(format!("complementary slackness gap {comp:e}")));
    }
    let gap = (r.objective - dual_obj).abs();
    if gap > tol * dscale * xscale * 10.0 {
        return Err(Error::Certificate(format!(
            "duality gap {gap:e} (primal {}, dual {dual_obj})",
            r.objective
        )));
    }
    Ok(())
}

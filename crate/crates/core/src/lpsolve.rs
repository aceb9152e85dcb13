//! Dense two-phase primal simplex for small bounded linear programs.
//!
//! Solves `max c^T x s.t. A x <= b, lo <= x <= hi` where every `lo` is finite
//! and `hi` may be `+inf`. Pivoting uses the largest reduced cost and falls
//! back to Bland's rule after a run of degenerate pivots, which rules out
//! cycling.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Smallest pivot element accepted in the ratio test.
pub const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_RUN: usize = 20;
const PAR_ROWS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    /// Row-major `rows x objective.len()`.
    matrix: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// `bounds[k] = (lo, hi)` with finite `lo <= hi`; `hi` may be `f64::INFINITY`.
    pub fn new(objective: Vec<f64>, rows: Vec<Vec<f64>>, rhs: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let n = objective.len();
        if n == 0 || rows.is_empty() {
            return Err(Error::Input("linear program needs at least one variable and one row".into()));
        }
        if rows.len() != rhs.len() || bounds.len() != n {
            return Err(Error::Dimension("rows, rhs and bounds disagree in size".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("constraint row length differs from objective".into()));
        }
        let finite = |v: &f64| v.is_finite();
        if !objective.iter().all(finite) || !rhs.iter().all(finite) || !rows.iter().flatten().all(finite) {
            return Err(Error::Input("linear program data must be finite".into()));
        }
        if bounds.iter().any(|(lo, hi)| !lo.is_finite() || hi.is_nan() || hi < lo) {
            return Err(Error::Input("bounds need finite lo <= hi".into()));
        }
        let (lower, upper) = bounds.into_iter().unzip();
        Ok(Self { objective, matrix: rows.concat(), rhs, lower, upper })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.num_vars();
        &self.matrix[i * n..(i + 1) * n]
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn bounds(&self, k: usize) -> (f64, f64) {
        (self.lower[k], self.upper[k])
    }

    /// Largest violation of a row or bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = (0..self.num_rows()).map(|i| dot(self.row(i), x) - self.rhs[i]);
        let bounds = x
            .iter()
            .enumerate()
            .map(|(k, v)| (self.lower[k] - v).max(v - self.upper[k]));
        rows.chain(bounds).fold(0.0_f64, f64::max)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Largest primal violation at `x`.
    pub residual: f64,
    /// Indices of rows of `A x <= b` that hold with equality.
    pub active: Vec<usize>,
}

struct Tableau {
    rows: usize,
    /// Columns excluding the right-hand side.
    cols: usize,
    stride: usize,
    data: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    first_artificial: usize,
    iterations: usize,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.stride + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.stride + self.cols]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let stride = self.stride;
        let inv = 1.0 / self.at(pr, pc);
        {
            let row = &mut self.data[pr * stride..(pr + 1) * stride];
            row.iter_mut().for_each(|v| *v *= inv);
            row[pc] = 1.0;
        }
        let prow: Vec<f64> = self.data[pr * stride..(pr + 1) * stride].to_vec();
        let nz: Vec<usize> = prow.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, _)| k).collect();
        let eliminate = |r: usize, row: &mut [f64]| {
            if r == pr {
                return;
            }
            let f = row[pc];
            if f == 0.0 {
                return;
            }
            for &k in &nz {
                row[k] -= f * prow[k];
            }
            row[pc] = 0.0;
        };
        if self.rows >= PAR_ROWS {
            self.data.par_chunks_mut(stride).enumerate().for_each(|(r, row)| eliminate(r, row));
        } else {
            self.data.chunks_mut(stride).enumerate().for_each(|(r, row)| eliminate(r, row));
        }
        let f = self.cost[pc];
        if f != 0.0 {
            for &k in &nz {
                self.cost[k] -= f * prow[k];
            }
            self.cost[pc] = 0.0;
        }
        self.basis[pr] = pc;
        self.iterations += 1;
    }

    /// Runs primal simplex on the current cost row; `Err` on unboundedness.
    fn optimize(&mut self, allow_artificial: bool, max_iter: usize) -> Result<()> {
        let limit = if allow_artificial { self.cols } else { self.first_artificial };
        let mut degenerate = 0usize;
        loop {
            if self.iterations > max_iter {
                return Err(Error::Solver(format!("simplex exceeded {max_iter} iterations")));
            }
            let bland = degenerate >= DEGENERATE_RUN;
            let mut entering = None;
            let mut best = -COST_TOL;
            for j in 0..limit {
                let d = self.cost[j];
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(pc) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio || (ratio == lratio && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((pr, ratio)) = leave else {
                return Err(Error::Unbounded("linear program is unbounded".into()));
            };
            if ratio <= 0.0 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(pr, pc);
        }
    }
}

/// Solves `lp` to optimality or reports infeasibility.
pub fn solve_lp(lp: &LinearProgram) -> Result<SolveResult> {
    let n = lp.num_vars();
    // shift x = lo + z and collect rows over z
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for i in 0..lp.num_rows() {
        let a = lp.row(i);
        let b = lp.rhs[i] - dot(a, &lp.lower);
        rows.push((a.to_vec(), b));
    }
    for k in 0..n {
        if lp.upper[k].is_finite() {
            let mut a = vec![0.0; n];
            a[k] = 1.0;
            rows.push((a, lp.upper[k] - lp.lower[k]));
        }
    }
    let feas_tol = 1e-9;
    let mut kept = Vec::with_capacity(rows.len());
    for (a, b) in rows {
        if a.iter().all(|v| *v == 0.0) {
            if b < -feas_tol * (1.0 + b.abs()) {
                return Ok(infeasible(lp, 0));
            }
            continue;
        }
        kept.push((a, b));
    }
    if kept.is_empty() {
        // every variable is unbounded above with no coupling row
        if lp.objective.iter().any(|c| *c > 0.0) {
            return Err(Error::Unbounded("no constraints bound the objective".into()));
        }
        return Ok(finish(lp, lp.lower.clone(), 0));
    }

    let rcount = kept.len();
    let negated: Vec<bool> = kept.iter().map(|(_, b)| *b < 0.0).collect();
    let n_art = negated.iter().filter(|v| **v).count();
    let cols = n + rcount + n_art;
    let stride = cols + 1;
    let mut data = vec![0.0; rcount * stride];
    let mut basis = vec![0; rcount];
    let mut art = n + rcount;
    for (r, (a, b)) in kept.iter().enumerate() {
        let row = &mut data[r * stride..(r + 1) * stride];
        let sign = if negated[r] { -1.0 } else { 1.0 };
        for (k, v) in a.iter().enumerate() {
            row[k] = sign * v;
        }
        row[n + r] = sign;
        row[cols] = sign * b;
        if negated[r] {
            row[art] = 1.0;
            basis[r] = art;
            art += 1;
        } else {
            basis[r] = n + r;
        }
    }
    let mut t = Tableau {
        rows: rcount,
        cols,
        stride,
        data,
        cost: vec![0.0; stride],
        basis,
        first_artificial: n + rcount,
        iterations: 0,
    };
    let max_iter = 200 * (rcount + cols) + 10_000;

    if n_art > 0 {
        // phase 1: maximize -sum(artificials)
        for r in 0..rcount {
            if negated[r] {
                for k in 0..stride {
                    t.cost[k] -= t.data[r * stride + k];
                }
            }
        }
        for j in t.first_artificial..cols {
            t.cost[j] += 1.0;
        }
        t.optimize(true, max_iter)?;
        let scale = 1.0 + kept.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
        if -t.cost[cols] > feas_tol * scale {
            return Ok(infeasible(lp, t.iterations));
        }
        for r in 0..rcount {
            if t.basis[r] >= t.first_artificial {
                let pc = (0..t.first_artificial)
                    .filter(|&j| t.at(r, j).abs() > 1e-9)
                    .max_by(|&a, &b| t.at(r, a).abs().total_cmp(&t.at(r, b).abs()).then(b.cmp(&a)));
                if let Some(pc) = pc {
                    t.pivot(r, pc);
                }
            }
        }
    }

    // phase 2: cost row = c_B B^-1 a_j - c_j over z
    t.cost.iter_mut().for_each(|v| *v = 0.0);
    for (k, c) in lp.objective.iter().enumerate() {
        t.cost[k] = -c;
    }
    for r in 0..rcount {
        let b = t.basis[r];
        let cb = if b < n { lp.objective[b] } else { 0.0 };
        if cb != 0.0 {
            for k in 0..stride {
                t.cost[k] += cb * t.data[r * stride + k];
            }
        }
    }
    t.optimize(false, max_iter)?;

    let mut x = lp.lower.clone();
    for r in 0..rcount {
        let b = t.basis[r];
        if b < n {
            x[b] += t.rhs(r).max(0.0);
        }
    }
    for (k, v) in x.iter_mut().enumerate() {
        *v = v.clamp(lp.lower[k], lp.upper[k]);
    }
    Ok(finish(lp, x, t.iterations))
}

fn finish(lp: &LinearProgram, x: Vec<f64>, iterations: usize) -> SolveResult {
    let active = (0..lp.num_rows())
        .filter(|&i| (dot(lp.row(i), &x) - lp.rhs[i]).abs() <= 1e-9 * (1.0 + lp.rhs[i].abs()))
        .collect();
    SolveResult {
        status: LpStatus::Optimal,
        objective: dot(&lp.objective, &x),
        residual: lp.max_violation(&x),
        x,
        iterations,
        active,
    }
}

fn infeasible(lp: &LinearProgram, iterations: usize) -> SolveResult {
    SolveResult {
        status: LpStatus::Infeasible,
        x: lp.lower.clone(),
        objective: f64::NAN,
        iterations,
        residual: f64::NAN,
        active: Vec::new(),
    }
}

//! Sample-average CVaR relaxation.
//!
//! With `Z_j(x) = phi(x, L_j)` and `K = delta N`, the sample CVaR
//!
//! ```text
//! CVaR(x) = min_tau tau + (1/K) sum_j (Z_j(x) - tau)^+
//!         = max { sum_j w_j Z_j(x) : 0 <= w_j <= 1/K, sum_j w_j = 1 }
//! ```
//!
//! is convex, piecewise linear and positively homogeneous in `x`. The program
//! `max c^T x s.t. CVaR(x) <= 1, 0 <= x <= h` is solved by cutting planes: at
//! each iterate the maximizing weights (the upper `K` order statistics, the
//! last one fractionally) together with the active matrix of each sample give
//! a linear cut `sum_j w_j x^T A_{i_j} L_j <= 1`. There are finitely many such
//! cuts and each new one separates the current iterate, so the loop ends at
//! the optimum of the same program the Rockafellar-Uryasev linear program
//! describes, using `m` columns instead of `m + N + 1`.

use std::collections::HashMap;

use super::{check_tail, MethodKind, MethodResult, Scenarios};
use crate::error::{Error, Result};
use crate::lpsolve::{solve_lp, LinearProgram, LpStatus};
use crate::model::{dot, ProblemInstance};
use crate::sampler::{SampleBatch, TailModel};

const MAX_ROUNDS: usize = 2000;
const GAP_TOL: f64 = 1e-10;
/// Streams are materialized up to this many stored values.
const MATERIALIZE_LIMIT: usize = 1 << 23;

/// Solver statistics for one CVaR solve.
#[derive(Debug, Clone, PartialEq)]
pub struct CvarDiagnostics {
    /// Empirical value-at-risk of `phi(x, L)` at the returned `x`.
    pub value_at_risk: f64,
    /// Sample CVaR at the returned `x`, at most 1.
    pub cvar: f64,
    pub rounds: usize,
    pub cuts: usize,
    pub lp_iterations: usize,
}

/// CVaR relaxation on `sample_count` draws of `tail` generated from `seed`.
///
/// Large samples are regenerated block by block on every pass instead of
/// being stored.
pub fn cvar_solve(
    problem: &ProblemInstance,
    tail: &TailModel,
    delta: f64,
    sample_count: usize,
    seed: u64,
) -> Result<(MethodResult, CvarDiagnostics)> {
    check_tail(problem, tail)?;
    check_args(delta, sample_count)?;
    if sample_count.saturating_mul(tail.n()) <= MATERIALIZE_LIMIT {
        let batch = tail.sample(seed, sample_count)?;
        return solve(problem, Scenarios::Batch(&batch), delta, seed);
    }
    solve(problem, Scenarios::Stream { tail, seed, count: sample_count }, delta, seed)
}

/// CVaR relaxation on a stored sample.
pub fn cvar_solve_batch(
    problem: &ProblemInstance,
    batch: &SampleBatch,
    delta: f64,
) -> Result<(MethodResult, CvarDiagnostics)> {
    if batch.n() != problem.n() {
        return Err(Error::Dimension("sample dimension differs from problem".into()));
    }
    check_args(delta, batch.len())?;
    solve(problem, Scenarios::Batch(batch), delta, batch.seed())
}

fn check_args(delta: f64, count: usize) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if delta * (count as f64) < 100.0 {
        return Err(Error::Parameter(format!(
            "delta * sample_count = {} is below 100",
            delta * count as f64
        )));
    }
    Ok(())
}

/// Sample CVaR at one point with its maximizing cut.
struct Evaluation {
    cvar: f64,
    var: f64,
    /// `sum_j w_j A_{i_j} L_j`.
    cut: Vec<f64>,
}

#[derive(Clone, Copy)]
struct Ranked {
    z: f64,
    j: usize,
    i: usize,
}

/// Keeps the `k` largest values; ties go to the smaller scenario index.
fn keep_top(v: &mut Vec<Ranked>, k: usize) {
    let order = |a: &Ranked, b: &Ranked| b.z.total_cmp(&a.z).then(a.j.cmp(&b.j));
    if v.len() > k {
        if k > 0 {
            v.select_nth_unstable_by(k - 1, order);
        }
        v.truncate(k);
    }
    v.sort_by(order);
}

fn evaluate(problem: &ProblemInstance, source: &Scenarios<'_>, x: &[f64], tail_mass: f64) -> Evaluation {
    let n = source.n();
    let m = problem.m();
    let whole = tail_mass.floor() as usize;
    let keep = whole + 1;
    let mut top: Vec<Ranked> = source
        .map_blocks(|start, rows| {
            let mut local: Vec<Ranked> = rows
                .chunks_exact(n)
                .enumerate()
                .map(|(k, l)| {
                    let (z, i) = problem.phi_argmax_unchecked(x, l);
                    Ranked { z, j: start + k, i }
                })
                .collect();
            keep_top(&mut local, keep);
            local
        })
        .into_iter()
        .flatten()
        .collect();
    keep_top(&mut top, keep);

    let frac = tail_mass - whole as f64;
    let mut weights: HashMap<usize, (usize, f64)> = HashMap::with_capacity(keep);
    let mut cvar = 0.0;
    for (rank, r) in top.iter().enumerate() {
        let w = if rank < whole { 1.0 } else { frac };
        if w > 0.0 {
            weights.insert(r.j, (r.i, w / tail_mass));
            cvar += w * r.z;
        }
    }
    cvar /= tail_mass;
    let var = top.get(whole.min(top.len() - 1)).map_or(0.0, |r| r.z);

    let cut = source
        .map_blocks(|start, rows| {
            let mut acc = vec![0.0; m];
            for (k, l) in rows.chunks_exact(n).enumerate() {
                if let Some(&(i, w)) = weights.get(&(start + k)) {
                    for (a, v) in acc.iter_mut().zip(problem.matrices()[i].right_mul(l)) {
                        *a += w * v;
                    }
                }
            }
            acc
        })
        .into_iter()
        .fold(vec![0.0; m], |mut s, b| {
            s.iter_mut().zip(b).for_each(|(a, v)| *a += v);
            s
        });
    Evaluation { cvar, var, cut }
}

fn solve(
    problem: &ProblemInstance,
    source: Scenarios<'_>,
    delta: f64,
    seed: u64,
) -> Result<(MethodResult, CvarDiagnostics)> {
    let count = source.len();
    let tail_mass = delta * count as f64;
    let m = problem.m();
    let mut cuts: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<(f64, Vec<f64>, Evaluation)> = None;
    let mut lp_iterations = 0;
    for round in 1..=MAX_ROUNDS {
        let (x, upper) = if cuts.is_empty() {
            let x = vec![problem.h(); m];
            let v = problem.objective(&x);
            (x, v)
        } else {
            let lp = LinearProgram::new(problem.c().to_vec(), cuts.clone(), vec![1.0; cuts.len()], vec![(0.0, problem.h()); m])?;
            let sol = solve_lp(&lp)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Solver("CVaR program reported infeasible although x = 0 is feasible".into()));
            }
            lp_iterations += sol.iterations;
            (sol.x, sol.objective)
        };
        let eval = evaluate(problem, &source, &x, tail_mass);
        // CVaR is homogeneous, so x / CVaR(x) is feasible
        let scale = if eval.cvar > 1.0 { 1.0 / eval.cvar } else { 1.0 };
        let lower = scale * problem.objective(&x);
        if best.as_ref().is_none_or(|b| lower > b.0) {
            let xs: Vec<f64> = x.iter().map(|v| v * scale).collect();
            let ev = Evaluation { cvar: eval.cvar * scale, var: eval.var * scale, cut: eval.cut.clone() };
            best = Some((lower, xs, ev));
        }
        let best_value = best.as_ref().map_or(0.0, |b| b.0);
        let separated = dot(&eval.cut, &x) > 1.0 + GAP_TOL;
        if upper - best_value <= GAP_TOL * upper.abs().max(f64::MIN_POSITIVE) || !separated {
            let (value, x, ev) = best.expect("at least one round");
            let result = MethodResult {
                method: MethodKind::Cvar,
                value,
                x,
                delta,
                violation: None,
                violation_halfwidth: None,
                seed,
                budget: count,
            };
            let diag = CvarDiagnostics {
                value_at_risk: ev.var,
                cvar: ev.cvar,
                rounds: round,
                cuts: cuts.len(),
                lp_iterations,
            };
            return Ok((result, diag));
        }
        cuts.push(eval.cut);
    }
    Err(Error::Solver(format!("CVaR cutting planes did not settle in {MAX_ROUNDS} rounds")))
}

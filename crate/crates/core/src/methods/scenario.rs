//! The scenario program `max c^T y s.t. 0 <= y <= h r, phi(y, L_j) <= r for all j`.
//!
//! With `r = 1` this is the plain sampled program; `r = q^{-1}(log k)` or
//! `r = Fbar^{-1}(1/k)` gives the scaled variants whose optimal values stay
//! of order one as `k` grows. Rows are generated lazily: only scenarios that
//! bind at some iterate enter the linear program.

use std::collections::HashSet;

use rayon::prelude::*;

use super::{MethodKind, MethodResult};
use crate::error::{Error, Result};
use crate::lpsolve::{solve_lp, LinearProgram, LpStatus};
use crate::model::{bilinear, ProblemInstance};
use crate::sampler::SampleBatch;
use crate::search::start_directions;

const ADD_PER_ROUND: usize = 64;
const MAX_ROUNDS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSolution {
    /// Optimizer in the scaled variable `y = r x`.
    pub y: Vec<f64>,
    /// `c^T y`.
    pub value: f64,
    pub radius: f64,
    pub rounds: usize,
    /// `(scenario, matrix)` pairs in the final restricted program.
    pub working_pairs: usize,
}

impl ScenarioSolution {
    /// Decision in the original scale, `x = y / r`.
    pub fn decision(&self) -> Vec<f64> {
        self.y.iter().map(|v| v / self.radius).collect()
    }

    pub fn into_method_result(self, delta: f64, seed: u64, budget: usize) -> MethodResult {
        let x = self.decision();
        MethodResult {
            method: MethodKind::Scenario,
            value: self.value / self.radius,
            x,
            delta,
            violation: None,
            violation_halfwidth: None,
            seed,
            budget,
        }
    }
}

/// Solves the scenario program on `batch` with scale `radius`.
pub fn scenario_solve(problem: &ProblemInstance, batch: &SampleBatch, radius: f64) -> Result<ScenarioSolution> {
    if batch.is_empty() {
        return Err(Error::Input("scenario batch is empty".into()));
    }
    if batch.n() != problem.n() {
        return Err(Error::Dimension("sample dimension differs from problem".into()));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::Parameter(format!("radius must be positive, got {radius}")));
    }
    let m = problem.m();
    let upper = problem.h() * radius;

    // seed rows: the worst scenario along each vertex and the barycenter
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut rows: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for u in start_directions(m).into_iter().take(m + 1) {
        let best = batch
            .rows()
            .enumerate()
            .map(|(j, l)| {
                let (v, i) = problem.phi_argmax_unchecked(&u, l);
                (v, j, i)
            })
            .fold(None, |acc: Option<(f64, usize, usize)>, c| match acc {
                Some(a) if a.0 >= c.0 => Some(a),
                _ => Some(c),
            });
        if let Some((v, j, i)) = best {
            if v > 0.0 && seen.insert((j, i)) {
                rows.push((j, i, problem.matrices()[i].right_mul(batch.row(j))));
            }
        }
    }

    for round in 1..=MAX_ROUNDS {
        let y = solve_restricted(problem, &rows, radius, upper)?;
        let tol = 1e-9 * radius;
        let n = batch.n();
        let mut violated: Vec<(f64, usize, usize)> = batch
            .as_slice()
            .par_chunks(n * 1024)
            .enumerate()
            .flat_map_iter(|(chunk, data)| {
                let y = &y;
                let seen = &seen;
                data.chunks_exact(n).enumerate().flat_map(move |(k, l)| {
                    let j = chunk * 1024 + k;
                    problem.matrices().iter().enumerate().filter_map(move |(i, a)| {
                        let v = bilinear(a, y, l) - radius;
                        (v > tol && !seen.contains(&(j, i))).then_some((v, j, i))
                    })
                })
            })
            .collect();
        if violated.is_empty() {
            return Ok(ScenarioSolution {
                value: problem.objective(&y),
                y,
                radius,
                rounds: round,
                working_pairs: rows.len(),
            });
        }
        let order = |a: &(f64, usize, usize), b: &(f64, usize, usize)| {
            b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
        };
        if violated.len() > ADD_PER_ROUND {
            violated.select_nth_unstable_by(ADD_PER_ROUND - 1, order);
            violated.truncate(ADD_PER_ROUND);
        }
        violated.sort_by(order);
        for (_, j, i) in violated {
            seen.insert((j, i));
            rows.push((j, i, problem.matrices()[i].right_mul(batch.row(j))));
        }
    }
    Err(Error::Solver(format!("scenario row generation did not settle in {MAX_ROUNDS} rounds")))
}

fn solve_restricted(
    problem: &ProblemInstance,
    rows: &[(usize, usize, Vec<f64>)],
    radius: f64,
    upper: f64,
) -> Result<Vec<f64>> {
    let m = problem.m();
    if rows.is_empty() {
        return Ok(vec![upper; m]);
    }
    let lp = LinearProgram::new(
        problem.c().to_vec(),
        rows.iter().map(|(_, _, a)| a.clone()).collect(),
        vec![radius; rows.len()],
        vec![(0.0, upper); m],
    )?;
    let sol = solve_lp(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Solver("scenario program reported infeasible although y = 0 is feasible".into()));
    }
    Ok(sol.x)
}

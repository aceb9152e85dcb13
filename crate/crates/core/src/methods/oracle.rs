use rayon::prelude::*;

use super::{check_tail, upper_rank, MethodKind, MethodResult};
use crate::error::{Error, Result};
use crate::model::{dot, ProblemInstance};
use crate::sampler::{SampleBatch, TailModel};
use crate::search::start_directions;

/// Order statistic of rank `ceil(N (1 - delta))`; reorders `values`.
pub fn empirical_upper_quantile(values: &mut [f64], delta: f64) -> f64 {
    let k = upper_rank(values.len(), delta);
    let (_, q, _) = values.select_nth_unstable_by(k - 1, f64::total_cmp);
    *q
}

/// Brute-force reference solution of the chance-constrained program.
///
/// Along each direction `u` of the search grid the largest admissible scale is
/// `1 / q(u)` with `q(u)` the empirical `(1 - delta)`-quantile of `phi(u, L)`
/// over one shared sample of size `budget`.
pub fn ccp_oracle(
    problem: &ProblemInstance,
    tail: &TailModel,
    delta: f64,
    budget: usize,
    seed: u64,
) -> Result<MethodResult> {
    check_tail(problem, tail)?;
    check_budget(delta, budget)?;
    let batch = tail.sample(seed, budget)?;
    ccp_oracle_batch(problem, &batch, delta)
}

/// [`ccp_oracle`] on a given sample.
pub fn ccp_oracle_batch(problem: &ProblemInstance, batch: &SampleBatch, delta: f64) -> Result<MethodResult> {
    if batch.n() != problem.n() {
        return Err(Error::Dimension("sample dimension differs from problem".into()));
    }
    check_budget(delta, batch.len())?;
    let directions = start_directions(problem.m());
    let scored: Vec<(f64, f64)> = directions
        .par_iter()
        .map_init(
            || Vec::with_capacity(batch.len()),
            |buf: &mut Vec<f64>, u| {
                buf.clear();
                buf.extend(batch.rows().map(|l| problem.phi_unchecked(u, l)));
                let q = empirical_upper_quantile(buf, delta);
                let umax = u.iter().fold(0.0_f64, |a, b| a.max(*b));
                let box_scale = problem.h() / umax;
                let t = if q > 0.0 { (1.0 / q).min(box_scale) } else { box_scale };
                (t, t * dot(problem.c(), u))
            },
        )
        .collect();
    let (best, &(t, _)) = scored
        .iter()
        .enumerate()
        .fold(None, |acc: Option<(usize, &(f64, f64))>, (i, s)| match acc {
            Some((_, b)) if b.1 >= s.1 => acc,
            _ => Some((i, s)),
        })
        .expect("nonempty direction set");
    let x = problem.box_clip(&directions[best].iter().map(|u| t * u).collect::<Vec<_>>());
    Ok(MethodResult {
        method: MethodKind::CcpOracle,
        value: problem.objective(&x),
        x,
        delta,
        violation: None,
        violation_halfwidth: None,
        seed: batch.seed(),
        budget: batch.len(),
    })
}

fn check_budget(delta: f64, budget: usize) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if delta * (budget as f64) < 100.0 {
        return Err(Error::Parameter(format!(
            "delta * budget = {} is below 100 expected exceedances",
            delta * budget as f64
        )));
    }
    Ok(())
}

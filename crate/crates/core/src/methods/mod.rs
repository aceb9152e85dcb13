//! Solution methods for the chance-constrained program at a fixed risk level:
//! the Monte Carlo oracle, the sample CVaR relaxation and the scenario program.

mod cvar;
mod oracle;
mod scenario;

pub use cvar::{cvar_solve, cvar_solve_batch, CvarDiagnostics};
pub use oracle::{ccp_oracle, ccp_oracle_batch, empirical_upper_quantile};
pub use scenario::{scenario_solve, ScenarioSolution};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::rng::BLOCK_LEN;
use crate::sampler::{SampleBatch, TailModel};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Smallest Monte Carlo budget accepted by [`violation_prob`].
pub const MIN_VIOLATION_BUDGET: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    CcpOracle,
    Cvar,
    Scenario,
}

/// A decision produced by one of the methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: MethodKind,
    pub x: Vec<f64>,
    pub value: f64,
    pub delta: f64,
    /// Monte Carlo estimate of `P(phi(x, L) > 1)`, once validated.
    pub violation: Option<f64>,
    pub violation_halfwidth: Option<f64>,
    pub seed: u64,
    /// Number of draws the method consumed.
    #[serde(skip)]
    pub budget: usize,
}

impl MethodResult {
    /// Estimates the violation probability of `x` on an independent stream.
    pub fn validate(
        &mut self,
        problem: &ProblemInstance,
        tail: &TailModel,
        budget: usize,
        seed: u64,
    ) -> Result<()> {
        let est = violation_prob(problem, &self.x, tail, budget, seed)?;
        self.violation = Some(est.estimate);
        self.violation_halfwidth = Some(est.half_width);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViolationEstimate {
    pub estimate: f64,
    /// Wilson-score 95% half-width.
    pub half_width: f64,
    pub hits: u64,
    pub budget: usize,
}

impl ViolationEstimate {
    pub fn from_counts(hits: u64, budget: usize) -> Self {
        let n = budget as f64;
        let p = hits as f64 / n;
        let z2 = Z95 * Z95;
        let half_width = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Self { estimate: p, half_width, hits, budget }
    }

    /// Binomial standard error at the point estimate.
    pub fn standard_error(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.budget as f64).sqrt()
    }
}

/// Monte Carlo estimate of `P(phi(x, L) > 1)`.
pub fn violation_prob(
    problem: &ProblemInstance,
    x: &[f64],
    tail: &TailModel,
    budget: usize,
    seed: u64,
) -> Result<ViolationEstimate> {
    check_tail(problem, tail)?;
    problem.check_decision(x)?;
    if budget < MIN_VIOLATION_BUDGET {
        return Err(Error::Parameter(format!(
            "violation budget {budget} is below {MIN_VIOLATION_BUDGET}"
        )));
    }
    let hits = if x.iter().all(|v| *v == 0.0) {
        0
    } else {
        tail.count_where(seed, budget, |l| problem.phi_unchecked(x, l) > 1.0)
    };
    Ok(ViolationEstimate::from_counts(hits, budget))
}

/// Scenario count `ceil((2/delta) log(1/beta) + 2 dim + (2 dim/delta) log(2/delta))`
/// guaranteeing feasibility with confidence `1 - beta`.
pub fn sample_size_rule(delta: f64, beta_conf: f64, dim: usize) -> Result<u64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(beta_conf > 0.0 && beta_conf < 1.0) {
        return Err(Error::Parameter(format!("confidence parameter must lie in (0, 1), got {beta_conf}")));
    }
    if dim == 0 {
        return Err(Error::Parameter("dimension must be positive".into()));
    }
    let d = dim as f64;
    let k = 2.0 / delta * (1.0 / beta_conf).ln() + 2.0 * d + 2.0 * d / delta * (2.0 / delta).ln();
    Ok(k.ceil() as u64)
}

pub(crate) fn check_tail(problem: &ProblemInstance, tail: &TailModel) -> Result<()> {
    if tail.n() != problem.n() {
        return Err(Error::Dimension(format!(
            "tail model has dimension {}, problem has n = {}",
            tail.n(),
            problem.n()
        )));
    }
    Ok(())
}

/// `ceil(count (1 - delta))`, computed without rounding up through `1 - delta`.
pub(crate) fn upper_rank(count: usize, delta: f64) -> usize {
    let tail = (count as f64 * delta * (1.0 + 1e-12)).floor() as usize;
    count - tail.min(count - 1)
}

/// Scenarios that can be visited block by block, either stored or regenerated on demand.
#[derive(Clone, Copy)]
pub(crate) enum Scenarios<'a> {
    Batch(&'a SampleBatch),
    Stream { tail: &'a TailModel, seed: u64, count: usize },
}

impl Scenarios<'_> {
    pub fn len(&self) -> usize {
        match self {
            Scenarios::Batch(b) => b.len(),
            Scenarios::Stream { count, .. } => *count,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Scenarios::Batch(b) => b.n(),
            Scenarios::Stream { tail, .. } => tail.n(),
        }
    }

    /// `f(first_index, rows)` per block, in block order.
    pub fn map_blocks<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[f64]) -> T + Sync,
    {
        match self {
            Scenarios::Batch(b) => b
                .as_slice()
                .par_chunks(BLOCK_LEN * b.n())
                .enumerate()
                .map(|(k, rows)| f(k * BLOCK_LEN, rows))
                .collect(),
            Scenarios::Stream { tail, seed, count } => tail.map_blocks(*seed, *count, f),
        }
    }
}

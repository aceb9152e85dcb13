use std::path::Path;

use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};
use crate::model::{Matrix, ProblemInstance};
use crate::sampler::{Atom, HeavyTailModel, LightTailModel, TailModel};

const DEFAULT_H: f64 = 1e6;
const DEFAULT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CvarRatio,
    ScenarioConvergence,
    FeasibilityFactor,
    FrechetCheck,
    TailRatio,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CvarRatio => "cvar_ratio",
            ExperimentKind::ScenarioConvergence => "scenario_convergence",
            ExperimentKind::FeasibilityFactor => "feasibility_factor",
            ExperimentKind::FrechetCheck => "frechet_check",
            ExperimentKind::TailRatio => "tail_ratio",
        }
    }
}

/// Everything a run needs: the instance, the risk model and the experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Option<ExperimentKind>,
    pub problem: ProblemInstance,
    pub tail: TailModel,
    pub delta_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub replications: usize,
    /// Monte Carlo draws per estimate.
    pub budget: usize,
    pub master_seed: u64,
    /// Shrink factor applied to limit solutions.
    pub eta: f64,
    /// Probe radii for `tail_ratio`.
    pub r_grid: Vec<f64>,
    /// Fixed decision for `tail_ratio`; the heavy-tail limit solution when absent.
    pub y: Option<Vec<f64>>,
    pub beta_conf: f64,
    pub dim: Option<usize>,
    /// Use the tail-dependent radius in the `scenario` subcommand.
    pub scaled: bool,
    /// Budget for validating single-method decisions; skipped when absent.
    pub validation_budget: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: RawProblem,
    tail: RawTail,
    #[serde(default)]
    experiment: RawExperiment,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    c: Vec<f64>,
    h: Option<f64>,
    #[serde(rename = "A")]
    a: Vec<Vec<Vec<f64>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTail {
    kind: String,
    beta: Option<f64>,
    #[serde(default, deserialize_with = "theta_value")]
    theta: Option<f64>,
    alpha: Option<f64>,
    atoms: Option<Vec<Atom>>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawExperiment {
    kind: Option<ExperimentKind>,
    delta_grid: Option<Vec<f64>>,
    k_grid: Option<Vec<f64>>,
    replications: Option<usize>,
    budget: Option<f64>,
    seed: Option<u64>,
    eta: Option<f64>,
    r_grid: Option<Vec<f64>>,
    y: Option<Vec<f64>>,
    beta_conf: Option<f64>,
    dim: Option<usize>,
    scaled: Option<bool>,
    validation_budget: Option<f64>,
}

/// Accepts a number or the string `"inf"`.
fn theta_value<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Theta {
        Number(f64),
        Text(String),
    }
    match Option::<Theta>::deserialize(d)? {
        None => Ok(None),
        Some(Theta::Number(v)) => Ok(Some(v)),
        Some(Theta::Text(s)) if matches!(s.as_str(), "inf" | "Infinity" | "infinity") => Ok(Some(f64::INFINITY)),
        Some(Theta::Text(s)) => Err(serde::de::Error::custom(format!("theta must be a number or \"inf\", got {s:?}"))),
    }
}

/// Counts written as JSON numbers, possibly in exponent form such as `1e6`.
fn count(v: f64, what: &str) -> Result<usize> {
    if !(v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v <= 1e15) {
        return Err(Error::Config(format!("{what} must be a positive integer, got {v}")));
    }
    Ok(v as usize)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let mats = raw
            .problem
            .a
            .iter()
            .map(|rows| Matrix::from_rows(rows))
            .collect::<Result<Vec<_>>>()?;
        let problem = ProblemInstance::new(raw.problem.c, raw.problem.h.unwrap_or(DEFAULT_H), mats)?;
        let tail = build_tail(raw.tail, problem.n())?;
        let e = raw.experiment;
        let delta_grid = e.delta_grid.unwrap_or_else(|| vec![1e-2, 1e-3, 1e-4]);
        let k_grid = match e.k_grid {
            Some(v) => v.into_iter().map(|k| count(k, "k")).collect::<Result<Vec<_>>>()?,
            None => vec![1_000, 10_000, 100_000],
        };
        let r_grid = e.r_grid.unwrap_or_else(|| vec![10.0, 100.0]);
        if delta_grid.is_empty() || k_grid.is_empty() || r_grid.is_empty() {
            return Err(Error::Config("grids must be nonempty".into()));
        }
        if delta_grid.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return Err(Error::Config("delta_grid entries must lie in (0, 1)".into()));
        }
        if r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Config("r_grid entries must be positive".into()));
        }
        let replications = e.replications.unwrap_or(1);
        if replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        let budget = match e.budget {
            Some(b) => count(b, "budget")?,
            None => DEFAULT_BUDGET,
        };
        let validation_budget = e.validation_budget.map(|b| count(b, "validation_budget")).transpose()?;
        if let Some(y) = &e.y {
            problem.check_decision(y)?;
        }
        Ok(Self {
            kind: e.kind,
            problem,
            tail,
            delta_grid,
            k_grid,
            replications,
            budget,
            master_seed: e.seed.unwrap_or(0),
            eta: e.eta.unwrap_or(0.0),
            r_grid,
            y: e.y,
            beta_conf: e.beta_conf.unwrap_or(0.05),
            dim: e.dim,
            scaled: e.scaled.unwrap_or(false),
            validation_budget,
        })
    }
}

fn build_tail(raw: RawTail, n: usize) -> Result<TailModel> {
    match raw.kind.as_str() {
        "light" => {
            let beta = raw.beta.ok_or_else(|| Error::Config("light tail needs beta".into()))?;
            Ok(LightTailModel::new(n, beta, raw.theta.unwrap_or(1.0))?.into())
        }
        "heavy" => {
            let alpha = raw.alpha.ok_or_else(|| Error::Config("heavy tail needs alpha".into()))?;
            let atoms = match raw.atoms {
                Some(a) => a,
                None if n == 1 => vec![Atom { weight: 1.0, point: vec![1.0] }],
                None => return Err(Error::Config("heavy tail with n > 1 needs atoms".into())),
            };
            let model = HeavyTailModel::new(alpha, atoms)?;
            if model.n() != n {
                return Err(Error::Dimension(format!("atoms have dimension {}, problem has n = {n}", model.n())));
            }
            Ok(model.into())
        }
        other => Err(Error::Config(format!("tail kind must be \"light\" or \"heavy\", got {other:?}"))),
    }
}

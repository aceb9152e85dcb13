use rayon::prelude::*;
use statrs::function::gamma::gamma;

use super::config::{ExperimentConfig, ExperimentKind};
use super::report::{sort_rows, ReportRow};
use crate::error::{Error, Result};
use crate::limits::{limit_to_decision, solve_ht_limit, solve_lt_limit, RateFunction};
use crate::methods::{ccp_oracle, cvar_solve, scenario_solve, violation_prob, ViolationEstimate};
use crate::model::ProblemInstance;
use crate::rng::derive_seed;
use crate::sampler::{HeavyTailModel, LightTailModel, TailModel};

/// Runs the experiment named in `cfg`; rows are sorted by grid point and replication.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    match cfg.kind {
        Some(ExperimentKind::CvarRatio) => run_cvar_ratio(cfg),
        Some(ExperimentKind::ScenarioConvergence) => run_scenario_convergence(cfg),
        Some(ExperimentKind::FeasibilityFactor) => run_feasibility_factor(cfg),
        Some(ExperimentKind::FrechetCheck) => run_frechet_check(cfg),
        Some(ExperimentKind::TailRatio) => run_tail_ratio(cfg),
        None => Err(Error::Config("experiment.kind is required".into())),
    }
}

/// Per-replication seed from the master seed and the `(grid, replication)` counters.
pub fn replication_seed(master: u64, grid: usize, rep: usize) -> u64 {
    derive_seed(master, &[grid as u64, rep as u64])
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    match cfg.kind {
        Some(k) if k == kind => Ok(()),
        _ => Err(Error::Config(format!("experiment kind must be {}", kind.name()))),
    }
}

fn heavy(cfg: &ExperimentConfig) -> Result<&HeavyTailModel> {
    match &cfg.tail {
        TailModel::Heavy(m) => Ok(m),
        TailModel::Light(_) => Err(Error::Config("this experiment needs a heavy tail".into())),
    }
}

fn light(cfg: &ExperimentConfig) -> Result<&LightTailModel> {
    match &cfg.tail {
        TailModel::Light(m) => Ok(m),
        TailModel::Heavy(_) => Err(Error::Config("this experiment needs a light tail".into())),
    }
}

/// Evaluates `f(grid_index, rep, seed)` over the whole design in parallel.
fn replicate<F>(cfg: &ExperimentConfig, grid_len: usize, f: F) -> Result<Vec<ReportRow>>
where
    F: Fn(usize, usize, u64) -> Result<ReportRow> + Sync,
{
    let tasks: Vec<(usize, usize)> = (0..grid_len)
        .flat_map(|g| (0..cfg.replications).map(move |r| (g, r)))
        .collect();
    let mut rows = tasks
        .par_iter()
        .map(|&(g, r)| f(g, r, replication_seed(cfg.master_seed, g, r)))
        .collect::<Result<Vec<_>>>()?;
    sort_rows(&mut rows);
    Ok(rows)
}

/// Appends one aggregate row per grid point, built from that point's replication rows.
fn with_aggregates<F>(rows: Vec<ReportRow>, cfg: &ExperimentConfig, aggregate: F) -> Vec<ReportRow>
where
    F: Fn(&[ReportRow]) -> (f64, f64, f64, f64),
{
    let mut out = Vec::with_capacity(rows.len() + rows.len() / cfg.replications.max(1));
    for chunk in rows.chunk_by(|a, b| a.grid_index == b.grid_index) {
        let (stat, target, aux1, aux2) = aggregate(chunk);
        out.extend_from_slice(chunk);
        out.push(ReportRow { rep: None, stat, target, aux1, aux2, seed: cfg.master_seed, ..chunk[0].clone() });
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for a single value.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

/// Kolmogorov–Smirnov distance between the empirical law of `v` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(v: &[f64], cdf: F) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0_f64, |d, (i, x)| {
        let f = cdf(*x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

fn stats(rows: &[ReportRow]) -> Vec<f64> {
    rows.iter().map(|r| r.stat).collect()
}

/// Optimal value of the scalar program, `min(c h, c / (a q_{1-delta}))`.
fn scalar_value(problem: &ProblemInstance, tail: &TailModel, delta: f64) -> Result<f64> {
    let a = problem.matrices()[0].get(0, 0);
    let x = (1.0 / (a * tail.scale_for_delta(delta)?)).min(problem.h());
    Ok(problem.c()[0] * x)
}

/// CVaR value over the chance-constrained optimum per `delta`.
///
/// Scalar instances use the exact quantile; others use [`ccp_oracle`] on the
/// same draws as the CVaR program. Rows: `stat` ratio, `aux1` oracle value,
/// `aux2` CVaR value.
pub fn run_cvar_ratio(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect_kind(cfg, ExperimentKind::CvarRatio)?;
    let target = match &cfg.tail {
        TailModel::Light(_) => 1.0,
        TailModel::Heavy(m) => 1.0 - 1.0 / m.alpha(),
    };
    let rows = replicate(cfg, cfg.delta_grid.len(), |g, rep, seed| {
        let delta = cfg.delta_grid[g];
        let (cvar, _) = cvar_solve(&cfg.problem, &cfg.tail, delta, cfg.budget, seed)?;
        let oracle = if cfg.problem.is_scalar() {
            scalar_value(&cfg.problem, &cfg.tail, delta)?
        } else {
            ccp_oracle(&cfg.problem, &cfg.tail, delta, cfg.budget, seed)?.value
        };
        Ok(ReportRow {
            kind: ExperimentKind::CvarRatio,
            grid: delta,
            grid_index: g,
            rep: Some(rep),
            stat: cvar.value / oracle,
            target,
            aux1: oracle,
            aux2: cvar.value,
            seed,
        })
    })?;
    Ok(with_aggregates(rows, cfg, |chunk| {
        let s = stats(chunk);
        (mean(&s), target, std_dev(&s), s.len() as f64)
    }))
}

/// Coefficient of variation of the weak limit `c / (a F)`, `F` Fréchet(alpha).
pub fn weibull_limit_cv(alpha: f64) -> f64 {
    let m1 = gamma(1.0 + 1.0 / alpha);
    (gamma(1.0 + 2.0 / alpha) - m1 * m1).sqrt() / m1
}

/// Normalized scenario values `c^T Y_k` per `k`.
///
/// Rows: `stat` normalized value, `target` limit value `c^T y*`, `aux1` their
/// ratio, `aux2` the radius. Aggregates: `stat` CV, `target` limit CV (0 for
/// light tails, the Weibull value for scalar heavy tails, NaN otherwise),
/// `aux1` mean value, `aux2` median ratio.
pub fn run_scenario_convergence(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect_kind(cfg, ExperimentKind::ScenarioConvergence)?;
    let (limit, cv_target) = match &cfg.tail {
        TailModel::Light(m) => (solve_lt_limit(&RateFunction::new(m.clone()), &cfg.problem)?, 0.0),
        TailModel::Heavy(m) => {
            let cv = if cfg.problem.is_scalar() { weibull_limit_cv(m.alpha()) } else { f64::NAN };
            (solve_ht_limit(m, &cfg.problem)?, cv)
        }
    };
    let rows = replicate(cfg, cfg.k_grid.len(), |g, rep, seed| {
        let k = cfg.k_grid[g];
        let radius = cfg.tail.scale_for_samples(k)?;
        let batch = cfg.tail.sample(seed, k)?;
        let sol = scenario_solve(&cfg.problem, &batch, radius)?;
        Ok(ReportRow {
            kind: ExperimentKind::ScenarioConvergence,
            grid: k as f64,
            grid_index: g,
            rep: Some(rep),
            stat: sol.value,
            target: limit.value,
            aux1: sol.value / limit.value,
            aux2: radius,
            seed,
        })
    })?;
    Ok(with_aggregates(rows, cfg, |chunk| {
        let s = stats(chunk);
        let ratios: Vec<f64> = chunk.iter().map(|r| r.aux1).collect();
        let m = mean(&s);
        (std_dev(&s) / m, cv_target, m, median(&ratios))
    }))
}

/// Violation of the unshrunk limit decision relative to `delta`.
///
/// Rows: `stat` estimate / delta, `target` n, `aux1` 95% half-width / delta,
/// `aux2` the estimate.
pub fn run_feasibility_factor(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect_kind(cfg, ExperimentKind::FeasibilityFactor)?;
    let model = light(cfg)?;
    if model.theta() != 1.0 || model.beta() >= 1.0 {
        return Err(Error::Parameter("feasibility_factor needs theta = 1 and beta < 1".into()));
    }
    for &delta in &cfg.delta_grid {
        if delta * (cfg.budget as f64) < 100.0 {
            return Err(Error::Parameter(format!(
                "budget {} gives fewer than 100 expected violations at delta = {delta}",
                cfg.budget
            )));
        }
    }
    let limit = solve_lt_limit(&RateFunction::new(model.clone()), &cfg.problem)?;
    let target = model.n() as f64;
    let rows = replicate(cfg, cfg.delta_grid.len(), |g, rep, seed| {
        let delta = cfg.delta_grid[g];
        let x = limit_to_decision(&cfg.problem, &limit.y_star, &cfg.tail, delta, cfg.eta)?;
        let est = violation_prob(&cfg.problem, &x, &cfg.tail, cfg.budget, seed)?;
        Ok(ReportRow {
            kind: ExperimentKind::FeasibilityFactor,
            grid: delta,
            grid_index: g,
            rep: Some(rep),
            stat: est.estimate / delta,
            target,
            aux1: est.half_width / delta,
            aux2: est.estimate,
            seed,
        })
    })?;
    Ok(with_aggregates(rows, cfg, |chunk| {
        let s = stats(chunk);
        (mean(&s), target, std_dev(&s), s.len() as f64)
    }))
}

/// Normalized maxima `max_j R_j / Fbar^{-1}(1/k)` per `k`.
///
/// Rows: `stat` normalized maximum, `target` Fréchet median, `aux1` Fréchet
/// CDF at `stat`. Aggregates: `stat` KS distance to `exp(-t^-alpha)`, `target`
/// 0, `aux1` empirical median, `aux2` Fréchet median.
pub fn run_frechet_check(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect_kind(cfg, ExperimentKind::FrechetCheck)?;
    let model = heavy(cfg)?;
    let alpha = model.alpha();
    let frechet = move |t: f64| if t > 0.0 { (-t.powf(-alpha)).exp() } else { 0.0 };
    let frechet_median = 2f64.ln().powf(-1.0 / alpha);
    let n = model.n();
    let rows = replicate(cfg, cfg.k_grid.len(), |g, rep, seed| {
        let k = cfg.k_grid[g];
        let scale = model.fbar_inv(1.0 / k as f64)?;
        // |Theta|_1 = 1, so the row sum recovers the radius
        let max_r = cfg
            .tail
            .map_blocks(seed, k, |_, rows| {
                rows.chunks_exact(n).map(|l| l.iter().sum::<f64>()).fold(0.0_f64, f64::max)
            })
            .into_iter()
            .fold(0.0_f64, f64::max);
        let stat = max_r / scale;
        Ok(ReportRow {
            kind: ExperimentKind::FrechetCheck,
            grid: k as f64,
            grid_index: g,
            rep: Some(rep),
            stat,
            target: frechet_median,
            aux1: frechet(stat),
            aux2: scale,
            seed,
        })
    })?;
    Ok(with_aggregates(rows, cfg, |chunk| {
        let s = stats(chunk);
        (ks_distance(&s, frechet), 0.0, median(&s), frechet_median)
    }))
}

/// `P(phi(y, L) > r) / P(|L| > r)` per probe radius `r`, on one batch per replication.
///
/// Rows: `stat` ratio, `target` `sum_k w_k phi(y, theta_k)^alpha`, `aux1` 95%
/// half-width, `aux2` number of radius exceedances.
pub fn run_tail_ratio(cfg: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    expect_kind(cfg, ExperimentKind::TailRatio)?;
    let model = heavy(cfg)?;
    let y = match &cfg.y {
        Some(y) => y.clone(),
        None => solve_ht_limit(model, &cfg.problem)?.y_star,
    };
    let target = crate::limits::ht_constraint(model, &cfg.problem, &y)?;
    let n = model.n();
    let problem = &cfg.problem;
    let rows = replicate(cfg, cfg.r_grid.len(), |g, rep, seed| {
        let r = cfg.r_grid[g];
        let (num, den) = cfg
            .tail
            .map_blocks(seed, cfg.budget, |_, rows| {
                rows.chunks_exact(n).fold((0u64, 0u64), |(a, b), l| {
                    (
                        a + u64::from(problem.phi_unchecked(&y, l) > r),
                        b + u64::from(l.iter().sum::<f64>() > r),
                    )
                })
            })
            .into_iter()
            .fold((0, 0), |(a, b), (c, d)| (a + c, b + d));
        if den < 100 {
            return Err(Error::Parameter(format!(
                "only {den} exceedances of r = {r} in {} draws; at least 100 are needed",
                cfg.budget
            )));
        }
        let half_width = ViolationEstimate::from_counts(num.min(den), den as usize).half_width;
        Ok(ReportRow {
            kind: ExperimentKind::TailRatio,
            grid: r,
            grid_index: g,
            rep: Some(rep),
            stat: num as f64 / den as f64,
            target,
            aux1: half_width,
            aux2: den as f64,
            seed,
        })
    })?;
    Ok(with_aggregates(rows, cfg, |chunk| {
        let s = stats(chunk);
        (mean(&s), target, std_dev(&s), s.len() as f64)
    }))
}

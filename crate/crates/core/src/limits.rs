//! Rate functions and the limit programs obtained as `delta -> 0`.
//!
//! Light tails: `I(b) = inf { lambda(x) : b^T x >= 1 }`, `J(y) = min_i I(A_i^T y)`
//! and the program `max c^T y s.t. y >= 0, J(y) >= 1`.
//!
//! Heavy tails: `max c^T y s.t. y >= 0, E[phi(y, Theta)^alpha] <= 1` with a
//! discrete angular measure, so the expectation is a finite sum.
//!
//! Both programs are solved along rays: `J(t u) = t^-beta J(u)` and
//! `g(t u) = t g(u)` make the optimal scale explicit for every direction `u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, ProblemInstance};
use crate::sampler::{HeavyTailModel, LightTailModel, TailModel};
use crate::search::maximize_on_simplex;

/// A rate value; `Infeasible` stands for `+inf` (empty constraint set `b^T x >= 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infeasible,
}

impl Rate {
    pub fn value(self) -> Option<f64> {
        match self {
            Rate::Finite(v) => Some(v),
            Rate::Infeasible => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Rate::Finite(_))
    }

    pub fn min(self, other: Rate) -> Rate {
        match (self, other) {
            (Rate::Finite(a), Rate::Finite(b)) => Rate::Finite(a.min(b)),
            (Rate::Finite(a), Rate::Infeasible) | (Rate::Infeasible, Rate::Finite(a)) => Rate::Finite(a),
            (Rate::Infeasible, Rate::Infeasible) => Rate::Infeasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateMode {
    ClosedForm,
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFunction {
    model: LightTailModel,
    mode: RateMode,
}

impl RateFunction {
    pub fn new(model: LightTailModel) -> Self {
        Self { model, mode: RateMode::ClosedForm }
    }

    pub fn numeric(model: LightTailModel) -> Self {
        Self { model, mode: RateMode::Numeric }
    }

    pub fn model(&self) -> &LightTailModel {
        &self.model
    }

    pub fn mode(&self) -> RateMode {
        self.mode
    }

    /// `I(b)`.
    pub fn rate_i(&self, b: &[f64]) -> Result<Rate> {
        if b.len() != self.model.n() {
            return Err(Error::Dimension(format!("b has length {}, expected {}", b.len(), self.model.n())));
        }
        if b.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Input("b must be finite and nonnegative".into()));
        }
        Ok(self.rate_i_unchecked(b))
    }

    fn rate_i_unchecked(&self, b: &[f64]) -> Rate {
        let bmax = b.iter().fold(0.0_f64, |m, v| m.max(*v));
        if bmax <= 0.0 {
            return Rate::Infeasible;
        }
        match self.mode {
            RateMode::ClosedForm => Rate::Finite(self.closed_form(b, bmax)),
            RateMode::Numeric => Rate::Finite(self.numeric_rate(b)),
        }
    }

    fn closed_form(&self, b: &[f64], bmax: f64) -> f64 {
        let m = &self.model;
        let beta = m.beta();
        if m.is_comonotone() {
            return b.iter().sum::<f64>().powf(-beta);
        }
        let gamma = m.gamma();
        if gamma <= 1.0 {
            return bmax.powf(-beta);
        }
        // (sum b^p)^(-(gamma-1)/theta), p = gamma/(gamma-1), with b scaled by its max
        let p = gamma / (gamma - 1.0);
        let s: f64 = b.iter().map(|v| (v / bmax).powf(p)).sum();
        bmax.powf(-beta) * s.powf(-(gamma - 1.0) / m.theta())
    }

    /// Solves `min lambda(x)` over `{x >= 0 : b^T x = 1}` numerically.
    fn numeric_rate(&self, b: &[f64]) -> f64 {
        let m = &self.model;
        let support: Vec<f64> = b.iter().copied().filter(|v| *v > 0.0).collect();
        if m.is_comonotone() {
            // min max_i x_i^beta: equalize x_i = t on the support
            let t = 1.0 / support.iter().sum::<f64>();
            return t.powf(m.beta());
        }
        let gamma = m.gamma();
        // with z_i = b_i x_i on the simplex, minimize F(z) = sum (z_i / b_i)^gamma
        let objective = |z: &[f64]| -> f64 {
            z.iter().zip(&support).map(|(zi, bi)| (zi / bi).powf(gamma)).sum()
        };
        let k = support.len();
        let mut best = f64::INFINITY;
        // concave for gamma <= 1: the minimum sits at a vertex
        for i in 0..k {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            best = best.min(objective(&e));
        }
        if gamma > 1.0 && k > 1 {
            let z = projected_gradient(&objective, &support, gamma);
            best = best.min(objective(&z));
        }
        best.powf(1.0 / m.theta())
    }

    /// `J(y) = min_i I(A_i^T y)`.
    pub fn rate_j(&self, problem: &ProblemInstance, y: &[f64]) -> Result<Rate> {
        self.check_problem(problem)?;
        problem.check_decision(y)?;
        Ok(self.rate_j_unchecked(problem, y))
    }

    fn rate_j_unchecked(&self, problem: &ProblemInstance, y: &[f64]) -> Rate {
        let mut b = vec![0.0; problem.n()];
        problem.matrices().iter().fold(Rate::Infeasible, |acc, a| {
            a.left_mul_into(y, &mut b);
            acc.min(self.rate_i_unchecked(&b))
        })
    }

    fn check_problem(&self, problem: &ProblemInstance) -> Result<()> {
        if problem.n() != self.model.n() {
            return Err(Error::Dimension(format!(
                "tail model has dimension {}, problem has n = {}",
                self.model.n(),
                problem.n()
            )));
        }
        Ok(())
    }
}

/// Projected gradient descent for `sum (z_i / b_i)^gamma` on the unit simplex.
fn projected_gradient<F: Fn(&[f64]) -> f64>(objective: &F, b: &[f64], gamma: f64) -> Vec<f64> {
    let k = b.len();
    // start from the barycenter
    let mut z = vec![1.0 / k as f64; k];
    let mut fz = objective(&z);
    let mut step = 1.0;
    for _ in 0..200_000 {
        let grad: Vec<f64> = z
            .iter()
            .zip(b)
            .map(|(zi, bi)| gamma * (zi / bi).powf(gamma - 1.0) / bi)
            .collect();
        let gscale = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
        if gscale == 0.0 {
            break;
        }
        let mut accepted = None;
        let mut t = step * 2.0;
        while t > 1e-30 {
            let trial: Vec<f64> = z.iter().zip(&grad).map(|(zi, g)| zi - t * g / gscale).collect();
            let trial = project_simplex(&trial);
            let ft = objective(&trial);
            let decrease: f64 = z.iter().zip(&trial).zip(&grad).map(|((a, b), g)| g * (a - b)).sum();
            if ft <= fz - 1e-4 * decrease && ft < fz {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((next, fnext)) = accepted else { break };
        let moved = next.iter().zip(&z).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        z = next;
        fz = fnext;
        step = t;
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Euclidean projection onto `{z >= 0, sum z = 1}`.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (i, s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (i + 1) as f64;
        if s - t > 0.0 {
            shift = t;
        }
    }
    v.iter().map(|x| (x - shift).max(0.0)).collect()
}

/// `lambda(x)` for the Gumbel–Hougaard exponent.
pub fn lambda_eval(model: &LightTailModel, x: &[f64]) -> Result<f64> {
    model.lambda(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitMethod {
    ClosedForm,
    RaySearch,
}

/// Optimizer of a limit program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSolution {
    pub y_star: Vec<f64>,
    pub value: f64,
    /// `|J(y*) - 1|` (light) or `|E[phi(y*, Theta)^alpha] - 1|` (heavy).
    pub residual: f64,
    pub method: LimitMethod,
}

/// Solves `max c^T y s.t. y >= 0, J(y) >= 1`.
///
/// The separable single-matrix instance with `gamma <= 1` has the vertex
/// solution `y_i = 1/a_i`; everything else goes through the ray search.
pub fn solve_lt_limit(rf: &RateFunction, problem: &ProblemInstance) -> Result<LimitSolution> {
    rf.check_problem(problem)?;
    let model = rf.model();
    let a = &problem.matrices()[0];
    let separable = problem.d() == 1 && a.is_diagonal() && a.diag().iter().all(|v| *v > 0.0);
    if separable && !model.is_comonotone() && model.gamma() <= 1.0 {
        let y: Vec<f64> = a.diag().iter().map(|v| 1.0 / v).collect();
        return Ok(lt_solution(rf, problem, y, LimitMethod::ClosedForm));
    }
    solve_lt_limit_ray(rf, problem)
}

/// Ray search for the light-tail limit program, regardless of structure.
pub fn solve_lt_limit_ray(rf: &RateFunction, problem: &ProblemInstance) -> Result<LimitSolution> {
    rf.check_problem(problem)?;
    let m = problem.m();
    let inv_beta = 1.0 / rf.model().beta();
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        if problem.c()[j] > 0.0 && !rf.rate_j_unchecked(problem, &e).is_finite() {
            return Err(Error::Unbounded(format!(
                "coordinate {j} has positive profit but never enters the loss"
            )));
        }
    }
    let scale = |u: &[f64]| rf.rate_j_unchecked(problem, u).value().map(|j| j.powf(inv_beta));
    let found = maximize_on_simplex(m, |u| match scale(u) {
        Some(t) => t * dot(problem.c(), u),
        None => 0.0,
    });
    if !(found.value > 0.0) {
        return Err(Error::Infeasible("no direction admits a positive scale".into()));
    }
    let t = scale(&found.direction).expect("finite rate at the optimum");
    let y: Vec<f64> = found.direction.iter().map(|u| t * u).collect();
    Ok(lt_solution(rf, problem, y, LimitMethod::RaySearch))
}

fn lt_solution(rf: &RateFunction, problem: &ProblemInstance, y: Vec<f64>, method: LimitMethod) -> LimitSolution {
    let residual = match rf.rate_j_unchecked(problem, &y) {
        Rate::Finite(j) => (j - 1.0).abs(),
        Rate::Infeasible => f64::NAN,
    };
    LimitSolution { value: problem.objective(&y), y_star: y, residual, method }
}

/// `E[phi(y, Theta)^alpha] = sum_k w_k phi(y, theta_k)^alpha`.
pub fn ht_constraint(model: &HeavyTailModel, problem: &ProblemInstance, y: &[f64]) -> Result<f64> {
    check_heavy(model, problem)?;
    problem.check_decision(y)?;
    Ok(ht_constraint_unchecked(model, problem, y))
}

fn ht_constraint_unchecked(model: &HeavyTailModel, problem: &ProblemInstance, y: &[f64]) -> f64 {
    model
        .atoms()
        .iter()
        .map(|a| a.weight * problem.phi_unchecked(y, &a.point).powf(model.alpha()))
        .sum()
}

/// `g(u) = E[phi(u, Theta)^alpha]^(1/alpha)`, positively homogeneous of degree one.
pub fn ht_gauge(model: &HeavyTailModel, problem: &ProblemInstance, u: &[f64]) -> Result<f64> {
    Ok(ht_constraint(model, problem, u)?.powf(1.0 / model.alpha()))
}

fn check_heavy(model: &HeavyTailModel, problem: &ProblemInstance) -> Result<()> {
    if model.n() != problem.n() {
        return Err(Error::Dimension(format!(
            "angular atoms have dimension {}, problem has n = {}",
            model.n(),
            problem.n()
        )));
    }
    Ok(())
}

/// Solves `max c^T y s.t. y >= 0, E[phi(y, Theta)^alpha] <= 1`.
pub fn solve_ht_limit(model: &HeavyTailModel, problem: &ProblemInstance) -> Result<LimitSolution> {
    check_heavy(model, problem)?;
    let m = problem.m();
    let inv_alpha = 1.0 / model.alpha();
    let gauge = |u: &[f64]| ht_constraint_unchecked(model, problem, u).powf(inv_alpha);
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        if problem.c()[j] > 0.0 && gauge(&e) <= 0.0 {
            return Err(Error::Unbounded(format!(
                "coordinate {j} has positive profit but zero loss under every atom"
            )));
        }
    }
    let found = maximize_on_simplex(m, |u| {
        let g = gauge(u);
        if g > 0.0 {
            dot(problem.c(), u) / g
        } else {
            0.0
        }
    });
    if !(found.value > 0.0) {
        return Err(Error::Infeasible("no direction admits a positive scale".into()));
    }
    let g = gauge(&found.direction);
    let y: Vec<f64> = found.direction.iter().map(|u| u / g).collect();
    let residual = (ht_constraint_unchecked(model, problem, &y) - 1.0).abs();
    Ok(LimitSolution { value: problem.objective(&y), y_star: y, residual, method: LimitMethod::RaySearch })
}

/// Maps a limit solution to the `delta`-level decision `(1 - eta) y* / r_delta`, clipped to the box.
pub fn limit_to_decision(
    problem: &ProblemInstance,
    y_star: &[f64],
    tail: &TailModel,
    delta: f64,
    eta: f64,
) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::Parameter(format!("eta must lie in [0, 1), got {eta}")));
    }
    let r = tail.scale_for_delta(delta)?;
    let x: Vec<f64> = y_star.iter().map(|y| (1.0 - eta) * y / r).collect();
    problem.check_decision(&x)?;
    Ok(problem.box_clip(&x))
}

/// `sum_i (a_i y_i)^(gamma/(gamma-1))`, the constraint of the separable light-tail program with `gamma > 1`.
pub fn separable_constraint(a: &[f64], gamma: f64, y: &[f64]) -> f64 {
    let p = gamma / (gamma - 1.0);
    a.iter().zip(y).map(|(ai, yi)| (ai * yi).powf(p)).sum()
}

/// The candidate `y_i = (c_i/a_i)^(gamma-1) / sum_j (c_j/a_j)^gamma` for the
/// separable program with `gamma > 1`.
///
/// It does not make the constraint active in general (e.g. `a = c = (1, 1)`,
/// `gamma = 2` gives a constraint value of 0.5), so it is only used to report
/// its gap to the ray-search optimum.
pub fn unnormalized_separable_candidate(c: &[f64], a: &[f64], gamma: f64) -> Vec<f64> {
    let denom: f64 = c.iter().zip(a).map(|(ci, ai)| (ci / ai).powf(gamma)).sum();
    c.iter().zip(a).map(|(ci, ai)| (ci / ai).powf(gamma - 1.0) / denom).collect()
}

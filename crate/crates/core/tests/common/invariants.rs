//! Invariant checks driven by a seed. The property suite feeds them generated
//! seeds; the acceptance suite runs a fixed sweep.
#![allow(dead_code)]

use rand::Rng;
use rarecc_core::harness::{report::write_csv, run_experiment, ExperimentConfig, ExperimentKind};
use rarecc_core::limits::{
    ht_constraint, ht_gauge, solve_ht_limit, solve_lt_limit, solve_lt_limit_ray, Rate, RateFunction,
};
use rarecc_core::methods::{ccp_oracle, ccp_oracle_batch, cvar_solve, cvar_solve_batch, scenario_solve, violation_prob};
use rarecc_core::{
    solve_lp, Atom, HeavyTailModel, LightTailModel, LinearProgram, LpStatus, Matrix, ProblemInstance, SampleBatch,
    TailModel,
};

use super::{kkt_separable, numeric_rate, random_simplex, rel, rng, vertex_enumeration};

pub type Check = Result<(), String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn random_matrix<R: Rng>(r: &mut R, m: usize, n: usize) -> Matrix {
    let mut data: Vec<f64> = (0..m * n)
        .map(|_| if r.random::<f64>() < 0.25 { 0.0 } else { r.random::<f64>() })
        .collect();
    let k = r.random_range(0..m * n);
    data[k] = 0.1 + r.random::<f64>();
    Matrix::new(m, n, data).unwrap()
}

pub fn random_problem<R: Rng>(r: &mut R, m: usize, n: usize, d: usize) -> ProblemInstance {
    let c: Vec<f64> = (0..m).map(|_| 0.1 + r.random::<f64>()).collect();
    let mats = (0..d).map(|_| random_matrix(r, m, n)).collect();
    ProblemInstance::new(c, 1e6, mats).unwrap()
}

/// Instance whose every coordinate enters the loss with positive weight.
pub fn dense_problem<R: Rng>(r: &mut R, m: usize, n: usize, d: usize) -> ProblemInstance {
    let c: Vec<f64> = (0..m).map(|_| 0.1 + r.random::<f64>()).collect();
    let mats = (0..d)
        .map(|_| Matrix::new(m, n, (0..m * n).map(|_| 0.05 + r.random::<f64>()).collect()).unwrap())
        .collect();
    ProblemInstance::new(c, 1e6, mats).unwrap()
}

pub fn random_light<R: Rng>(r: &mut R, n: usize) -> LightTailModel {
    let beta = 0.3 + 2.5 * r.random::<f64>();
    let theta = match r.random_range(0..4) {
        0 => 1.0,
        1 => f64::INFINITY,
        _ => 1.0 + 3.0 * r.random::<f64>(),
    };
    LightTailModel::new(n, beta, theta).unwrap()
}

/// Heavy-tail model with between 1 and `max_atoms` angular atoms.
pub fn random_heavy<R: Rng>(r: &mut R, n: usize, max_atoms: usize) -> HeavyTailModel {
    let atoms = r.random_range(1..=max_atoms);
    let raw: Vec<f64> = (0..atoms).map(|_| 0.1 + r.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let head: f64 = weights[..atoms - 1].iter().sum();
    weights[atoms - 1] = 1.0 - head;
    let atoms = weights
        .into_iter()
        .map(|weight| Atom { weight, point: random_simplex(r, n) })
        .collect();
    HeavyTailModel::new(1.2 + 2.5 * r.random::<f64>(), atoms).unwrap()
}

fn random_point<R: Rng>(r: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| scale * r.random::<f64>()).collect()
}

// ---------------------------------------------------------------- model

pub fn phi_homogeneity(seed: u64) -> Check {
    let mut r = rng(seed);
    let (m, n, d) = (r.random_range(1..=5), r.random_range(1..=5), r.random_range(1..=4));
    let p = random_problem(&mut r, m, n, d);
    let x = random_point(&mut r, m, 3.0);
    let l = random_point(&mut r, n, 10.0);
    let t = 10f64.powf(r.random_range(-3.0..3.0));
    let a = p.phi(&x, &l).unwrap();
    let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
    let b = p.phi(&tx, &l).unwrap();
    ensure(a == 0.0 && b == 0.0 || rel(b, t * a) <= 1e-12, || format!("phi(tx) = {b}, t phi(x) = {}", t * a))?;
    ensure(p.phi(&vec![0.0; m], &l).unwrap() == 0.0, || "phi(0, L) != 0".into())
}

pub fn phi_monotonicity(seed: u64) -> Check {
    let mut r = rng(seed);
    let (m, n, d) = (r.random_range(1..=5), r.random_range(1..=5), r.random_range(1..=4));
    let p = random_problem(&mut r, m, n, d);
    let x = random_point(&mut r, m, 3.0);
    let bump = random_point(&mut r, m, 1.0);
    let x2: Vec<f64> = x.iter().zip(&bump).map(|(a, b)| a + b).collect();
    let l = random_point(&mut r, n, 10.0);
    let (a, b) = (p.phi(&x, &l).unwrap(), p.phi(&x2, &l).unwrap());
    ensure(b >= a, || format!("phi decreased from {a} to {b}"))
}

pub fn phi_convexity(seed: u64) -> Check {
    let mut r = rng(seed);
    let (m, n, d) = (r.random_range(1..=5), r.random_range(1..=5), r.random_range(1..=4));
    let p = random_problem(&mut r, m, n, d);
    let x = random_point(&mut r, m, 3.0);
    let y = random_point(&mut r, m, 3.0);
    let l = random_point(&mut r, n, 10.0);
    let a = r.random::<f64>();
    let z: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + (1.0 - a) * v).collect();
    let lhs = p.phi(&z, &l).unwrap();
    let rhs = a * p.phi(&x, &l).unwrap() + (1.0 - a) * p.phi(&y, &l).unwrap();
    ensure(lhs <= rhs * (1.0 + 1e-12) + 1e-300, || format!("phi(mid) = {lhs} > {rhs}"))
}

// ---------------------------------------------------------------- sampler

pub fn sampler_determinism(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..=4);
    let tail: TailModel = if r.random::<bool>() {
        random_light(&mut r, n).into()
    } else {
        random_heavy(&mut r, n, 3).into()
    };
    let count = r.random_range(1..20_000);
    let s = r.random::<u64>();
    let a = tail.sample(s, count).unwrap();
    let b = tail.sample(s, count).unwrap();
    let same = a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits());
    ensure(same && a.len() == count, || "batches differ for identical inputs".into())
}

/// One-sample KS distance of each light-tail marginal against `1 - exp(-x^beta)`.
pub fn light_marginal_ks(beta: f64, theta: f64, n: usize, seed: u64) -> std::result::Result<f64, String> {
    let model = LightTailModel::new(n, beta, theta).unwrap();
    let tail: TailModel = model.into();
    let batch = tail.sample(seed, 100_000).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let v: Vec<f64> = batch.rows().map(|l| l[i]).collect();
        let d = super::ks(&v, |x| 1.0 - (-x.powf(beta)).exp());
        worst = worst.max(d);
    }
    if worst < 0.02 {
        Ok(worst)
    } else {
        Err(format!("KS distance {worst} at beta {beta}, theta {theta}"))
    }
}

/// Empirical joint survival at 5 probes against `exp(-lambda(x))`, in standard errors.
pub fn light_joint_law(beta: f64, theta: f64, seed: u64) -> std::result::Result<f64, String> {
    let n = 3;
    let model = LightTailModel::new(n, beta, theta).unwrap();
    let tail: TailModel = model.clone().into();
    let count = 1_000_000;
    let bases = [[1.0, 1.0, 1.0], [1.0, 0.5, 0.2], [0.3, 1.0, 0.7], [1.0, 0.0, 0.0], [0.6, 0.9, 0.1]];
    let targets = [0.5, 1.0, 1.5, 2.5, 3.5];
    let mut worst: f64 = 0.0;
    for (base, target) in bases.iter().zip(targets) {
        let t = (target / model.lambda(base).unwrap()).powf(1.0 / beta);
        let x: Vec<f64> = base.iter().map(|v| t * v).collect();
        let p = model.joint_tail(&x).unwrap();
        let hits = tail.count_where(seed, count, |l| l.iter().zip(&x).all(|(a, b)| a > b));
        let se = (p * (1.0 - p) / count as f64).sqrt();
        let z = (hits as f64 / count as f64 - p).abs() / se;
        worst = worst.max(z);
    }
    if worst <= 4.0 {
        Ok(worst)
    } else {
        Err(format!("joint survival off by {worst} standard errors at beta {beta}, theta {theta}"))
    }
}

/// Radius and angle of heavy-tail draws: `|L|_1` reproduces a Pareto radius and
/// `L / |L|_1` is an atom whose frequency above `r` matches its weight.
pub fn heavy_polar_law(seed: u64) -> std::result::Result<f64, String> {
    let atoms = vec![
        Atom { weight: 0.2, point: vec![1.0, 0.0, 0.0] },
        Atom { weight: 0.5, point: vec![0.2, 0.3, 0.5] },
        Atom { weight: 0.3, point: vec![0.0, 0.6, 0.4] },
    ];
    let alpha = 1.5;
    let model = HeavyTailModel::new(alpha, atoms.clone()).unwrap();
    let tail: TailModel = model.into();
    let count = 1_000_000;
    let batch = tail.sample(seed, count).unwrap();
    let mut worst: f64 = 0.0;
    for r in [1.0, 10.0, 100.0] {
        let mut counts = [0usize; 3];
        let mut above = 0usize;
        for l in batch.rows() {
            let radius: f64 = l.iter().sum();
            if radius < 1.0 {
                return Err(format!("radius {radius} below 1"));
            }
            let k = atoms
                .iter()
                .position(|a| a.point.iter().zip(l).all(|(t, v)| (t * radius - v).abs() <= 1e-12 * radius))
                .ok_or_else(|| format!("{l:?} is not a multiple of an atom"))?;
            if radius > r {
                above += 1;
                counts[k] += 1;
            }
        }
        let expected = r.powf(-alpha);
        let se = (expected * (1.0 - expected) / count as f64).sqrt().max(f64::MIN_POSITIVE);
        if r > 1.0 {
            worst = worst.max((above as f64 / count as f64 - expected).abs() / se);
        }
        for (a, c) in atoms.iter().zip(counts) {
            let se = (a.weight * (1.0 - a.weight) / above as f64).sqrt();
            worst = worst.max((c as f64 / above as f64 - a.weight).abs() / se);
        }
    }
    if worst <= 4.0 {
        Ok(worst)
    } else {
        Err(format!("heavy sampler off by {worst} standard errors"))
    }
}

// ---------------------------------------------------------------- limits

pub fn rate_scaling(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..=5);
    let model = random_light(&mut r, n);
    let rf = RateFunction::new(model.clone());
    let mut b = random_point(&mut r, n, 2.0);
    b[r.random_range(0..n)] += 0.1;
    let t = 10f64.powf(r.random_range(-2.0..2.0));
    let tb: Vec<f64> = b.iter().map(|v| t * v).collect();
    let i1 = rf.rate_i(&b).unwrap().value().unwrap();
    let i2 = rf.rate_i(&tb).unwrap().value().unwrap();
    ensure(rel(i2, t.powf(-model.beta()) * i1) <= 1e-10, || format!("I(tb) = {i2}, t^-beta I(b) = {}", t.powf(-model.beta()) * i1))?;
    ensure(rf.rate_i(&vec![0.0; n]).unwrap() == Rate::Infeasible, || "I(0) is finite".into())
}

/// `{b : I(b) >= 1}` is convex: 200 random pairs on or inside its boundary.
pub fn rate_superlevel_convexity(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..=5);
    let model = random_light(&mut r, n);
    let beta = model.beta();
    let rf = RateFunction::new(model);
    let inside = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let mut b = random_point(r, n, 1.0);
        b[r.random_range(0..n)] += 0.05;
        let i = rf.rate_i(&b).unwrap().value().unwrap();
        // I(t b) = t^-beta I(b) = level
        let level = if r.random::<bool>() { 1.0 } else { 1.0 + 3.0 * r.random::<f64>() };
        let t = (i / level).powf(1.0 / beta);
        b.iter().map(|v| t * v).collect()
    };
    for _ in 0..200 {
        let b1 = inside(&mut r);
        let b2 = inside(&mut r);
        let a = r.random::<f64>();
        let mid: Vec<f64> = b1.iter().zip(&b2).map(|(u, v)| a * u + (1.0 - a) * v).collect();
        let i = rf.rate_i(&mid).unwrap().value().unwrap();
        ensure(i >= 1.0 - 1e-9, || format!("I(mid) = {i} < 1"))?;
    }
    Ok(())
}

/// Closed form against an independent numeric minimization at `gamma = 3`.
pub fn rate_numeric_agreement(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = r.random_range(1..=4);
    let theta = 1.0 + 2.0 * r.random::<f64>();
    let beta = 3.0 / theta;
    let model = LightTailModel::new(n, beta, theta).unwrap();
    let mut b = random_point(&mut r, n, 2.0);
    b[r.random_range(0..n)] += 0.1;
    let closed = RateFunction::new(model.clone()).rate_i(&b).unwrap().value().unwrap();
    let inner = RateFunction::numeric(model).rate_i(&b).unwrap().value().unwrap();
    let oracle = numeric_rate(&b, 3.0, theta);
    ensure(rel(closed, oracle) <= 1e-6, || format!("closed form {closed}, oracle {oracle}"))?;
    ensure(rel(inner, oracle) <= 1e-6, || format!("numeric mode {inner}, oracle {oracle}"))
}

pub fn gauge_homogeneity(seed: u64) -> Check {
    let mut r = rng(seed);
    let (m, n, d) = (r.random_range(1..=4), r.random_range(1..=4), r.random_range(1..=3));
    let p = random_problem(&mut r, m, n, d);
    let model = random_heavy(&mut r, n, 4);
    let u = random_point(&mut r, m, 1.0);
    let t = 10f64.powf(r.random_range(-3.0..3.0));
    let tu: Vec<f64> = u.iter().map(|v| t * v).collect();
    let (g1, g2) = (ht_gauge(&model, &p, &u).unwrap(), ht_gauge(&model, &p, &tu).unwrap());
    ensure(g1 == 0.0 && g2 == 0.0 || rel(g2, t * g1) <= 1e-12, || format!("g(tu) = {g2}, t g(u) = {}", t * g1))
}

pub fn ht_midpoint_feasibility(seed: u64) -> Check {
    let mut r = rng(seed);
    let (m, n, d) = (r.random_range(1..=4), r.random_range(1..=4), r.random_range(1..=3));
    let p = random_problem(&mut r, m, n, d);
    let model = random_heavy(&mut r, n, 4);
    let feasible = |r: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        let y = random_point(r, m, 1.0);
        let g = ht_gauge(&model, &p, &y).unwrap();
        let s = if g > 0.0 { r.random::<f64>() / g } else { 1.0 };
        y.iter().map(|v| s * v).collect()
    };
    for _ in 0..20 {
        let (y1, y2) = (feasible(&mut r), feasible(&mut r));
        let a = r.random::<f64>();
        let mid: Vec<f64> = y1.iter().zip(&y2).map(|(u, v)| a * u + (1.0 - a) * v).collect();
        let v = ht_constraint(&model, &p, &mid).unwrap();
        ensure(v <= 1.0 + 1e-12, || format!("midpoint constraint value {v}"))?;
    }
    Ok(())
}

/// Separable light-tail instances against their closed forms: `1/a` for
/// `gamma <= 1`, the KKT point for `gamma > 1`.
pub fn lt_limit_oracle(seed: u64) -> Check {
    let mut r = rng(seed);
    let m = r.random_range(1..=3);
    let a: Vec<f64> = (0..m).map(|_| 0.2 + 3.0 * r.random::<f64>()).collect();
    let c: Vec<f64> = (0..m).map(|_| 0.1 + r.random::<f64>()).collect();
    let p = ProblemInstance::diagonal(c.clone(), &a, 1e6).unwrap();
    let theta = 1.0 + r.random::<f64>();
    let gamma = if r.random::<bool>() { 0.3 + 0.7 * r.random::<f64>() } else { 1.2 + 2.8 * r.random::<f64>() };
    let model = LightTailModel::new(m, gamma / theta, theta).unwrap();
    let rf = RateFunction::new(model);
    let expected: Vec<f64> = if gamma <= 1.0 { a.iter().map(|v| 1.0 / v).collect() } else { kkt_separable(&c, &a, gamma) };
    let value: f64 = c.iter().zip(&expected).map(|(x, y)| x * y).sum();
    for sol in [solve_lt_limit(&rf, &p).unwrap(), solve_lt_limit_ray(&rf, &p).unwrap()] {
        ensure(rel(sol.value, value) <= 1e-6, || format!("value {} vs oracle {value} (gamma {gamma})", sol.value))?;
    }
    Ok(())
}

/// Axis atoms with `A = I` make the heavy-tail program separable:
/// `max c^T y s.t. sum_k w_k y_k^alpha <= 1`.
pub fn ht_limit_oracle(seed: u64) -> Check {
    let mut r = rng(seed);
    let m = r.random_range(1..=3);
    let alpha = 1.3 + 2.5 * r.random::<f64>();
    let raw: Vec<f64> = (0..m).map(|_| 0.2 + r.random::<f64>()).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let head: f64 = w[..m - 1].iter().sum();
    w[m - 1] = 1.0 - head;
    let atoms = (0..m)
        .map(|k| {
            let mut e = vec![0.0; m];
            e[k] = 1.0;
            Atom { weight: w[k], point: e }
        })
        .collect();
    let model = HeavyTailModel::new(alpha, atoms).unwrap();
    let c: Vec<f64> = (0..m).map(|_| 0.1 + r.random::<f64>()).collect();
    let p = ProblemInstance::new(c.clone(), 1e6, vec![Matrix::identity(m)]).unwrap();
    let q = 1.0 / (alpha - 1.0);
    let base: Vec<f64> = c.iter().zip(&w).map(|(ci, wi)| (ci / wi).powf(q)).collect();
    let s: f64 = w.iter().zip(&base).map(|(wi, b)| wi * b.powf(alpha)).sum::<f64>().powf(-1.0 / alpha);
    let value: f64 = c.iter().zip(&base).map(|(ci, b)| ci * s * b).sum();
    let sol = solve_ht_limit(&model, &p).unwrap();
    ensure(rel(sol.value, value) <= 1e-6, || format!("value {} vs oracle {value}", sol.value))?;
    ensure(sol.residual <= 1e-9, || format!("residual {}", sol.residual))
}

/// Single-atom heavy-tail programs are linear programs.
pub fn ht_single_atom_lp(seed: u64) -> std::result::Result<f64, String> {
    let mut r = rng(seed);
    let (m, n, d) = (r.random_range(1..=4), r.random_range(1..=4), r.random_range(1..=3));
    let p = dense_problem(&mut r, m, n, d);
    let theta = random_simplex(&mut r, n);
    let model = HeavyTailModel::new(1.2 + 3.0 * r.random::<f64>(), vec![Atom { weight: 1.0, point: theta.clone() }]).unwrap();
    let sol = solve_ht_limit(&model, &p).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<f64>> = p.matrices().iter().map(|a| a.right_mul(&theta)).collect();
    let lp = LinearProgram::new(p.c().to_vec(), rows, vec![1.0; d], vec![(0.0, f64::INFINITY); m]).unwrap();
    let v = solve_lp(&lp).map_err(|e| e.to_string())?.objective;
    let err = rel(sol.value, v);
    if err <= 1e-6 {
        Ok(err)
    } else {
        Err(format!("ray search {} vs LP {v}", sol.value))
    }
}

// ---------------------------------------------------------------- lpsolve

pub fn lp_vertex_enumeration(seed: u64) -> Check {
    let mut r = rng(seed);
    let (rows, vars) = (r.random_range(1..=8), r.random_range(1..=8));
    let a: Vec<Vec<f64>> = (0..rows).map(|_| (0..vars).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let feasible_origin = r.random::<f64>() < 0.8;
    let b: Vec<f64> = (0..rows)
        .map(|_| if feasible_origin { r.random_range(0.0..2.0) } else { r.random_range(-1.0..1.0) })
        .collect();
    let c: Vec<f64> = (0..vars).map(|_| r.random_range(-1.0..1.0)).collect();
    let lo: Vec<f64> = (0..vars).map(|_| if r.random::<bool>() { 0.0 } else { r.random_range(-1.0..0.0) }).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + r.random_range(0.5..3.0)).collect();
    let lp = LinearProgram::new(c.clone(), a.clone(), b.clone(), lo.iter().copied().zip(hi.iter().copied()).collect())
        .unwrap();
    let sol = solve_lp(&lp).map_err(|e| e.to_string())?;
    let again = solve_lp(&lp).unwrap();
    ensure(format!("{sol:?}") == format!("{again:?}"), || format!("repeated solves differ: {sol:?} {again:?}"))?;
    match vertex_enumeration(&c, &a, &b, &lo, &hi) {
        None => ensure(sol.status == LpStatus::Infeasible, || format!("expected infeasible, got {sol:?}")),
        Some(v) => {
            ensure(sol.status == LpStatus::Optimal, || format!("expected optimum {v}, got {sol:?}"))?;
            ensure((sol.objective - v).abs() <= 1e-8 * (1.0 + v.abs()), || format!("objective {} vs {v}", sol.objective))?;
            let bmax = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            ensure(lp.max_violation(&sol.x) <= 1e-9 * (1.0 + bmax), || format!("violation {}", lp.max_violation(&sol.x)))
        }
    }
}

// ---------------------------------------------------------------- methods

fn small_instance(seed: u64) -> (ProblemInstance, TailModel) {
    let mut r = rng(seed);
    let (m, n, d) = (2, r.random_range(1..=3), r.random_range(1..=2));
    let p = dense_problem(&mut r, m, n, d);
    let tail = if r.random::<bool>() {
        let beta = 0.5 + r.random::<f64>();
        TailModel::from(LightTailModel::new(n, beta, 1.0 + r.random::<f64>()).unwrap())
    } else {
        TailModel::from(random_heavy(&mut r, n, 3))
    };
    (p, tail)
}

/// CVaR value stays below the oracle value on the same draws.
pub fn cvar_below_oracle(seed: u64) -> Check {
    let (p, tail) = small_instance(seed);
    let delta = 0.02;
    let batch = tail.sample(seed ^ 0x5eed, 20_000).unwrap();
    let (cvar, _) = cvar_solve_batch(&p, &batch, delta).unwrap();
    let oracle = ccp_oracle_batch(&p, &batch, delta).unwrap();
    ensure(cvar.value <= oracle.value * 1.02, || format!("CVaR {} above oracle {}", cvar.value, oracle.value))
}

pub fn scenario_monotone_in_k(seed: u64) -> Check {
    let (p, tail) = small_instance(seed);
    let batch = tail.sample(seed, 2000).unwrap();
    let mut prev = f64::INFINITY;
    for k in [10, 100, 500, 2000] {
        let rows: Vec<Vec<f64>> = batch.rows().take(k).map(|l| l.to_vec()).collect();
        let sub = SampleBatch::from_rows(&rows, seed).unwrap();
        let v = scenario_solve(&p, &sub, 1.0).unwrap().value;
        ensure(v <= prev * (1.0 + 1e-9), || format!("value rose from {prev} to {v} at k = {k}"))?;
        prev = v;
    }
    Ok(())
}

pub fn scenario_scale_equivariance(seed: u64) -> Check {
    let (p, tail) = small_instance(seed);
    let batch = tail.sample(seed, 1000).unwrap();
    let base = scenario_solve(&p, &batch, 1.0).unwrap().value;
    let mut r = rng(seed);
    let radius = 10f64.powf(r.random_range(-2.0..3.0));
    let v = scenario_solve(&p, &batch, radius).unwrap().value;
    ensure(rel(v, radius * base) <= 1e-9, || format!("radius {radius}: {v} vs {}", radius * base))
}

/// The oracle decision's violation on fresh draws sits within 3 standard errors of delta.
pub fn oracle_saturation(seed: u64) -> std::result::Result<f64, String> {
    let (p, tail) = small_instance(seed);
    let delta = 0.05;
    let budget = 40_000;
    let x = ccp_oracle(&p, &tail, delta, budget, seed).unwrap().x;
    let est = violation_prob(&p, &x, &tail, 10 * budget, seed.wrapping_add(1)).unwrap();
    let se = (delta * (1.0 - delta) / budget as f64).sqrt();
    let z = (est.estimate - delta).abs() / se;
    if z <= 3.0 {
        Ok(z)
    } else {
        Err(format!("violation {} vs delta {delta}: {z} standard errors", est.estimate))
    }
}

// ---------------------------------------------------------------- determinism

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

/// Bitwise identical outputs for 1 and 4 worker threads and across reruns.
pub fn thread_count_determinism(seed: u64) -> Check {
    let (p, tail) = small_instance(seed);
    let run = || {
        let batch = tail.sample(seed, 50_000).unwrap();
        let oracle = ccp_oracle(&p, &tail, 0.01, 20_000, seed).unwrap();
        let (cvar, _) = cvar_solve(&p, &tail, 0.01, 30_000, seed).unwrap();
        let scen = scenario_solve(&p, &batch, 1.0).unwrap();
        let viol = violation_prob(&p, &cvar.x, &tail, 100_000, seed).unwrap();
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        (bits(batch.as_slice()), bits(&oracle.x), bits(&cvar.x), bits(&scen.y), viol.hits)
    };
    let one = in_pool(1, run);
    let four = in_pool(4, run);
    let again = in_pool(4, run);
    ensure(one == four && four == again, || "results depend on the worker count".into())
}

pub fn experiment_determinism(config: &str) -> Check {
    let cfg = ExperimentConfig::from_json(config).unwrap();
    let csv = || {
        let rows = run_experiment(&cfg).unwrap();
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        (rows.len(), out)
    };
    let (rows, one) = in_pool(1, csv);
    let (_, four) = in_pool(4, csv);
    let (_, again) = in_pool(4, csv);
    ensure(one == four && four == again, || "CSV differs across runs or worker counts".into())?;
    let grid = match cfg.kind.unwrap() {
        ExperimentKind::CvarRatio | ExperimentKind::FeasibilityFactor => cfg.delta_grid.len(),
        ExperimentKind::ScenarioConvergence | ExperimentKind::FrechetCheck => cfg.k_grid.len(),
        ExperimentKind::TailRatio => cfg.r_grid.len(),
    };
    ensure(rows == grid * (cfg.replications + 1), || format!("{rows} rows for {grid} grid points"))?;
    let text = String::from_utf8(one).unwrap();
    ensure(!text.contains('\r'), || "CR in output".into())?;
    ensure(text.lines().count() == rows + 1, || "line count differs from row count".into())?;
    ensure(
        text.lines().skip(1).all(|l| l.split(',').nth(4).is_some_and(|t| !t.is_empty())),
        || "missing target column".into(),
    )
}

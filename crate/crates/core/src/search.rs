//! Deterministic maximization of scale-invariant objectives over the unit simplex.
//!
//! Both limit programs and the Monte Carlo oracle reduce, by positive
//! homogeneity, to maximizing a function of a direction `u >= 0, sum u = 1`.
//! Starts come from a lattice (m <= 3) or a Halton point set (m > 3); the best
//! starts are then polished by Nelder–Mead on `w -> f(|w| / |w|_1)`.

use rayon::prelude::*;

/// Lattice points per axis for `m <= 3`.
pub const GRID_POINTS_PER_AXIS: usize = 50;
/// Quasi-random starts for `m > 3`.
pub const QUASI_RANDOM_STARTS: usize = 1000;
/// Simplex-size tolerance of the local refinement.
pub const STEP_TOLERANCE: f64 = 1e-10;

const REFINED_STARTS: usize = 6;
const MAX_RESTARTS: usize = 12;

/// Candidate directions: lattice or quasi-random points plus all vertices and the barycenter.
pub fn start_directions(m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        out.push(e);
    }
    if m == 1 {
        return out;
    }
    out.push(vec![1.0 / m as f64; m]);
    if m <= 3 {
        let steps = GRID_POINTS_PER_AXIS - 1;
        let mut idx = vec![0usize; m];
        lattice(&mut idx, 0, steps, &mut |k| {
            out.push(k.iter().map(|&v| v as f64 / steps as f64).collect());
        });
    } else {
        for j in 1..=QUASI_RANDOM_STARTS {
            let mut cuts: Vec<f64> = (0..m - 1).map(|d| halton(j as u64, PRIMES[d % PRIMES.len()])).collect();
            cuts.sort_by(f64::total_cmp);
            let mut prev = 0.0;
            let mut u = Vec::with_capacity(m);
            for c in cuts {
                u.push(c - prev);
                prev = c;
            }
            u.push(1.0 - prev);
            out.push(u);
        }
    }
    out
}

fn lattice(idx: &mut [usize], pos: usize, remaining: usize, emit: &mut impl FnMut(&[usize])) {
    if pos == idx.len() - 1 {
        idx[pos] = remaining;
        emit(idx);
        return;
    }
    for v in 0..=remaining {
        idx[pos] = v;
        lattice(idx, pos + 1, remaining - v, emit);
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Maps an unconstrained point to the simplex; `None` at the origin.
pub fn to_simplex(w: &[f64]) -> Option<Vec<f64>> {
    let s: f64 = w.iter().map(|v| v.abs()).sum();
    if s > 0.0 && s.is_finite() {
        Some(w.iter().map(|v| v.abs() / s).collect())
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct SearchResult {
    pub direction: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `f` over the unit simplex in `R^m`.
///
/// Results are deterministic: starts are refined in parallel and merged by
/// best value, ties broken by the lowest start index.
pub fn maximize_on_simplex<F>(m: usize, f: F) -> SearchResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let starts = start_directions(m);
    let mut scored: Vec<(usize, f64)> = starts
        .par_iter()
        .enumerate()
        .map(|(i, u)| (i, sanitize(f(u))))
        .collect();
    if m == 1 {
        return SearchResult { direction: starts[0].clone(), value: scored[0].1, evaluations: 1 };
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let evals0 = starts.len();
    let refined: Vec<(usize, SearchResult)> = scored
        .iter()
        .take(REFINED_STARTS)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&(i, _)| (i, refine(&f, &starts[i])))
        .collect();
    let evaluations = evals0 + refined.iter().map(|(_, r)| r.evaluations).sum::<usize>();
    let (_, best) = refined
        .into_iter()
        .reduce(|a, b| if b.1.value > a.1.value || (b.1.value == a.1.value && b.0 < a.0) { b } else { a })
        .expect("at least one start");
    SearchResult { evaluations, ..best }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

/// Nelder–Mead with restarts from the incumbent until no further gain.
pub fn refine<F>(f: &F, start: &[f64]) -> SearchResult
where
    F: Fn(&[f64]) -> f64,
{
    let obj = |w: &[f64]| to_simplex(w).map_or(f64::NEG_INFINITY, |u| sanitize(f(&u)));
    let mut best = start.to_vec();
    let mut best_val = obj(&best);
    let mut evaluations = 1;
    let mut step = 0.05;
    for _ in 0..MAX_RESTARTS {
        let (w, v, evals) = nelder_mead(&obj, &best, step);
        evaluations += evals;
        let improved = v > best_val + 1e-15 * best_val.abs().max(1e-300);
        if v >= best_val {
            best = w;
            best_val = v;
        }
        if !improved {
            break;
        }
        step = 0.01;
    }
    let direction = to_simplex(&best).unwrap_or_else(|| start.to_vec());
    SearchResult { value: sanitize(f(&direction)), direction, evaluations }
}

/// Maximizes `obj` from `x0` with initial edge length `step`.
fn nelder_mead<F>(obj: &F, x0: &[f64], step: f64) -> (Vec<f64>, f64, usize)
where
    F: Fn(&[f64]) -> f64,
{
    let dim = x0.len();
    let scale = x0.iter().map(|v| v.abs()).sum::<f64>().max(1e-12);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += step * scale;
        simplex.push(p);
    }
    // we minimize the negated objective
    let mut vals: Vec<f64> = simplex.iter().map(|p| -obj(p)).collect();
    let mut evals = simplex.len();
    let max_iter = 4000 * dim;
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let size = simplex[1..]
            .iter()
            .map(|p| p.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let norm = simplex[0].iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        if size <= STEP_TOLERANCE * norm {
            break;
        }

        let mut centroid = vec![0.0; dim];
        for p in &simplex[..dim] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&worst).map(|(c, w)| c + t * (w - c)).collect()
        };
        let reflected = along(-1.0);
        let fr = -obj(&reflected);
        evals += 1;
        if fr < vals[0] {
            let expanded = along(-2.0);
            let fe = -obj(&expanded);
            evals += 1;
            if fe < fr {
                simplex[dim] = expanded;
                vals[dim] = fe;
            } else {
                simplex[dim] = reflected;
                vals[dim] = fr;
            }
        } else if fr < vals[dim - 1] {
            simplex[dim] = reflected;
            vals[dim] = fr;
        } else {
            let (contracted, fc) = if fr < vals[dim] {
                let p = along(-0.5);
                let v = -obj(&p);
                (p, v)
            } else {
                let p = along(0.5);
                let v = -obj(&p);
                (p, v)
            };
            evals += 1;
            if fc < vals[dim].min(fr) {
                simplex[dim] = contracted;
                vals[dim] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=dim {
                    simplex[i] = best.iter().zip(&simplex[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
                    vals[i] = -obj(&simplex[i]);
                    evals += 1;
                }
            }
        }
    }
    let (i, _) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .expect("nonempty simplex");
    (simplex[i].clone(), -vals[i], evals)
}

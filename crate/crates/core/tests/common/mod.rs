//! Test-side oracles, written independently of the library's solvers.
#![allow(dead_code)]

pub mod invariants;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Maximizer of `c^T y` over `sum_i (a_i y_i)^p <= 1`, `p = gamma/(gamma-1)`.
///
/// Stationarity gives `c_i / a_i = mu p z_i^(p-1)` with `z_i = a_i y_i`, so
/// `z_i` is proportional to `w_i^(gamma-1)` for `w = c / a`; the scale makes
/// the constraint active.
pub fn kkt_separable(c: &[f64], a: &[f64], gamma: f64) -> Vec<f64> {
    let w: Vec<f64> = c.iter().zip(a).map(|(ci, ai)| ci / ai).collect();
    let norm: f64 = w.iter().map(|v| v.powf(gamma)).sum::<f64>().powf((gamma - 1.0) / gamma);
    w.iter().zip(a).map(|(wi, ai)| wi.powf(gamma - 1.0) / norm / ai).collect()
}

/// Solves the square system `m x = r` by Gaussian elimination with partial pivoting.
pub fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let p = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[p][col].abs() < 1e-11 {
            return None;
        }
        m.swap(col, p);
        r.swap(col, p);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            if f != 0.0 {
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                r[row] -= f * r[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

/// Best basic feasible solution of `max c^T x s.t. A x <= b, lo <= x <= hi` by
/// enumerating every choice of `n` active constraints. `None` when infeasible.
pub fn vertex_enumeration(c: &[f64], a: &[Vec<f64>], b: &[f64], lo: &[f64], hi: &[f64]) -> Option<f64> {
    let n = c.len();
    // every constraint as (row, rhs) in `row . x <= rhs` form
    let mut cons: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        cons.push((e.clone(), hi[j]));
        e[j] = -1.0;
        cons.push((e, -lo[j]));
    }
    let total = cons.len();
    let mut best: Option<f64> = None;
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let m: Vec<Vec<f64>> = pick.iter().map(|&k| cons[k].0.clone()).collect();
        let r: Vec<f64> = pick.iter().map(|&k| cons[k].1).collect();
        if let Some(x) = solve_square(m, r) {
            let feasible = cons.iter().all(|(row, rhs)| {
                let s: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
                s <= rhs + 1e-9 * (1.0 + rhs.abs())
            });
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |b: f64| b.max(v)));
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < total - n + i {
                pick[i] += 1;
                for k in i + 1..n {
                    pick[k] = pick[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `inf { lambda(x) : x >= 0, b^T x >= 1 }` for `lambda(x) = (sum x_i^gamma)^(1/theta)`,
/// by coordinate-wise golden-section descent over the simplex of `z_i = b_i x_i`.
pub fn numeric_rate(b: &[f64], gamma: f64, theta: f64) -> f64 {
    let idx: Vec<usize> = (0..b.len()).filter(|&i| b[i] > 0.0).collect();
    let f = |z: &[f64]| -> f64 { z.iter().zip(&idx).map(|(zi, &i)| (zi / b[i]).powf(gamma)).sum() };
    let k = idx.len();
    let mut z = vec![1.0 / k as f64; k];
    // pairwise transfers of mass converge for this separable convex objective
    for _ in 0..200 {
        for p in 0..k {
            for q in p + 1..k {
                let total = z[p] + z[q];
                let (mut lo, mut hi) = (0.0, total);
                for _ in 0..100 {
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    let mut z1 = z.clone();
                    z1[p] = m1;
                    z1[q] = total - m1;
                    let mut z2 = z.clone();
                    z2[p] = m2;
                    z2[q] = total - m2;
                    if f(&z1) <= f(&z2) {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                z[p] = 0.5 * (lo + hi);
                z[q] = total - z[p];
            }
        }
    }
    f(&z).powf(1.0 / theta)
}

/// Uniform point on the open simplex.
pub fn random_simplex<R: Rng>(r: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Kolmogorov-Smirnov distance between the sample `v` and `cdf`.
pub fn ks<F: Fn(f64) -> f64>(v: &[f64], cdf: F) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter().enumerate().fold(0.0_f64, |d, (i, x)| {
        let f = cdf(*x);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

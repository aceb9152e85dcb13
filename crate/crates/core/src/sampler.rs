//! Generators for the risk vector `L`.
//!
//! Two parametric families are provided, each with exact finite-sample tails:
//!
//! * [`LightTailModel`]: Weibull(`beta`) marginals `P(L_i > x) = exp(-x^beta)`
//!   joined by a Gumbel–Hougaard survival copula, so that
//!   `-log P(L > x) = (sum_i x_i^(beta*theta))^(1/theta)` holds for every `x`.
//! * [`HeavyTailModel`]: `L = R * Theta` with `R` standard Pareto(`alpha`) and
//!   `Theta` drawn from finitely many atoms on the L1 unit simplex.
//!
//! All draws are produced block by block (see [`crate::rng`]), so a batch is a
//! pure function of `(model, seed, count)` regardless of thread count.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{block_count, block_range, block_rng, BLOCK_LEN};

/// Below this distance from 1 the copula parameter is treated as independence.
const THETA_INDEPENDENT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightTailModel {
    n: usize,
    beta: f64,
    /// `f64::INFINITY` denotes the comonotone limit.
    theta: f64,
}

impl LightTailModel {
    pub fn new(n: usize, beta: f64, theta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Parameter("dimension n must be positive".into()));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Parameter(format!("beta must be positive, got {beta}")));
        }
        if theta.is_nan() || theta < 1.0 {
            return Err(Error::Parameter(format!("theta must be >= 1, got {theta}")));
        }
        Ok(Self { n, beta, theta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn is_comonotone(&self) -> bool {
        self.theta.is_infinite()
    }

    /// `beta * theta`; infinite in the comonotone case.
    pub fn gamma(&self) -> f64 {
        self.beta * self.theta
    }

    /// Inverse of `q(r) = r^beta`.
    pub fn qinv(&self, u: f64) -> f64 {
        u.powf(1.0 / self.beta)
    }

    /// `lambda(x) = (sum x_i^(beta theta))^(1/theta)`, or `max_i x_i^beta` when comonotone.
    pub fn lambda(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!("expected {} coordinates, got {}", self.n, x.len())));
        }
        if x.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Input("lambda requires nonnegative coordinates".into()));
        }
        Ok(self.lambda_unchecked(x))
    }

    pub(crate) fn lambda_unchecked(&self, x: &[f64]) -> f64 {
        if self.is_comonotone() {
            return x.iter().fold(0.0_f64, |m, v| m.max(*v)).powf(self.beta);
        }
        let g = self.gamma();
        x.iter().map(|v| v.powf(g)).sum::<f64>().powf(1.0 / self.theta)
    }

    /// Exact joint survival `P(L > x) = exp(-lambda(x))`.
    pub fn joint_tail(&self, x: &[f64]) -> Result<f64> {
        Ok((-self.lambda(x)?).exp())
    }

    fn fill_block<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.n;
        let inv_beta = 1.0 / self.beta;
        if self.is_comonotone() {
            for row in out.chunks_exact_mut(n) {
                let e: f64 = rng.sample(Exp1);
                row.fill(e.powf(inv_beta));
            }
        } else if self.theta < 1.0 + THETA_INDEPENDENT_EPS {
            for v in out.iter_mut() {
                let e: f64 = rng.sample(Exp1);
                *v = e.powf(inv_beta);
            }
        } else {
            let a = 1.0 / self.theta;
            let inv_gamma = 1.0 / self.gamma();
            for row in out.chunks_exact_mut(n) {
                let s = positive_stable(rng, a);
                for v in row.iter_mut() {
                    let e: f64 = rng.sample(Exp1);
                    *v = (e / s).powf(inv_gamma);
                }
            }
        }
    }
}

/// Positive stable variate with Laplace transform `exp(-s^a)`, `0 < a < 1`,
/// via Kanter's representation.
pub fn positive_stable<R: Rng>(rng: &mut R, a: f64) -> f64 {
    // U uniform on (0, pi)
    let u = PI * (1.0 - rng.random::<f64>());
    let u = if u >= PI { PI * (1.0 - f64::EPSILON) } else { u };
    let e: f64 = rng.sample(Exp1);
    let zolotarev = (a * u).sin().powf(a / (1.0 - a)) * ((1.0 - a) * u).sin()
        / u.sin().powf(1.0 / (1.0 - a));
    (zolotarev / e).powf((1.0 - a) / a)
}

/// One atom of a discrete angular measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeavyTailModel {
    n: usize,
    alpha: f64,
    atoms: Vec<Atom>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl HeavyTailModel {
    pub fn new(alpha: f64, atoms: Vec<Atom>) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 1.0) {
            return Err(Error::Parameter(format!("alpha must exceed 1, got {alpha}")));
        }
        let Some(first) = atoms.first() else {
            return Err(Error::Parameter("angular measure has no atoms".into()));
        };
        let n = first.point.len();
        if n == 0 {
            return Err(Error::Parameter("atoms must have positive dimension".into()));
        }
        let mut total = 0.0;
        let mut cumulative = Vec::with_capacity(atoms.len());
        for (k, atom) in atoms.iter().enumerate() {
            if atom.point.len() != n {
                return Err(Error::Dimension(format!("atom {k} has dimension {}", atom.point.len())));
            }
            if !(atom.weight.is_finite() && atom.weight > 0.0) {
                return Err(Error::Parameter(format!("atom {k} weight must be positive")));
            }
            if atom.point.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Parameter(format!("atom {k} has a negative coordinate")));
            }
            let l1: f64 = atom.point.iter().sum();
            if (l1 - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!("atom {k} is not on the unit simplex (|.|_1 = {l1})")));
            }
            total += atom.weight;
            cumulative.push(total);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!("atom weights sum to {total}, expected 1")));
        }
        Ok(Self { n, alpha, atoms, cumulative })
    }

    /// Scalar Pareto(`alpha`) risk.
    pub fn pareto(alpha: f64) -> Result<Self> {
        Self::new(alpha, vec![Atom { weight: 1.0, point: vec![1.0] }])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// `inf { r : P(|L| > r) <= delta } = delta^(-1/alpha)`.
    pub fn fbar_inv(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1], got {delta}")));
        }
        Ok(delta.powf(-1.0 / self.alpha))
    }

    /// Radius tail `P(|L| > r)`.
    pub fn radius_tail(&self, r: f64) -> f64 {
        if r <= 1.0 {
            1.0
        } else {
            r.powf(-self.alpha)
        }
    }

    fn pick_atom(&self, v: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| v < c)
            .unwrap_or(self.atoms.len() - 1)
    }

    fn fill_block<R: Rng>(&self, rng: &mut R, out: &mut [f64]) {
        let inv_alpha = 1.0 / self.alpha;
        for row in out.chunks_exact_mut(self.n) {
            let u = 1.0 - rng.random::<f64>();
            let r = u.powf(-inv_alpha);
            let k = if self.atoms.len() == 1 { 0 } else { self.pick_atom(rng.random::<f64>()) };
            for (v, t) in row.iter_mut().zip(&self.atoms[k].point) {
                *v = r * t;
            }
        }
    }
}

impl<'de> Deserialize<'de> for HeavyTailModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            alpha: f64,
            atoms: Vec<Atom>,
        }
        let raw = Raw::deserialize(d)?;
        HeavyTailModel::new(raw.alpha, raw.atoms).map_err(serde::de::Error::custom)
    }
}

/// Either tail regime.
#[derive(Debug, Clone, PartialEq)]
pub enum TailModel {
    Light(LightTailModel),
    Heavy(HeavyTailModel),
}

impl From<LightTailModel> for TailModel {
    fn from(m: LightTailModel) -> Self {
        TailModel::Light(m)
    }
}

impl From<HeavyTailModel> for TailModel {
    fn from(m: HeavyTailModel) -> Self {
        TailModel::Heavy(m)
    }
}

impl TailModel {
    pub fn n(&self) -> usize {
        match self {
            TailModel::Light(m) => m.n(),
            TailModel::Heavy(m) => m.n(),
        }
    }

    pub fn is_light(&self) -> bool {
        matches!(self, TailModel::Light(_))
    }

    /// Scale `r_delta` mapping limit solutions to `delta`-level decisions:
    /// `q^{-1}(log 1/delta)` for light tails, `Fbar^{-1}(delta)` for heavy tails.
    pub fn scale_for_delta(&self, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Parameter(format!("delta must lie in (0, 1), got {delta}")));
        }
        match self {
            TailModel::Light(m) => Ok(m.qinv((1.0 / delta).ln())),
            TailModel::Heavy(m) => m.fbar_inv(delta),
        }
    }

    /// Scenario-program radius for `k` samples: `q^{-1}(log k)` or `Fbar^{-1}(1/k)`.
    pub fn scale_for_samples(&self, k: usize) -> Result<f64> {
        if k < 2 && self.is_light() {
            return Err(Error::Parameter("light-tail scenario radius needs k >= 2".into()));
        }
        if k == 0 {
            return Err(Error::Parameter("k must be positive".into()));
        }
        match self {
            TailModel::Light(m) => Ok(m.qinv((k as f64).ln())),
            TailModel::Heavy(m) => m.fbar_inv(1.0 / k as f64),
        }
    }

    fn fill_block(&self, seed: u64, block: usize, out: &mut [f64]) {
        let mut rng = block_rng(seed, block as u64);
        match self {
            TailModel::Light(m) => m.fill_block(&mut rng, out),
            TailModel::Heavy(m) => m.fill_block(&mut rng, out),
        }
    }

    /// Draws `count` i.i.d. copies of `L`.
    pub fn sample(&self, seed: u64, count: usize) -> Result<SampleBatch> {
        if count == 0 {
            return Err(Error::Parameter("sample count must be positive".into()));
        }
        let n = self.n();
        let mut data = vec![0.0; count * n];
        data.par_chunks_mut(BLOCK_LEN * n)
            .enumerate()
            .for_each(|(b, chunk)| self.fill_block(seed, b, chunk));
        Ok(SampleBatch { n, seed, data })
    }

    /// Streams the `count` draws of `sample(seed, count)` block by block without
    /// materializing them, returning `f(first_index, rows)` per block in order.
    pub fn map_blocks<T, F>(&self, seed: u64, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &[f64]) -> T + Sync,
    {
        let n = self.n();
        (0..block_count(count))
            .into_par_iter()
            .map_init(
                || vec![0.0; BLOCK_LEN * n],
                |buf, b| {
                    let range = block_range(count, b);
                    let rows = &mut buf[..range.len() * n];
                    self.fill_block(seed, b, rows);
                    f(range.start, rows)
                },
            )
            .collect()
    }

    /// Number of draws among `count` for which `pred` holds.
    pub fn count_where<F>(&self, seed: u64, count: usize, pred: F) -> u64
    where
        F: Fn(&[f64]) -> bool + Sync,
    {
        let n = self.n();
        self.map_blocks(seed, count, |_, rows| {
            rows.chunks_exact(n).filter(|l| pred(l)).count() as u64
        })
        .into_iter()
        .sum()
    }
}

/// `k` draws of the `n`-dimensional risk vector, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    n: usize,
    seed: u64,
    data: Vec<f64>,
}

impl SampleBatch {
    pub fn from_rows(rows: &[Vec<f64>], seed: u64) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(Error::Input("batch must contain at least one nonempty row".into()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("ragged sample rows".into()));
        }
        let data = rows.concat();
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Input("samples must be finite and nonnegative".into()));
        }
        Ok(Self { n, seed, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Appends the rows of `other`; the seed of `self` is kept.
    pub fn extend(&mut self, other: &SampleBatch) -> Result<()> {
        if other.n != self.n {
            return Err(Error::Dimension("cannot merge batches of different dimension".into()));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    /// CSV with a `# seed=<u64>` comment line and an `L1..Ln` header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        let header: Vec<String> = (1..=self.n).map(|i| format!("L{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut seed = None;
        let mut n = None;
        let mut rows = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(s) = rest.trim().strip_prefix("seed=") {
                    seed = Some(s.trim().parse::<u64>().map_err(|e| {
                        Error::Input(format!("line {}: bad seed: {e}", lineno + 1))
                    })?);
                }
                continue;
            }
            if n.is_none() {
                let cols: Vec<&str> = line.split(',').collect();
                for (i, c) in cols.iter().enumerate() {
                    if c.trim() != format!("L{}", i + 1) {
                        return Err(Error::Input(format!("unexpected header column {c:?}")));
                    }
                }
                n = Some(cols.len());
                continue;
            }
            let row = line
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Input(format!("line {}: {e}", lineno + 1)))?;
            if Some(row.len()) != n {
                return Err(Error::Dimension(format!("line {} has {} columns", lineno + 1, row.len())));
            }
            rows.push(row);
        }
        let seed = seed.ok_or_else(|| Error::Input("missing '# seed=' line".into()))?;
        Self::from_rows(&rows, seed)
    }
}

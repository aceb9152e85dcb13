//! Problem instances and the bilinear-max loss.
//!
//! A problem asks to maximize `c^T x` over the box `[0, h]^m` subject to a
//! constraint on the loss `phi(x, L) = max_i x^T A_i L`, where every `A_i` is
//! an `m x n` matrix with nonnegative entries and `L` is a nonnegative random
//! vector in `R^n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Self::new(nrows, ncols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in diag.iter().enumerate() {
            data[i * n + i] = v;
        }
        Self { rows: n, cols: n, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    /// `x^T M`, an n-vector.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.left_mul_into(x, &mut out);
        out
    }

    pub fn left_mul_into(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o += xr * a;
            }
        }
    }

    /// `M L`, an m-vector.
    pub fn right_mul(&self, l: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), l)).collect()
    }

    /// True when the matrix is square with zero off-diagonal entries.
    pub fn is_diagonal(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..self.cols).all(|c| r == c || self.get(r, c) == 0.0))
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The data `(c, h, A_1..A_d)` of a rare-event chance-constrained program.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemInstance {
    c: Vec<f64>,
    h: f64,
    a: Vec<Matrix>,
}

impl ProblemInstance {
    pub fn new(c: Vec<f64>, h: f64, a: Vec<Matrix>) -> Result<Self> {
        let m = c.len();
        if m == 0 {
            return Err(Error::Input("objective vector c is empty".into()));
        }
        if c.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Input("entries of c must be finite and nonnegative".into()));
        }
        if c.iter().all(|&v| v == 0.0) {
            return Err(Error::Input("c must have at least one positive entry".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Input(format!("box bound h must be positive, got {h}")));
        }
        let Some(first) = a.first() else {
            return Err(Error::Input("at least one matrix A is required".into()));
        };
        let n = first.cols();
        if n == 0 {
            return Err(Error::Input("risk dimension n must be positive".into()));
        }
        for (i, mat) in a.iter().enumerate() {
            if mat.rows() != m || mat.cols() != n {
                return Err(Error::Dimension(format!(
                    "A[{i}] is {}x{}, expected {m}x{n}",
                    mat.rows(),
                    mat.cols()
                )));
            }
            if mat.as_slice().iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Input(format!("A[{i}] has a negative or non-finite entry")));
            }
            if mat.as_slice().iter().all(|&v| v == 0.0) {
                return Err(Error::Input(format!("A[{i}] has no positive entry")));
            }
        }
        Ok(Self { c, h, a })
    }

    /// The separable instance `max c^T x` with loss `sum_i a_i x_i L_i`.
    pub fn diagonal(c: Vec<f64>, a: &[f64], h: f64) -> Result<Self> {
        Self::new(c, h, vec![Matrix::diagonal(a)])
    }

    /// Decision dimension.
    pub fn m(&self) -> usize {
        self.c.len()
    }

    /// Risk dimension.
    pub fn n(&self) -> usize {
        self.a[0].cols()
    }

    /// Number of matrices.
    pub fn d(&self) -> usize {
        self.a.len()
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn matrices(&self) -> &[Matrix] {
        &self.a
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.c, x)
    }

    /// `max_i x^T A_i L`.
    pub fn phi(&self, x: &[f64], l: &[f64]) -> Result<f64> {
        self.check_decision(x)?;
        if l.len() != self.n() {
            return Err(Error::Dimension(format!(
                "risk vector has length {}, expected {}",
                l.len(),
                self.n()
            )));
        }
        check_nonneg("risk vector", l)?;
        Ok(self.phi_unchecked(x, l))
    }

    /// `phi` without validation, for hot loops whose inputs are already checked.
    #[inline]
    pub fn phi_unchecked(&self, x: &[f64], l: &[f64]) -> f64 {
        self.phi_argmax_unchecked(x, l).0
    }

    /// Loss value together with the maximizing matrix index; ties go to the smallest index.
    #[inline]
    pub fn phi_argmax_unchecked(&self, x: &[f64], l: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (i, mat) in self.a.iter().enumerate() {
            let v = bilinear(mat, x, l);
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    /// Coordinatewise clamp onto `[0, h]^m`.
    pub fn box_clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| v.clamp(0.0, self.h)).collect()
    }

    pub fn check_decision(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.m() {
            return Err(Error::Dimension(format!(
                "decision has length {}, expected {}",
                x.len(),
                self.m()
            )));
        }
        check_nonneg("decision", x)
    }

    /// True when `m = n = d = 1`.
    pub fn is_scalar(&self) -> bool {
        self.m() == 1 && self.n() == 1 && self.d() == 1
    }
}

/// `x^T M l`.
#[inline]
pub fn bilinear(mat: &Matrix, x: &[f64], l: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (r, &xr) in x.iter().enumerate() {
        if xr != 0.0 {
            acc += xr * dot(mat.row(r), l);
        }
    }
    acc
}

fn check_nonneg(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|x| x.is_nan() || *x < 0.0 || x.is_infinite()) {
        return Err(Error::Input(format!("{what} must be finite and nonnegative")));
    }
    Ok(())
}

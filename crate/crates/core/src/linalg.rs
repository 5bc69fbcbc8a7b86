//! Combinatorial linear algebra: permanents, elementary symmetric functions,
//! subset enumeration and the Monte Carlo determinant identities they back.
//!
//! The permanent of a rectangular `m x n` matrix with `m <= n` is the sum over
//! all injections of rows into columns of the corresponding entry products.
//! Tall matrices (`m > n`) are handled through their transpose, which is the
//! convention under which `E{|X^H X|} = Perm(E{X o X})` holds for a tall random
//! matrix `X` with independent zero-mean circular Gaussian entries.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `min(rows, cols)` accepted by the exact permanent kernels.
pub const PERMANENT_SIZE_LIMIT: usize = 14;

/// Dense real matrix in row-major order. Empty shapes are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite matrix entry {bad}")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = x;
        }
        m
    }

    /// Builds a matrix from row slices; every row must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    /// Submatrix keeping the listed rows and columns, in the order given.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for &i in rows {
            for &j in cols {
                data.push(self.get(i, j));
            }
        }
        Self { rows: rows.len(), cols: cols.len(), data }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let cols: Vec<usize> = (0..self.cols).collect();
        self.select(rows, &cols)
    }

    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let rows: Vec<usize> = (0..self.rows).collect();
        self.select(&rows, cols)
    }

    /// Multiplies row `i` by `d[i]`, i.e. `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.rows, "row scale length");
        let mut out = self.clone();
        for (i, &s) in d.iter().enumerate() {
            for x in &mut out.data[i * self.cols..(i + 1) * self.cols] {
                *x *= s;
            }
        }
        out
    }

    pub fn scale_cols(&self, d: &[f64]) -> Self {
        assert_eq!(d.len(), self.cols, "column scale length");
        let mut out = self.clone();
        for i in 0..self.rows {
            for (j, &s) in d.iter().enumerate() {
                out.data[i * self.cols + j] *= s;
            }
        }
        out
    }

    pub fn column_sums(&self) -> Vec<f64> {
        (0..self.cols).map(|j| (0..self.rows).map(|i| self.get(i, j)).sum()).collect()
    }
}

/// A strictly increasing subset of `{0, .., universe-1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndexSubset {
    universe: usize,
    members: Vec<usize>,
}

impl IndexSubset {
    pub fn new(universe: usize, members: Vec<usize>) -> Result<Self> {
        if members.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("subset members must be strictly increasing".into()));
        }
        if members.last().is_some_and(|&m| m >= universe) {
            return Err(Error::InvalidArgument(format!(
                "subset member outside universe of size {universe}"
            )));
        }
        Ok(Self { universe, members })
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn complement(&self) -> IndexSubset {
        let mut keep = vec![true; self.universe];
        for &m in &self.members {
            keep[m] = false;
        }
        let members = (0..self.universe).filter(|&i| keep[i]).collect();
        IndexSubset { universe: self.universe, members }
    }
}

/// Lexicographic enumeration of the `k`-subsets of `{0, .., n-1}`.
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = IndexSubset;

    fn next(&mut self) -> Option<IndexSubset> {
        let cur = self.current.take()?;
        let out = IndexSubset { universe: self.n, members: cur.clone() };

        let k = cur.len();
        let mut next = cur;
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                return Some(out);
            }
        }
        Some(out)
    }
}

pub fn subsets(n: usize, k: usize) -> Result<Subsets> {
    if k > n {
        return Err(Error::InvalidArgument(format!("cannot choose {k} of {n}")));
    }
    Ok(Subsets { n, current: Some((0..k).collect()) })
}

#[cfg(test)]
pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Permanent of a square matrix by Ryser's inclusion-exclusion formula,
/// walking column subsets in Gray-code order.
pub fn perm_square(a: &RealMatrix) -> Result<f64> {
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "square permanent of a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n > PERMANENT_SIZE_LIMIT {
        return Err(Error::SizeLimit { size: n, limit: PERMANENT_SIZE_LIMIT });
    }
    Ok(ryser(a))
}

fn ryser(a: &RealMatrix) -> f64 {
    let n = a.rows();
    match n {
        0 => return 1.0,
        1 => return a.get(0, 0),
        2 => return a.get(0, 0) * a.get(1, 1) + a.get(0, 1) * a.get(1, 0),
        _ => {}
    }

    let mut row_sums = vec![0.0; n];
    let mut in_set = vec![false; n];
    let mut total = CompensatedSum::default();
    let mut gray: u64 = 0;
    for step in 1u64..(1u64 << n) {
        let next = step ^ (step >> 1);
        let j = (gray ^ next).trailing_zeros() as usize;
        gray = next;
        in_set[j] = !in_set[j];
        let sign = if in_set[j] { 1.0 } else { -1.0 };
        for (i, s) in row_sums.iter_mut().enumerate() {
            *s += sign * a.get(i, j);
        }
        let prod: f64 = row_sums.iter().product();
        let size = gray.count_ones() as usize;
        if (n - size) % 2 == 0 {
            total.add(prod);
        } else {
            total.add(-prod);
        }
    }
    total.value()
}

/// Permanent of an arbitrary (possibly empty, wide or tall) matrix.
pub fn perm_rect(a: &RealMatrix) -> Result<f64> {
    let (m, n) = (a.rows(), a.cols());
    if m > n {
        return perm_rect(&a.transpose());
    }
    if m > PERMANENT_SIZE_LIMIT {
        return Err(Error::SizeLimit { size: m, limit: PERMANENT_SIZE_LIMIT });
    }
    if m == n {
        return Ok(ryser(a));
    }
    let rows: Vec<usize> = (0..m).collect();
    let mut total = CompensatedSum::default();
    for cols in subsets(n, m)? {
        total.add(ryser(&a.select(&rows, cols.members())));
    }
    Ok(total.value())
}

/// All elementary symmetric functions `e_0..=e_n` of `d`.
pub fn esf_all(d: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; d.len() + 1];
    e[0] = 1.0;
    for (k, &x) in d.iter().enumerate() {
        for i in (1..=k + 1).rev() {
            e[i] += x * e[i - 1];
        }
    }
    e
}

/// The `i`-th elementary symmetric function of `d`; zero when `i > d.len()`.
pub fn esf(d: &[f64], i: usize) -> f64 {
    if i > d.len() {
        return 0.0;
    }
    esf_all(d)[i]
}

fn gaussian_matrix(q: &RealMatrix, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(q.rows(), q.cols(), |i, j| {
        let s = (q.get(i, j) / 2.0).sqrt();
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(s * re, s * im)
    })
}

fn mean_and_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

fn gram_oracle(q: &RealMatrix, weights: Option<&[f64]>, samples: usize, seed: u64) -> Result<(f64, f64)> {
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!("oracle needs at least 1000 samples, got {samples}")));
    }
    if q.as_slice().iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidArgument("variance matrix has negative entries".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tall = q.rows() >= q.cols();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let x = gaussian_matrix(q, &mut rng);
        let gram = match (weights, tall) {
            (Some(w), _) => {
                let sx = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * w[i]);
                x.adjoint() * sx
            }
            (None, true) => x.adjoint() * &x,
            (None, false) => &x * x.adjoint(),
        };
        let det = gram.determinant().re;
        sum += det;
        sum_sq += det * det;
    }
    Ok(mean_and_stderr(sum, sum_sq, samples))
}

/// Monte Carlo estimate of `E{|X^H X|}` for `X` with independent `CN(0, Q_ik)`
/// entries (the smaller Gram matrix is used for wide `Q`).
/// Returns `(estimate, standard error)`.
pub fn expected_gram_det_oracle(q: &RealMatrix, samples: usize, seed: u64) -> Result<(f64, f64)> {
    gram_oracle(q, None, samples, seed)
}

/// Monte Carlo estimate of `E{|X^H diag(sigma) X|}` for tall `X` with
/// independent `CN(0, A_ik)` entries.
pub fn expected_weighted_gram_det_oracle(
    a: &RealMatrix,
    sigma: &[f64],
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if sigma.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} rows",
            sigma.len(),
            a.rows()
        )));
    }
    if a.rows() < a.cols() {
        return Err(Error::DimensionMismatch("weighted Gram oracle needs a tall matrix".into()));
    }
    gram_oracle(a, Some(sigma), samples, seed)
}

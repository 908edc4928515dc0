//! Dense square matrices, the Sylvester-type operator `M ↦ A₀M + MA₁`,
//! commutation tests and exact binomial coefficients.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::de::{Deserializer, Error as _};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by [`commutes_default`].
pub const DEFAULT_COMMUTE_RTOL: f64 = 1e-10;

/// Dense `d × d` real matrix stored row-major.
///
/// Entries are finite on construction. The arithmetic operators panic on a
/// dimension mismatch; the free functions of this module return
/// [`Error::DimensionMismatch`] instead.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        Self::from_fn(dim, |i, j| if i == j { value } else { 0.0 })
    }

    /// Builds a matrix from row-major nested rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::NonSquare {
                    rows: dim,
                    row: i,
                    cols: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m.data[i * dim + j] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        self.assert_same_dim(other);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
    }

    /// Position (row, col) of the largest absolute entry.
    pub fn argmax_abs(&self) -> (usize, usize) {
        let mut best = 0;
        for (k, x) in self.data.iter().enumerate() {
            if x.abs() > self.data[best].abs() {
                best = k;
            }
        }
        (best / self.dim, best % self.dim)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|x| alpha * x).collect(),
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.dim, |i, j| self[(j, i)])
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        self.assert_same_dim(other);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        self.assert_same_dim(other);
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn pow(&self, mut exp: u32) -> Matrix {
        let mut result = Matrix::identity(self.dim);
        let mut base = self.clone();
        while exp > 0 {
            if exp & 1 == 1 {
                result = result.matmul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    /// Commutator `PQ − QP`.
    pub fn commutator(&self, other: &Matrix) -> Matrix {
        self.matmul(other) - other.matmul(self)
    }

    pub fn check_same_dim(&self, other: &Matrix) -> Result<()> {
        if self.dim == other.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            })
        }
    }

    fn assert_same_dim(&self, other: &Matrix) {
        assert_eq!(
            self.dim, other.dim,
            "matrix dimension mismatch: {} vs {}",
            self.dim, other.dim
        );
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, row) in self.rows().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            for (j, x) in row.iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.dim && j < self.dim, "index out of bounds");
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.dim && j < self.dim, "index out of bounds");
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &Matrix {
    type Output = Matrix;

    fn add(self, rhs: &Matrix) -> Matrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for Matrix {
    type Output = Matrix;

    fn add(mut self, rhs: Matrix) -> Matrix {
        self += &rhs;
        self
    }
}

impl Sub for &Matrix {
    type Output = Matrix;

    fn sub(self, rhs: &Matrix) -> Matrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for Matrix {
    type Output = Matrix;

    fn sub(mut self, rhs: Matrix) -> Matrix {
        self -= &rhs;
        self
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Matrix> for Matrix {
    fn sub_assign(&mut self, rhs: &Matrix) {
        self.axpy(-1.0, rhs);
    }
}

impl Mul for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs)
    }
}

impl Mul<f64> for &Matrix {
    type Output = Matrix;

    fn mul(self, rhs: f64) -> Matrix {
        self.scale(rhs)
    }
}

impl Neg for &Matrix {
    type Output = Matrix;

    fn neg(self) -> Matrix {
        self.scale(-1.0)
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for row in self.rows() {
            seq.serialize_element(row)?;
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Matrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        Matrix::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// The two-sided operator `A₀·M + M·A₁`.
pub fn sylvester_apply(a0: &Matrix, a1: &Matrix, m: &Matrix) -> Result<Matrix> {
    a0.check_same_dim(a1)?;
    a0.check_same_dim(m)?;
    Ok(a0.matmul(m) + m.matmul(a1))
}

/// True iff `max|PQ − QP| ≤ tol`.
pub fn commutes(p: &Matrix, q: &Matrix, tol: f64) -> Result<bool> {
    Ok(commutation_residual(p, q)? <= tol)
}

/// `max|PQ − QP|`.
pub fn commutation_residual(p: &Matrix, q: &Matrix) -> Result<f64> {
    p.check_same_dim(q)?;
    Ok(p.commutator(q).max_norm())
}

/// Commutation test with [`DEFAULT_COMMUTE_RTOL`] taken relative to the
/// larger of `‖PQ‖` and `‖QP‖`.
pub fn commutes_default(p: &Matrix, q: &Matrix) -> Result<bool> {
    p.check_same_dim(q)?;
    let pq = p.matmul(q);
    let qp = q.matmul(p);
    let scale = pq.max_norm().max(qp.max_norm());
    Ok(pq.max_abs_diff(&qp) <= DEFAULT_COMMUTE_RTOL * scale)
}

/// Exact binomial coefficient `C(n, k)` with `C(n, k) = 0` whenever `n < k`
/// (negative `n` included).
pub fn binomial(n: i64, k: u64) -> Result<i128> {
    let overflow = || Error::BinomialOverflow { n, k };
    if n < 0 || (n as u64) < k {
        return Ok(0);
    }
    let n = n as u64;
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    // After step i, acc == C(n - k + i, i).
    for i in 1..=k as i128 {
        let top = (n - k) as i128 + i;
        let g = gcd(acc, i);
        let reduced = acc / g;
        let factor = top / (i / g);
        acc = reduced.checked_mul(factor).ok_or_else(overflow)?;
    }
    Ok(acc)
}

/// [`binomial`] converted to `f64`.
pub fn binomial_f64(n: i64, k: u64) -> Result<f64> {
    binomial(n, k).map(|c| c as f64)
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

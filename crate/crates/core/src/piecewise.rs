//! Matrix-coefficient polynomials and their piecewise assemblies.
//!
//! Every segment stores its polynomial in the monomial basis of the global
//! time variable `t`. Segment `k` is live on the half-open interval
//! `[t_k, t_{k+1})`; the final breakpoint is closed so that a function
//! materialized on `[a, b]` can be evaluated at `b`. Left of the first
//! breakpoint the function equals the constant `left_value`; right of the
//! last breakpoint it is either zero or, with `right_extension`, the last
//! segment's polynomial.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{binomial_f64, Matrix};

/// Maximum polynomial degree per segment.
pub const MAX_DEGREE: usize = 64;

/// Relative distance under which two breakpoints are treated as one.
const KNOT_MERGE_RTOL: f64 = 1e-12;

/// `p(t) = Σ c[j] t^j` with `d × d` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    coeffs: Vec<Matrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<Matrix>) -> Result<Self> {
        let first = coeffs.first().ok_or(Error::EmptyMatrix)?;
        for c in &coeffs[1..] {
            first.check_same_dim(c)?;
        }
        let mut p = Self { coeffs };
        p.trim();
        if p.degree() > MAX_DEGREE {
            return Err(Error::DegreeCap {
                degree: p.degree(),
                cap: MAX_DEGREE,
            });
        }
        Ok(p)
    }

    pub fn constant(value: Matrix) -> Self {
        Self {
            coeffs: vec![value],
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(Matrix::zeros(dim))
    }

    /// `value · (t − shift)^power`.
    pub fn shifted_power(value: &Matrix, shift: f64, power: usize) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(power + 1);
        for j in 0..=power {
            let c = binomial_f64(power as i64, j as u64)? * (-shift).powi((power - j) as i32);
            coeffs.push(value.scale(c));
        }
        Self::new(coeffs)
    }

    pub fn dim(&self) -> usize {
        self.coeffs[0].dim()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Matrix] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Matrix::is_zero)
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(Matrix::is_zero) {
            self.coeffs.pop();
        }
    }

    pub fn eval(&self, t: f64) -> Matrix {
        let mut iter = self.coeffs.iter().rev();
        let mut acc = iter.next().expect("non-empty").clone();
        for c in iter {
            acc = acc.scale(t);
            acc += c;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero(self.dim());
        }
        let coeffs = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(j, c)| c.scale((j + 1) as f64))
            .collect();
        Self { coeffs }
    }

    /// Antiderivative vanishing at `t = 0`.
    pub fn antiderivative(&self) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(Matrix::zeros(self.dim()));
        for (j, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c.scale(1.0 / (j + 1) as f64));
        }
        Self::new(coeffs)
    }

    /// `∫_a^b p(t) dt`.
    pub fn definite_integral(&self, a: f64, b: f64) -> Matrix {
        let mut out = Matrix::zeros(self.dim());
        let (mut pa, mut pb) = (a, b);
        for (j, c) in self.coeffs.iter().enumerate() {
            let w = (pb - pa) / (j + 1) as f64;
            out.axpy(w, c);
            pa *= a;
            pb *= b;
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        self.coeffs[0].check_same_dim(&other.coeffs[0])?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let d = self.dim();
        let coeffs = (0..n)
            .map(|j| {
                let mut c = self.coeffs.get(j).cloned().unwrap_or_else(|| Matrix::zeros(d));
                if let Some(o) = other.coeffs.get(j) {
                    c.axpy(sign, o);
                }
                c
            })
            .collect();
        Self::new(coeffs)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut p = Self {
            coeffs: self.coeffs.iter().map(|c| c.scale(alpha)).collect(),
        };
        p.trim();
        p
    }

    /// `t ↦ self(t) · other(t)`, coefficients multiplied in that order.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.coeffs[0].check_same_dim(&other.coeffs[0])?;
        let degree = self.degree() + other.degree();
        if degree > MAX_DEGREE {
            return Err(Error::DegreeCap {
                degree,
                cap: MAX_DEGREE,
            });
        }
        let mut coeffs = vec![Matrix::zeros(self.dim()); degree + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += &a.matmul(b);
            }
        }
        Self::new(coeffs)
    }

    /// `t ↦ m · self(t)`.
    pub fn left_mul(&self, m: &Matrix) -> Self {
        let mut p = Self {
            coeffs: self.coeffs.iter().map(|c| m.matmul(c)).collect(),
        };
        p.trim();
        p
    }

    /// `t ↦ self(t) · m`.
    pub fn right_mul(&self, m: &Matrix) -> Self {
        let mut p = Self {
            coeffs: self.coeffs.iter().map(|c| c.matmul(m)).collect(),
        };
        p.trim();
        p
    }

    /// `t ↦ self(a·t + b)` by Horner composition.
    pub fn compose_affine(&self, a: f64, b: f64) -> Self {
        let d = self.dim();
        let mut iter = self.coeffs.iter().rev();
        let mut acc = vec![iter.next().expect("non-empty").clone()];
        for c in iter {
            // acc ← acc · (a t + b) + c
            let mut next = vec![Matrix::zeros(d); acc.len() + 1];
            for (j, m) in acc.iter().enumerate() {
                next[j].axpy(b, m);
                next[j + 1].axpy(a, m);
            }
            next[0] += c;
            acc = next;
        }
        let mut p = Self { coeffs: acc };
        p.trim();
        p
    }
}

/// Matrix polynomials on consecutive segments `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PiecewiseRepr", into = "PiecewiseRepr")]
pub struct PiecewiseMatrixPolynomial {
    breakpoints: Vec<f64>,
    pieces: Vec<MatrixPolynomial>,
    left_value: Matrix,
    right_extension: bool,
}

impl PiecewiseMatrixPolynomial {
    pub fn new(
        breakpoints: Vec<f64>,
        pieces: Vec<MatrixPolynomial>,
        left_value: Matrix,
        right_extension: bool,
    ) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidBreakpoints("at least one piece is required".into()));
        }
        if breakpoints.len() != pieces.len() + 1 {
            return Err(Error::InvalidBreakpoints(format!(
                "{} pieces need {} breakpoints, got {}",
                pieces.len(),
                pieces.len() + 1,
                breakpoints.len()
            )));
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidBreakpoints("breakpoints must be finite".into()));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidBreakpoints(format!(
                "breakpoints must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        for p in &pieces {
            left_value.check_same_dim(&p.coeffs[0])?;
        }
        Ok(Self {
            breakpoints,
            pieces,
            left_value,
            right_extension,
        })
    }

    /// Pieces on `[t_0, t_K]`, zero elsewhere.
    pub fn from_pieces(breakpoints: Vec<f64>, pieces: Vec<MatrixPolynomial>) -> Result<Self> {
        let dim = pieces.first().map(MatrixPolynomial::dim).ok_or_else(|| {
            Error::InvalidBreakpoints("at least one piece is required".into())
        })?;
        Self::new(breakpoints, pieces, Matrix::zeros(dim), false)
    }

    /// A single polynomial on `[a, b]`, zero elsewhere.
    pub fn single(a: f64, b: f64, poly: MatrixPolynomial) -> Result<Self> {
        Self::from_pieces(vec![a, b], vec![poly])
    }

    pub fn dim(&self) -> usize {
        self.left_value.dim()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[MatrixPolynomial] {
        &self.pieces
    }

    pub fn left_value(&self) -> &Matrix {
        &self.left_value
    }

    pub fn right_extension(&self) -> bool {
        self.right_extension
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().expect("non-empty")
    }

    pub fn max_degree(&self) -> usize {
        self.pieces.iter().map(MatrixPolynomial::degree).max().unwrap_or(0)
    }

    /// True when the function vanishes outside `[t_0, t_K]`.
    pub fn has_compact_support(&self) -> bool {
        self.left_value.is_zero() && (!self.right_extension || self.last_piece().is_zero())
    }

    fn last_piece(&self) -> &MatrixPolynomial {
        self.pieces.last().expect("non-empty")
    }

    /// Index of the segment containing `t`, or `None` outside `[t_0, t_K]`.
    pub fn segment_index(&self, t: f64) -> Option<usize> {
        if t < self.start() || t > self.end() {
            return None;
        }
        let k = self.breakpoints.partition_point(|&b| b <= t);
        Some((k - 1).min(self.pieces.len() - 1))
    }

    /// The polynomial in force on a neighborhood right of `t`.
    fn poly_at(&self, t: f64) -> MatrixPolynomial {
        if t < self.start() {
            MatrixPolynomial::constant(self.left_value.clone())
        } else if t >= self.end() {
            if self.right_extension {
                self.last_piece().clone()
            } else {
                MatrixPolynomial::zero(self.dim())
            }
        } else {
            self.pieces[self.segment_index(t).expect("inside")].clone()
        }
    }

    pub fn eval(&self, t: f64) -> Matrix {
        match self.segment_index(t) {
            Some(k) => self.pieces[k].eval(t),
            None if t < self.start() => self.left_value.clone(),
            None if self.right_extension => self.last_piece().eval(t),
            None => Matrix::zeros(self.dim()),
        }
    }

    /// Limit from the left at `t`.
    pub fn left_limit(&self, t: f64) -> Matrix {
        if t <= self.start() {
            return self.left_value.clone();
        }
        if t > self.end() {
            return self.eval(t);
        }
        let k = self.breakpoints.partition_point(|&b| b < t);
        self.pieces[k - 1].eval(t)
    }

    /// Segment-wise derivative; the left value becomes zero.
    pub fn differentiate(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(MatrixPolynomial::derivative).collect(),
            left_value: Matrix::zeros(self.dim()),
            right_extension: self.right_extension,
        }
    }

    /// `∫_a^b p(t) dt` for finite `a, b` (orientation-aware).
    pub fn integrate(&self, a: f64, b: f64) -> Matrix {
        assert!(a.is_finite() && b.is_finite(), "integration bounds must be finite");
        if a > b {
            return -&self.integrate(b, a);
        }
        let mut out = Matrix::zeros(self.dim());
        if a == b {
            return out;
        }
        let (t0, tk) = (self.start(), self.end());
        if a < t0 {
            out.axpy(b.min(t0) - a, &self.left_value);
        }
        for (k, piece) in self.pieces.iter().enumerate() {
            let lo = a.max(self.breakpoints[k]);
            let hi = b.min(self.breakpoints[k + 1]);
            if lo < hi {
                out += &piece.definite_integral(lo, hi);
            }
        }
        if b > tk && self.right_extension {
            out += &self.last_piece().definite_integral(a.max(tk), b);
        }
        out
    }

    /// `q(t) = p(t + shift)`.
    pub fn shift(&self, shift: f64) -> Self {
        if shift == 0.0 {
            return self.clone();
        }
        Self {
            breakpoints: self.breakpoints.iter().map(|b| b - shift).collect(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.compose_affine(1.0, shift))
                .collect(),
            left_value: self.left_value.clone(),
            right_extension: self.right_extension,
        }
    }

    /// `q(t) = p(−t)`.
    ///
    /// Segment membership flips at the knots (`[t_k, t_{k+1})` becomes
    /// `(−t_{k+1}, −t_k]`), which only affects values at breakpoints.
    /// Fails when `p` extends a non-constant polynomial to `+∞`, since the
    /// reflected function would need a non-constant left tail.
    pub fn reflect(&self) -> Result<Self> {
        let dim = self.dim();
        let left_value = if self.right_extension {
            let last = self.last_piece();
            if last.degree() > 0 {
                return Err(Error::Unrepresentable(
                    "reflection of a non-constant right extension".into(),
                ));
            }
            last.coeffs[0].clone()
        } else {
            Matrix::zeros(dim)
        };
        let mut breakpoints: Vec<f64> = self.breakpoints.iter().rev().map(|b| -b).collect();
        let mut pieces: Vec<MatrixPolynomial> = self
            .pieces
            .iter()
            .rev()
            .map(|p| p.compose_affine(-1.0, 0.0))
            .collect();
        let right_extension = !self.left_value.is_zero();
        if right_extension {
            let last = *breakpoints.last().expect("non-empty");
            let width = (last - breakpoints[0]).max(1.0);
            breakpoints.push(last + width);
            pieces.push(MatrixPolynomial::constant(self.left_value.clone()));
        }
        Self::new(breakpoints, pieces, left_value, right_extension)
    }

    /// The function restricted to `[a, b]` and zero elsewhere.
    pub fn restrict(&self, a: f64, b: f64) -> Result<Self> {
        if !(a < b) {
            return Err(Error::InvalidBreakpoints(format!(
                "restriction interval [{a}, {b}] is empty"
            )));
        }
        let mut knots = vec![a];
        knots.extend(self.breakpoints.iter().copied().filter(|&t| t > a && t < b));
        knots.push(b);
        let knots = merge_knots(knots);
        let pieces = knots
            .windows(2)
            .map(|w| self.poly_at(0.5 * (w[0] + w[1])))
            .collect();
        Self::from_pieces(knots, pieces)
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.scale(alpha)).collect(),
            left_value: self.left_value.scale(alpha),
            right_extension: self.right_extension,
        }
    }

    /// `t ↦ m · p(t)`.
    pub fn left_mul(&self, m: &Matrix) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.left_mul(m)).collect(),
            left_value: m.matmul(&self.left_value),
            right_extension: self.right_extension,
        }
    }

    /// `t ↦ p(t) · m`.
    pub fn right_mul(&self, m: &Matrix) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self.pieces.iter().map(|p| p.right_mul(m)).collect(),
            left_value: self.left_value.matmul(m),
            right_extension: self.right_extension,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, MatrixPolynomial::add)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, MatrixPolynomial::sub)
    }

    /// Pointwise product `p(t) · q(t)` on the common refinement.
    pub fn product(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, MatrixPolynomial::mul)
    }

    fn zip_with(
        &self,
        other: &Self,
        op: impl Fn(&MatrixPolynomial, &MatrixPolynomial) -> Result<MatrixPolynomial>,
    ) -> Result<Self> {
        self.left_value.check_same_dim(&other.left_value)?;
        let mut knots: Vec<f64> = self.breakpoints.clone();
        knots.extend_from_slice(&other.breakpoints);
        let knots = merge_knots(knots);
        let mut pieces = knots
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                op(&self.poly_at(mid), &other.poly_at(mid))
            })
            .collect::<Result<Vec<_>>>()?;
        let left = op(
            &MatrixPolynomial::constant(self.left_value.clone()),
            &MatrixPolynomial::constant(other.left_value.clone()),
        )?;
        let last_knot = *knots.last().expect("non-empty");
        let tail = op(&self.poly_at(last_knot), &other.poly_at(last_knot))?;
        let mut knots = knots;
        let right_extension = attach_tail(&mut knots, &mut pieces, tail);
        if pieces.is_empty() {
            // Both operands were single points; degenerate but representable.
            knots.push(last_knot + 1.0);
            pieces.push(MatrixPolynomial::zero(self.dim()));
        }
        Self::new(knots, pieces, left.coeffs[0].clone(), right_extension)
    }

    /// `(kernel ⋆ g)(ϑ) = ∫ kernel(ϑ − s) · g(s) ds`, exact.
    ///
    /// `g` must vanish outside `[g.start(), g.end()]`. The result is again a
    /// piecewise polynomial whose breakpoints are the pairwise sums of the
    /// operands' breakpoints.
    pub fn convolve(kernel: &Self, g: &Self) -> Result<Self> {
        kernel.left_value.check_same_dim(&g.left_value)?;
        if !g.has_compact_support() {
            return Err(Error::Unrepresentable(
                "convolution needs a compactly supported right operand".into(),
            ));
        }
        let dim = kernel.dim();
        let kernel_regions = kernel.regions();
        let g_regions: Vec<Region> = g
            .regions()
            .into_iter()
            .filter(|r| r.lo.is_some() && r.hi.is_some())
            .collect();

        let mut sums = Vec::new();
        for kr in &kernel_regions {
            for gr in &g_regions {
                for a in [kr.lo, kr.hi].into_iter().flatten() {
                    for b in [gr.lo, gr.hi].into_iter().flatten() {
                        sums.push(a + b);
                    }
                }
            }
        }
        if sums.is_empty() {
            return Self::from_pieces(
                vec![g.start(), g.end()],
                vec![MatrixPolynomial::zero(dim)],
            );
        }
        let knots = merge_knots(sums);

        let block = |theta: f64| -> Result<MatrixPolynomial> {
            let mut acc = MatrixPolynomial::zero(dim);
            for kr in &kernel_regions {
                for gr in &g_regions {
                    let (glo, ghi) = (gr.lo.expect("finite"), gr.hi.expect("finite"));
                    // s-range where theta − s falls in the kernel region.
                    let lower = match kr.hi {
                        Some(h) if theta - h > glo => Limit::Moving(h),
                        _ => Limit::Fixed(glo),
                    };
                    let upper = match kr.lo {
                        Some(l) if theta - l < ghi => Limit::Moving(l),
                        _ => Limit::Fixed(ghi),
                    };
                    if lower.at(theta) >= upper.at(theta) {
                        continue;
                    }
                    let h = convolution_antiderivative(&kr.poly, &gr.poly)?;
                    let part = h.eval_limit(upper, dim)?.sub(&h.eval_limit(lower, dim)?)?;
                    acc = acc.add(&part)?;
                }
            }
            Ok(acc)
        };

        let first = knots[0];
        let last = *knots.last().expect("non-empty");
        let left = block(first - 1.0)?;
        let mut pieces = knots
            .windows(2)
            .map(|w| block(0.5 * (w[0] + w[1])))
            .collect::<Result<Vec<_>>>()?;
        let tail = block(last + 1.0)?;
        let mut knots = knots;
        let right_extension = attach_tail(&mut knots, &mut pieces, tail);
        if pieces.is_empty() {
            knots.push(last + 1.0);
            pieces.push(MatrixPolynomial::zero(dim));
        }
        Self::new(knots, pieces, left.eval(first), right_extension)
    }

    /// Non-zero regions, including the infinite tails.
    fn regions(&self) -> Vec<Region> {
        let mut out = Vec::with_capacity(self.pieces.len() + 2);
        if !self.left_value.is_zero() {
            out.push(Region {
                lo: None,
                hi: Some(self.start()),
                poly: MatrixPolynomial::constant(self.left_value.clone()),
            });
        }
        for (k, p) in self.pieces.iter().enumerate() {
            if !p.is_zero() {
                out.push(Region {
                    lo: Some(self.breakpoints[k]),
                    hi: Some(self.breakpoints[k + 1]),
                    poly: p.clone(),
                });
            }
        }
        if self.right_extension && !self.last_piece().is_zero() {
            out.push(Region {
                lo: Some(self.end()),
                hi: None,
                poly: self.last_piece().clone(),
            });
        }
        out
    }
}

struct Region {
    lo: Option<f64>,
    hi: Option<f64>,
    poly: MatrixPolynomial,
}

/// An integration limit in `s`: a constant, or `ϑ − c`.
#[derive(Clone, Copy)]
enum Limit {
    Fixed(f64),
    Moving(f64),
}

impl Limit {
    fn at(self, theta: f64) -> f64 {
        match self {
            Limit::Fixed(c) => c,
            Limit::Moving(c) => theta - c,
        }
    }
}

/// `H(ϑ, s) = Σ h[a][b] ϑ^a s^b`, an antiderivative in `s` of
/// `f(ϑ − s) · g(s)`.
struct Bivariate {
    coeffs: Vec<Vec<Matrix>>,
}

fn convolution_antiderivative(
    f: &MatrixPolynomial,
    g: &MatrixPolynomial,
) -> Result<Bivariate> {
    let dim = f.dim();
    let degree = f.degree() + g.degree() + 1;
    if degree > MAX_DEGREE {
        return Err(Error::DegreeCap {
            degree,
            cap: MAX_DEGREE,
        });
    }
    let na = f.degree() + 1;
    let nb = f.degree() + g.degree() + 2;
    let mut coeffs = vec![vec![Matrix::zeros(dim); nb]; na];
    for (k, fk) in f.coeffs().iter().enumerate() {
        for (l, gl) in g.coeffs().iter().enumerate() {
            let prod = fk.matmul(gl);
            if prod.is_zero() {
                continue;
            }
            // (ϑ − s)^k = Σ_a C(k,a) ϑ^a (−s)^{k−a}
            for a in 0..=k {
                let sign = if (k - a) % 2 == 0 { 1.0 } else { -1.0 };
                let b = k - a + l;
                let w = sign * binomial_f64(k as i64, a as u64)? / (b + 1) as f64;
                coeffs[a][b + 1].axpy(w, &prod);
            }
        }
    }
    Ok(Bivariate { coeffs })
}

impl Bivariate {
    /// `ϑ ↦ H(ϑ, limit(ϑ))`.
    fn eval_limit(&self, limit: Limit, dim: usize) -> Result<MatrixPolynomial> {
        let na = self.coeffs.len();
        let nb = self.coeffs[0].len();
        let mut out = vec![Matrix::zeros(dim); na + nb];
        match limit {
            Limit::Fixed(c) => {
                for (a, row) in self.coeffs.iter().enumerate() {
                    let mut cb = 1.0;
                    for h in row {
                        out[a].axpy(cb, h);
                        cb *= c;
                    }
                }
            }
            Limit::Moving(c) => {
                // (ϑ − c)^b = Σ_i C(b,i) ϑ^i (−c)^{b−i}
                for (a, row) in self.coeffs.iter().enumerate() {
                    for (b, h) in row.iter().enumerate() {
                        if h.is_zero() {
                            continue;
                        }
                        for i in 0..=b {
                            let w = binomial_f64(b as i64, i as u64)? * (-c).powi((b - i) as i32);
                            out[a + i].axpy(w, h);
                        }
                    }
                }
            }
        }
        MatrixPolynomial::new(out)
    }
}

/// Appends `tail` as the right extension; returns the extension flag.
fn attach_tail(
    knots: &mut Vec<f64>,
    pieces: &mut Vec<MatrixPolynomial>,
    tail: MatrixPolynomial,
) -> bool {
    if tail.is_zero() {
        return false;
    }
    if pieces.last() == Some(&tail) {
        return true;
    }
    let last = *knots.last().expect("non-empty");
    let width = knots
        .windows(2)
        .last()
        .map(|w| w[1] - w[0])
        .unwrap_or(1.0)
        .max(1.0);
    knots.push(last + width);
    pieces.push(tail);
    true
}

/// Sorts and merges breakpoints closer than a relative tolerance.
fn merge_knots(mut knots: Vec<f64>) -> Vec<f64> {
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let mut out: Vec<f64> = Vec::with_capacity(knots.len());
    for t in knots {
        match out.last() {
            Some(&prev) if (t - prev).abs() <= KNOT_MERGE_RTOL * prev.abs().max(t.abs()).max(1.0) => {}
            _ => out.push(t),
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct PiecewiseRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dim: Option<usize>,
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<Matrix>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left_value: Option<Matrix>,
    #[serde(default)]
    right_extension: bool,
}

impl TryFrom<PiecewiseRepr> for PiecewiseMatrixPolynomial {
    type Error = Error;

    fn try_from(raw: PiecewiseRepr) -> Result<Self> {
        let pieces = raw
            .pieces
            .into_iter()
            .map(MatrixPolynomial::new)
            .collect::<Result<Vec<_>>>()?;
        let dim = match (raw.dim, pieces.first()) {
            (Some(d), Some(p)) if d != p.dim() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.dim(),
                })
            }
            (_, Some(p)) => p.dim(),
            (Some(d), None) => d,
            (None, None) => {
                return Err(Error::InvalidBreakpoints("at least one piece is required".into()))
            }
        };
        let left_value = raw.left_value.unwrap_or_else(|| Matrix::zeros(dim));
        Self::new(raw.breakpoints, pieces, left_value, raw.right_extension)
    }
}

impl From<PiecewiseMatrixPolynomial> for PiecewiseRepr {
    fn from(p: PiecewiseMatrixPolynomial) -> Self {
        PiecewiseRepr {
            dim: Some(p.dim()),
            breakpoints: p.breakpoints,
            pieces: p.pieces.into_iter().map(|q| q.coeffs).collect(),
            left_value: Some(p.left_value),
            right_extension: p.right_extension,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat(rows: [[f64; 2]; 2]) -> Matrix {
        Matrix::from_rows(&rows).unwrap()
    }

    fn poly(coeffs: &[[[f64; 2]; 2]]) -> MatrixPolynomial {
        MatrixPolynomial::new(coeffs.iter().map(|c| mat(*c)).collect()).unwrap()
    }

    /// The continuous fundamental function of the two-dimensional
    /// showcase system (A₀ = [[0,1],[0,0]], A₁ = diag(1,2), σ = 1) on
    /// [−1, 3), entered by hand from the method of steps.
    fn showcase_z() -> PiecewiseMatrixPolynomial {
        let p0 = poly(&[[[1.0, 0.0], [0.0, 1.0]]]);
        let p1 = poly(&[[[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0], [0.0, 2.0]]]);
        let p2 = poly(&[
            [[1.5, 2.0], [0.0, 3.0]],
            [[0.0, -3.0], [0.0, -2.0]],
            [[0.5, 2.0], [0.0, 2.0]],
        ]);
        let p3 = poly(&[
            [[1.0 / 6.0, -14.0], [0.0, -23.0 / 3.0]],
            [[2.0, 21.0], [0.0, 14.0]],
            [[-0.5, -10.0], [0.0, -6.0]],
            [[1.0 / 6.0, 2.0], [0.0, 4.0 / 3.0]],
        ]);
        PiecewiseMatrixPolynomial::from_pieces(vec![-1.0, 0.0, 1.0, 2.0, 3.0], vec![p0, p1, p2, p3])
            .unwrap()
    }

    fn close(a: &Matrix, b: &Matrix, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn eval_examples() {
        let z = showcase_z();
        assert!(z.eval(-2.0).is_zero());
        assert_eq!(z.eval(0.5), mat([[1.5, 0.5], [0.0, 2.0]]));
        assert!((z.eval(2.0)[(0, 0)] - 3.5).abs() < 1e-12);
        // closed final breakpoint, zero beyond
        assert!(!z.eval(3.0).is_zero());
        assert!(z.eval(3.5).is_zero());
    }

    #[test]
    fn knots_take_right_segment() {
        let f = PiecewiseMatrixPolynomial::from_pieces(
            vec![0.0, 1.0, 2.0],
            vec![
                MatrixPolynomial::constant(Matrix::scalar(1, 1.0)),
                MatrixPolynomial::constant(Matrix::scalar(1, 5.0)),
            ],
        )
        .unwrap();
        assert_eq!(f.eval(1.0)[(0, 0)], 5.0);
        assert_eq!(f.left_limit(1.0)[(0, 0)], 1.0);
        assert_eq!(f.eval(2.0)[(0, 0)], 5.0);
    }

    #[test]
    fn differentiate_examples() {
        let c = PiecewiseMatrixPolynomial::new(
            vec![0.0, 1.0, 2.0],
            vec![
                MatrixPolynomial::constant(Matrix::identity(2)),
                MatrixPolynomial::constant(Matrix::identity(2)),
            ],
            Matrix::identity(2),
            true,
        )
        .unwrap();
        let dc = c.differentiate();
        for t in [-1.0, 0.5, 1.5, 7.0] {
            assert!(dc.eval(t).is_zero());
        }
        let lin = PiecewiseMatrixPolynomial::single(0.0, 1.0, poly(&[[[1.0, 2.0], [3.0, 4.0]], [[5.0, 6.0], [7.0, 8.0]]]))
            .unwrap()
            .differentiate();
        assert_eq!(lin.pieces()[0], poly(&[[[5.0, 6.0], [7.0, 8.0]]]));
        let dz = showcase_z().differentiate();
        assert_eq!(dz.eval(0.5), mat([[1.0, 1.0], [0.0, 2.0]]));
    }

    #[test]
    fn integrate_examples() {
        let id = PiecewiseMatrixPolynomial::single(-1.0, 0.0, MatrixPolynomial::constant(Matrix::identity(2)))
            .unwrap();
        assert!(close(&id.integrate(-1.0, 0.0), &Matrix::identity(2), 1e-15));
        let z = showcase_z();
        assert!(close(&z.integrate(0.0, 1.0), &mat([[1.5, 0.5], [0.0, 2.0]]), 1e-14));
        assert!(z.integrate(0.0, 0.0).is_zero());
        assert!(close(&z.integrate(1.0, 0.0), &mat([[-1.5, -0.5], [0.0, -2.0]]), 1e-14));
        // left tail constant and right extension
        let tails = PiecewiseMatrixPolynomial::new(
            vec![0.0, 1.0],
            vec![poly(&[[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]]])],
            Matrix::identity(2),
            true,
        )
        .unwrap();
        // ∫_{-1}^{2}: 1 (left) + 2 (t from 0 to 2) = 3
        assert!(close(&tails.integrate(-1.0, 2.0), &Matrix::scalar(2, 3.0), 1e-14));
    }

    #[test]
    fn shift_examples() {
        let z = showcase_z();
        assert_eq!(z.shift(0.0), z);
        let t = PiecewiseMatrixPolynomial::single(0.0, 1.0, poly(&[[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]]]))
            .unwrap();
        let s = t.shift(1.0);
        assert_eq!(s.breakpoints(), &[-1.0, 0.0]);
        assert_eq!(s.pieces()[0], poly(&[[[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]]]));
        let shifted = z.shift(-1.0);
        assert!(close(&shifted.eval(1.5), &mat([[1.5, 0.5], [0.0, 2.0]]), 1e-14));
    }

    #[test]
    fn reflect_evaluates_mirror() {
        let z = showcase_z();
        let r = z.reflect().unwrap();
        for t in [-2.9, -2.5, -1.3, -0.5, 0.2, 0.7, 1.5] {
            assert!(close(&r.eval(t), &z.eval(-t), 1e-12), "t={t}");
        }
        // Z(c − s) as a function of s
        let c = 1.7;
        let kernel = r.shift(-c);
        for s in [-0.8, -0.1, 0.3, 0.9, 2.4] {
            assert!(close(&kernel.eval(s), &z.eval(c - s), 1e-12));
        }
        let with_left = PiecewiseMatrixPolynomial::new(
            vec![0.0, 1.0],
            vec![MatrixPolynomial::constant(Matrix::scalar(1, 2.0))],
            Matrix::scalar(1, 3.0),
            false,
        )
        .unwrap();
        let r = with_left.reflect().unwrap();
        assert_eq!(r.eval(10.0)[(0, 0)], 3.0);
        assert_eq!(r.eval(-0.5)[(0, 0)], 2.0);
        assert_eq!(r.eval(-5.0)[(0, 0)], 0.0);
    }

    #[test]
    fn reflect_rejects_polynomial_tail() {
        let p = PiecewiseMatrixPolynomial::new(
            vec![0.0, 1.0],
            vec![poly(&[[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]]])],
            Matrix::zeros(2),
            true,
        )
        .unwrap();
        assert!(matches!(p.reflect(), Err(Error::Unrepresentable(_))));
    }

    #[test]
    fn constructor_validation() {
        let p = MatrixPolynomial::zero(2);
        assert!(PiecewiseMatrixPolynomial::from_pieces(vec![0.0], vec![p.clone()]).is_err());
        assert!(PiecewiseMatrixPolynomial::from_pieces(vec![1.0, 0.0], vec![p.clone()]).is_err());
        assert!(PiecewiseMatrixPolynomial::from_pieces(vec![0.0, f64::NAN], vec![p.clone()]).is_err());
        assert!(PiecewiseMatrixPolynomial::from_pieces(
            vec![0.0, 1.0, 2.0],
            vec![p, MatrixPolynomial::zero(3)]
        )
        .is_err());
    }

    #[test]
    fn degree_cap_enforced() {
        let coeffs = vec![Matrix::identity(1); MAX_DEGREE + 2];
        assert!(matches!(
            MatrixPolynomial::new(coeffs),
            Err(Error::DegreeCap { degree: 65, .. })
        ));
        let big = MatrixPolynomial::new(vec![Matrix::identity(1); 40]).unwrap();
        assert!(big.mul(&big).is_err());
        let edge = MatrixPolynomial::new(vec![Matrix::identity(1); MAX_DEGREE + 1]).unwrap();
        assert!(edge.antiderivative().is_err());
    }

    #[test]
    fn trailing_zeros_trimmed() {
        let p = MatrixPolynomial::new(vec![Matrix::identity(2), Matrix::zeros(2), Matrix::zeros(2)])
            .unwrap();
        assert_eq!(p.degree(), 0);
        assert_eq!(MatrixPolynomial::zero(2).degree(), 0);
    }

    #[test]
    fn product_respects_order() {
        let a = mat([[0.0, 1.0], [0.0, 0.0]]);
        let b = mat([[1.0, 0.0], [0.0, 2.0]]);
        let f = PiecewiseMatrixPolynomial::single(0.0, 2.0, MatrixPolynomial::constant(a.clone())).unwrap();
        let g = PiecewiseMatrixPolynomial::single(1.0, 3.0, MatrixPolynomial::constant(b.clone())).unwrap();
        let fg = f.product(&g).unwrap();
        assert!(fg.eval(0.5).is_zero());
        assert_eq!(fg.eval(1.5), a.matmul(&b));
        assert!(fg.eval(2.5).is_zero());
        assert_ne!(a.matmul(&b), b.matmul(&a));
        assert_eq!(g.product(&f).unwrap().eval(1.5), b.matmul(&a));
    }

    #[test]
    fn add_keeps_tails() {
        let f = PiecewiseMatrixPolynomial::new(
            vec![0.0, 1.0],
            vec![MatrixPolynomial::constant(Matrix::scalar(1, 1.0))],
            Matrix::scalar(1, 4.0),
            true,
        )
        .unwrap();
        let g = PiecewiseMatrixPolynomial::single(0.5, 2.0, MatrixPolynomial::constant(Matrix::scalar(1, 2.0)))
            .unwrap();
        let h = f.add(&g).unwrap();
        for t in [-3.0, 0.25, 0.75, 1.5, 2.5, 10.0] {
            assert_eq!(h.eval(t), &f.eval(t) + &g.eval(t), "t={t}");
        }
    }

    #[test]
    fn restrict_clips() {
        let z = showcase_z();
        let r = z.restrict(-0.5, 2.5).unwrap();
        assert!(r.eval(-0.75).is_zero());
        assert!(close(&r.eval(1.25), &z.eval(1.25), 1e-14));
        assert!(close(&r.eval(2.5), &z.eval(2.5), 1e-14));
        assert!(r.eval(2.75).is_zero());
        assert!(z.restrict(1.0, 1.0).is_err());
    }

    /// Composite Gauss–Legendre reference for `∫ kernel(ϑ − s) g(s) ds`.
    fn convolution_by_quadrature(
        kernel: &PiecewiseMatrixPolynomial,
        g: &PiecewiseMatrixPolynomial,
        theta: f64,
    ) -> Matrix {
        let nodes = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
            (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
            (0.0, 0.568_888_888_888_888_9),
            (0.538_469_310_105_683, 0.478_628_670_499_366_5),
            (0.906_179_845_938_664, 0.236_926_885_056_189_1),
        ];
        let mut cuts: Vec<f64> = g.breakpoints().to_vec();
        for &b in kernel.breakpoints() {
            let s = theta - b;
            if s > g.start() && s < g.end() {
                cuts.push(s);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out = Matrix::zeros(kernel.dim());
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo < 1e-15 {
                continue;
            }
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, wt) in nodes {
                let s = mid + half * x;
                let val = kernel.eval(theta - s).matmul(&g.eval(s));
                out.axpy(wt * half, &val);
            }
        }
        out
    }

    #[test]
    fn convolution_matches_quadrature() {
        let z = showcase_z().shift(-1.0);
        let g = PiecewiseMatrixPolynomial::from_pieces(
            vec![-1.0, -0.4, 0.0],
            vec![
                poly(&[[[1.0, 0.5], [0.0, -1.0]], [[0.2, 0.0], [1.0, 0.3]]]),
                poly(&[[[0.0, 1.0], [2.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]]]),
            ],
        )
        .unwrap();
        let conv = PiecewiseMatrixPolynomial::convolve(&z, &g).unwrap();
        for k in 0..60 {
            let theta = -1.95 + k as f64 * 0.083;
            let want = convolution_by_quadrature(&z, &g, theta);
            assert!(close(&conv.eval(theta), &want, 1e-10), "theta={theta}");
        }
    }

    #[test]
    fn convolution_rejects_infinite_support() {
        let g = PiecewiseMatrixPolynomial::new(
            vec![0.0, 1.0],
            vec![MatrixPolynomial::constant(Matrix::identity(1))],
            Matrix::identity(1),
            false,
        )
        .unwrap();
        assert!(PiecewiseMatrixPolynomial::convolve(&g, &g).is_err());
    }

    #[test]
    fn convolution_with_kernel_tails() {
        // kernel ≡ 2 on (−∞, 0), t on [0, 1], t on [1, ∞)
        let kernel = PiecewiseMatrixPolynomial::new(
            vec![0.0, 1.0],
            vec![MatrixPolynomial::new(vec![Matrix::zeros(1), Matrix::identity(1)]).unwrap()],
            Matrix::scalar(1, 2.0),
            true,
        )
        .unwrap();
        let g = PiecewiseMatrixPolynomial::single(0.0, 0.5, MatrixPolynomial::constant(Matrix::identity(1)))
            .unwrap();
        let conv = PiecewiseMatrixPolynomial::convolve(&kernel, &g).unwrap();
        for theta in [-3.0, -0.2, 0.25, 0.7, 1.2, 4.0] {
            let want = convolution_by_quadrature(&kernel, &g, theta);
            assert!(close(&conv.eval(theta), &want, 1e-12), "theta={theta}");
        }
        assert_eq!(conv.eval(-10.0)[(0, 0)], 1.0);
        assert!(conv.right_extension());
    }

    #[test]
    fn json_schema() {
        let z = showcase_z();
        let s = serde_json::to_string(&z).unwrap();
        let back: PiecewiseMatrixPolynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, z);
        let minimal = r#"{"breakpoints":[-1,0],"pieces":[[[[0,0],[0,0]],[[1,0],[0,1]]]]}"#;
        let p: PiecewiseMatrixPolynomial = serde_json::from_str(minimal).unwrap();
        assert_eq!(p.eval(-0.5), Matrix::scalar(2, -0.5));
        let bad = r#"{"breakpoints":[0,-1],"pieces":[[[[1]]]]}"#;
        assert!(serde_json::from_str::<PiecewiseMatrixPolynomial>(bad).is_err());
    }

    fn arb_piecewise() -> impl Strategy<Value = PiecewiseMatrixPolynomial> {
        (1usize..=3, 1usize..=4).prop_flat_map(|(d, k)| {
            let widths = proptest::collection::vec(0.2f64..1.5, k);
            let pieces = proptest::collection::vec(
                (1usize..=4).prop_flat_map(move |n| {
                    proptest::collection::vec(
                        proptest::collection::vec(-1.0f64..1.0, d * d)
                            .prop_map(move |v| Matrix::from_row_major(d, v).unwrap()),
                        n,
                    )
                }),
                k,
            );
            let left = proptest::collection::vec(-1.0f64..1.0, d * d)
                .prop_map(move |v| Matrix::from_row_major(d, v).unwrap());
            (-2.0f64..0.0, widths, pieces, left, any::<bool>()).prop_map(
                |(start, widths, pieces, left, ext)| {
                    let mut bps = vec![start];
                    for w in widths {
                        let last = *bps.last().unwrap();
                        bps.push(last + w);
                    }
                    let pieces = pieces
                        .into_iter()
                        .map(|c| MatrixPolynomial::new(c).unwrap())
                        .collect();
                    PiecewiseMatrixPolynomial::new(bps, pieces, left, ext).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn integral_derivative_is_value(p in arb_piecewise(), u in 0.0f64..1.0) {
            // pick b away from knots
            let b = p.start() + u * (p.end() - p.start() + 1.0) - 0.5;
            prop_assume!(p.breakpoints().iter().all(|k| (k - b).abs() > 1e-3));
            let a = p.start() - 1.0;
            let h = 1e-5;
            let fd = (&p.integrate(a, b + h) - &p.integrate(a, b - h)).scale(0.5 / h);
            let val = p.eval(b);
            prop_assert!(fd.max_abs_diff(&val) <= 1e-7 * val.max_norm().max(1.0));
        }

        #[test]
        fn integral_is_additive(p in arb_piecewise(), x in proptest::collection::vec(-3.0f64..6.0, 3)) {
            let mut x = x;
            x.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let whole = p.integrate(x[0], x[2]);
            let parts = &p.integrate(x[0], x[1]) + &p.integrate(x[1], x[2]);
            prop_assert!(whole.max_abs_diff(&parts) <= 1e-12 * whole.max_norm().max(1.0));
        }

        #[test]
        fn shifts_compose(p in arb_piecewise(), s1 in -2.0f64..2.0, s2 in -2.0f64..2.0, t in -4.0f64..6.0) {
            let twice = p.shift(s1).shift(s2);
            let once = p.shift(s1 + s2);
            let tt = t;
            prop_assume!(once.breakpoints().iter().all(|k| (k - tt).abs() > 1e-9));
            prop_assert!(twice.eval(t).max_abs_diff(&once.eval(t)) <= 1e-12 * once.eval(t).max_norm().max(1.0));
        }
    }
}

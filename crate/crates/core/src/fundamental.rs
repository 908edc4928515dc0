//! Fundamental matrix functions `Z`: the solutions with identity history.
//!
//! Continuous, on `[(u−1)σ, uσ)`:
//! `Z(ϑ) = Σ_{r=0}^{u} Q_{r+1}(rσ) (ϑ − (r−1)σ)^r / r!`, with `Z = I` on
//! `[−σ, 0)` and `Z = Θ` before `−σ`.
//!
//! Discrete, for `(n−1)(m+1)+1 ≤ u ≤ n(m+1)`:
//! `Z(u) = Σ_{r=0}^{n} C(u − (r−1)m, r) Q_{r+1}(rm)`, with `Z = I` on
//! `{−m, …, 0}` and `Z = Θ` before `−m`.
//!
//! The general recursion path is always the value of record; the
//! commutative and `A₁ = Θ` reductions exist as cross-checks.

use std::collections::HashMap;
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::linalg::{binomial_f64, commutation_residual, commutes_default, Matrix, DEFAULT_COMMUTE_RTOL};
use crate::piecewise::{MatrixPolynomial, PiecewiseMatrixPolynomial};
use crate::q_sequence::{build_q_table, q_commutative_closed_form, QTable};
use crate::system::DelaySystem;

/// Number of delay intervals `k ≥ 1` with `kσ ≥ horizon`.
pub fn segments_for_horizon(sigma: f64, horizon: f64) -> usize {
    let ratio = horizon / sigma;
    let nearest = ratio.round();
    let k = if (ratio - nearest).abs() <= 1e-12 * nearest.max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    (k as usize).max(1)
}

/// Continuous `Z` materialized on `[−σ, kσ]` where `kσ` is the first
/// multiple of `σ` not below `horizon`; zero before `−σ`.
pub fn build_fundamental_continuous(
    sys: &DelaySystem,
    horizon: f64,
) -> Result<PiecewiseMatrixPolynomial> {
    let sigma = sys.sigma()?;
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidHorizon(format!(
            "horizon must be positive and finite, got {horizon}"
        )));
    }
    let segments = segments_for_horizon(sigma, horizon);
    let q = build_q_table(sys.a0(), sys.a1(), segments)?;
    build_from_table(&q, sigma, segments)
}

/// Continuous `Z` on `[−σ, segments·σ]` from a prebuilt table.
pub fn build_from_table(
    q: &QTable,
    sigma: f64,
    segments: usize,
) -> Result<PiecewiseMatrixPolynomial> {
    if q.depth() < segments {
        return Err(Error::InvalidHorizon(format!(
            "table depth {} is below the {segments} segments requested",
            q.depth()
        )));
    }
    let d = q.dim();
    let mut breakpoints = Vec::with_capacity(segments + 2);
    breakpoints.push(-sigma);
    let mut pieces = vec![MatrixPolynomial::constant(Matrix::identity(d))];
    let mut acc = MatrixPolynomial::constant(Matrix::identity(d));
    for u in 1..=segments {
        breakpoints.push((u - 1) as f64 * sigma);
        // Each segment adds the term r = u to the previous sum.
        let fact: f64 = (1..=u).map(|i| i as f64).product();
        let term = MatrixPolynomial::shifted_power(&q[u].scale(1.0 / fact), (u as f64 - 1.0) * sigma, u)?;
        acc = acc.add(&term)?;
        pieces.push(acc.clone());
    }
    breakpoints.push(segments as f64 * sigma);
    PiecewiseMatrixPolynomial::from_pieces(breakpoints, pieces)
}

fn commutation_guard(a0: &Matrix, a1: &Matrix) -> Result<()> {
    if commutes_default(a0, a1)? {
        Ok(())
    } else {
        let pq = a0.matmul(a1).max_norm().max(a1.matmul(a0).max_norm());
        Err(Error::NotCommuting {
            residual: commutation_residual(a0, a1)?,
            tol: DEFAULT_COMMUTE_RTOL * pq,
        })
    }
}

/// Continuous segment index `u` with `ϑ ∈ [(u−1)σ, uσ)`, for `ϑ ≥ 0`.
fn continuous_segment(sigma: f64, t: f64) -> usize {
    (t / sigma).floor() as usize + 1
}

/// Direct evaluation of
/// `Σ_{j=0}^{u} Σ_{l=0}^{j} C(j,l) A₀^{j−l} A₁^l (ϑ − (j−1)σ)^j / j!`,
/// valid when `A₀A₁ = A₁A₀`.
pub fn fundamental_commutative_continuous(sys: &DelaySystem, t: f64) -> Result<Matrix> {
    let sigma = sys.sigma()?;
    commutation_guard(sys.a0(), sys.a1())?;
    let d = sys.dim();
    if t < -sigma {
        return Ok(Matrix::zeros(d));
    }
    if t < 0.0 {
        return Ok(Matrix::identity(d));
    }
    let u = continuous_segment(sigma, t);
    let mut out = Matrix::zeros(d);
    let mut fact = 1.0;
    for j in 0..=u {
        if j > 0 {
            fact *= j as f64;
        }
        let weight = (t - (j as f64 - 1.0) * sigma).powi(j as i32) / fact;
        out.axpy(weight, &q_commutative_closed_form(sys.a0(), sys.a1(), j)?);
    }
    Ok(out)
}

/// The `A₁ = Θ` reduction `Σ_{j=0}^{u} A₀^j (ϑ − (j−1)σ)^j / j!`, the
/// delayed matrix exponential of `A₀`.
pub fn delayed_exponential(a0: &Matrix, sigma: f64, t: f64) -> Matrix {
    let d = a0.dim();
    if t < -sigma {
        return Matrix::zeros(d);
    }
    if t < 0.0 {
        return Matrix::identity(d);
    }
    let u = continuous_segment(sigma, t);
    let mut out = Matrix::zeros(d);
    let mut power = Matrix::identity(d);
    let mut fact = 1.0;
    for j in 0..=u {
        if j > 0 {
            fact *= j as f64;
            power = power.matmul(a0);
        }
        out.axpy((t - (j as f64 - 1.0) * sigma).powi(j as i32) / fact, &power);
    }
    out
}

/// Discrete segment index `n = ⌈u/(m+1)⌉` for `u ≥ 1`.
pub fn discrete_segment(m: usize, u: i64) -> usize {
    debug_assert!(u >= 1);
    (u as usize + m) / (m + 1)
}

/// Discrete fundamental sequence with an on-demand table and value memo.
///
/// The memo is a pure cache: every call with the same `u` returns the same
/// matrix, and the structure is safe to share across threads.
#[derive(Debug)]
pub struct DiscreteFundamental {
    system: DelaySystem,
    lag: usize,
    qtable: RwLock<QTable>,
    cache: RwLock<HashMap<i64, Matrix>>,
}

impl DiscreteFundamental {
    pub fn new(system: DelaySystem) -> Result<Self> {
        let lag = system.lag()?;
        let qtable = build_q_table(system.a0(), system.a1(), 1)?;
        Ok(Self {
            system,
            lag,
            qtable: RwLock::new(qtable),
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn system(&self) -> &DelaySystem {
        &self.system
    }

    pub fn lag(&self) -> usize {
        self.lag
    }

    /// Snapshot of the auxiliary table extended to at least `depth`.
    pub fn qtable(&self, depth: usize) -> Result<QTable> {
        self.ensure_depth(depth)?;
        Ok(self.qtable.read().expect("q table lock").clone())
    }

    fn ensure_depth(&self, depth: usize) -> Result<()> {
        if self.qtable.read().expect("q table lock").depth() >= depth {
            return Ok(());
        }
        let mut table = self.qtable.write().expect("q table lock");
        table.extend_to(self.system.a0(), self.system.a1(), depth)
    }

    /// `Z(u)`.
    pub fn value(&self, u: i64) -> Result<Matrix> {
        let d = self.system.dim();
        let m = self.lag as i64;
        if u < -m {
            return Ok(Matrix::zeros(d));
        }
        if u <= 0 {
            return Ok(Matrix::identity(d));
        }
        if let Some(z) = self.cache.read().expect("cache lock").get(&u) {
            return Ok(z.clone());
        }
        let n = discrete_segment(self.lag, u);
        self.ensure_depth(n)?;
        let z = {
            let table = self.qtable.read().expect("q table lock");
            let mut z = Matrix::zeros(d);
            for r in 0..=n {
                let c = binomial_f64(u - (r as i64 - 1) * m, r as u64)?;
                z.axpy(c, &table[r]);
            }
            z
        };
        self.cache
            .write()
            .expect("cache lock")
            .entry(u)
            .or_insert_with(|| z.clone());
        Ok(z)
    }

    /// `Σ_{j=0}^{n} C(u−(j−1)m, j) Σ_{l=0}^{j} C(j,l) A₀^{j−l} A₁^l`,
    /// valid when `A₀A₁ = A₁A₀`.
    pub fn commutative(&self, u: i64) -> Result<Matrix> {
        commutation_guard(self.system.a0(), self.system.a1())?;
        let d = self.system.dim();
        let m = self.lag as i64;
        if u < -m {
            return Ok(Matrix::zeros(d));
        }
        if u <= 0 {
            return Ok(Matrix::identity(d));
        }
        let n = discrete_segment(self.lag, u);
        let mut z = Matrix::zeros(d);
        for j in 0..=n {
            let c = binomial_f64(u - (j as i64 - 1) * m, j as u64)?;
            z.axpy(c, &q_commutative_closed_form(self.system.a0(), self.system.a1(), j)?);
        }
        Ok(z)
    }
}

/// Discrete commutative fundamental value, see [`DiscreteFundamental::commutative`].
pub fn fundamental_commutative_discrete(fund: &DiscreteFundamental, u: i64) -> Result<Matrix> {
    fund.commutative(u)
}

/// Discrete `Z(u)`, see [`DiscreteFundamental::value`].
pub fn fundamental_discrete(fund: &DiscreteFundamental, u: i64) -> Result<Matrix> {
    fund.value(u)
}

/// The `A₁ = Θ` discrete reduction `Σ_{j=0}^{n} C(u − (j−1)m, j) A₀^j`.
pub fn delayed_exponential_discrete(a0: &Matrix, m: usize, u: i64) -> Result<Matrix> {
    let d = a0.dim();
    let mi = m as i64;
    if u < -mi {
        return Ok(Matrix::zeros(d));
    }
    if u <= 0 {
        return Ok(Matrix::identity(d));
    }
    let n = discrete_segment(m, u);
    let mut out = Matrix::zeros(d);
    let mut power = Matrix::identity(d);
    for j in 0..=n {
        if j > 0 {
            power = power.matmul(a0);
        }
        out.axpy(binomial_f64(u - (j as i64 - 1) * mi, j as u64)?, &power);
    }
    Ok(out)
}

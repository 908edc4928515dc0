//! Brute-force references: a fixed-step method-of-steps integrator for the
//! continuous equation and the literal recursion for the discrete one.
//!
//! Nothing here uses the auxiliary table, the fundamental matrices or the
//! closed-form solvers.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::system::{DelaySystem, TimeKind};
use crate::trajectory::TrajectoryTable;

pub const DEFAULT_SUBSTEPS: usize = 2048;
pub const MIN_SUBSTEPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IntegratorConfig {
    pub substeps_per_delay: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            substeps_per_delay: DEFAULT_SUBSTEPS,
        }
    }
}

impl IntegratorConfig {
    pub fn new(substeps_per_delay: usize) -> Result<Self> {
        let cfg = Self { substeps_per_delay };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps_per_delay < MIN_SUBSTEPS {
            return Err(Error::InvalidConfig(format!(
                "substeps_per_delay must be at least {MIN_SUBSTEPS}, got {}",
                self.substeps_per_delay
            )));
        }
        Ok(())
    }
}

/// Samples of `X` on the uniform grid `−σ + jh`, `h = σ/N`, with cubic
/// interpolation inside each delay window.
#[derive(Debug, Clone)]
pub struct OracleTrajectory {
    sigma: f64,
    substeps: usize,
    /// Number of stored windows, the history window included.
    windows: usize,
    values: Vec<Matrix>,
}

impl OracleTrajectory {
    pub fn step(&self) -> f64 {
        self.sigma / self.substeps as f64
    }

    /// Right end `Kσ` of the integrated range.
    pub fn end(&self) -> f64 {
        (self.windows - 1) as f64 * self.sigma
    }

    pub fn time(&self, j: usize) -> f64 {
        let n = self.substeps;
        let w = j / n;
        -self.sigma + w as f64 * self.sigma + (j % n) as f64 * self.step()
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, &Matrix)> {
        self.values.iter().enumerate().map(|(j, v)| (self.time(j), v))
    }

    /// Dense output at `t ∈ [−σ, Kσ]`.
    pub fn eval(&self, t: f64) -> Matrix {
        assert!(
            t >= -self.sigma && t <= self.end() + 1e-12 * self.sigma.max(1.0),
            "time {t} outside the integrated range"
        );
        let n = self.substeps;
        let x = (t + self.sigma) / self.sigma;
        let w = (x.floor() as usize).min(self.windows);
        let local = ((x - w as f64) * n as f64).clamp(0.0, n as f64);
        if w == self.windows {
            return self.values[w * n].clone();
        }
        interpolate(&self.values[w * n..=(w + 1) * n], local)
    }

    /// Samples every `stride` grid points plus the final point.
    pub fn to_table(&self, stride: usize) -> Result<TrajectoryTable> {
        let stride = stride.max(1);
        let last = self.values.len() - 1;
        let mut idx: Vec<usize> = (0..=last).step_by(stride).collect();
        if *idx.last().expect("non-empty") != last {
            idx.push(last);
        }
        TrajectoryTable::new(
            TimeKind::Continuous,
            idx.iter().map(|&j| self.time(j)).collect(),
            idx.iter().map(|&j| self.values[j].clone()).collect(),
        )
    }
}

/// Four-point Lagrange interpolation in one window of `n + 1` samples at
/// fractional index `x ∈ [0, n]`; the stencil stays inside the window.
fn interpolate(window: &[Matrix], x: f64) -> Matrix {
    let n = window.len() - 1;
    let i = (x.floor() as usize).min(n - 1);
    if x == i as f64 {
        return window[i].clone();
    }
    let s = i.saturating_sub(1).min(n - 3);
    let mut out = Matrix::zeros(window[0].dim());
    for a in 0..4 {
        let mut w = 1.0;
        for b in 0..4 {
            if a != b {
                w *= (x - (s + b) as f64) / (a as f64 - b as f64);
            }
        }
        out.axpy(w, &window[s + a]);
    }
    out
}

/// Method of steps for `Ẋ(ϑ) = A₀X(ϑ−σ) + X(ϑ−σ)A₁ + G(ϑ)` on `[0, Kσ]`
/// with `Kσ ≥ T`.
///
/// The right-hand side does not depend on `X(ϑ)`, so each classical
/// fourth-order step reduces to Simpson's rule over the step; the delayed
/// values at half steps come from the history directly in the first window
/// and from cubic interpolation of the previous window afterwards.
pub fn integrate_continuous(
    sys: &DelaySystem,
    psi: impl Fn(f64) -> Matrix,
    g: impl Fn(f64) -> Matrix,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<OracleTrajectory> {
    cfg.validate()?;
    let (a0, a1, sigma) = (sys.a0(), sys.a1(), sys.sigma()?);
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidHorizon(format!("horizon must be positive, got {horizon}")));
    }
    let n = cfg.substeps_per_delay;
    let h = sigma / n as f64;
    let ratio = horizon / sigma;
    let windows = if (ratio - ratio.round()).abs() <= 1e-12 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    }
    .max(1);

    let rhs = |lag: &Matrix, t: f64| -> Matrix {
        let mut f = a0.matmul(lag);
        f += &lag.matmul(a1);
        f += &g(t);
        f
    };

    let mut values: Vec<Matrix> = (0..=n).map(|j| psi(-sigma + j as f64 * h)).collect();
    for k in 0..windows {
        let base = k * n;
        let start = k as f64 * sigma;
        for i in 0..n {
            let t = start + i as f64 * h;
            let lag0 = values[base + i].clone();
            let lag1 = values[base + i + 1].clone();
            let lag_mid = if k == 0 {
                psi(-sigma + (i as f64 + 0.5) * h)
            } else {
                interpolate(&values[base..=base + n], i as f64 + 0.5)
            };
            let f0 = rhs(&lag0, t);
            let fm = rhs(&lag_mid, t + 0.5 * h);
            let f1 = rhs(&lag1, t + h);
            let mut next = values[base + n + i].clone();
            next.axpy(h / 6.0, &f0);
            next.axpy(4.0 * h / 6.0, &fm);
            next.axpy(h / 6.0, &f1);
            values.push(next);
        }
    }
    Ok(OracleTrajectory {
        sigma,
        substeps: n,
        windows: windows + 1,
        values,
    })
}

/// `X(u+1) = X(u) + A₀X(u−m) + X(u−m)A₁ + G(u)` from `Ψ(−m), …, Ψ(0)`,
/// for `u = −m..N`.
pub fn step_discrete(
    sys: &DelaySystem,
    psi: &[Matrix],
    g: impl Fn(usize) -> Matrix,
    horizon: usize,
) -> Result<TrajectoryTable> {
    let (a0, a1, m) = (sys.a0(), sys.a1(), sys.lag()?);
    if psi.len() != m + 1 {
        return Err(Error::InvalidHistory(format!(
            "history needs {} values, got {}",
            m + 1,
            psi.len()
        )));
    }
    let mut x: Vec<Matrix> = psi.to_vec();
    for u in 0..horizon {
        let cur = &x[u + m];
        let lag = &x[u];
        let mut next = cur.clone();
        next += &a0.matmul(lag);
        next += &lag.matmul(a1);
        next += &g(u);
        x.push(next);
    }
    let times = (-(m as i64)..=horizon as i64).map(|u| u as f64).collect();
    TrajectoryTable::new(TimeKind::Discrete, times, x)
}

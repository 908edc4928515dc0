//! Explicit solutions of the initial-value problems
//! `Ẋ(ϑ) = A₀X(ϑ−σ) + X(ϑ−σ)A₁ + G(ϑ)`, `X = Ψ` on `[−σ, 0]`, and
//! `ΔX(u) = A₀X(u−m) + X(u−m)A₁ + G(u)`, `X = Ψ` on `{−m, …, 0}`.
//!
//! Continuous:
//! `X(ϑ) = Z(ϑ)Ψ(−σ) + ∫_{−σ}^0 Z(ϑ−σ−s)Ψ'(s) ds + ∫_0^ϑ Z(ϑ−σ−s)G(s) ds`.
//!
//! Discrete:
//! `X(u) = Z(u)Ψ(−m) + Σ_{r=−m+1}^{0} Z(u−m−r)ΔΨ(r−1) + Σ_{r=1}^{u} Z(u−m−r)G(r−1)`.
//!
//! Both formulas require `A₁Ψ = ΨA₁` and `A₁G = GA₁`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fundamental::{build_fundamental_continuous, DiscreteFundamental};
use crate::linalg::Matrix;
use crate::piecewise::{MatrixPolynomial, PiecewiseMatrixPolynomial};
use crate::system::{DelaySystem, TimeKind};
use crate::trajectory::TrajectoryTable;

pub const DEFAULT_HYPOTHESIS_TOL: f64 = 1e-10;
/// Tolerance on value and slope jumps of a continuous history.
pub const HISTORY_SMOOTHNESS_TOL: f64 = 1e-9;
const GRID_PER_PIECE: usize = 65;
const KNOT_TOL: f64 = 1e-12;

/// Initial data `Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistorySpec {
    /// `Ψ` on a window containing `[−σ, 0]`.
    Continuous(PiecewiseMatrixPolynomial),
    /// `Ψ(−m), …, Ψ(0)`.
    Discrete(Vec<Matrix>),
}

impl HistorySpec {
    pub fn kind(&self) -> TimeKind {
        match self {
            HistorySpec::Continuous(_) => TimeKind::Continuous,
            HistorySpec::Discrete(_) => TimeKind::Discrete,
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            HistorySpec::Continuous(p) => Some(p.dim()),
            HistorySpec::Discrete(v) => v.first().map(Matrix::dim),
        }
    }

    /// `Ψ ≡ c` on `[−σ, 0]` or `{−m, …, 0}`.
    pub fn constant(sys: &DelaySystem, c: Matrix) -> Result<Self> {
        sys.a0().check_same_dim(&c)?;
        match sys.kind() {
            TimeKind::Continuous => Ok(HistorySpec::Continuous(PiecewiseMatrixPolynomial::single(
                -sys.sigma()?,
                0.0,
                MatrixPolynomial::constant(c),
            )?)),
            TimeKind::Discrete => Ok(HistorySpec::Discrete(vec![c; sys.lag()? + 1])),
        }
    }

    pub fn zero(sys: &DelaySystem) -> Result<Self> {
        Self::constant(sys, Matrix::zeros(sys.dim()))
    }

    /// Checks coverage and smoothness against `sys`, returning the history
    /// restricted to `[−σ, 0]` for the continuous case.
    fn checked_continuous(&self, sys: &DelaySystem) -> Result<PiecewiseMatrixPolynomial> {
        let sigma = sys.sigma()?;
        let HistorySpec::Continuous(p) = self else {
            return Err(Error::WrongKind {
                expected: "continuous",
            });
        };
        sys.a0().check_same_dim(p.left_value())?;
        let tol = KNOT_TOL * sigma.max(1.0);
        if p.start() > -sigma + tol || (p.end() < -tol && !p.right_extension()) {
            return Err(Error::InvalidHistory(format!(
                "history covers [{}, {}], which does not contain [{}, 0]",
                p.start(),
                p.end(),
                -sigma
            )));
        }
        let dp = p.differentiate();
        for &k in p.breakpoints().iter().filter(|&&k| k > -sigma && k < 0.0) {
            let jump = p.eval(k).max_abs_diff(&p.left_limit(k));
            let slope_jump = dp.eval(k).max_abs_diff(&dp.left_limit(k));
            let scale = p.eval(k).max_norm().max(1.0);
            if jump > HISTORY_SMOOTHNESS_TOL * scale || slope_jump > HISTORY_SMOOTHNESS_TOL * scale {
                return Err(Error::InvalidHistory(format!(
                    "history is not continuously differentiable at {k} (value jump {jump:e}, slope jump {slope_jump:e})"
                )));
            }
        }
        p.restrict(-sigma, 0.0)
    }

    fn checked_discrete<'a>(&'a self, sys: &DelaySystem) -> Result<&'a [Matrix]> {
        let m = sys.lag()?;
        let HistorySpec::Discrete(v) = self else {
            return Err(Error::WrongKind {
                expected: "discrete",
            });
        };
        if v.len() != m + 1 {
            return Err(Error::InvalidHistory(format!(
                "discrete history needs {} values (u = -{m}..0), got {}",
                m + 1,
                v.len()
            )));
        }
        for x in v {
            sys.a0().check_same_dim(x)?;
        }
        Ok(v)
    }
}

/// Forcing term `G`.
#[derive(Debug, Clone, PartialEq)]
pub enum ForcingSpec {
    /// `G` on a window containing `[0, T]`.
    Continuous(PiecewiseMatrixPolynomial),
    /// `G(0), G(1), …`; with `hold_last`, the final value repeats forever.
    Discrete { values: Vec<Matrix>, hold_last: bool },
}

impl ForcingSpec {
    pub fn kind(&self) -> TimeKind {
        match self {
            ForcingSpec::Continuous(_) => TimeKind::Continuous,
            ForcingSpec::Discrete { .. } => TimeKind::Discrete,
        }
    }

    /// `G ≡ c` for all times `≥ 0`.
    pub fn constant(kind: TimeKind, c: Matrix) -> Result<Self> {
        match kind {
            TimeKind::Continuous => Ok(ForcingSpec::Continuous(PiecewiseMatrixPolynomial::new(
                vec![0.0, 1.0],
                vec![MatrixPolynomial::constant(c.clone())],
                Matrix::zeros(c.dim()),
                true,
            )?)),
            TimeKind::Discrete => Ok(ForcingSpec::Discrete {
                values: vec![c],
                hold_last: true,
            }),
        }
    }

    pub fn zero(kind: TimeKind, dim: usize) -> Result<Self> {
        Self::constant(kind, Matrix::zeros(dim))
    }

    /// `G(u)` for a discrete forcing.
    pub fn discrete_value(&self, u: usize) -> Result<&Matrix> {
        match self {
            ForcingSpec::Discrete { values, hold_last } => match values.get(u) {
                Some(v) => Ok(v),
                None if *hold_last && !values.is_empty() => Ok(values.last().expect("non-empty")),
                None => Err(Error::InvalidForcing(format!(
                    "forcing has {} values, G({u}) is needed",
                    values.len()
                ))),
            },
            ForcingSpec::Continuous(_) => Err(Error::WrongKind {
                expected: "discrete",
            }),
        }
    }

    /// The extension `G*` equal to `G` on `[0, T]` and to `G(0)` on
    /// `[−σ, 0)`, zero elsewhere.
    pub fn g_star(&self, sigma: f64, horizon: f64) -> Result<PiecewiseMatrixPolynomial> {
        let g = self.checked_continuous(horizon)?;
        let g0 = MatrixPolynomial::constant(g.eval(0.0));
        let mut breakpoints = vec![-sigma];
        breakpoints.extend_from_slice(g.breakpoints());
        let mut pieces = vec![g0];
        pieces.extend_from_slice(g.pieces());
        PiecewiseMatrixPolynomial::from_pieces(breakpoints, pieces)
    }

    /// `G` restricted to `[0, horizon]`.
    fn checked_continuous(&self, horizon: f64) -> Result<PiecewiseMatrixPolynomial> {
        let ForcingSpec::Continuous(g) = self else {
            return Err(Error::WrongKind {
                expected: "continuous",
            });
        };
        let tol = KNOT_TOL * horizon.max(1.0);
        if g.start() > tol || (g.end() < horizon - tol && !g.right_extension()) {
            return Err(Error::InvalidForcing(format!(
                "forcing covers [{}, {}], which does not contain [0, {horizon}]",
                g.start(),
                g.end()
            )));
        }
        g.restrict(0.0, horizon)
    }
}

/// Largest entry of `A₁P − PA₁` found for one hypothesis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualWitness {
    pub residual: f64,
    pub time: f64,
    /// Zero-based `(row, col)` of the largest entry.
    pub entry: (usize, usize),
}

impl ResidualWitness {
    fn none() -> Self {
        Self {
            residual: 0.0,
            time: 0.0,
            entry: (0, 0),
        }
    }

    fn absorb(&mut self, a1: &Matrix, p: &Matrix, t: f64) {
        let c = a1.commutator(p);
        let (i, j) = c.argmax_abs();
        let r = c[(i, j)].abs();
        if r > self.residual {
            *self = Self {
                residual: r,
                time: t,
                entry: (i, j),
            };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub tol: f64,
    pub history: ResidualWitness,
    pub forcing: ResidualWitness,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.history.residual <= self.tol && self.forcing.residual <= self.tol
    }

    fn enforce(&self, allow: bool) -> Result<bool> {
        for (which, w) in [("history", &self.history), ("forcing", &self.forcing)] {
            if w.residual > self.tol && !allow {
                return Err(Error::HypothesisViolated {
                    which,
                    residual: w.residual,
                    tol: self.tol,
                });
            }
        }
        Ok(!self.passed())
    }
}

fn sample_piecewise(
    p: &PiecewiseMatrixPolynomial,
    lo: f64,
    hi: f64,
    a1: &Matrix,
    out: &mut ResidualWitness,
) {
    let mut knots: Vec<f64> = vec![lo];
    knots.extend(p.breakpoints().iter().copied().filter(|&t| t > lo && t < hi));
    knots.push(hi);
    for w in knots.windows(2) {
        for i in 0..GRID_PER_PIECE {
            let t = w[0] + (w[1] - w[0]) * i as f64 / (GRID_PER_PIECE - 1) as f64;
            let v = if i + 1 == GRID_PER_PIECE { p.left_limit(t) } else { p.eval(t) };
            out.absorb(a1, &v, t);
        }
    }
}

/// Commutation residuals of `Ψ` and `G` with `A₁`.
///
/// Continuous data is sampled on 65 points per polynomial piece (history on
/// `[−σ, 0]`, forcing over its stored support); discrete data is checked at
/// every stored index.
pub fn validate_hypotheses(
    sys: &DelaySystem,
    psi: &HistorySpec,
    g: &ForcingSpec,
    tol: f64,
) -> HypothesisReport {
    let a1 = sys.a1();
    let mut history = ResidualWitness::none();
    let mut forcing = ResidualWitness::none();
    match psi {
        HistorySpec::Continuous(p) => {
            let lo = sys.sigma().map(|s| -s).unwrap_or(p.start()).max(p.start());
            let hi = p.end().min(0.0).max(lo);
            if lo < hi {
                sample_piecewise(p, lo, hi, a1, &mut history);
            } else {
                history.absorb(a1, &p.eval(lo), lo);
            }
        }
        HistorySpec::Discrete(v) => {
            let m = v.len() as f64 - 1.0;
            for (i, x) in v.iter().enumerate() {
                history.absorb(a1, x, i as f64 - m);
            }
        }
    }
    match g {
        ForcingSpec::Continuous(p) => {
            let lo = p.start();
            let mut hi = p.end();
            if p.right_extension() {
                hi += (hi - lo).max(1.0);
            }
            sample_piecewise(p, lo, hi, a1, &mut forcing);
        }
        ForcingSpec::Discrete { values, .. } => {
            for (u, x) in values.iter().enumerate() {
                forcing.absorb(a1, x, u as f64);
            }
        }
    }
    HypothesisReport {
        tol,
        history,
        forcing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Largest accepted commutation residual.
    pub tol: f64,
    /// Evaluate the formulas even when the data fails the hypotheses; the
    /// result is then flagged.
    pub allow_noncommuting: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_HYPOTHESIS_TOL,
            allow_noncommuting: false,
        }
    }
}

/// A solution together with its hypothesis audit.
#[derive(Debug, Clone, PartialEq)]
pub struct Solved<T> {
    pub value: T,
    pub report: HypothesisReport,
    /// Set when the hypotheses failed and the caller asked to proceed.
    pub unsupported_hypothesis: bool,
}

fn check_horizon(horizon: f64) -> Result<()> {
    if horizon.is_finite() && horizon > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidHorizon(format!(
            "horizon must be positive and finite, got {horizon}"
        )))
    }
}

fn assemble_continuous(
    sys: &DelaySystem,
    psi: &PiecewiseMatrixPolynomial,
    g: Option<&PiecewiseMatrixPolynomial>,
    horizon: f64,
) -> Result<PiecewiseMatrixPolynomial> {
    let sigma = sys.sigma()?;
    let z = build_fundamental_continuous(sys, horizon)?;
    // K(τ) = Z(τ − σ), so the integrals are (K ⋆ Ψ')(ϑ) and (K ⋆ G)(ϑ).
    let kernel = z.shift(-sigma);
    let mut x = z.right_mul(&psi.eval(-sigma));
    x = x.add(&PiecewiseMatrixPolynomial::convolve(&kernel, &psi.differentiate())?)?;
    if let Some(g) = g {
        x = x.add(&PiecewiseMatrixPolynomial::convolve(&kernel, g)?)?;
    }
    x.restrict(-sigma, horizon)
}

/// `X` on `[−σ, T]` for `G ≡ Θ`.
pub fn solve_continuous_homogeneous(
    sys: &DelaySystem,
    psi: &HistorySpec,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<Solved<PiecewiseMatrixPolynomial>> {
    check_horizon(horizon)?;
    let history = psi.checked_continuous(sys)?;
    let zero = ForcingSpec::zero(TimeKind::Continuous, sys.dim())?;
    let report = validate_hypotheses(sys, psi, &zero, opts.tol);
    let unsupported_hypothesis = report.enforce(opts.allow_noncommuting)?;
    Ok(Solved {
        value: assemble_continuous(sys, &history, None, horizon)?,
        report,
        unsupported_hypothesis,
    })
}

/// `X` on `[−σ, T]`.
pub fn solve_continuous(
    sys: &DelaySystem,
    psi: &HistorySpec,
    g: &ForcingSpec,
    horizon: f64,
    opts: &SolveOptions,
) -> Result<Solved<PiecewiseMatrixPolynomial>> {
    check_horizon(horizon)?;
    let history = psi.checked_continuous(sys)?;
    let forcing = g.checked_continuous(horizon)?;
    sys.a0().check_same_dim(forcing.left_value())?;
    let report = validate_hypotheses(sys, psi, g, opts.tol);
    let unsupported_hypothesis = report.enforce(opts.allow_noncommuting)?;
    Ok(Solved {
        value: assemble_continuous(sys, &history, Some(&forcing), horizon)?,
        report,
        unsupported_hypothesis,
    })
}

fn assemble_discrete(
    fund: &DiscreteFundamental,
    psi: &[Matrix],
    g: Option<&ForcingSpec>,
    horizon: usize,
) -> Result<TrajectoryTable> {
    let m = fund.lag() as i64;
    let n = horizon as i64;
    let d = fund.system().dim();
    // ΔΨ(r−1) = Ψ(r) − Ψ(r−1), r = −m+1..0, stored by r + m − 1.
    let dpsi: Vec<Matrix> = psi.windows(2).map(|w| &w[1] - &w[0]).collect();
    let forcing: Vec<&Matrix> = match g {
        Some(g) => (0..horizon).map(|u| g.discrete_value(u)).collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let mut times = Vec::with_capacity((n + m + 1) as usize);
    let mut values = Vec::with_capacity((n + m + 1) as usize);
    for u in -m..=n {
        let mut x = fund.value(u)?.matmul(&psi[0]);
        for (k, dp) in dpsi.iter().enumerate() {
            let r = k as i64 - m + 1;
            x += &fund.value(u - m - r)?.matmul(dp);
        }
        for (k, gv) in forcing.iter().enumerate().take(u.max(0) as usize) {
            let r = k as i64 + 1;
            x += &fund.value(u - m - r)?.matmul(gv);
        }
        debug_assert_eq!(x.dim(), d);
        times.push(u as f64);
        values.push(x);
    }
    TrajectoryTable::new(TimeKind::Discrete, times, values)
}

/// `X(u)` for `u = −m..N` with `G ≡ Θ`.
pub fn solve_discrete_homogeneous(
    fund: &DiscreteFundamental,
    psi: &HistorySpec,
    horizon: usize,
    opts: &SolveOptions,
) -> Result<Solved<TrajectoryTable>> {
    let sys = fund.system();
    let history = psi.checked_discrete(sys)?;
    let zero = ForcingSpec::zero(TimeKind::Discrete, sys.dim())?;
    let report = validate_hypotheses(sys, psi, &zero, opts.tol);
    let unsupported_hypothesis = report.enforce(opts.allow_noncommuting)?;
    let mut value = assemble_discrete(fund, history, None, horizon)?;
    value.set_unsupported_hypothesis(unsupported_hypothesis);
    Ok(Solved {
        value,
        report,
        unsupported_hypothesis,
    })
}

/// `X(u)` for `u = −m..N`.
pub fn solve_discrete(
    fund: &DiscreteFundamental,
    psi: &HistorySpec,
    g: &ForcingSpec,
    horizon: usize,
    opts: &SolveOptions,
) -> Result<Solved<TrajectoryTable>> {
    let sys = fund.system();
    let history = psi.checked_discrete(sys)?;
    if g.kind() != TimeKind::Discrete {
        return Err(Error::WrongKind {
            expected: "discrete",
        });
    }
    let report = validate_hypotheses(sys, psi, g, opts.tol);
    let unsupported_hypothesis = report.enforce(opts.allow_noncommuting)?;
    let mut value = assemble_discrete(fund, history, Some(g), horizon)?;
    value.set_unsupported_hypothesis(unsupported_hypothesis);
    Ok(Solved {
        value,
        report,
        unsupported_hypothesis,
    })
}

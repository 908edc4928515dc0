//! Two worked examples with stored expectations.
//!
//! Both use `A₀ = [[0,1],[0,0]]`, `A₁ = diag(1,2)`, `Ψ = tI` and `G = I`;
//! the first with `σ = 1`, the second with `m = 1`. Each displayed entry is
//! checked against its published value when that value satisfies the
//! equation, and against the brute-force oracle otherwise. Every
//! disagreement with a published value is listed in the report.

use serde::Serialize;

use crate::error::Result;
use crate::fundamental::{build_fundamental_continuous, DiscreteFundamental};
use crate::linalg::Matrix;
use crate::oracle::{integrate_continuous, step_discrete, IntegratorConfig};
use crate::piecewise::{MatrixPolynomial, PiecewiseMatrixPolynomial};
use crate::solve::{solve_continuous, solve_discrete, ForcingSpec, HistorySpec, SolveOptions};
use crate::system::{DelaySystem, TimeKind};

pub const PAPER_TOL: f64 = 1e-9;
pub const ORACLE_TOL: f64 = 1e-6;
pub const ORACLE_SUBSTEPS: usize = 4096;
pub const SAMPLES_PER_SEGMENT: usize = 50;

pub fn example_a0() -> Matrix {
    Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).expect("literal")
}

pub fn example_a1() -> Matrix {
    Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]).expect("literal")
}

pub fn example1_system() -> DelaySystem {
    DelaySystem::continuous(example_a0(), example_a1(), 1.0).expect("literal")
}

pub fn example2_system() -> DelaySystem {
    DelaySystem::discrete(example_a0(), example_a1(), 1).expect("literal")
}

/// `Ψ(ϑ) = ϑI` on `[−1, 0]`.
pub fn example1_history() -> HistorySpec {
    let p = MatrixPolynomial::new(vec![Matrix::zeros(2), Matrix::identity(2)]).expect("literal");
    HistorySpec::Continuous(PiecewiseMatrixPolynomial::single(-1.0, 0.0, p).expect("literal"))
}

pub fn example1_forcing() -> ForcingSpec {
    ForcingSpec::constant(TimeKind::Continuous, Matrix::identity(2)).expect("literal")
}

/// `Ψ(−1) = −I`, `Ψ(0) = Θ`.
pub fn example2_history() -> HistorySpec {
    HistorySpec::Discrete(vec![Matrix::scalar(2, -1.0), Matrix::zeros(2)])
}

pub fn example2_forcing() -> ForcingSpec {
    ForcingSpec::constant(TimeKind::Discrete, Matrix::identity(2)).expect("literal")
}

/// Ascending coefficients of one displayed scalar polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Display1 {
    pub lo: f64,
    pub hi: f64,
    /// Zero-based `(row, col)`.
    pub entry: (usize, usize),
    pub coeffs: &'static [f64],
    /// Whether the display satisfies the equation.
    pub verified: bool,
}

impl Display1 {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// Interior sample points of the segment.
    pub fn samples(&self) -> impl Iterator<Item = f64> + '_ {
        (0..SAMPLES_PER_SEGMENT)
            .map(move |i| self.lo + (self.hi - self.lo) * (i as f64 + 0.5) / SAMPLES_PER_SEGMENT as f64)
    }
}

const fn disp(lo: f64, hi: f64, entry: (usize, usize), coeffs: &'static [f64], verified: bool) -> Display1 {
    Display1 {
        lo,
        hi,
        entry,
        coeffs,
        verified,
    }
}

/// Published entries of `X` for the first example on `[−1, 3)`.
pub const EXAMPLE1_X: &[Display1] = &[
    disp(-1.0, 0.0, (0, 0), &[0.0, 1.0], true),
    disp(-1.0, 0.0, (0, 1), &[0.0], true),
    disp(-1.0, 0.0, (1, 0), &[0.0], true),
    disp(-1.0, 0.0, (1, 1), &[0.0, 1.0], true),
    disp(0.0, 1.0, (0, 0), &[0.0, 0.0, 0.5], true),
    disp(0.0, 1.0, (0, 1), &[0.0, -1.0, 0.5], true),
    disp(0.0, 1.0, (1, 0), &[0.0], true),
    disp(0.0, 1.0, (1, 1), &[0.0, -1.0, 1.0], true),
    disp(1.0, 2.0, (0, 0), &[-2.0 / 3.0, 1.5, -0.5, 1.0 / 6.0], true),
    disp(1.0, 2.0, (0, 1), &[-2.0, 3.5, -2.5, 0.5], false),
    disp(1.0, 2.0, (1, 0), &[0.0], true),
    disp(1.0, 2.0, (1, 1), &[-8.0 / 3.0, 5.0, -3.0, 2.0 / 3.0], true),
    disp(2.0, 3.0, (0, 0), &[4.0 / 3.0, -11.0 / 6.0, 1.5, -1.0 / 3.0, 1.0 / 24.0], true),
    disp(2.0, 3.0, (0, 1), &[10.0, -16.5, 9.5, -2.5, 0.25], false),
    disp(2.0, 3.0, (1, 0), &[0.0], true),
    disp(2.0, 3.0, (1, 1), &[64.0 / 3.0, -35.0, 21.0, -16.0 / 3.0, 0.5], false),
];

/// Published entries of `Z` for the first example on `[−1, 3)`.
pub const EXAMPLE1_Z: &[Display1] = &[
    disp(-1.0, 0.0, (0, 0), &[1.0], true),
    disp(-1.0, 0.0, (0, 1), &[0.0], true),
    disp(-1.0, 0.0, (1, 1), &[1.0], true),
    disp(0.0, 1.0, (0, 0), &[1.0, 1.0], true),
    disp(0.0, 1.0, (0, 1), &[0.0, 1.0], true),
    disp(0.0, 1.0, (1, 1), &[1.0, 2.0], true),
    disp(1.0, 2.0, (0, 0), &[1.5, 0.0, 0.5], true),
    disp(1.0, 2.0, (0, 1), &[1.5, -2.0, 1.5], false),
    disp(1.0, 2.0, (1, 1), &[3.0, -2.0, 2.0], true),
    disp(2.0, 3.0, (0, 0), &[1.0 / 6.0, 2.0, -0.5, 1.0 / 6.0], true),
    disp(2.0, 3.0, (0, 1), &[-6.5, 10.0, -4.5, 1.0], false),
    disp(2.0, 3.0, (1, 1), &[-13.0, 22.0, -10.0, 2.0], false),
];

/// Published table of `X(u)` for the second example, `u = −1..6`.
pub const EXAMPLE2_X: &[(i64, [[f64; 2]; 2])] = &[
    (-1, [[-1.0, 0.0], [0.0, -1.0]]),
    (0, [[0.0, 0.0], [0.0, 0.0]]),
    (1, [[0.0, -1.0], [0.0, -1.0]]),
    (2, [[1.0, -1.0], [0.0, 0.0]]),
    (3, [[2.0, -3.0], [0.0, -1.0]]),
    (4, [[4.0, -4.0], [0.0, 0.0]]),
    (5, [[7.0, -8.0], [0.0, -1.0]]),
    (6, [[12.0, -12.0], [0.0, 0.0]]),
];

/// Indices whose whole published row is checked against the publication.
pub const EXAMPLE2_PAPER_RANGE: std::ops::RangeInclusive<i64> = -1..=2;

/// Published `Z(u)` for the second example by index range, as polynomials
/// in `u` (ascending) per entry `(1,1), (1,2), (2,2)`.
pub const EXAMPLE2_Z: &[(i64, i64, [&[f64]; 3])] = &[
    (1, 2, [&[1.0, 1.0], &[0.0, 1.0], &[1.0, 2.0]]),
    (3, 4, [&[2.0, -0.5, 0.5], &[3.0, -3.5, 1.5], &[5.0, -4.0, 2.0]]),
    (
        5,
        6,
        [
            &[-2.0, 23.0 / 6.0, -1.0, 1.0 / 6.0],
            &[-25.0, 161.0 / 6.0, -9.0, 7.0 / 6.0],
            &[-27.0, 92.0 / 3.0, -10.0, 4.0 / 3.0],
        ],
    ),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// The published value.
    Paper,
    /// The brute-force oracle.
    Oracle,
}

/// One displayed entry on one segment (or one index).
#[derive(Debug, Clone, Serialize)]
pub struct FixtureCheck {
    pub quantity: &'static str,
    pub lo: f64,
    pub hi: f64,
    /// One-based `(row, col)` for display.
    pub entry: (usize, usize),
    pub source: Source,
    pub tol: f64,
    /// Largest deviation of the computed value from the expectation.
    pub max_error: f64,
    /// Largest deviation of the computed value from the published value.
    pub paper_deviation: f64,
}

impl FixtureCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tol
    }

    pub fn paper_agrees(&self) -> bool {
        self.paper_deviation <= PAPER_TOL
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FixtureReport {
    pub name: &'static str,
    pub checks: Vec<FixtureCheck>,
}

impl FixtureReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(FixtureCheck::passed)
    }

    pub fn disagreements(&self) -> impl Iterator<Item = &FixtureCheck> {
        self.checks.iter().filter(|c| !c.paper_agrees())
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.name);
        for c in &self.checks {
            let window = if c.lo == c.hi {
                format!("u={}", c.lo)
            } else {
                format!("[{}, {})", c.lo, c.hi)
            };
            let flag = if c.paper_agrees() { "" } else { "  published value disagrees" };
            out.push_str(&format!(
                "  {} {} {}({},{}) vs {:<6} max err {:.3e} (tol {:.0e}){}\n",
                if c.passed() { "PASS" } else { "FAIL" },
                window,
                c.quantity,
                c.entry.0,
                c.entry.1,
                match c.source {
                    Source::Paper => "paper",
                    Source::Oracle => "oracle",
                },
                c.max_error,
                c.tol,
                flag
            ));
        }
        let n = self.disagreements().count();
        out.push_str(&format!(
            "  {} checks, {} failed, {} published entries disagree\n",
            self.checks.len(),
            self.checks.iter().filter(|c| !c.passed()).count(),
            n
        ));
        out
    }
}

fn check_displays(
    quantity: &'static str,
    displays: &[Display1],
    computed: &PiecewiseMatrixPolynomial,
    oracle: &dyn Fn(f64) -> Matrix,
) -> Vec<FixtureCheck> {
    displays
        .iter()
        .map(|d| {
            let (i, j) = d.entry;
            let mut max_error = 0.0f64;
            let mut paper_deviation = 0.0f64;
            for t in d.samples() {
                let x = computed.eval(t)[(i, j)];
                paper_deviation = paper_deviation.max((x - d.eval(t)).abs());
                let expected = if d.verified { d.eval(t) } else { oracle(t)[(i, j)] };
                max_error = max_error.max((x - expected).abs());
            }
            FixtureCheck {
                quantity,
                lo: d.lo,
                hi: d.hi,
                entry: (i + 1, j + 1),
                source: if d.verified { Source::Paper } else { Source::Oracle },
                tol: if d.verified { PAPER_TOL } else { ORACLE_TOL },
                max_error,
                paper_deviation,
            }
        })
        .collect()
}

/// Closed-form `Z` and `X` of the first example on `[−1, 3]`.
pub fn example1_solution() -> Result<(PiecewiseMatrixPolynomial, PiecewiseMatrixPolynomial)> {
    let sys = example1_system();
    let z = build_fundamental_continuous(&sys, 3.0)?;
    let x = solve_continuous(
        &sys,
        &example1_history(),
        &example1_forcing(),
        3.0,
        &SolveOptions::default(),
    )?
    .value;
    Ok((z, x))
}

pub fn example1_report() -> Result<FixtureReport> {
    let sys = example1_system();
    let (z, x) = example1_solution()?;
    let cfg = IntegratorConfig::new(ORACLE_SUBSTEPS)?;
    let z_ref = integrate_continuous(&sys, |_| Matrix::identity(2), |_| Matrix::zeros(2), 3.0, &cfg)?;
    let x_ref = integrate_continuous(
        &sys,
        |t| Matrix::scalar(2, t),
        |_| Matrix::identity(2),
        3.0,
        &cfg,
    )?;
    let mut checks = check_displays("Z", EXAMPLE1_Z, &z, &|t| z_ref.eval(t));
    checks.extend(check_displays("X", EXAMPLE1_X, &x, &|t| x_ref.eval(t)));
    Ok(FixtureReport {
        name: "example 1 (continuous, sigma = 1)",
        checks,
    })
}

pub fn example2_report() -> Result<FixtureReport> {
    let sys = example2_system();
    let fund = DiscreteFundamental::new(sys.clone())?;
    let history = example2_history();
    let x = solve_discrete(&fund, &history, &example2_forcing(), 6, &SolveOptions::default())?.value;
    let HistorySpec::Discrete(psi) = &history else {
        unreachable!("discrete fixture")
    };
    let reference = step_discrete(&sys, psi, |_| Matrix::identity(2), 6)?;
    let mut checks = Vec::new();
    for &(u0, u1, ref polys) in EXAMPLE2_Z {
        for (k, &(i, j)) in [(0usize, 0usize), (0, 1), (1, 1)].iter().enumerate() {
            let mut paper_deviation = 0.0f64;
            let mut max_error = 0.0f64;
            for u in u0..=u1 {
                let z = fund.value(u)?[(i, j)];
                let uf = u as f64;
                let published = polys[k].iter().rev().fold(0.0, |acc, c| acc * uf + c);
                paper_deviation = paper_deviation.max((z - published).abs());
                max_error = max_error.max((z - reference_z(&sys, u)?[(i, j)]).abs());
            }
            let agrees = paper_deviation <= PAPER_TOL;
            checks.push(FixtureCheck {
                quantity: "Z",
                lo: u0 as f64,
                hi: u1 as f64 + 1.0,
                entry: (i + 1, j + 1),
                source: if agrees { Source::Paper } else { Source::Oracle },
                tol: PAPER_TOL,
                max_error: if agrees { paper_deviation } else { max_error },
                paper_deviation,
            });
        }
    }
    for &(u, published) in EXAMPLE2_X {
        let computed = x.at(u as f64).expect("u in table");
        let oracle = reference.at(u as f64).expect("u in table");
        for i in 0..2 {
            for j in 0..2 {
                let paper_deviation = (computed[(i, j)] - published[i][j]).abs();
                let paper = EXAMPLE2_PAPER_RANGE.contains(&u);
                let max_error = if paper {
                    paper_deviation
                } else {
                    (computed[(i, j)] - oracle[(i, j)]).abs()
                };
                checks.push(FixtureCheck {
                    quantity: "X",
                    lo: u as f64,
                    hi: u as f64,
                    entry: (i + 1, j + 1),
                    source: if paper { Source::Paper } else { Source::Oracle },
                    tol: PAPER_TOL,
                    max_error,
                    paper_deviation,
                });
            }
        }
    }
    Ok(FixtureReport {
        name: "example 2 (discrete, m = 1)",
        checks,
    })
}

/// `Z(u)` by the literal recursion.
fn reference_z(sys: &DelaySystem, u: i64) -> Result<Matrix> {
    let m = sys.lag()?;
    let psi = vec![Matrix::identity(sys.dim()); m + 1];
    let t = step_discrete(sys, &psi, |_| Matrix::zeros(sys.dim()), u.max(0) as usize)?;
    Ok(t.at(u as f64).cloned().unwrap_or_else(|| Matrix::zeros(sys.dim())))
}

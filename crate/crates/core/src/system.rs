use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeKind {
    Continuous,
    Discrete,
}

impl TimeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeKind::Continuous => "continuous",
            TimeKind::Discrete => "discrete",
        }
    }
}

/// The delay of a system: a positive real `σ` or a positive integer `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delay {
    Continuous(f64),
    Discrete(usize),
}

/// Coefficients `(A₀, A₁)` and the delay of
/// `Ẋ(ϑ) = A₀X(ϑ−σ) + X(ϑ−σ)A₁ + G(ϑ)` or
/// `ΔX(u) = A₀X(u−m) + X(u−m)A₁ + G(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySystem {
    a0: Matrix,
    a1: Matrix,
    delay: Delay,
}

impl DelaySystem {
    pub fn new(a0: Matrix, a1: Matrix, delay: Delay) -> Result<Self> {
        a0.check_same_dim(&a1)?;
        match delay {
            Delay::Continuous(sigma) if !(sigma.is_finite() && sigma > 0.0) => {
                return Err(Error::InvalidDelay(format!(
                    "continuous delay must be positive and finite, got {sigma}"
                )));
            }
            Delay::Discrete(0) => {
                return Err(Error::InvalidDelay(
                    "discrete delay must be at least 1".into(),
                ));
            }
            _ => {}
        }
        Ok(Self { a0, a1, delay })
    }

    pub fn continuous(a0: Matrix, a1: Matrix, sigma: f64) -> Result<Self> {
        Self::new(a0, a1, Delay::Continuous(sigma))
    }

    pub fn discrete(a0: Matrix, a1: Matrix, m: usize) -> Result<Self> {
        Self::new(a0, a1, Delay::Discrete(m))
    }

    pub fn a0(&self) -> &Matrix {
        &self.a0
    }

    pub fn a1(&self) -> &Matrix {
        &self.a1
    }

    pub fn dim(&self) -> usize {
        self.a0.dim()
    }

    pub fn delay(&self) -> Delay {
        self.delay
    }

    pub fn kind(&self) -> TimeKind {
        match self.delay {
            Delay::Continuous(_) => TimeKind::Continuous,
            Delay::Discrete(_) => TimeKind::Discrete,
        }
    }

    /// `σ` for a continuous system.
    pub fn sigma(&self) -> Result<f64> {
        match self.delay {
            Delay::Continuous(s) => Ok(s),
            Delay::Discrete(_) => Err(Error::WrongKind {
                expected: "continuous",
            }),
        }
    }

    /// `m` for a discrete system.
    pub fn lag(&self) -> Result<usize> {
        match self.delay {
            Delay::Discrete(m) => Ok(m),
            Delay::Continuous(_) => Err(Error::WrongKind {
                expected: "discrete",
            }),
        }
    }

    /// The delay as a real number (`σ` or `m`).
    pub fn delay_value(&self) -> f64 {
        match self.delay {
            Delay::Continuous(s) => s,
            Delay::Discrete(m) => m as f64,
        }
    }
}

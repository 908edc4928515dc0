//! Explicit solutions of first-order linear matrix equations with a single
//! pure delay,
//!
//! ```text
//! Ẋ(ϑ) = A₀X(ϑ−σ) + X(ϑ−σ)A₁ + G(ϑ),   X = Ψ on [−σ, 0]
//! ΔX(u) = A₀X(u−m) + X(u−m)A₁ + G(u),  X = Ψ on {−m, …, 0}
//! ```
//!
//! for coefficient matrices that need not commute, together with
//! independent brute-force oracles used to cross-check every closed form.
//!
//! The closed forms are built from the auxiliary sequence
//! `Q_{r+1}(rδ) = L^r(I)`, `L(M) = A₀M + MA₁` ([`q_sequence`]), which
//! assembles the fundamental matrix function `Z` ([`fundamental`]); the
//! solutions for prescribed history and forcing follow by
//! variation of constants ([`solve`]). Continuous objects are exact
//! piecewise matrix polynomials ([`piecewise`]).

pub mod error;
pub mod fixtures;
pub mod fundamental;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod piecewise;
pub mod q_sequence;
pub mod random;
pub mod solve;
pub mod system;
pub mod trajectory;

pub use error::{Error, Result};
pub use fundamental::{build_fundamental_continuous, DiscreteFundamental};
pub use linalg::{binomial, commutes, sylvester_apply, Matrix};
pub use piecewise::{MatrixPolynomial, PiecewiseMatrixPolynomial};
pub use q_sequence::{build_q_table, q_commutative_closed_form, QTable};
pub use solve::{ForcingSpec, HistorySpec, SolveOptions, Solved};
pub use system::{Delay, DelaySystem, TimeKind};
pub use trajectory::TrajectoryTable;

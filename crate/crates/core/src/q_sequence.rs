//! The auxiliary matrices `Q_{r+1}(rδ)`.
//!
//! The two-index recursion `Q_{u+1}(lδ) = A₀Q_u((l−1)δ) + Q_u((l−1)δ)A₁`
//! with `Q_1(0) = I` vanishes off the diagonal `l = u`, so only the
//! diagonal sequence `q[r] = Q_{r+1}(rδ) = L^r(I)`, `L(M) = A₀M + MA₁`, is
//! stored. The sequence does not depend on the delay.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{binomial_f64, sylvester_apply, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QTable {
    entries: Vec<Matrix>,
}

impl QTable {
    pub fn dim(&self) -> usize {
        self.entries[0].dim()
    }

    /// Number of stored entries, `R + 1`.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn depth(&self) -> usize {
        self.entries.len() - 1
    }

    /// `Q_{r+1}(rδ)`.
    pub fn get(&self, r: usize) -> Option<&Matrix> {
        self.entries.get(r)
    }

    pub fn entries(&self) -> &[Matrix] {
        &self.entries
    }

    /// Appends entries until the table has depth `depth`.
    pub fn extend_to(&mut self, a0: &Matrix, a1: &Matrix, depth: usize) -> Result<()> {
        while self.depth() < depth {
            let next = sylvester_apply(a0, a1, self.entries.last().expect("non-empty"))?;
            self.entries.push(next);
        }
        Ok(())
    }
}

impl std::ops::Index<usize> for QTable {
    type Output = Matrix;

    fn index(&self, r: usize) -> &Matrix {
        &self.entries[r]
    }
}

/// `q[0..=depth]` with `q[0] = I` and `q[r+1] = A₀q[r] + q[r]A₁`.
pub fn build_q_table(a0: &Matrix, a1: &Matrix, depth: usize) -> Result<QTable> {
    a0.check_same_dim(a1)?;
    let mut table = QTable {
        entries: vec![Matrix::identity(a0.dim())],
    };
    table.extend_to(a0, a1, depth)?;
    Ok(table)
}

/// `Σ_{l=0}^{r} C(r,l) A₀^{r−l} A₁^l`, the value of `Q_{r+1}(rδ)` when
/// `A₀A₁ = A₁A₀`. Commutation is not checked here.
pub fn q_commutative_closed_form(a0: &Matrix, a1: &Matrix, r: usize) -> Result<Matrix> {
    a0.check_same_dim(a1)?;
    let d = a0.dim();
    let mut out = Matrix::zeros(d);
    for l in 0..=r {
        let c = binomial_f64(r as i64, l as u64)?;
        let term = a0.pow((r - l) as u32).matmul(&a1.pow(l as u32));
        out.axpy(c, &term);
    }
    Ok(out)
}

//! Seeded generators for test systems.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;

#[derive(Debug, Clone)]
pub struct SystemGenerator {
    rng: ChaCha8Rng,
}

impl SystemGenerator {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn pick<T: Copy>(&mut self, choices: &[T]) -> T {
        choices[self.rng.random_range(0..choices.len())]
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Entries uniform in `[lo, hi)`.
    pub fn uniform_matrix(&mut self, d: usize, lo: f64, hi: f64) -> Matrix {
        Matrix::from_fn(d, |_, _| self.rng.random_range(lo..hi))
    }

    /// Integer entries uniform in `lo..=hi`.
    pub fn integer_matrix(&mut self, d: usize, lo: i32, hi: i32) -> Matrix {
        Matrix::from_fn(d, |_, _| self.rng.random_range(lo..=hi) as f64)
    }

    /// `c₀I + c₁A + … + c_kA^k` with `c_i` uniform in `[−1, 1)`.
    pub fn polynomial_in(&mut self, a: &Matrix, degree: usize) -> Matrix {
        let mut out = Matrix::zeros(a.dim());
        let mut power = Matrix::identity(a.dim());
        for k in 0..=degree {
            if k > 0 {
                power = power.matmul(a);
            }
            let c = self.uniform(-1.0, 1.0);
            out.axpy(c, &power);
        }
        out
    }
}

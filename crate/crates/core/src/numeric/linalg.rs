use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Cholesky factor of `H + τI`: `τ = 0` when `H` factors as is, otherwise
/// the smallest `10^j · 1e-10 · max(1, max diag)` that succeeds.
pub struct RegularizedCholesky {
    pub factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    pub tau: f64,
}

impl RegularizedCholesky {
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(b)
    }
}

pub fn regularized_cholesky(h: &DMatrix<f64>) -> Result<RegularizedCholesky> {
    if let Some(factor) = nalgebra::Cholesky::new(h.clone()) {
        return Ok(RegularizedCholesky { factor, tau: 0.0 });
    }
    let dim = h.nrows();
    let diag = (0..dim).map(|i| h[(i, i)].abs()).fold(1.0f64, f64::max);
    let mut tau = 1e-10 * diag;
    for _ in 0..24 {
        let mut m = h.clone();
        for i in 0..dim {
            m[(i, i)] += tau;
        }
        if let Some(factor) = nalgebra::Cholesky::new(m) {
            return Ok(RegularizedCholesky { factor, tau });
        }
        tau *= 10.0;
    }
    Err(Error::Numeric("matrix could not be regularized to positive definite".into()))
}

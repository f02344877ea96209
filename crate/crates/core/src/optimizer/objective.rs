use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::data::{Dataset, ResponseScale};
use crate::error::{Error, Result};
use crate::loss::{FamilyKind, ModelFamily, Order};
use crate::spline::SplineBasis;

/// Working response for `family`: log-Gamma models are analysed on the log
/// scale.
pub fn working_response(data: &Dataset, family: &ModelFamily) -> Result<Vec<f64>> {
    match (family.kind(), data.scale) {
        (FamilyKind::LogGamma, ResponseScale::Raw) => data
            .response
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                if y > 0.0 {
                    Ok(libm::log(y))
                } else {
                    Err(Error::Domain(format!("response {i} = {y} is not positive")))
                }
            })
            .collect(),
        (FamilyKind::Logistic, _) => {
            if let Some((i, y)) = data.response.iter().enumerate().find(|(_, y)| **y != 0.0 && **y != 1.0) {
                return Err(Error::Domain(format!("logistic response {i} = {y} is not 0 or 1")));
            }
            Ok(data.response.clone())
        }
        _ => Ok(data.response.clone()),
    }
}

/// `L(θ) = (1/n) Σ ρ(z_i, r_iᵀθ, a) w_i` with `θ = (β, λ)` and
/// `r_i = (x_i, B(t_i))`.
#[derive(Debug, Clone)]
pub struct Objective {
    family: ModelFamily,
    a: f64,
    z: Vec<f64>,
    weights: Vec<f64>,
    rows: Vec<f64>,
    n: usize,
    p: usize,
    k: usize,
}

impl Objective {
    pub fn new(
        data: &Dataset,
        basis: &SplineBasis,
        family: ModelFamily,
        a: f64,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let z = working_response(data, &family)?;
        let design = basis.design(&data.t)?;
        let (n, p, k) = (data.n(), data.p, basis.dim());
        let mut rows = Vec::with_capacity(n * (p + k));
        for i in 0..n {
            rows.extend_from_slice(data.row(i));
            rows.extend_from_slice(&design[i * k..(i + 1) * k]);
        }
        Self::from_parts(family, a, z, weights, rows, p, k)
    }

    /// Builds from an explicit working response and stacked rows
    /// `[x_i | B_i]` (row-major, `n × (p + k)`).
    pub fn from_parts(
        family: ModelFamily,
        a: f64,
        z: Vec<f64>,
        weights: Vec<f64>,
        rows: Vec<f64>,
        p: usize,
        k: usize,
    ) -> Result<Self> {
        let n = z.len();
        if n == 0 {
            return Err(Error::Argument("empty objective".into()));
        }
        if weights.len() != n {
            return Err(Error::Dimension { expected: n, got: weights.len() });
        }
        if rows.len() != n * (p + k) {
            return Err(Error::Dimension { expected: n * (p + k), got: rows.len() });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Argument("weights must be nonnegative".into()));
        }
        family.validate(z[0], a)?;
        Ok(Self { family, a, z, weights, rows, n, p, k })
    }

    pub fn with_tuning(&self, a: f64) -> Result<Self> {
        self.family.validate(self.z[0], a)?;
        Ok(Self { a, ..self.clone() })
    }

    pub fn set_tuning(&mut self, a: f64) -> Result<()> {
        self.family.validate(self.z[0], a)?;
        self.a = a;
        Ok(())
    }

    pub fn with_family(&self, family: ModelFamily, a: f64, weights: Vec<f64>) -> Result<Self> {
        Self::from_parts(family, a, self.z.clone(), weights, self.rows.clone(), self.p, self.k)
    }

    pub fn family(&self) -> &ModelFamily {
        &self.family
    }

    pub fn tuning(&self) -> f64 {
        self.a
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.p + self.k
    }

    pub fn response(&self) -> &[f64] {
        &self.z
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let q = self.dim();
        &self.rows[i * q..(i + 1) * q]
    }

    #[inline]
    fn predictor(&self, i: usize, theta: &[f64]) -> f64 {
        self.row(i).iter().zip(theta).map(|(r, t)| r * t).sum()
    }

    /// Linear predictors `r_iᵀθ`.
    pub fn predictors(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.predictor(i, theta)).collect()
    }

    /// `z_i − r_iᵀθ`.
    pub fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.z[i] - self.predictor(i, theta)).collect()
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: theta.len() });
        }
        Ok(())
    }

    /// `L(β, λ)`, summed sequentially in index order.
    pub fn objective_value(&self, beta: &[f64], lambda: &[f64]) -> Result<f64> {
        if beta.len() != self.p {
            return Err(Error::Dimension { expected: self.p, got: beta.len() });
        }
        if lambda.len() != self.k {
            return Err(Error::Dimension { expected: self.k, got: lambda.len() });
        }
        let theta: Vec<f64> = beta.iter().chain(lambda).copied().collect();
        Ok(self.value(&theta))
    }

    pub fn gradient(&self, beta: &[f64], lambda: &[f64]) -> Result<DVector<f64>> {
        let theta: Vec<f64> = beta.iter().chain(lambda).copied().collect();
        self.check(&theta)?;
        Ok(self.eval(&theta, Order::Gradient).1)
    }

    pub fn hessian(&self, beta: &[f64], lambda: &[f64]) -> Result<DMatrix<f64>> {
        let theta: Vec<f64> = beta.iter().chain(lambda).copied().collect();
        self.check(&theta)?;
        Ok(self.eval(&theta, Order::Hessian).2)
    }

    /// `L(θ)`; `θ` must have length `p + k`.
    pub fn value(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim());
        let mut total = 0.0;
        for i in 0..self.n {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let s = self.predictor(i, theta);
            total += w * self.family.eval(self.z[i], s, self.a, Order::Value).0;
        }
        total / self.n as f64
    }

    /// `(L, ∇L, ∇²L)`; entries beyond `order` are left zero.
    pub(crate) fn eval(&self, theta: &[f64], order: Order) -> (f64, DVector<f64>, DMatrix<f64>) {
        let q = self.dim();
        let mut g = DVector::zeros(q);
        let mut h = DMatrix::zeros(if order == Order::Hessian { q } else { 0 }, if order == Order::Hessian { q } else { 0 });
        let mut total = 0.0;
        for i in 0..self.n {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let row = self.row(i);
            let s: f64 = row.iter().zip(theta).map(|(r, t)| r * t).sum();
            let (rho, psi, chi) = self.family.eval(self.z[i], s, self.a, order);
            total += w * rho;
            if order == Order::Value {
                continue;
            }
            let wp = w * psi;
            if wp != 0.0 {
                for (gj, rj) in g.iter_mut().zip(row) {
                    *gj += wp * rj;
                }
            }
            if order == Order::Hessian {
                let wc = w * chi;
                if wc != 0.0 {
                    for a in 0..q {
                        let ra = wc * row[a];
                        if ra == 0.0 {
                            continue;
                        }
                        for b in a..q {
                            h[(a, b)] += ra * row[b];
                        }
                    }
                }
            }
        }
        let inv = 1.0 / self.n as f64;
        g *= inv;
        if order == Order::Hessian {
            for a in 0..q {
                for b in a..q {
                    let v = h[(a, b)] * inv;
                    h[(a, b)] = v;
                    h[(b, a)] = v;
                }
            }
        }
        (total * inv, g, h)
    }

    pub fn value_gradient(&self, theta: &[f64]) -> (f64, DVector<f64>) {
        let (f, g, _) = self.eval(theta, Order::Gradient);
        (f, g)
    }

    pub fn value_gradient_hessian(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        self.eval(theta, Order::Hessian)
    }
}

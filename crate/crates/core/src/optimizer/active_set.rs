use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{accept, split, Objective, SolverOptions, SolverReport, Termination, TraceRecord};
use crate::error::{Error, Result};
use crate::loss::Order;
use crate::numeric::regularized_cholesky;
use crate::spline::is_feasible;

/// Working set of equality constraints `λ_i = λ_{i+1}` (zero-based `i`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    indices: Vec<usize>,
    p: usize,
    k: usize,
}

impl ActiveSet {
    pub fn new(p: usize, k: usize) -> Self {
        Self { indices: Vec::new(), p, k }
    }

    /// Every adjacent pair with `λ_{i+1} − λ_i ≤ tol`.
    pub fn from_ties(lambda: &[f64], p: usize, tol: f64) -> Self {
        let mut set = Self::new(p, lambda.len());
        for i in 0..lambda.len().saturating_sub(1) {
            if lambda[i + 1] - lambda[i] <= tol {
                set.indices.push(i);
            }
        }
        set
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i + 1 < self.k, "constraint index out of range");
        if let Err(pos) = self.indices.binary_search(&i) {
            self.indices.insert(pos, i);
        }
    }

    pub fn remove(&mut self, i: usize) {
        if let Ok(pos) = self.indices.binary_search(&i) {
            self.indices.remove(pos);
        }
    }

    /// `|A| × (p + k)`; row `j` has `+1` at `λ_{i_j}` and `−1` at `λ_{i_j+1}`.
    pub fn working_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.indices.len(), self.p + self.k);
        for (j, &i) in self.indices.iter().enumerate() {
            a[(j, self.p + i)] = 1.0;
            a[(j, self.p + i + 1)] = -1.0;
        }
        a
    }

    /// Makes every active pair exactly equal, sweeping left to right.
    fn snap(&self, theta: &mut [f64]) {
        for &i in &self.indices {
            theta[self.p + i + 1] = theta[self.p + i];
        }
    }
}

struct Direction {
    eta: DVector<f64>,
    /// `μ = −(A H⁻¹ Aᵀ)⁻¹ A H⁻¹ ∇`.
    mu: Vec<f64>,
}

fn direction(g: &DVector<f64>, h: &DMatrix<f64>, set: &ActiveSet) -> Result<Direction> {
    let chol = regularized_cholesky(h)?;
    let u = chol.solve(g);
    if set.is_empty() {
        return Ok(Direction { eta: -u, mu: Vec::new() });
    }
    let a = set.working_matrix();
    let z = chol.solve_matrix(&a.transpose());
    let m = &a * &z;
    let nu = regularized_cholesky(&m)?.solve(&(&a * &u));
    let eta = -(u - z * &nu);
    Ok(Direction { eta, mu: nu.iter().map(|v| -v).collect() })
}

/// Norm of `∇` after Euclidean projection on the null space of `A`.
fn projected_gradient_norm(g: &DVector<f64>, set: &ActiveSet) -> f64 {
    if set.is_empty() {
        return g.norm();
    }
    let a = set.working_matrix();
    let aat = &a * a.transpose();
    match aat.cholesky() {
        Some(c) => {
            let nu = c.solve(&(&a * g));
            (g - a.transpose() * nu).norm()
        }
        None => g.norm(),
    }
}

/// Minimizes the objective subject to `λ_1 ≤ … ≤ λ_k` with a primal
/// active-set Newton method. Iterates stay feasible.
pub fn active_set_minimize(
    obj: &Objective,
    beta0: &[f64],
    lambda0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>, SolverReport)> {
    active_set_minimize_inspect(obj, beta0, lambda0, opts, |_| {})
}

/// As [`active_set_minimize`], calling `inspect` on every accepted iterate.
pub fn active_set_minimize_inspect<F: FnMut(&[f64])>(
    obj: &Objective,
    beta0: &[f64],
    lambda0: &[f64],
    opts: &SolverOptions,
    mut inspect: F,
) -> Result<(Vec<f64>, Vec<f64>, SolverReport)> {
    let (p, k) = (obj.p(), obj.k());
    if beta0.len() != p || lambda0.len() != k {
        return Err(Error::Dimension { expected: p + k, got: beta0.len() + lambda0.len() });
    }
    if !is_feasible(lambda0) {
        return Err(Error::Argument("starting coefficients are not nondecreasing".into()));
    }
    let mut theta: Vec<f64> = beta0.iter().chain(lambda0).copied().collect();
    let mut set = ActiveSet::from_ties(lambda0, p, opts.tie_tol);
    set.snap(&mut theta);
    let (mut f, mut g, mut h) = obj.eval(&theta, Order::Hessian);
    if !f.is_finite() {
        return Err(Error::Numeric("objective is not finite at the starting point".into()));
    }
    inspect(&theta);
    let mut trace = Vec::new();
    let mut mu = Vec::new();
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        let dir = direction(&g, &h, &set)?;
        mu = dir.mu;
        if opts.trace {
            trace.push(TraceRecord {
                iteration: iter,
                objective: f,
                gradient_norm: projected_gradient_norm(&g, &set),
                active: set.len(),
            });
        }
        let eta = dir.eta;
        let scale = 1.0 + norm(&theta);
        // Stationary on the working face: a short step, a tiny projected
        // gradient, or a predicted decrease lost in rounding.
        let decrease = -g.dot(&eta);
        if eta.norm() < opts.tol * scale
            || projected_gradient_norm(&g, &set) < opts.tol
            || decrease <= 64.0 * f64::EPSILON * (1.0 + f.abs())
        {
            match stationary_update(&mut set, &mu, opts) {
                true => {
                    termination = Termination::Converged;
                    break;
                }
                false => continue,
            }
        }
        // Largest step keeping the inactive constraints satisfied.
        let mut nu1 = f64::INFINITY;
        let mut blocking = None;
        for i in 0..k - 1 {
            if set.contains(i) {
                continue;
            }
            let (ei, ej) = (eta[p + i], eta[p + i + 1]);
            if ei > ej {
                let step = (theta[p + i + 1] - theta[p + i]).max(0.0) / (ei - ej);
                if step < nu1 {
                    nu1 = step;
                    blocking = Some(i);
                }
            }
        }
        let mut accepted = None;
        let mut last_t = f64::NAN;
        for r in 0..=opts.max_halvings {
            let t = libm::ldexp(1.0, -(r as i32)).min(nu1);
            if t == last_t {
                continue;
            }
            last_t = t;
            if t == 0.0 {
                break;
            }
            let cand: Vec<f64> = theta.iter().zip(eta.iter()).map(|(a, d)| a + t * d).collect();
            let fc = obj.value(&cand);
            if fc < f || (fc.is_finite() && accept(fc, f, obj.value_gradient(&cand).1.norm(), g.norm())) {
                accepted = Some((cand, t));
                break;
            }
        }
        match accepted {
            Some((mut cand, t)) => {
                if t == nu1 {
                    if let Some(i) = blocking {
                        set.insert(i);
                    }
                }
                for i in 0..k - 1 {
                    if cand[p + i + 1] - cand[p + i] <= opts.tie_tol {
                        set.insert(i);
                    }
                }
                set.snap(&mut cand);
                theta = cand;
                let e = obj.eval(&theta, Order::Hessian);
                f = e.0;
                g = e.1;
                h = e.2;
                inspect(&theta);
            }
            None if nu1 == 0.0 => {
                // Blocked at a tie that is not yet in the working set.
                if let Some(i) = blocking {
                    set.insert(i);
                    set.snap(&mut theta);
                }
            }
            None => {
                // No descent along a short direction means stationarity up
                // to rounding; a long one means a genuine failure.
                if eta.norm() < 1e-6 * scale && !stationary_update(&mut set, &mu, opts) {
                    continue;
                }
                termination = if eta.norm() < 1e-6 * scale {
                    Termination::Converged
                } else {
                    Termination::LineSearchFailed
                };
                break;
            }
        }
    }
    let gradient_norm = projected_gradient_norm(&g, &set);
    if mu.len() != set.len() {
        mu = direction(&g, &h, &set)?.mu;
    }
    let (beta, lambda) = split(&theta, p);
    let report = SolverReport {
        iterations,
        objective: f,
        gradient_norm,
        active_set: set.indices().to_vec(),
        multipliers: mu,
        termination,
        trace,
    };
    Ok((beta, lambda, report))
}

/// At a stationary point of the working problem: returns `true` when every
/// multiplier is nonnegative, otherwise drops the most negative one.
fn stationary_update(set: &mut ActiveSet, mu: &[f64], opts: &SolverOptions) -> bool {
    let worst = mu
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .filter(|(_, m)| **m < -opts.mult_tol);
    match worst {
        None => true,
        Some((j, _)) => {
            let i = set.indices()[j];
            set.remove(i);
            false
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

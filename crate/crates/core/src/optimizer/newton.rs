use alloc::vec::Vec;

use super::{accept, split, Objective, SolverOptions, SolverReport, Termination, TraceRecord};
use crate::error::{Error, Result};
use crate::loss::Order;
use crate::numeric::regularized_cholesky;

/// Damped Newton with a halving line search. Returns the best point found;
/// for nonconvex objectives only stationarity is promised.
pub fn newton_minimize(
    obj: &Objective,
    beta0: &[f64],
    lambda0: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>, SolverReport)> {
    let mut theta: Vec<f64> = beta0.iter().chain(lambda0).copied().collect();
    if theta.len() != obj.dim() {
        return Err(Error::Dimension { expected: obj.dim(), got: theta.len() });
    }
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite starting point".into()));
    }
    let (mut f, mut g, mut h) = obj.eval(&theta, Order::Hessian);
    if !f.is_finite() {
        return Err(Error::Numeric("objective is not finite at the starting point".into()));
    }
    let mut trace = Vec::new();
    let mut gnorm = g.norm();
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;
    for iter in 0..opts.max_iter {
        if opts.trace {
            trace.push(TraceRecord { iteration: iter, objective: f, gradient_norm: gnorm, active: 0 });
        }
        if gnorm < opts.tol {
            termination = Termination::Converged;
            break;
        }
        let chol = regularized_cholesky(&h)?;
        let dir = -chol.solve(&g);
        if dir.norm() < opts.tol * (1.0 + norm(&theta)) {
            termination = Termination::Converged;
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = theta.iter().zip(dir.iter()).map(|(a, d)| a + t * d).collect();
            let fc = obj.value(&cand);
            if fc < f || (fc.is_finite() && accept(fc, f, obj.value_gradient(&cand).1.norm(), gnorm)) {
                let (fc, gc, hc) = obj.eval(&cand, Order::Hessian);
                accepted = Some((cand, fc, gc, hc));
                break;
            }
            t *= 0.5;
        }
        iterations = iter + 1;
        match accepted {
            Some((cand, fc, gc, hc)) => {
                theta = cand;
                f = fc;
                g = gc;
                h = hc;
                gnorm = g.norm();
            }
            None => {
                termination = Termination::LineSearchFailed;
                break;
            }
        }
    }
    if termination == Termination::MaxIter && gnorm < opts.tol {
        termination = Termination::Converged;
    }
    let (beta, lambda) = split(&theta, obj.p());
    let report = SolverReport {
        iterations,
        objective: f,
        gradient_norm: gnorm,
        active_set: Vec::new(),
        multipliers: Vec::new(),
        termination,
        trace,
    };
    Ok((beta, lambda, report))
}

fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

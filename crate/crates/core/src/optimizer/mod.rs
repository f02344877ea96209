//! Sample objective assembly and its minimizers: damped Newton for the
//! unconstrained problems and an active-set Newton method for the
//! ordered-coefficient constraints on the spline block.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

mod active_set;
mod nelder_mead;
mod newton;
mod objective;

pub use active_set::{active_set_minimize, ActiveSet};
pub use nelder_mead::{nelder_mead, NelderMeadOptions};
pub use active_set::active_set_minimize_inspect;
pub use newton::newton_minimize;
pub use objective::{working_response, Objective};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when the (projected) Newton step norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Adjacent coefficients closer than this are treated as tied.
    pub tie_tol: f64,
    /// Multipliers above `-mult_tol` are treated as nonnegative.
    pub mult_tol: f64,
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 200,
            max_halvings: 30,
            tie_tol: 1e-12,
            mult_tol: 1e-10,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
    LineSearchFailed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    pub objective: f64,
    /// Norm of the gradient projected on the working set's null space.
    pub gradient_norm: f64,
    /// Constraint `i` is `λ_i = λ_{i+1}` (zero-based).
    pub active_set: Vec<usize>,
    pub multipliers: Vec<f64>,
    pub termination: Termination,
    pub trace: Vec<TraceRecord>,
}

impl SolverReport {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// Line-delimited iteration trace.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            let _ = writeln!(
                out,
                "iter={} objective={:.12e} grad_norm={:.6e} active={}",
                r.iteration, r.objective, r.gradient_norm, r.active
            );
        }
        out
    }
}

/// Splits `θ = (β, λ)`.
pub fn split(theta: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    (theta[..p].to_vec(), theta[p..].to_vec())
}

/// Step acceptance shared by both minimizers: strict descent, or a tie
/// (within rounding) that reduces the gradient norm.
pub(crate) fn accept(f_new: f64, f: f64, g_new: f64, g: f64) -> bool {
    if !f_new.is_finite() {
        return false;
    }
    f_new < f || (f_new <= f + 4.0 * f64::EPSILON * f.abs() && g_new < g)
}

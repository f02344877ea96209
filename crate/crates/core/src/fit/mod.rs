//! Estimation pipelines: the S/MM robust log-Gamma fit, the classical
//! deviance fit, identity-link and logistic fits, BIC selection of the basis
//! size and jackknife standard errors.

use alloc::format;
use alloc::vec::Vec;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{LeverageWeight, ScoreFunction, DEFAULT_C_W};
use crate::numeric::{mad, median, pava};
use crate::optimizer::{active_set_minimize, Objective, SolverOptions, SolverReport, Termination};
use crate::scale::ShapeCalibration;
use crate::spline::{is_feasible, KnotPlacement, MonotoneSpline, SplineBasis};

mod bic;
mod jackknife;
mod pipelines;

pub use bic::{bic_range, bic_select, BicSelection};
pub use jackknife::{jackknife_se, jackknife_with, Jackknife};
pub use pipelines::{fit_classical, fit_identity, fit_logistic, fit_robust_loggamma, fit_with_k};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    /// S-step, adaptive tuning, MM step and ordering constraints.
    Robust,
    /// Deviance minimization (`φ(t) = t`, `w ≡ 1`).
    Classical,
    /// Identity link with a preliminary M-scale.
    Identity,
    /// Logistic link; the score comes from [`FitConfig::logistic_score`].
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisSize {
    Fixed(usize),
    Bic,
}

/// Residual scale used by the identity-link pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityScale {
    /// Biweight M-scale with `c = 1.54764`, `b = 1/2`.
    MScale,
    /// `median |r_i|`.
    Mad,
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub order: usize,
    pub placement: KnotPlacement,
    pub basis_size: BasisSize,
    /// Stop the BIC scan once the first local minimum is certain.
    pub bic_early_stop: bool,
    pub efficiency: f64,
    pub subsamples: usize,
    /// Defaults to `p + k`.
    pub subsample_size: Option<usize>,
    pub concentration_steps: usize,
    pub keep_candidates: usize,
    pub polish: bool,
    pub seed: u64,
    pub c_w: f64,
    pub leverage: bool,
    pub solver: SolverOptions,
    pub calibration: ShapeCalibration,
    pub identity_scale: IdentityScale,
    pub identity_multiplier: f64,
    pub logistic_score: ScoreFunction,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            order: 4,
            placement: KnotPlacement::Uniform,
            basis_size: BasisSize::Bic,
            bic_early_stop: false,
            efficiency: 0.9,
            subsamples: 50,
            subsample_size: None,
            concentration_steps: 2,
            keep_candidates: 5,
            polish: true,
            seed: 0,
            c_w: DEFAULT_C_W,
            leverage: true,
            solver: SolverOptions::default(),
            calibration: ShapeCalibration::default(),
            identity_scale: IdentityScale::MScale,
            identity_multiplier: 4.685,
            logistic_score: ScoreFunction::TukeyBiweight,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::Argument(format!("spline order must be at least 2, got {}", self.order)));
        }
        if let BasisSize::Fixed(k) = self.basis_size {
            if k < self.order {
                return Err(Error::Argument(format!("k = {k} is below the spline order {}", self.order)));
            }
        }
        if !(self.efficiency > 0.0 && self.efficiency < 1.0) {
            return Err(Error::Argument(format!("efficiency must lie in (0, 1), got {}", self.efficiency)));
        }
        if self.subsamples == 0 || !(self.c_w > 0.0) || !(self.identity_multiplier > 0.0) {
            return Err(Error::Argument("subsamples, c_w and the identity multiplier must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Nuisance {
    Alpha(f64),
    Sigma(f64),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFlag {
    /// `α̂` fell outside the calibrated range and was clamped.
    AlphaClamped,
    /// Logistic data separate completely; estimates diverge.
    Separation,
    /// The final minimizer stopped without meeting its tolerance.
    NonConvergence,
    /// Residuals vanish; the fit interpolates.
    ExactFit,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub estimator: Estimator,
    pub beta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub eta: MonotoneSpline,
    pub nuisance: Nuisance,
    /// Tuning constant of the final objective (`ĉ` or `a`), if any.
    pub tuning: Option<f64>,
    /// S-scale `σ̂` of the robust log-Gamma pipeline.
    pub s_scale: Option<f64>,
    pub objective: f64,
    pub bic: f64,
    pub k: usize,
    pub report: SolverReport,
    pub flags: Vec<FitFlag>,
    pub bic_curve: Vec<(usize, Option<f64>)>,
}

impl FitResult {
    pub fn converged(&self) -> bool {
        !self.flags.iter().any(|f| matches!(f, FitFlag::NonConvergence | FitFlag::Separation))
    }

    pub fn theta(&self) -> Vec<f64> {
        self.beta.iter().chain(&self.lambda).copied().collect()
    }
}

/// Fits `estimator`, selecting `k` by BIC unless it is fixed.
pub fn fit(data: &Dataset, estimator: Estimator, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    match cfg.basis_size {
        BasisSize::Fixed(k) => fit_with_k(data, estimator, k, cfg, None),
        BasisSize::Bic => Ok(bic_select(data, estimator, cfg, None)?.fit),
    }
}

/// `n⁻¹ Σ (η̂(t_i) − η₀(t_i))²`.
pub fn ise<F: Fn(f64) -> f64>(eta_hat: &MonotoneSpline, eta0: F, t_values: &[f64]) -> Result<f64> {
    if t_values.is_empty() {
        return Err(Error::Argument("ise over an empty grid".into()));
    }
    let mut total = 0.0;
    for &t in t_values {
        let e = eta_hat.eval(t)? - eta0(t);
        total += e * e;
    }
    Ok(total / t_values.len() as f64)
}

pub(crate) fn basis_for(data: &Dataset, k: usize, cfg: &FitConfig) -> Result<SplineBasis> {
    SplineBasis::with_placement(k, cfg.order, cfg.placement, &data.t)
}

/// Product over coordinates of biweight weights on median/MAD standardized
/// carriers. Coordinates without spread (e.g. mostly-constant dummies)
/// carry no leverage information and contribute a factor of one.
pub fn leverage_weights(data: &Dataset, c_w: f64) -> Result<Vec<f64>> {
    let mut w = alloc::vec![1.0; data.n()];
    for j in 0..data.p {
        let col = data.column(j);
        let spread = mad(&col);
        if !(spread > 0.0) {
            continue;
        }
        let lw = LeverageWeight::new(median(&col), spread, c_w)?;
        for (wi, x) in w.iter_mut().zip(&col) {
            *wi *= lw.weight(*x);
        }
    }
    Ok(w)
}

/// The fallback start `λ = (0, 0, 1, …, k − 2)`.
pub fn ramp_start(k: usize) -> Vec<f64> {
    (0..k).map(|i| if i == 0 { 0.0 } else { (i - 1) as f64 }).collect()
}

/// Imposes the ordering: returns the unconstrained solution when it is
/// already feasible, otherwise runs the active-set method from the ramp
/// start and from the isotonic projection of `λ`, keeping the better one.
pub(crate) fn constrain(
    obj: &Objective,
    beta: Vec<f64>,
    lambda: Vec<f64>,
    unconstrained: SolverReport,
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>, SolverReport)> {
    if is_feasible(&lambda) {
        return Ok((beta, lambda, unconstrained));
    }
    let starts = [ramp_start(lambda.len()), pava(&lambda)];
    let mut best: Option<(Vec<f64>, Vec<f64>, SolverReport)> = None;
    let mut last_err = None;
    for start in starts.iter() {
        match active_set_minimize(obj, &beta, start, opts) {
            Ok(sol) => {
                let better = match &best {
                    None => true,
                    Some(b) => sol.2.objective < b.2.objective,
                };
                if better {
                    best = Some(sol);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::AllFailed("constrained step".into())))
}

pub(crate) fn convergence_flags(report: &SolverReport) -> Vec<FitFlag> {
    match report.termination {
        Termination::Converged => Vec::new(),
        _ => alloc::vec![FitFlag::NonConvergence],
    }
}

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    basis_for, constrain, convergence_flags, leverage_weights, Estimator, FitConfig, FitFlag, FitResult,
    IdentityScale, Nuisance,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{deviance_d, ModelFamily, ScoreFunction};
use crate::numeric::mad;
use crate::optimizer::{
    nelder_mead, newton_minimize, split, NelderMeadOptions, Objective, SolverOptions, SolverReport,
};
use crate::scale::{m_scale, MScaleConfig, ALPHA_MAX, ALPHA_MIN};
use crate::spline::{MonotoneSpline, SplineBasis};

pub fn fit_robust_loggamma(data: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    super::fit(data, Estimator::Robust, cfg)
}

pub fn fit_classical(data: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    super::fit(data, Estimator::Classical, cfg)
}

pub fn fit_identity(data: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    super::fit(data, Estimator::Identity, cfg)
}

pub fn fit_logistic(data: &Dataset, cfg: &FitConfig) -> Result<FitResult> {
    super::fit(data, Estimator::Logistic, cfg)
}

/// Fits with a fixed basis of `k` functions; `warm` is an optional starting
/// `θ = (β, λ)`.
pub fn fit_with_k(
    data: &Dataset,
    estimator: Estimator,
    k: usize,
    cfg: &FitConfig,
    warm: Option<&[f64]>,
) -> Result<FitResult> {
    cfg.validate()?;
    if k < cfg.order {
        return Err(Error::Argument(alloc::format!("k = {k} is below the spline order {}", cfg.order)));
    }
    if data.n() <= data.p + k {
        return Err(Error::Argument(alloc::format!(
            "n = {} must exceed p + k = {}",
            data.n(),
            data.p + k
        )));
    }
    let basis = basis_for(data, k, cfg)?;
    let warm = warm.filter(|w| w.len() == data.p + k && w.iter().all(|v| v.is_finite()));
    match estimator {
        Estimator::Robust => robust(data, basis, cfg, warm),
        Estimator::Classical => classical(data, basis, cfg, warm),
        Estimator::Identity => identity(data, basis, cfg),
        Estimator::Logistic => logistic(data, basis, cfg, warm),
    }
}

struct Parts {
    beta: Vec<f64>,
    lambda: Vec<f64>,
    report: SolverReport,
    nuisance: Nuisance,
    tuning: Option<f64>,
    s_scale: Option<f64>,
    flags: Vec<FitFlag>,
}

fn finish(estimator: Estimator, data: &Dataset, basis: SplineBasis, obj: &Objective, parts: Parts) -> Result<FitResult> {
    let theta: Vec<f64> = parts.beta.iter().chain(&parts.lambda).copied().collect();
    let objective = obj.value(&theta);
    let n = data.n() as f64;
    let k = basis.dim();
    let bic = objective + libm::log(n) / (2.0 * n) * (k + data.p) as f64;
    let mut flags = parts.flags;
    for f in convergence_flags(&parts.report) {
        if !flags.contains(&f) {
            flags.push(f);
        }
    }
    Ok(FitResult {
        estimator,
        eta: MonotoneSpline::new(basis, parts.lambda.clone())?,
        beta: parts.beta,
        lambda: parts.lambda,
        nuisance: parts.nuisance,
        tuning: parts.tuning,
        s_scale: parts.s_scale,
        objective,
        bic,
        k,
        report: parts.report,
        flags,
        bic_curve: Vec::new(),
    })
}

fn unconstrained_then_ordered(
    obj: &Objective,
    start: &[f64],
    opts: &SolverOptions,
) -> Result<(Vec<f64>, Vec<f64>, SolverReport)> {
    let (b0, l0) = split(start, obj.p());
    let (beta, lambda, report) = newton_minimize(obj, &b0, &l0, opts)?;
    constrain(obj, beta, lambda, report, opts)
}

fn ones(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

fn weights(data: &Dataset, cfg: &FitConfig) -> Result<Vec<f64>> {
    if cfg.leverage {
        leverage_weights(data, cfg.c_w)
    } else {
        Ok(ones(data.n()))
    }
}

fn classical(data: &Dataset, basis: SplineBasis, cfg: &FitConfig, warm: Option<&[f64]>) -> Result<FitResult> {
    let family = ModelFamily::log_gamma(ScoreFunction::ClassicalSquare);
    let obj = Objective::new(data, &basis, family, 1.0, ones(data.n()))?;
    let zero = vec![0.0; obj.dim()];
    let (beta, lambda, report) = unconstrained_then_ordered(&obj, warm.unwrap_or(&zero), &cfg.solver)?;
    let parts = Parts { beta, lambda, report, nuisance: Nuisance::None, tuning: None, s_scale: None, flags: Vec::new() };
    finish(Estimator::Classical, data, basis, &obj, parts)
}

// ---------------------------------------------------------------------------
// Robust log-Gamma pipeline

fn robust(data: &Dataset, basis: SplineBasis, cfg: &FitConfig, warm: Option<&[f64]>) -> Result<FitResult> {
    let n = data.n();
    let s_obj = Objective::new(data, &basis, ModelFamily::log_gamma(ScoreFunction::TukeyBiweight), 1.0, ones(n))?;
    let (theta_s, sigma) = s_step(&s_obj, cfg, warm)?;
    let cal = &cfg.calibration;
    let mut flags = Vec::new();
    let alpha = match cal.alpha_from_sigma(sigma) {
        Ok(a) => a,
        Err(Error::Range { .. }) => {
            flags.push(FitFlag::AlphaClamped);
            if sigma > cal.sigma_star(ALPHA_MIN)? {
                ALPHA_MIN
            } else {
                ALPHA_MAX
            }
        }
        Err(e) => return Err(e),
    };
    let c = sigma.max(cal.tuning_for_efficiency(alpha, cfg.efficiency)?);
    let obj = s_obj.with_family(ModelFamily::log_gamma(ScoreFunction::TukeyBiweight), c, weights(data, cfg)?)?;
    let (beta, lambda, report) = unconstrained_then_ordered(&obj, &theta_s, &cfg.solver)?;
    let parts = Parts {
        beta,
        lambda,
        report,
        nuisance: Nuisance::Alpha(alpha),
        tuning: Some(c),
        s_scale: Some(sigma),
        flags,
    };
    finish(Estimator::Robust, data, basis, &obj, parts)
}

/// M-scale of `√d(z_i − r_iᵀθ)` with the biweight, `c = 1`, `b = 1/2`.
fn s_scale(obj: &Objective, theta: &[f64]) -> Result<f64> {
    let v: Vec<f64> = obj.residuals(theta).iter().map(|r| libm::sqrt(deviance_d(*r))).collect();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("infinite deviance".into()));
    }
    m_scale(&v, &MScaleConfig::deviance())
}

/// One concentration step: with `σ` fixed, decrease `Σ φ(√d_i / σ)`; the
/// M-scale of the new residuals cannot exceed `σ`.
fn concentrate(obj: &mut Objective, theta: &[f64], sigma: f64, iters: usize) -> Result<(Vec<f64>, f64)> {
    obj.set_tuning(sigma)?;
    let opts = SolverOptions { max_iter: iters, ..SolverOptions::default() };
    let (b0, l0) = split(theta, obj.p());
    let (b, l, _) = newton_minimize(obj, &b0, &l0, &opts)?;
    let next: Vec<f64> = b.into_iter().chain(l).collect();
    match s_scale(obj, &next) {
        Ok(s) if s < sigma => Ok((next, s)),
        _ => Ok((theta.to_vec(), sigma)),
    }
}

/// Subsample exact fit (or least squares when `m > q`) on the log scale.
fn subsample_fit(obj: &Objective, idx: &[usize]) -> Option<Vec<f64>> {
    let q = obj.dim();
    let m = idx.len();
    let mut a = DMatrix::zeros(m, q);
    let mut z = DVector::zeros(m);
    for (r, &i) in idx.iter().enumerate() {
        for (c, v) in obj.row(i).iter().enumerate() {
            a[(r, c)] = *v;
        }
        z[r] = obj.response()[i];
    }
    let sol = if m == q {
        a.lu().solve(&z)?
    } else {
        let ata = a.transpose() * &a;
        ata.cholesky()?.solve(&(a.transpose() * z))
    };
    let theta: Vec<f64> = sol.iter().copied().collect();
    let bound = 1e6;
    if theta.iter().all(|v| v.is_finite() && v.abs() < bound) {
        Some(theta)
    } else {
        None
    }
}

fn s_step(obj: &Objective, cfg: &FitConfig, warm: Option<&[f64]>) -> Result<(Vec<f64>, f64)> {
    let q = obj.dim();
    let n = obj.n();
    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        starts.push(w.to_vec());
    }
    let cl = obj.with_family(ModelFamily::log_gamma(ScoreFunction::ClassicalSquare), 1.0, ones(n))?;
    if let Ok((b, l, _)) = newton_minimize(&cl, &vec![0.0; obj.p()], &vec![0.0; obj.k()], &cfg.solver) {
        starts.push(b.into_iter().chain(l).collect());
    }
    let m = cfg.subsample_size.unwrap_or(q).clamp(q, n);
    let seed = cfg.seed ^ (q as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    let mut found = 0;
    let mut attempts = 0;
    while found < cfg.subsamples && attempts < 20 * cfg.subsamples {
        attempts += 1;
        let (chosen, _) = idx.partial_shuffle(&mut rng, m);
        let mut chosen = chosen.to_vec();
        chosen.sort_unstable();
        if let Some(theta) = subsample_fit(obj, &chosen) {
            starts.push(theta);
            found += 1;
        }
    }
    let mut work = obj.clone();
    let mut refined: Vec<(Vec<f64>, f64)> = Vec::with_capacity(starts.len());
    for start in starts {
        let Ok(mut sigma) = s_scale(&work, &start) else { continue };
        let mut theta = start;
        for _ in 0..cfg.concentration_steps {
            match concentrate(&mut work, &theta, sigma, 3) {
                Ok((t, s)) => {
                    theta = t;
                    sigma = s;
                }
                Err(_) => break,
            }
        }
        refined.push((theta, sigma));
    }
    if refined.is_empty() {
        return Err(Error::Degenerate("every S-step candidate failed".into()));
    }
    refined.sort_by(|a, b| a.1.total_cmp(&b.1));
    refined.truncate(cfg.keep_candidates.max(1));
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (mut theta, mut sigma) in refined {
        for _ in 0..100 {
            let Ok((t, s)) = concentrate(&mut work, &theta, sigma, 10) else { break };
            let done = s >= sigma * (1.0 - 1e-10);
            theta = t;
            sigma = s;
            if done {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| sigma < b.1) {
            best = Some((theta, sigma));
        }
    }
    let (mut theta, mut sigma) = best.expect("at least one candidate");
    if cfg.polish {
        let f = |x: &[f64]| s_scale(obj, x).unwrap_or(f64::INFINITY);
        let step = 0.1 * sigma;
        let (x, v, _) = nelder_mead(f, &theta, step, &NelderMeadOptions { max_iter: 200, f_tol: 1e-12 * sigma });
        if v < sigma {
            theta = x;
            sigma = v;
        }
    }
    if !(sigma > 0.0) {
        return Err(Error::Degenerate("S-scale vanished".into()));
    }
    Ok((theta, sigma))
}

// ---------------------------------------------------------------------------
// Identity link

fn identity(data: &Dataset, basis: SplineBasis, cfg: &FitConfig) -> Result<FitResult> {
    let n = data.n();
    let ls = Objective::new(data, &basis, ModelFamily::identity(ScoreFunction::ClassicalSquare), 1.0, ones(n))?;
    let zero = vec![0.0; ls.dim()];
    let (b, l, ls_report) = newton_minimize(&ls, &zero[..ls.p()], &zero[ls.p()..], &cfg.solver)?;
    let theta_ls: Vec<f64> = b.iter().chain(&l).copied().collect();
    let resid = ls.residuals(&theta_ls);
    let ymax = data.response.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    if resid.iter().all(|r| r.abs() <= 1e-10 * (1.0 + ymax)) {
        let (beta, lambda, report) = constrain(&ls, b, l, ls_report, &cfg.solver)?;
        let parts = Parts {
            beta,
            lambda,
            report,
            nuisance: Nuisance::Sigma(0.0),
            tuning: None,
            s_scale: None,
            flags: vec![FitFlag::ExactFit],
        };
        return finish(Estimator::Identity, data, basis, &ls, parts);
    }
    let s0 = mad(&resid);
    if !(s0 > 0.0) {
        return Err(Error::Degenerate("zero residual scale".into()));
    }
    let w = weights(data, cfg)?;
    let tukey = ModelFamily::identity(ScoreFunction::TukeyBiweight);
    let pre = ls.with_family(tukey, cfg.identity_multiplier * s0, w.clone())?;
    let (b, l, _) = newton_minimize(&pre, &b, &l, &cfg.solver)?;
    let theta_pre: Vec<f64> = b.iter().chain(&l).copied().collect();
    let abs_r: Vec<f64> = pre.residuals(&theta_pre).iter().map(|r| r.abs()).collect();
    let scale_cfg = match cfg.identity_scale {
        IdentityScale::MScale => MScaleConfig::default(),
        IdentityScale::Mad => MScaleConfig::median(),
    };
    let kappa = match m_scale(&abs_r, &scale_cfg) {
        Ok(k) if k > 0.0 => k,
        Ok(_) | Err(Error::ExactFit { .. }) => return Err(Error::Degenerate("zero residual scale".into())),
        Err(e) => return Err(e),
    };
    let a = cfg.identity_multiplier * kappa;
    let obj = ls.with_family(tukey, a, w)?;
    let (beta, lambda, report) = unconstrained_then_ordered(&obj, &theta_pre, &cfg.solver)?;
    let parts = Parts {
        beta,
        lambda,
        report,
        nuisance: Nuisance::Sigma(kappa),
        tuning: Some(a),
        s_scale: None,
        flags: Vec::new(),
    };
    finish(Estimator::Identity, data, basis, &obj, parts)
}

// ---------------------------------------------------------------------------
// Logistic link

const SEPARATION_NORM: f64 = 1e3;

/// Complete separation: every observation classified correctly, or `‖β‖`
/// diverging.
fn separated(obj: &Objective, theta: &[f64]) -> bool {
    let beta_norm = libm::sqrt(theta[..obj.p()].iter().map(|v| v * v).sum::<f64>());
    if beta_norm > SEPARATION_NORM {
        return true;
    }
    obj.predictors(theta)
        .iter()
        .zip(obj.response())
        .all(|(s, y)| (2.0 * y - 1.0) * s > 0.0)
}

fn logistic(data: &Dataset, basis: SplineBasis, cfg: &FitConfig, warm: Option<&[f64]>) -> Result<FitResult> {
    let n = data.n();
    let ml = Objective::new(data, &basis, ModelFamily::logistic(ScoreFunction::ClassicalSquare), 1.0, ones(n))?;
    let zero = vec![0.0; ml.dim()];
    let start = warm.unwrap_or(&zero);
    let (b, l, ml_report) = newton_minimize(&ml, &start[..ml.p()], &start[ml.p()..], &cfg.solver)?;
    let theta_ml: Vec<f64> = b.iter().chain(&l).copied().collect();
    let mut flags = Vec::new();
    if separated(&ml, &theta_ml) {
        flags.push(FitFlag::Separation);
    }
    let (obj, (beta, lambda, report)) = if cfg.logistic_score == ScoreFunction::ClassicalSquare {
        let sol = constrain(&ml, b, l, ml_report, &cfg.solver)?;
        (ml, sol)
    } else {
        let obj = ml.with_family(ModelFamily::logistic(cfg.logistic_score), 1.0, weights(data, cfg)?)?;
        let sol = unconstrained_then_ordered(&obj, &theta_ml, &cfg.solver)?;
        (obj, sol)
    };
    let theta: Vec<f64> = beta.iter().chain(&lambda).copied().collect();
    if !flags.contains(&FitFlag::Separation) && separated(&obj, &theta) {
        flags.push(FitFlag::Separation);
    }
    let parts = Parts { beta, lambda, report, nuisance: Nuisance::None, tuning: None, s_scale: None, flags };
    finish(Estimator::Logistic, data, basis, &obj, parts)
}


//! M-scales, the population scale map `σ*(α)` of the log-Gamma model and
//! the efficiency-calibrated tuning constant `C_e(α)`.

use alloc::format;
use core::cell::RefCell;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::{deviance_d, ModelFamily, ScoreFunction};
use crate::numeric::{bracketed_root, expand_bracket, integrate_split, QuadratureOptions};

/// Tuning constant making the biweight M-scale consistent for the normal
/// standard deviation at `b = 1/2`.
pub const GAUSSIAN_SCALE_C: f64 = 1.54764;

pub const ALPHA_MIN: f64 = 0.01;
pub const ALPHA_MAX: f64 = 1000.0;

const C_WINDOW: (f64, f64) = (0.05, 20.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MScaleConfig {
    pub score: ScoreFunction,
    pub b: f64,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MScaleConfig {
    fn default() -> Self {
        Self {
            score: ScoreFunction::TukeyBiweight,
            b: 0.5,
            c: GAUSSIAN_SCALE_C,
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl MScaleConfig {
    /// Biweight scale of `√d` residuals used by the log-Gamma S-step.
    pub fn deviance() -> Self {
        Self { c: 1.0, ..Self::default() }
    }

    /// `χ = 1{|t| > 1}`, `c = 1`, `b = 1/2`: the median.
    pub fn median() -> Self {
        Self { score: ScoreFunction::Indicator, c: 1.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b < self.score.sup()) {
            return Err(Error::Argument(format!("b = {} must lie in (0, sup φ)", self.b)));
        }
        if !(self.c > 0.0) || !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::Argument("c, tol and max_iter must be positive".into()));
        }
        if self.score == ScoreFunction::ClassicalSquare {
            return Err(Error::Argument("an M-scale needs a bounded score".into()));
        }
        Ok(())
    }
}

/// Solves `(1/n) Σ φ(v_i / (c σ)) = b` for `σ`.
pub fn m_scale(values: &[f64], cfg: &MScaleConfig) -> Result<f64> {
    cfg.validate()?;
    let n = values.len();
    if n == 0 {
        return Err(Error::Argument("m_scale of an empty sample".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::Domain(format!("m_scale needs finite nonnegative values, got {v}")));
    }
    let zeros = values.iter().filter(|v| **v == 0.0).count();
    if zeros as f64 > n as f64 * (1.0 - cfg.b) {
        return Err(Error::ExactFit { zeros, n });
    }
    if cfg.score == ScoreFunction::Indicator {
        return Ok(indicator_scale(values, cfg));
    }
    let mut min_nz = f64::INFINITY;
    let mut max = 0.0f64;
    for &v in values {
        if v > 0.0 {
            min_nz = min_nz.min(v);
        }
        max = max.max(v);
    }
    let nf = n as f64;
    let score = cfg.score;
    // Solve in ln s with s = c σ; the left side is nonincreasing in s.
    // Working on the log scale keeps the tolerance relative when the
    // values span many orders of magnitude.
    let f = |s: f64| values.iter().map(|v| score.phi(v / s)).sum::<f64>() / nf - cfg.b;
    let (lo, hi) = expand_bracket(f, min_nz / 10.0, 10.0 * max, 10.0, 60)?;
    let g = |ls: f64| f(libm::exp(ls));
    let ls = bracketed_root(g, libm::log(lo), libm::log(hi), cfg.tol, cfg.max_iter)?;
    Ok(libm::exp(ls) / cfg.c)
}

/// Closed form for the indicator score: an order statistic of `values`.
fn indicator_scale(values: &[f64], cfg: &MScaleConfig) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    let r = n as f64 * (1.0 - cfg.b);
    let ri = libm::round(r);
    let s = if (r - ri).abs() < 1e-9 {
        let j = (ri as usize).clamp(1, n);
        if j < n {
            0.5 * (v[j - 1] + v[j])
        } else {
            v[n - 1]
        }
    } else {
        v[(libm::ceil(r) as usize).clamp(1, n) - 1]
    };
    s / cfg.c
}

/// `log g(u, α)`, the log-density of `log G` with `G ~ Γ(shape α, mean 1)`.
pub fn log_gamma_log_density(u: f64, alpha: f64) -> f64 {
    alpha * libm::log(alpha) - libm::lgamma(alpha) + alpha * (u - libm::exp(u))
}

/// One row of an exported calibration table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationRow {
    pub alpha: f64,
    pub sigma_star: f64,
    pub c_e_090: f64,
    pub c_e_095: f64,
}

/// Population calibration of the bounded deviance score under the
/// log-Gamma model. Immutable; an optional table only narrows brackets.
#[derive(Debug, Clone)]
pub struct ShapeCalibration {
    pub b: f64,
    pub score: ScoreFunction,
    pub quadrature: QuadratureOptions,
    table: Vec<CalibrationRow>,
}

impl Default for ShapeCalibration {
    fn default() -> Self {
        Self {
            b: 0.5,
            score: ScoreFunction::TukeyBiweight,
            quadrature: QuadratureOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_depth: 40 },
            table: Vec::new(),
        }
    }
}

/// Roots `u₋ < 0 < u₊` of `d(u) = q`.
fn deviance_roots(q: f64) -> Result<(f64, f64)> {
    let tol = 1e-15;
    let lo = bracketed_root(|u| deviance_d(u) - q, -(q + 1.0) - 1.0, 0.0, tol, 300)?;
    let hi = bracketed_root(|u| deviance_d(u) - q, 0.0, libm::sqrt(2.0 * q) + 1.0, tol, 300)?;
    Ok((lo, hi))
}

/// Cut points for a log-Gamma integrand: the mode and a few spreads.
fn cuts(alpha: f64) -> [f64; 10] {
    let sd = 1.0 / libm::sqrt(alpha);
    // The left tail decays like e^{αu} and is long for small α.
    let l = 1.0 / alpha;
    [0.0, -sd, sd, -3.0 * sd, 3.0 * sd, -8.0 * sd, -20.0 * sd, -30.0 * l, -80.0 * l, -200.0 * l]
}

impl ShapeCalibration {
    pub fn new(b: f64) -> Result<Self> {
        let cal = Self { b, ..Self::default() };
        if !(b > 0.0 && b < 1.0) {
            return Err(Error::Argument(format!("b = {b} must lie in (0, 1)")));
        }
        Ok(cal)
    }

    /// Attaches a precomputed table (e.g. loaded from CSV). Its `σ*` column
    /// must be strictly decreasing in `α`.
    pub fn with_table(mut self, mut rows: Vec<CalibrationRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
        for w in rows.windows(2) {
            if !(w[1].sigma_star < w[0].sigma_star) || !(w[1].alpha > w[0].alpha) {
                return Err(Error::Argument("calibration table is not strictly monotone".into()));
            }
        }
        self.table = rows;
        Ok(self)
    }

    pub fn table(&self) -> &[CalibrationRow] {
        &self.table
    }

    fn check_alpha(alpha: f64) -> Result<()> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Argument(format!("alpha must be positive, got {alpha}")));
        }
        Ok(())
    }

    /// `E_g[φ(√d(u) / σ)]`.
    pub fn expected_score(&self, alpha: f64, sigma: f64) -> Result<f64> {
        Self::check_alpha(alpha)?;
        let s2 = sigma * sigma;
        let (lo, hi) = deviance_roots(s2)?;
        let norm = alpha * libm::log(alpha) - libm::lgamma(alpha);
        let score = self.score;
        // φ = 1 outside [u₋, u₊]; integrate the complement inside.
        let inside = integrate_split(
            |u| {
                let (h, _, _) = score.sq(deviance_d(u) / s2);
                (1.0 - h) * libm::exp(norm + alpha * (u - libm::exp(u)))
            },
            lo,
            hi,
            &cuts(alpha),
            self.quadrature,
        )?;
        Ok(1.0 - inside)
    }

    /// `σ*(α)`: the solution of `E_g[φ(√d(u)/σ)] = b`.
    pub fn sigma_star(&self, alpha: f64) -> Result<f64> {
        Self::check_alpha(alpha)?;
        if !self.score.is_bounded() {
            return Err(Error::Argument("σ* needs a bounded score".into()));
        }
        let err: RefCell<Option<Error>> = RefCell::new(None);
        let mut f = |s: f64| match self.expected_score(alpha, s) {
            Ok(v) => v - self.b,
            Err(e) => {
                *err.borrow_mut() = Some(e);
                f64::NAN
            }
        };
        let guess = 1.0 / libm::sqrt(alpha);
        let (lo, hi) = expand_bracket(&mut f, 0.5 * guess, 2.0 * guess, 2.0, 80)?;
        let root = bracketed_root(&mut f, lo, hi, 1e-14 * hi, 300);
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        root
    }

    /// `α̂ = σ*⁻¹(σ̂)` on `α ∈ [0.01, 1000]`.
    pub fn alpha_from_sigma(&self, sigma_hat: f64) -> Result<f64> {
        if !(sigma_hat > 0.0) || !sigma_hat.is_finite() {
            return Err(Error::Argument(format!("sigma_hat must be positive, got {sigma_hat}")));
        }
        // σ*(α) is decreasing: work in x = ln α.
        let err: RefCell<Option<Error>> = RefCell::new(None);
        let mut f = |x: f64| match self.sigma_star(libm::exp(x)) {
            Ok(s) => s - sigma_hat,
            Err(e) => {
                *err.borrow_mut() = Some(e);
                f64::NAN
            }
        };
        let (xmin, xmax) = (libm::log(ALPHA_MIN), libm::log(ALPHA_MAX));
        let (mut lo, mut hi) = self.table_bracket(sigma_hat).unwrap_or((0.0, libm::log(10.0)));
        let mut flo = f(lo);
        let mut fhi = f(hi);
        let range_err = || Error::Range { value: sigma_hat, lo: ALPHA_MIN, hi: ALPHA_MAX };
        let slack = 1e-9 * sigma_hat;
        while flo < 0.0 {
            if lo <= xmin {
                if flo > -slack {
                    return Ok(ALPHA_MIN);
                }
                return Err(err.borrow_mut().take().unwrap_or_else(range_err));
            }
            hi = lo;
            fhi = flo;
            lo = (lo - 2.0).max(xmin);
            flo = f(lo);
        }
        while fhi > 0.0 {
            if hi >= xmax {
                if fhi < slack {
                    return Ok(ALPHA_MAX);
                }
                return Err(err.borrow_mut().take().unwrap_or_else(range_err));
            }
            lo = hi;
            flo = fhi;
            hi = (hi + 2.0).min(xmax);
            fhi = f(hi);
        }
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        let _ = (flo, fhi);
        let x = bracketed_root(&mut f, lo, hi, 1e-12, 300)?;
        if let Some(e) = err.into_inner() {
            return Err(e);
        }
        Ok(libm::exp(x))
    }

    fn table_bracket(&self, sigma_hat: f64) -> Option<(f64, f64)> {
        let w = self
            .table
            .windows(2)
            .find(|w| w[0].sigma_star >= sigma_hat && sigma_hat >= w[1].sigma_star)?;
        Some((libm::log(w[0].alpha), libm::log(w[1].alpha)))
    }

    /// `(A, B) = (E_g[χ_c(u, 0)], E_g[Ψ_c(u, 0)²])` for the location model.
    pub fn efficiency_constants(&self, alpha: f64, c: f64) -> Result<(f64, f64)> {
        Self::check_alpha(alpha)?;
        if !(c > 0.0) {
            return Err(Error::Argument(format!("tuning constant must be positive, got {c}")));
        }
        let family = ModelFamily::log_gamma(self.score);
        let norm = alpha * libm::log(alpha) - libm::lgamma(alpha);
        let (lo, hi) = if self.score.is_bounded() {
            deviance_roots(c * c)?
        } else {
            let sd = 1.0 / libm::sqrt(alpha);
            (-40.0 * sd - 40.0 / alpha, 12.0 * sd + 2.0)
        };
        let mut ab = [0.0; 2];
        for (slot, which) in ab.iter_mut().zip([0usize, 1]) {
            *slot = integrate_split(
                |u| {
                    let (_, psi, chi) = family.eval(u, 0.0, c, crate::loss::Order::Hessian);
                    let g = libm::exp(norm + alpha * (u - libm::exp(u)));
                    if which == 0 {
                        chi * g
                    } else {
                        psi * psi * g
                    }
                },
                lo,
                hi,
                &cuts(alpha),
                self.quadrature,
            )?;
        }
        Ok((ab[0], ab[1]))
    }

    /// Asymptotic efficiency of tuning `c` relative to the deviance
    /// estimator, `A² / (α B)`.
    pub fn efficiency(&self, alpha: f64, c: f64) -> Result<f64> {
        let (a, b) = self.efficiency_constants(alpha, c)?;
        Ok(a * a / (alpha * b))
    }

    /// `C_e(α)`: the tuning constant with efficiency `e`.
    pub fn tuning_for_efficiency(&self, alpha: f64, e: f64) -> Result<f64> {
        Self::check_alpha(alpha)?;
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::Argument(format!("efficiency must lie in (0, 1), got {e}")));
        }
        let err: RefCell<Option<Error>> = RefCell::new(None);
        let mut f = |c: f64| match self.efficiency(alpha, c) {
            Ok(v) => v - e,
            Err(x) => {
                *err.borrow_mut() = Some(x);
                f64::NAN
            }
        };
        let (lo, hi) = C_WINDOW;
        let (flo, fhi) = (f(lo), f(hi));
        if let Some(x) = err.borrow_mut().take() {
            return Err(x);
        }
        if flo < 0.0 && fhi > 0.0 {
            let c = bracketed_root(&mut f, lo, hi, 1e-12, 300)?;
            if let Some(x) = err.into_inner() {
                return Err(x);
            }
            return Ok(c);
        }
        // Grid fallback: first sign change on a log grid.
        let mut curve = Vec::with_capacity(121);
        let steps = 120;
        for i in 0..=steps {
            let c = lo * libm::pow(hi / lo, i as f64 / steps as f64);
            curve.push((c, f(c) + e));
        }
        if let Some(x) = err.borrow_mut().take() {
            return Err(x);
        }
        for w in curve.windows(2) {
            if (w[0].1 - e) * (w[1].1 - e) <= 0.0 {
                return bracketed_root(&mut f, w[0].0, w[1].0, 1e-12, 300);
            }
        }
        Err(Error::Calibration { target: e, curve })
    }

    /// `(α̂, ĉ)` with `ĉ = max(σ̂, C_e(α̂))`.
    pub fn adaptive_tuning_parts(&self, sigma_hat: f64, e: f64) -> Result<(f64, f64)> {
        let alpha = self.alpha_from_sigma(sigma_hat)?;
        let c = self.tuning_for_efficiency(alpha, e)?;
        Ok((alpha, sigma_hat.max(c)))
    }

    pub fn adaptive_tuning(&self, sigma_hat: f64, e: f64) -> Result<f64> {
        Ok(self.adaptive_tuning_parts(sigma_hat, e)?.1)
    }

    /// Calibration rows over an `α` grid.
    pub fn build_table(&self, alphas: &[f64]) -> Result<Vec<CalibrationRow>> {
        if alphas.is_empty() {
            return Err(Error::Argument("empty alpha grid".into()));
        }
        alphas
            .iter()
            .map(|&alpha| {
                Ok(CalibrationRow {
                    alpha,
                    sigma_star: self.sigma_star(alpha)?,
                    c_e_090: self.tuning_for_efficiency(alpha, 0.90)?,
                    c_e_095: self.tuning_for_efficiency(alpha, 0.95)?,
                })
            })
            .collect()
    }
}

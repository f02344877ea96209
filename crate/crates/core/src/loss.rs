//! Score functions, model families and leverage weights.
//!
//! Every family evaluates `ρ(y, s, a)` together with its first and second
//! derivatives in the linear predictor `s`. For the log-Gamma family the
//! bounded score acts on the deviance `d(y - s)`; writing the score as a
//! function of the squared argument, `h(q) = φ(√q)`, removes the `√d`
//! denominator from the derivatives so that `Ψ` and `χ` are smooth through
//! zero residuals.

use alloc::format;

use crate::error::{Error, Result};
use crate::numeric::{integrate_split, median, QuadratureOptions};

/// `d(u) = e^u - u - 1`, the log-Gamma deviance kernel. Returns `+∞` when
/// `e^u` overflows.
pub fn deviance_d(u: f64) -> f64 {
    if u.abs() < 1e-4 {
        let u2 = u * u;
        u2 / 2.0 + u2 * u / 6.0 + u2 * u2 / 24.0
    } else {
        libm::expm1(u) - u
    }
}

/// `1 - e^u` without cancellation near zero.
#[inline]
fn one_minus_exp(u: f64) -> f64 {
    -libm::expm1(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScoreFunction {
    /// `φ(y) = min(3y² − 3y⁴ + y⁶, 1)`.
    #[default]
    TukeyBiweight,
    /// `φ(y) = y²`; the classical deviance-based estimator.
    ClassicalSquare,
    /// `φ(y) = 1{|y| > 1}`; only meaningful inside an M-scale.
    Indicator,
}

impl ScoreFunction {
    pub fn phi(&self, y: f64) -> f64 {
        match self {
            Self::TukeyBiweight => {
                let q = y * y;
                if q >= 1.0 {
                    1.0
                } else {
                    q * (3.0 - 3.0 * q + q * q)
                }
            }
            Self::ClassicalSquare => y * y,
            Self::Indicator => (y.abs() > 1.0) as u8 as f64,
        }
    }

    pub fn dphi(&self, y: f64) -> f64 {
        match self {
            Self::TukeyBiweight => {
                let q = y * y;
                if q >= 1.0 {
                    0.0
                } else {
                    6.0 * y * (1.0 - q) * (1.0 - q)
                }
            }
            Self::ClassicalSquare => 2.0 * y,
            Self::Indicator => 0.0,
        }
    }

    pub fn d2phi(&self, y: f64) -> f64 {
        match self {
            Self::TukeyBiweight => {
                let q = y * y;
                if q >= 1.0 {
                    0.0
                } else {
                    6.0 * (1.0 - q) * (1.0 - 5.0 * q)
                }
            }
            Self::ClassicalSquare => 2.0,
            Self::Indicator => 0.0,
        }
    }

    /// `sup φ`, infinite for the classical score.
    pub fn sup(&self) -> f64 {
        match self {
            Self::ClassicalSquare => f64::INFINITY,
            _ => 1.0,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.sup().is_finite()
    }

    /// `h(q) = φ(√q)` and its first two derivatives, `q ≥ 0`.
    #[inline]
    pub(crate) fn sq(&self, q: f64) -> (f64, f64, f64) {
        match self {
            Self::TukeyBiweight => {
                if q >= 1.0 {
                    (1.0, 0.0, 0.0)
                } else {
                    let m = 1.0 - q;
                    (q * (3.0 - 3.0 * q + q * q), 3.0 * m * m, -6.0 * m)
                }
            }
            Self::ClassicalSquare => (q, 1.0, 0.0),
            Self::Indicator => ((q > 1.0) as u8 as f64, 0.0, 0.0),
        }
    }

    /// Argument values of `h` where its higher derivatives jump.
    fn sq_kinks(&self) -> &'static [f64] {
        match self {
            Self::TukeyBiweight | Self::Indicator => &[1.0],
            Self::ClassicalSquare => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    LogGamma,
    Identity,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NuisanceKind {
    ShapeAlpha,
    ScaleSigma,
    None,
}

/// Link/loss bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelFamily {
    kind: FamilyKind,
    score: ScoreFunction,
}

impl ModelFamily {
    pub fn new(kind: FamilyKind, score: ScoreFunction) -> Result<Self> {
        if score == ScoreFunction::Indicator {
            return Err(Error::Argument("the indicator score cannot define a loss".into()));
        }
        Ok(Self { kind, score })
    }

    pub fn log_gamma(score: ScoreFunction) -> Self {
        Self::new(FamilyKind::LogGamma, score).expect("valid score")
    }

    pub fn identity(score: ScoreFunction) -> Self {
        Self::new(FamilyKind::Identity, score).expect("valid score")
    }

    pub fn logistic(score: ScoreFunction) -> Self {
        Self::new(FamilyKind::Logistic, score).expect("valid score")
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn score(&self) -> ScoreFunction {
        self.score
    }

    pub fn nuisance(&self) -> NuisanceKind {
        match self.kind {
            FamilyKind::LogGamma => NuisanceKind::ShapeAlpha,
            FamilyKind::Identity => NuisanceKind::ScaleSigma,
            FamilyKind::Logistic => NuisanceKind::None,
        }
    }

    pub fn validate(&self, y: f64, a: f64) -> Result<()> {
        match self.kind {
            FamilyKind::Logistic => {
                if y != 0.0 && y != 1.0 {
                    return Err(Error::Domain(format!("logistic response must be 0 or 1, got {y}")));
                }
            }
            _ => {
                if !(a > 0.0) {
                    return Err(Error::Argument(format!("tuning constant must be positive, got {a}")));
                }
            }
        }
        Ok(())
    }

    pub fn rho(&self, y: f64, s: f64, a: f64) -> Result<f64> {
        self.validate(y, a)?;
        Ok(self.eval(y, s, a, Order::Value).0)
    }

    pub fn psi(&self, y: f64, s: f64, a: f64) -> Result<f64> {
        self.validate(y, a)?;
        Ok(self.eval(y, s, a, Order::Gradient).1)
    }

    pub fn chi(&self, y: f64, s: f64, a: f64) -> Result<f64> {
        self.validate(y, a)?;
        Ok(self.eval(y, s, a, Order::Hessian).2)
    }

    /// `(ρ, Ψ, χ)` without argument checks; entries beyond `order` are 0.
    #[inline]
    pub(crate) fn eval(&self, y: f64, s: f64, a: f64, order: Order) -> (f64, f64, f64) {
        match self.kind {
            FamilyKind::LogGamma => {
                let r = y - s;
                let a2 = a * a;
                let q = deviance_d(r) / a2;
                let (h, dh, d2h) = self.score.sq(q);
                if order == Order::Value || (dh == 0.0 && d2h == 0.0) {
                    return (h, 0.0, 0.0);
                }
                let g = one_minus_exp(r) / a2;
                let psi = dh * g;
                let chi = if order == Order::Hessian {
                    d2h * g * g + dh * libm::exp(r) / a2
                } else {
                    0.0
                };
                (h, psi, chi)
            }
            FamilyKind::Identity => {
                let v = (y - s) / a;
                let rho = self.score.phi(v);
                if order == Order::Value {
                    return (rho, 0.0, 0.0);
                }
                let psi = -self.score.dphi(v) / a;
                let chi = if order == Order::Hessian {
                    self.score.d2phi(v) / (a * a)
                } else {
                    0.0
                };
                (rho, psi, chi)
            }
            FamilyKind::Logistic => self.logistic_eval(y, s, order),
        }
    }

    fn logistic_eval(&self, y: f64, s: f64, order: Order) -> (f64, f64, f64) {
        // A = -log H(s), B = -log(1 - H(s)).
        let big_a = softplus(-s);
        let big_b = softplus(s);
        let hs = 1.0 / (1.0 + libm::exp(-s));
        let hc = 1.0 / (1.0 + libm::exp(s));
        let (ha, dha, d2ha) = self.score.sq(big_a);
        let (hb, dhb, d2hb) = self.score.sq(big_b);
        let mut rho = y * ha + (1.0 - y) * hb;
        if order == Order::Value {
            rho += self.logistic_correction(hs, hc);
            return (rho, 0.0, 0.0);
        }
        rho += self.logistic_correction(hs, hc);
        let q = hs * hc;
        let psi = -y * dha * hc + (1.0 - y) * dhb * hs + (dha - dhb) * q;
        let chi = if order == Order::Hessian {
            y * (d2ha * hc * hc + dha * q)
                + (1.0 - y) * (d2hb * hs * hs + dhb * q)
                + (-d2ha * hc - d2hb * hs) * q
                + (dha - dhb) * q * (hc - hs)
        } else {
            0.0
        };
        (rho, psi, chi)
    }

    /// `G(H) = G₁(H) + G₁(1 − H)`, with `hc = 1 − H` passed separately to
    /// keep precision in the tails.
    fn logistic_correction(&self, hs: f64, hc: f64) -> f64 {
        self.correction_g1(hs) + self.correction_g1(hc)
    }

    /// `G₁(t) = ∫₀ᵗ φ'(−log u) du` with `φ` acting on the deviance scale.
    pub fn correction_g1(&self, t: f64) -> f64 {
        match self.score {
            ScoreFunction::ClassicalSquare => t,
            ScoreFunction::Indicator => 0.0,
            ScoreFunction::TukeyBiweight => {
                if t <= 0.0 {
                    return 0.0;
                }
                let kinks: [f64; 1] = [libm::exp(-self.score.sq_kinks()[0])];
                let opts = QuadratureOptions { abs_tol: 1e-13, rel_tol: 1e-14, max_depth: 40 };
                integrate_split(
                    |u| self.score.sq(-libm::log(u)).1,
                    0.0,
                    t,
                    &kinks,
                    opts,
                )
                .unwrap_or(f64::NAN)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Order {
    Value,
    Gradient,
    Hessian,
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x + libm::exp(-x)
    } else if x < -35.0 {
        libm::exp(x)
    } else {
        libm::log1p(libm::exp(x))
    }
}

/// Tukey biweight weight on a standardized carrier coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverageWeight {
    pub center: f64,
    pub spread: f64,
    pub c_w: f64,
}

pub const DEFAULT_C_W: f64 = 4.685;

impl LeverageWeight {
    pub fn new(center: f64, spread: f64, c_w: f64) -> Result<Self> {
        if !(spread > 0.0) {
            return Err(Error::Degenerate(format!("carrier spread must be positive, got {spread}")));
        }
        if !(c_w > 0.0) {
            return Err(Error::Argument(format!("c_w must be positive, got {c_w}")));
        }
        Ok(Self { center, spread, c_w })
    }

    /// Median and normalized MAD of `values`.
    pub fn from_sample(values: &[f64], c_w: f64) -> Result<Self> {
        Self::new(median(values), crate::numeric::mad(values), c_w)
    }

    pub fn weight(&self, x: f64) -> f64 {
        let u = (x - self.center) / (self.c_w * self.spread);
        if u.abs() >= 1.0 {
            0.0
        } else {
            let m = 1.0 - u * u;
            m * m
        }
    }
}

pub fn leverage_weight(x: f64, lw: &LeverageWeight) -> f64 {
    lw.weight(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deviance_values() {
        assert_eq!(deviance_d(0.0), 0.0);
        assert!((deviance_d(1.0) - (core::f64::consts::E - 2.0)).abs() < 1e-15);
        assert!((deviance_d(-1.0) - 1.0 / core::f64::consts::E).abs() < 1e-15);
        // Series and direct branches agree at the switch.
        let u = 1e-4;
        let direct = libm::exp(u) - u - 1.0;
        assert!((deviance_d(u) - direct).abs() < 1e-16);
        assert!(deviance_d(800.0).is_infinite());
    }

    #[test]
    fn tukey_is_exact_polynomial() {
        let s = ScoreFunction::TukeyBiweight;
        for &y in &[0.0f64, 0.3, -0.7, 0.99, 1.0, 2.0] {
            let want = f64::min(3.0 * y * y - 3.0 * y.powi(4) + y.powi(6), 1.0);
            assert!((s.phi(y) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_residual() {
        for score in [ScoreFunction::TukeyBiweight, ScoreFunction::ClassicalSquare] {
            let f = ModelFamily::log_gamma(score);
            assert_eq!(f.rho(0.3, 0.3, 0.7).unwrap(), 0.0);
            assert_eq!(f.psi(0.3, 0.3, 0.7).unwrap(), 0.0);
        }
        let f = ModelFamily::log_gamma(ScoreFunction::ClassicalSquare);
        assert_eq!(f.chi(1.2, 1.2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn identity_saturates_at_one() {
        let f = ModelFamily::identity(ScoreFunction::TukeyBiweight);
        assert_eq!(f.rho(2.0, 1.5, 0.5).unwrap(), 1.0);
        assert_eq!(f.psi(4.0, 1.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn saturated_loggamma_has_zero_derivatives() {
        let f = ModelFamily::log_gamma(ScoreFunction::TukeyBiweight);
        // √d(3)/0.5 > 1
        assert_eq!(f.psi(3.0, 0.0, 0.5).unwrap(), 0.0);
        assert_eq!(f.chi(3.0, 0.0, 0.5).unwrap(), 0.0);
        assert_eq!(f.psi(900.0, 0.0, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn argument_errors() {
        let f = ModelFamily::log_gamma(ScoreFunction::TukeyBiweight);
        assert!(matches!(f.rho(1.0, 0.0, 0.0), Err(Error::Argument(_))));
        let g = ModelFamily::logistic(ScoreFunction::TukeyBiweight);
        assert!(matches!(g.rho(0.5, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(g.rho(1.0, 0.0, -3.0).is_ok());
        assert!(ModelFamily::new(FamilyKind::Identity, ScoreFunction::Indicator).is_err());
    }

    #[test]
    fn leverage_weight_values() {
        let lw = LeverageWeight::new(1.0, 2.0, 4.685).unwrap();
        assert_eq!(leverage_weight(1.0, &lw), 1.0);
        assert_eq!(leverage_weight(1.0 + 4.685 * 2.0, &lw), 0.0);
        assert!((leverage_weight(1.0 + 4.685, &lw) - 0.5625).abs() < 1e-15);
        assert!(matches!(LeverageWeight::new(0.0, 0.0, 4.685), Err(Error::Degenerate(_))));
    }

    #[test]
    fn classical_logistic_correction_is_constant() {
        let f = ModelFamily::logistic(ScoreFunction::ClassicalSquare);
        let r = f.rho(1.0, 0.0, 1.0).unwrap();
        assert!((r - (core::f64::consts::LN_2 + 1.0)).abs() < 1e-15);
    }
}

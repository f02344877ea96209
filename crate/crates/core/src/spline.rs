//! B-spline bases on `[0, 1]` with repeated boundary knots.
//!
//! `order` is the spline order ℓ (degree ℓ−1): the full knot sequence holds
//! ℓ zeros, the `m` interior knots and ℓ ones, giving `k = m + ℓ` basis
//! functions. "Cubic" means order 4.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::numeric::quantile_sorted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KnotPlacement {
    #[default]
    Uniform,
    Quantile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnotSet {
    interior: Vec<f64>,
    order: usize,
    full: Vec<f64>,
}

impl KnotSet {
    pub fn new(interior: Vec<f64>, order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::Argument(format!("spline order must be >= 2, got {order}")));
        }
        for w in interior.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::Argument("interior knots must be strictly increasing".into()));
            }
        }
        if interior.iter().any(|&k| !(k > 0.0 && k < 1.0)) {
            return Err(Error::Argument("interior knots must lie strictly inside (0, 1)".into()));
        }
        let mut full = vec![0.0; order];
        full.extend_from_slice(&interior);
        full.extend(core::iter::repeat(1.0).take(order));
        Ok(Self { interior, order, full })
    }

    pub fn interior(&self) -> &[f64] {
        &self.interior
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn full_sequence(&self) -> &[f64] {
        &self.full
    }

    /// Ratio of the largest to the smallest spacing between consecutive
    /// distinct knots (boundaries included).
    pub fn spacing_ratio(&self) -> f64 {
        let mut pts = vec![0.0];
        pts.extend_from_slice(&self.interior);
        pts.push(1.0);
        let gaps = pts.windows(2).map(|w| w[1] - w[0]);
        let (lo, hi) = gaps.fold((f64::INFINITY, 0.0f64), |(lo, hi), g| (lo.min(g), hi.max(g)));
        hi / lo
    }
}

/// Places `m` interior knots either at `i / (m + 1)` or at the empirical
/// quantiles of `t_values` with the same percentile ranks.
pub fn build_knots(t_values: &[f64], m: usize, order: usize, placement: KnotPlacement) -> Result<KnotSet> {
    if order < 2 {
        return Err(Error::Argument(format!("spline order must be >= 2, got {order}")));
    }
    let ranks = (1..=m).map(|i| i as f64 / (m + 1) as f64);
    let interior: Vec<f64> = match placement {
        KnotPlacement::Uniform => ranks.collect(),
        KnotPlacement::Quantile => {
            if m > 0 && t_values.is_empty() {
                return Err(Error::Argument("quantile placement needs t values".into()));
            }
            let mut sorted = t_values.to_vec();
            sorted.sort_by(|a, b| a.total_cmp(b));
            let mut knots = Vec::with_capacity(m);
            for p in ranks {
                let q = quantile_sorted(&sorted, p);
                let prev = knots.last().copied().unwrap_or(0.0);
                if !(q > prev) || !(q < 1.0) {
                    return Err(Error::DuplicateKnot { percentile: p });
                }
                knots.push(q);
            }
            knots
        }
    };
    KnotSet::new(interior, order)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    knots: KnotSet,
}

impl SplineBasis {
    pub fn new(knots: KnotSet) -> Self {
        Self { knots }
    }

    /// Uniform basis of dimension `k` (needs `k >= order`).
    pub fn uniform(k: usize, order: usize) -> Result<Self> {
        if k < order {
            return Err(Error::Argument(format!("basis size {k} is below the order {order}")));
        }
        Ok(Self::new(build_knots(&[], k - order, order, KnotPlacement::Uniform)?))
    }

    pub fn with_placement(k: usize, order: usize, placement: KnotPlacement, t: &[f64]) -> Result<Self> {
        if k < order {
            return Err(Error::Argument(format!("basis size {k} is below the order {order}")));
        }
        Ok(Self::new(build_knots(t, k - order, order, placement)?))
    }

    pub fn knots(&self) -> &KnotSet {
        &self.knots
    }

    pub fn order(&self) -> usize {
        self.knots.order
    }

    pub fn dim(&self) -> usize {
        self.knots.interior.len() + self.knots.order
    }

    /// Index `s` of the knot interval `[τ_s, τ_{s+1})` containing `t`; the
    /// last interval is closed on the right.
    fn span(&self, t: f64) -> usize {
        let tau = &self.knots.full;
        let l = self.knots.order;
        let last = self.dim() - 1;
        if t >= 1.0 {
            return last;
        }
        // Binary search over the spans l-1 ..= last.
        let (mut lo, mut hi) = (l - 1, last);
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            if tau[mid] <= t {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Nonzero basis values at `t`: returns `start` and the `order` values of
    /// `B_start, …, B_{start+order-1}`. `t` must be in `[0, 1]`.
    pub fn eval_nonzero(&self, t: f64, out: &mut [f64]) -> usize {
        let l = self.knots.order;
        let tau = &self.knots.full;
        let s = self.span(t);
        let mut left = [0.0f64; 16];
        let mut right = [0.0f64; 16];
        let (left, right) = if l <= 16 {
            (&mut left[..l], &mut right[..l])
        } else {
            unreachable!("spline order above 16 is not supported")
        };
        out[0] = 1.0;
        for j in 1..l {
            left[j] = t - tau[s + 1 - j];
            right[j] = tau[s + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom == 0.0 { 0.0 } else { out[r] / denom };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        s + 1 - l
    }

    /// Full vector `B(t)` of length `k`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        check_unit(t)?;
        let mut vals = vec![0.0; self.order()];
        let start = self.eval_nonzero(t, &mut vals);
        let mut b = vec![0.0; self.dim()];
        b[start..start + self.order()].copy_from_slice(&vals);
        Ok(b)
    }

    /// Row-major `n × k` design matrix of basis values at `t`.
    pub fn design(&self, t: &[f64]) -> Result<Vec<f64>> {
        let k = self.dim();
        let mut out = vec![0.0; t.len() * k];
        let mut vals = vec![0.0; self.order()];
        for (i, &ti) in t.iter().enumerate() {
            check_unit(ti)?;
            let start = self.eval_nonzero(ti, &mut vals);
            out[i * k + start..i * k + start + self.order()].copy_from_slice(&vals);
        }
        Ok(out)
    }
}

fn check_unit(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain(format!("t = {t} is outside [0, 1]")))
    }
}

/// True iff the coefficients are nondecreasing.
pub fn is_feasible(lambda: &[f64]) -> bool {
    lambda.windows(2).all(|w| w[0] <= w[1])
}

/// Spline `Σ λ_j B_j` with nondecreasing coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneSpline {
    basis: SplineBasis,
    coefficients: Vec<f64>,
}

impl MonotoneSpline {
    pub fn new(basis: SplineBasis, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.dim() {
            return Err(Error::Dimension { expected: basis.dim(), got: coefficients.len() });
        }
        if !is_feasible(&coefficients) {
            return Err(Error::Argument("spline coefficients are not nondecreasing".into()));
        }
        Ok(Self { basis, coefficients })
    }

    pub fn basis(&self) -> &SplineBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        check_unit(t)?;
        let mut vals = vec![0.0; self.basis.order()];
        let start = self.basis.eval_nonzero(t, &mut vals);
        Ok(vals.iter().zip(&self.coefficients[start..]).map(|(b, l)| b * l).sum())
    }
}

use alloc::vec::Vec;

use crate::error::{Error, Result};

// Gauss–Kronrod 7/15 abscissae and weights (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_depth: 40,
        }
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * half, (kron - gauss).abs() * half)
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Argument("integration limits must be finite".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let width = hi - lo;
    // Explicit stack: (a, b, depth).
    let mut stack: Vec<(f64, f64, u32)> = Vec::with_capacity(64);
    stack.push((lo, hi, 0));
    let mut total = 0.0;
    while let Some((l, r, depth)) = stack.pop() {
        let (val, err) = kronrod(&mut f, l, r);
        if !val.is_finite() {
            return Err(Error::Numeric("non-finite integrand".into()));
        }
        let local_tol = (opts.abs_tol * (r - l) / width).max(opts.rel_tol * val.abs());
        if err <= local_tol || err < 1e-300 {
            total += val;
        } else if depth >= opts.max_depth {
            return Err(Error::Numeric("quadrature did not converge".into()));
        } else {
            let m = 0.5 * (l + r);
            stack.push((m, r, depth + 1));
            stack.push((l, m, depth + 1));
        }
    }
    Ok(sign * total)
}

/// Integrates over `[a, b]` with the interval pre-split at `points` (those
/// outside the interval are ignored). Kinks of the integrand belong there.
pub fn integrate_split<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    points: &[f64],
    opts: QuadratureOptions,
) -> Result<f64> {
    let mut cuts: Vec<f64> = Vec::with_capacity(points.len() + 2);
    cuts.push(a);
    cuts.extend(points.iter().copied().filter(|&p| p > a && p < b));
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    let sub = QuadratureOptions {
        abs_tol: opts.abs_tol / (cuts.len() - 1) as f64,
        ..opts
    };
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(&mut f, w[0], w[1], sub)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x, 0.0, 2.0, QuadratureOptions::default()).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_mass() {
        let v = integrate(
            |x| libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI),
            -12.0,
            12.0,
            QuadratureOptions::default(),
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let o = QuadratureOptions::default();
        let a = integrate(libm::sin, 0.0, 1.0, o).unwrap();
        let b = integrate(libm::sin, 1.0, 0.0, o).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn kink_split() {
        let v = integrate_split(|x: f64| x.abs(), -1.0, 2.0, &[0.0], QuadratureOptions::default()).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
    }
}

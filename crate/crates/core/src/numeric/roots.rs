use alloc::format;

use crate::error::{Error, Result};

/// Plain bisection on a bracket with `f(lo)` and `f(hi)` of opposite sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!("f({lo})={flo}, f({hi})={fhi}")));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bracketed root finder: Illinois false position, falling back to a
/// bisection step whenever the bracket fails to halve in two iterations.
/// Terminates when the bracket is narrower than `tol`.
pub fn bracketed_root<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let (mut a, mut b) = if lo < hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::Numeric(format!("non-finite value at bracket [{a}, {b}]")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket(format!("f({a})={fa}, f({b})={fb}")));
    }
    let mut side = 0i8;
    let mut width_ref = b - a;
    let mut since_halved = 0;
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if since_halved >= 2 || !(c > a && c < b) {
            c = 0.5 * (a + b);
            side = 0;
        }
        let fc = f(c);
        if !fc.is_finite() {
            return Err(Error::Numeric(format!("non-finite value at {c}")));
        }
        if fc == 0.0 {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if b - a <= 0.5 * width_ref {
            width_ref = b - a;
            since_halved = 0;
        } else {
            since_halved += 1;
        }
    }
    // Return the endpoint with the smaller residual.
    Ok(if fa.abs() < fb.abs() { a } else { b })
}

/// Grows `[lo, hi]` geometrically (both ends, positive domain) until `f`
/// changes sign, up to `max_steps` expansions.
pub fn expand_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    factor: f64,
    max_steps: usize,
) -> Result<(f64, f64)> {
    let mut flo = f(lo);
    let mut fhi = f(hi);
    for _ in 0..max_steps {
        if flo.signum() != fhi.signum() || flo == 0.0 || fhi == 0.0 {
            return Ok((lo, hi));
        }
        // Move the end whose value is closer to zero's side outward.
        if flo.abs() < fhi.abs() {
            lo /= factor;
            flo = f(lo);
        } else {
            hi *= factor;
            fhi = f(hi);
        }
    }
    if flo.signum() != fhi.signum() {
        Ok((lo, hi))
    } else {
        Err(Error::NoBracket(format!("no sign change on [{lo}, {hi}]")))
    }
}

use alloc::format;
use alloc::vec::Vec;

use super::{fit_with_k, Estimator, FitConfig, FitResult};
use crate::data::Dataset;
use crate::error::{Error, Result};

/// `⌈max(n^{1/5}/2, 4)⌉ ..= ⌊8 + 2 n^{1/5}⌋`.
pub fn bic_range(n: usize) -> (usize, usize) {
    let r = libm::pow(n as f64, 0.2);
    let lo = libm::ceil((r / 2.0).max(4.0)) as usize;
    let hi = libm::floor(8.0 + 2.0 * r) as usize;
    (lo, hi)
}

#[derive(Debug, Clone)]
pub struct BicSelection {
    pub k: usize,
    pub fit: FitResult,
    /// `(k, BIC(k))`, `None` where the fit failed.
    pub curve: Vec<(usize, Option<f64>)>,
    pub failures: usize,
}

/// Index of the first local minimum of `values`; a boundary point counts
/// when the curve rises away from it.
pub(crate) fn first_local_minimum(values: &[f64]) -> Option<usize> {
    let m = values.len();
    (0..m).find(|&j| (j == 0 || values[j] <= values[j - 1]) && (j + 1 == m || values[j] <= values[j + 1]))
}

/// Repeats the last coefficient so a solution for `k` can start the fit
/// for `k + 1`.
fn pad(theta: &[f64]) -> Vec<f64> {
    let mut out = theta.to_vec();
    if let Some(&last) = theta.last() {
        out.push(last);
    }
    out
}

/// Fits every `k` in the range (or up to the first certain local minimum
/// with `bic_early_stop`) and keeps the first local minimum of
/// `BIC(k) = L_n + (log n / 2n)(k + p)`.
pub fn bic_select(
    data: &Dataset,
    estimator: Estimator,
    cfg: &FitConfig,
    k_range: Option<(usize, usize)>,
) -> Result<BicSelection> {
    cfg.validate()?;
    let (lo, hi) = k_range.unwrap_or_else(|| bic_range(data.n()));
    let lo = lo.max(cfg.order);
    let hi = hi.min(data.n().saturating_sub(data.p + 1));
    if lo > hi {
        return Err(Error::Argument(format!("empty basis-size range {lo}..={hi}")));
    }
    let mut curve = Vec::new();
    let mut fits: Vec<FitResult> = Vec::new();
    let mut failures = 0;
    let mut warm: Option<Vec<f64>> = None;
    let mut last_err = None;
    for k in lo..=hi {
        match fit_with_k(data, estimator, k, cfg, warm.as_deref()) {
            Ok(f) => {
                curve.push((k, Some(f.bic)));
                warm = Some(pad(&f.theta()));
                fits.push(f);
            }
            Err(e) => {
                curve.push((k, None));
                failures += 1;
                last_err = Some(e);
            }
        }
        if cfg.bic_early_stop && fits.len() >= 2 {
            let m = fits.len();
            if fits[m - 1].bic > fits[m - 2].bic {
                break;
            }
        }
    }
    if fits.is_empty() {
        return Err(Error::AllFailed(format!(
            "every basis size failed; last error: {}",
            last_err.map(|e| alloc::string::ToString::to_string(&e)).unwrap_or_default()
        )));
    }
    let values: Vec<f64> = fits.iter().map(|f| f.bic).collect();
    let j = first_local_minimum(&values).expect("nonempty curve has a local minimum");
    let mut fit = fits.swap_remove(j);
    fit.bic_curve = curve.clone();
    Ok(BicSelection { k: fit.k, fit, curve, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_for_100() {
        assert_eq!(bic_range(100), (4, 13));
    }

    #[test]
    fn valley_and_boundaries() {
        assert_eq!(first_local_minimum(&[5.0, 4.0, 3.0, 3.5, 2.0]), Some(2));
        assert_eq!(first_local_minimum(&[1.0, 2.0, 3.0]), Some(0));
        assert_eq!(first_local_minimum(&[3.0, 2.0, 1.0]), Some(2));
    }
}

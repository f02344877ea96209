use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{fit, fit_with_k, Estimator, FitConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Jackknife {
    pub sd: Vec<f64>,
    pub failed: usize,
    pub total: usize,
}

/// Leave-one-out jackknife SDs of `β̂`, with `k` fixed at the full-data
/// choice and every refit warm-started at the full-data solution.
pub fn jackknife_se(data: &Dataset, estimator: Estimator, cfg: &FitConfig) -> Result<Jackknife> {
    let full = fit(data, estimator, cfg)?;
    jackknife_with(data, estimator, cfg, full.k, Some(&full.theta()))
}

/// Jackknife with an explicit `k` and optional warm start.
pub fn jackknife_with(
    data: &Dataset,
    estimator: Estimator,
    cfg: &FitConfig,
    k: usize,
    warm: Option<&[f64]>,
) -> Result<Jackknife> {
    let n = data.n();
    if n < 20 {
        return Err(Error::Argument(format!("the jackknife needs n >= 20, got {n}")));
    }
    let p = data.p;
    let mut betas: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut failed = 0;
    for i in 0..n {
        match fit_with_k(&data.without(i), estimator, k, cfg, warm) {
            Ok(f) => betas.push(f.beta),
            Err(_) => failed += 1,
        }
    }
    if failed as f64 > 0.1 * n as f64 {
        return Err(Error::TooManyFailures { failed, total: n });
    }
    let m = betas.len() as f64;
    let mut sd = vec![0.0; p];
    for (j, s) in sd.iter_mut().enumerate() {
        let mean = betas.iter().map(|b| b[j]).sum::<f64>() / m;
        let ss: f64 = betas.iter().map(|b| (b[j] - mean) * (b[j] - mean)).sum();
        *s = libm::sqrt((m - 1.0) / m * ss);
    }
    Ok(Jackknife { sd, failed, total: n })
}

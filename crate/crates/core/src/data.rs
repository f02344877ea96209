use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Whether log-Gamma responses are stored raw (`y > 0`) or already logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponseScale {
    #[default]
    Raw,
    Log,
}

/// `n` observations of `(response, x ∈ R^p, t ∈ [0, 1])`.
///
/// Carriers are stored row-major: `x[i * p + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub response: Vec<f64>,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub p: usize,
    pub scale: ResponseScale,
}

impl Dataset {
    pub fn new(response: Vec<f64>, x: Vec<f64>, t: Vec<f64>, p: usize) -> Result<Self> {
        let n = response.len();
        if t.len() != n {
            return Err(Error::Dimension { expected: n, got: t.len() });
        }
        if x.len() != n * p {
            return Err(Error::Dimension { expected: n * p, got: x.len() });
        }
        if let Some((i, v)) = t.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("t[{i}] = {v} is outside [0, 1]")));
        }
        if response.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite response or carrier".into()));
        }
        Ok(Self { response, x, t, p, scale: ResponseScale::Raw })
    }

    pub fn with_scale(mut self, scale: ResponseScale) -> Self {
        self.scale = scale;
        self
    }

    pub fn n(&self) -> usize {
        self.response.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n()).map(|i| self.x[i * self.p + j]).collect()
    }

    /// Copy without observation `skip`.
    pub fn without(&self, skip: usize) -> Self {
        let keep = |i: &usize| *i != skip;
        let idx: Vec<usize> = (0..self.n()).filter(keep).collect();
        self.select(&idx)
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.p);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Self {
            response: idx.iter().map(|&i| self.response[i]).collect(),
            x,
            t: idx.iter().map(|&i| self.t[i]).collect(),
            p: self.p,
            scale: self.scale,
        }
    }

    /// Rescales `t` linearly onto `[0, 1]`; returns the original `(min, max)`.
    pub fn rescale_t(t: &mut [f64]) -> Result<(f64, f64)> {
        let lo = t.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            return Err(Error::Degenerate("t has no spread to rescale".into()));
        }
        for v in t.iter_mut() {
            *v = ((*v - lo) / (hi - lo)).clamp(0.0, 1.0);
        }
        Ok((lo, hi))
    }
}

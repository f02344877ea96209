//! Monte Carlo harness for the log-Gamma partly linear model: data
//! generation, the contamination schemes, replication and summary metrics.
//!
//! Randomness: replication `r` draws its clean sample from stream `2r` and
//! its contamination draws from stream `2r + 1` of a ChaCha8 generator keyed
//! by the base seed, so every scheme sees common random numbers.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};

use crate::data::{Dataset, ResponseScale};
use crate::error::{Error, Result};
use crate::fit::{fit, ise, Estimator, FitConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaModel {
    /// `sin(πt/2)`.
    Model1,
    /// `πt + 0.25 sin(4πt)`.
    Model2,
    Constant(f64),
}

impl EtaModel {
    pub fn eval(&self, t: f64) -> f64 {
        use core::f64::consts::PI;
        match self {
            Self::Model1 => libm::sin(PI * t / 2.0),
            Self::Model2 => PI * t + 0.25 * libm::sin(4.0 * PI * t),
            Self::Constant(c) => *c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Contamination {
    #[default]
    C0,
    /// High-leverage carriers `x* ~ N(5, 1/16)`; responses untouched.
    C1,
    /// Responses generated with a wrong carrier `x* ~ N(5, 1/16)`.
    C2,
    /// Carriers `x* ~ N(0, 25)` and responses `3 log 10 + u*`.
    C3,
}

impl Contamination {
    pub const ALL: [Contamination; 4] = [Self::C0, Self::C1, Self::C2, Self::C3];

    pub fn label(&self) -> &'static str {
        match self {
            Self::C0 => "C0",
            Self::C1 => "C1",
            Self::C2 => "C2",
            Self::C3 => "C3",
        }
    }
}

/// Fraction of observations replaced under contamination.
pub const CONTAMINATION_RATE: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub n: usize,
    pub beta0: f64,
    pub eta: EtaModel,
    pub alpha: f64,
    pub contamination: Contamination,
    pub replications: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n: 100,
            beta0: 2.0,
            eta: EtaModel::Model1,
            alpha: 3.0,
            contamination: Contamination::C0,
            replications: 1000,
            seed: 20_240_601,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.replications == 0 {
            return Err(Error::Argument("n and the replication count must be positive".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Argument(alloc::format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }

    fn stream(&self, rep: usize, which: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(2 * rep as u64 + which);
        rng
    }

    fn log_gamma(&self) -> LogGamma {
        LogGamma(Gamma::new(self.alpha, 1.0 / self.alpha).expect("alpha validated"))
    }
}

/// `log G` with `G ~ Γ(shape α, mean 1)`.
struct LogGamma(Gamma<f64>);

impl LogGamma {
    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        libm::log(self.0.sample(rng))
    }
}

/// Clean sample for replication `rep`, stored on the log scale
/// (`z = β₀x + η₀(t) + u`). Draw order: all `x`, all `t`, all `u`.
pub fn generate(cfg: &ScenarioConfig, rep: usize) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = cfg.stream(rep, 0);
    let n = cfg.n;
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let x: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut rng)).collect();
    let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let lg = cfg.log_gamma();
    let z: Vec<f64> = (0..n)
        .map(|i| cfg.beta0 * x[i] + cfg.eta.eval(t[i]) + lg.sample(&mut rng))
        .collect();
    Ok(Dataset::new(z, x, t, 1)?.with_scale(ResponseScale::Log))
}

/// Applies `scheme` to a sample produced by [`generate`]. The selector
/// `v_i` and every candidate replacement are drawn for all observations,
/// in a fixed order, whatever the scheme.
pub fn contaminate(data: &Dataset, scheme: Contamination, cfg: &ScenarioConfig, rep: usize) -> Result<Dataset> {
    if data.p != 1 || data.scale != ResponseScale::Log {
        return Err(Error::Argument("contamination expects a generated log-scale sample with p = 1".into()));
    }
    let mut out = data.clone();
    if scheme == Contamination::C0 {
        return Ok(out);
    }
    let n = data.n();
    let mut rng = cfg.stream(rep, 1);
    let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let near = Normal::new(5.0, 0.25).expect("valid normal");
    let wide = Normal::new(0.0, 5.0).expect("valid normal");
    let lg = cfg.log_gamma();
    for i in 0..n {
        let x_near = near.sample(&mut rng);
        let u_star = lg.sample(&mut rng);
        let x_wide = wide.sample(&mut rng);
        let u_wide = lg.sample(&mut rng);
        if v[i] <= 1.0 - CONTAMINATION_RATE {
            continue;
        }
        match scheme {
            Contamination::C0 => {}
            Contamination::C1 => out.x[i] = x_near,
            Contamination::C2 => {
                out.response[i] = cfg.beta0 * x_near + cfg.eta.eval(data.t[i]) + u_star;
            }
            Contamination::C3 => {
                out.x[i] = x_wide;
                out.response[i] = 3.0 * core::f64::consts::LN_10 + u_wide;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub estimator: Estimator,
    pub beta: Option<f64>,
    pub ise: Option<f64>,
    pub k: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub bias: f64,
    pub sd: f64,
    pub mse: f64,
    pub mise: f64,
    pub successes: usize,
    pub failures: usize,
    /// More than 5% of the fits failed.
    pub flagged: bool,
    /// Fewer than two successful replications: `sd` is reported as 0.
    pub sd_undefined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub scenario: ScenarioConfig,
    pub summaries: Vec<EstimatorSummary>,
    pub records: Vec<RepRecord>,
}

impl SimulationReport {
    pub fn summary(&self, estimator: Estimator) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == estimator)
    }
}

/// Fit configuration for replication `rep`: the S-step seed is mixed with
/// the replication index.
pub fn replication_fit_config(base: &FitConfig, rep: usize) -> FitConfig {
    let mut cfg = base.clone();
    cfg.seed = base.seed ^ (rep as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    cfg
}

/// Generates, contaminates and fits one replication.
pub fn run_replication(
    cfg: &ScenarioConfig,
    estimators: &[Estimator],
    fit_cfg: &FitConfig,
    rep: usize,
) -> Result<Vec<RepRecord>> {
    let clean = generate(cfg, rep)?;
    let data = contaminate(&clean, cfg.contamination, cfg, rep)?;
    let fc = replication_fit_config(fit_cfg, rep);
    let eta0 = |t: f64| cfg.eta.eval(t);
    Ok(estimators
        .iter()
        .map(|&estimator| match fit(&data, estimator, &fc) {
            Ok(f) => RepRecord {
                rep,
                estimator,
                beta: Some(f.beta[0]),
                ise: ise(&f.eta, eta0, &data.t).ok(),
                k: Some(f.k),
                error: None,
            },
            Err(e) => RepRecord { rep, estimator, beta: None, ise: None, k: None, error: Some(e.to_string()) },
        })
        .collect())
}

/// Aggregates replication records (in any order) into a report.
pub fn summarize(cfg: &ScenarioConfig, estimators: &[Estimator], mut records: Vec<RepRecord>) -> SimulationReport {
    records.sort_by_key(|r| r.rep);
    let summaries = estimators
        .iter()
        .map(|&estimator| {
            let mine: Vec<&RepRecord> = records.iter().filter(|r| r.estimator == estimator).collect();
            let ok: Vec<(f64, f64)> = mine
                .iter()
                .filter_map(|r| Some((r.beta?, r.ise?)))
                .collect();
            let m = ok.len();
            let failures = mine.len() - m;
            let mf = m as f64;
            let (mut bias, mut mse, mut mise) = (0.0, 0.0, 0.0);
            for &(b, i) in &ok {
                let e = b - cfg.beta0;
                bias += e;
                mse += e * e;
                mise += i;
            }
            if m > 0 {
                bias /= mf;
                mse /= mf;
                mise /= mf;
            } else {
                bias = f64::NAN;
                mse = f64::NAN;
                mise = f64::NAN;
            }
            let sd = if m >= 2 {
                let mean = ok.iter().map(|o| o.0).sum::<f64>() / mf;
                libm::sqrt(ok.iter().map(|o| (o.0 - mean) * (o.0 - mean)).sum::<f64>() / (mf - 1.0))
            } else {
                0.0
            };
            EstimatorSummary {
                estimator,
                bias,
                sd,
                mse,
                mise,
                successes: m,
                failures,
                flagged: failures as f64 > 0.05 * mine.len() as f64,
                sd_undefined: m < 2,
            }
        })
        .collect();
    SimulationReport { scenario: *cfg, summaries, records }
}

/// Serial campaign over `cfg.replications` replications.
pub fn run_campaign(cfg: &ScenarioConfig, estimators: &[Estimator], fit_cfg: &FitConfig) -> Result<SimulationReport> {
    cfg.validate()?;
    if estimators.is_empty() {
        return Err(Error::Argument("no estimators requested".into()));
    }
    let mut records = Vec::with_capacity(cfg.replications * estimators.len());
    for rep in 0..cfg.replications {
        records.extend(run_replication(cfg, estimators, fit_cfg, rep)?);
    }
    Ok(summarize(cfg, estimators, records))
}

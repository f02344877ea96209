//! Parallel Monte Carlo campaigns. Replications run on a rayon pool and are
//! merged by replication index, so reports do not depend on the pool size.

use isogplm_core::{
    run_replication, summarize, Estimator, FitConfig, RepRecord, ScenarioConfig, SimulationReport,
};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// `threads = 1` runs serially on the calling thread.
pub fn run_parallel(
    cfg: &ScenarioConfig,
    estimators: &[Estimator],
    fit_cfg: &FitConfig,
    threads: usize,
) -> Result<SimulationReport> {
    cfg.validate()?;
    fit_cfg.validate()?;
    if estimators.is_empty() {
        return Err(isogplm_core::Error::Argument("no estimators requested".into()).into());
    }
    let one = |rep: usize| run_replication(cfg, estimators, fit_cfg, rep);
    let per_rep: Vec<isogplm_core::Result<Vec<RepRecord>>> = if threads <= 1 {
        (0..cfg.replications).map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Format(format!("cannot start {threads} worker threads: {e}")))?;
        pool.install(|| (0..cfg.replications).into_par_iter().map(one).collect())
    };
    let mut records = Vec::with_capacity(cfg.replications * estimators.len());
    for r in per_rep {
        records.extend(r?);
    }
    Ok(summarize(cfg, estimators, records))
}

//! Robust estimation for generalized partly linear models whose
//! nonparametric component is monotone.
//!
//! The model is `E[y | x, t] = H(xᵀβ + η(t))` with `η` nondecreasing on
//! `[0, 1]`. `η` is represented in a B-spline basis with ordered
//! coefficients, large deviances are bounded through a score function, and
//! the ordering constraints are handled by an active-set Newton method.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and
//! parallel Monte Carlo campaigns live in the `isogplm` companion crate.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod fit;
pub mod loss;
pub mod numeric;
pub mod optimizer;
pub mod scale;
pub mod simulate;
pub mod spline;

pub use data::{Dataset, ResponseScale};
pub use error::{Error, Result};
pub use fit::{
    bic_range, bic_select, fit, fit_classical, fit_identity, fit_logistic, fit_robust_loggamma,
    ise, jackknife_se, BasisSize, BicSelection, Estimator, FitConfig, FitFlag, FitResult, Nuisance,
};
pub use loss::{deviance_d, FamilyKind, LeverageWeight, ModelFamily, NuisanceKind, ScoreFunction};
pub use optimizer::{active_set_minimize_inspect, 
    active_set_minimize, newton_minimize, ActiveSet, Objective, SolverOptions, SolverReport,
    Termination,
};
pub use scale::{m_scale, CalibrationRow, MScaleConfig, ShapeCalibration};
pub use simulate::{
    contaminate, generate, run_campaign, run_replication, summarize, Contamination, EstimatorSummary,
    EtaModel, RepRecord, ScenarioConfig, SimulationReport,
};
pub use spline::{build_knots, is_feasible, KnotPlacement, KnotSet, MonotoneSpline, SplineBasis};

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isogplm::io::{raw_rows, table_rows, RAW_HEADER, TABLE_HEADER};
use isogplm::{sig6, Error, Result};
use isogplm_core::scale::{ALPHA_MAX, ALPHA_MIN};
use isogplm_core::{
    bic_select, fit, jackknife_se, BasisSize, Contamination, Estimator, EtaModel, FitConfig, FitFlag,
    KnotPlacement, ScenarioConfig, ShapeCalibration,
};

/// Robust monotone partly linear regression.
#[derive(Parser, Debug)]
#[command(name = "isogplm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model to a CSV file (`y,t,x1..xp`).
    Fit(FitArgs),
    /// Print the BIC curve over basis sizes and the selected size.
    Bic(BicArgs),
    /// Monte Carlo campaign under the contamination schemes.
    Simulate(SimulateArgs),
    /// Export the log-Gamma calibration table over an alpha grid.
    Calibrate(CalibrateArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    LogGamma,
    Identity,
    Logistic,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Placement {
    Uniform,
    Quantile,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "log-gamma")]
    family: Family,
    /// Unbounded deviance loss without leverage weights (log-Gamma only).
    #[arg(long)]
    classical: bool,
    /// Spline order; 4 gives cubic splines.
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    placement: Placement,
    /// Basis size, or `auto` for BIC selection.
    #[arg(long, default_value = "auto")]
    k: String,
    /// Stop the BIC scan at the first certain local minimum.
    #[arg(long)]
    bic_early_stop: bool,
    #[arg(long, default_value_t = 0.9)]
    efficiency: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    subsamples: usize,
    #[arg(long, default_value_t = 4.685)]
    c_w: f64,
    /// Calibration CSV from `calibrate`, used to narrow root brackets.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InputArgs {
    #[arg(long, short)]
    input: PathBuf,
    /// Min-max rescale t onto [0, 1].
    #[arg(long)]
    rescale_t: bool,
    /// The y column already holds log responses (log-Gamma only).
    #[arg(long)]
    log_response: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// FitResult text (JSON).
    #[arg(long, short)]
    output: PathBuf,
    /// Two-column (t, eta_hat) grid file.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 201)]
    grid_points: usize,
    /// Add leave-one-out jackknife standard deviations for beta.
    #[arg(long)]
    jackknife: bool,
    /// Line-delimited optimizer trace of the final minimization.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BicArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    /// TSV `k, bic`; printed to stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Model {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Scheme {
    C0,
    C1,
    C2,
    C3,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum EstimatorArg {
    Robust,
    Classical,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["1"])]
    model: Vec<Model>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["c0", "c1", "c2", "c3"])]
    scheme: Vec<Scheme>,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["robust", "classical"])]
    estimators: Vec<EstimatorArg>,
    /// Number of replications.
    #[arg(long, default_value_t = 1000)]
    nr: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 2.0)]
    beta0: f64,
    #[arg(long, default_value_t = 3.0)]
    alpha: f64,
    #[arg(long, default_value_t = 20_240_601)]
    seed: u64,
    /// Basis size, or `auto` for per-replication BIC selection.
    #[arg(long, default_value = "auto")]
    k: String,
    #[arg(long)]
    bic_early_stop: bool,
    #[arg(long, default_value_t = 0.9)]
    efficiency: f64,
    #[arg(long, default_value_t = 4.685)]
    c_w: f64,
    /// Worker threads; the report is identical for every value.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Summary TSV: Bias, SD, MSE and MISE per scheme and estimator.
    #[arg(long)]
    table: PathBuf,
    /// Per-replication CSV.
    #[arg(long)]
    raw: PathBuf,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Comma-separated, strictly increasing alpha values.
    #[arg(long, value_delimiter = ',', required = true)]
    alphas: Vec<f64>,
    /// Also print the tuning constant for this efficiency.
    #[arg(long, default_value_t = 0.9)]
    efficiency: f64,
    #[arg(long, short)]
    output: PathBuf,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Core(isogplm_core::Error::Argument(msg.into()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn basis_size(k: &str) -> Result<BasisSize> {
    if k == "auto" {
        return Ok(BasisSize::Bic);
    }
    k.parse().map(BasisSize::Fixed).map_err(|_| usage(format!("--k must be `auto` or an integer, got `{k}`")))
}

fn estimator(m: &ModelArgs) -> Result<Estimator> {
    match (m.family, m.classical) {
        (Family::LogGamma, false) => Ok(Estimator::Robust),
        (Family::LogGamma, true) => Ok(Estimator::Classical),
        (_, true) => Err(usage("--classical applies to the log-gamma family only")),
        (Family::Identity, false) => Ok(Estimator::Identity),
        (Family::Logistic, false) => Ok(Estimator::Logistic),
    }
}

fn fit_config(m: &ModelArgs) -> Result<FitConfig> {
    let mut cfg = FitConfig {
        order: m.order,
        placement: match m.placement {
            Placement::Uniform => KnotPlacement::Uniform,
            Placement::Quantile => KnotPlacement::Quantile,
        },
        basis_size: basis_size(&m.k)?,
        bic_early_stop: m.bic_early_stop,
        efficiency: m.efficiency,
        subsamples: m.subsamples,
        seed: m.seed,
        c_w: m.c_w,
        ..FitConfig::default()
    };
    if let Some(path) = &m.calibration {
        let rows = isogplm::read_calibration(path)?;
        cfg.calibration = ShapeCalibration::default().with_table(rows)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load(input: &InputArgs, family: Family) -> Result<isogplm::LoadedData> {
    if input.log_response && family != Family::LogGamma {
        return Err(usage("--log-response applies to the log-gamma family only"));
    }
    let loaded = isogplm::read_dataset(
        &input.input,
        isogplm::ReadOptions { rescale_t: input.rescale_t, log_response: input.log_response },
    )?;
    if family == Family::Logistic {
        if let Some(i) = loaded.data.response.iter().position(|y| *y != 0.0 && *y != 1.0) {
            return Err(usage(format!("logistic family needs y in {{0, 1}}; data row {} has y = {}", i + 1, loaded.data.response[i])));
        }
    }
    Ok(loaded)
}

fn cmd_fit(a: &FitArgs) -> Result<i32> {
    let est = estimator(&a.model)?;
    let mut cfg = fit_config(&a.model)?;
    cfg.solver.trace = a.trace.is_some();
    let loaded = load(&a.input, a.model.family)?;
    let result = fit(&loaded.data, est, &cfg)?;
    let jk = if a.jackknife { Some(jackknife_se(&loaded.data, est, &cfg)?.sd) } else { None };
    write(&a.output, &isogplm::fit_json(&result, loaded.t_range, jk.as_deref()))?;
    write(&a.grid, &isogplm::grid_text(&result, a.grid_points)?)?;
    if let Some(path) = &a.trace {
        write(path, &result.report.trace_text())?;
    }
    if result.flags.contains(&FitFlag::NonConvergence) || !result.converged() {
        eprintln!("warning: the final minimization did not converge");
        return Ok(2);
    }
    Ok(0)
}

fn cmd_bic(a: &BicArgs) -> Result<i32> {
    let est = estimator(&a.model)?;
    let cfg = fit_config(&a.model)?;
    let loaded = load(&a.input, a.model.family)?;
    let range = match (a.k_min, a.k_max) {
        (None, None) => None,
        (lo, hi) => {
            let (dlo, dhi) = isogplm_core::bic_range(loaded.data.n());
            Some((lo.unwrap_or(dlo), hi.unwrap_or(dhi)))
        }
    };
    let sel = bic_select(&loaded.data, est, &cfg, range)?;
    let mut out = String::from("k\tbic\n");
    for (k, b) in &sel.curve {
        out.push_str(&format!("{k}\t{}\n", b.map_or("NA".to_string(), sig6)));
    }
    match &a.output {
        Some(path) => write(path, &out)?,
        None => print!("{out}"),
    }
    println!("selected k = {}", sel.k);
    Ok(if sel.fit.converged() { 0 } else { 2 })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    if a.nr == 0 {
        return Err(usage("--nr must be positive"));
    }
    let fit_cfg = FitConfig {
        basis_size: basis_size(&a.k)?,
        bic_early_stop: a.bic_early_stop,
        efficiency: a.efficiency,
        c_w: a.c_w,
        ..FitConfig::default()
    };
    let ests: Vec<Estimator> = a
        .estimators
        .iter()
        .map(|e| match e {
            EstimatorArg::Robust => Estimator::Robust,
            EstimatorArg::Classical => Estimator::Classical,
        })
        .collect();
    let mut table = format!("{TABLE_HEADER}\n");
    let mut raw = format!("{RAW_HEADER}\n");
    for &model in &a.model {
        let (label, eta) = match model {
            Model::One => ("1", EtaModel::Model1),
            Model::Two => ("2", EtaModel::Model2),
        };
        for &scheme in &a.scheme {
            let contamination = match scheme {
                Scheme::C0 => Contamination::C0,
                Scheme::C1 => Contamination::C1,
                Scheme::C2 => Contamination::C2,
                Scheme::C3 => Contamination::C3,
            };
            let scenario = ScenarioConfig {
                n: a.n,
                beta0: a.beta0,
                eta,
                alpha: a.alpha,
                contamination,
                replications: a.nr,
                seed: a.seed,
            };
            let report = isogplm::run_parallel(&scenario, &ests, &fit_cfg, a.parallel)?;
            table.push_str(&table_rows(label, &report));
            raw.push_str(&raw_rows(label, &report));
        }
    }
    write(&a.table, &table)?;
    write(&a.raw, &raw)?;
    Ok(0)
}

fn cmd_calibrate(a: &CalibrateArgs) -> Result<i32> {
    if !(a.efficiency > 0.0 && a.efficiency < 1.0) {
        return Err(usage(format!("--efficiency must lie in (0, 1), got {}", a.efficiency)));
    }
    if let Some(bad) = a.alphas.iter().find(|v| !(**v >= ALPHA_MIN && **v <= ALPHA_MAX)) {
        return Err(usage(format!("alpha {bad} is outside [{ALPHA_MIN}, {ALPHA_MAX}]")));
    }
    if a.alphas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(usage("the alpha grid must be strictly increasing"));
    }
    let cal = ShapeCalibration::default();
    let rows = cal.build_table(&a.alphas)?;
    write(&a.output, &isogplm::calibration_csv(&rows))?;
    println!("alpha\tc_e({})", sig6(a.efficiency));
    for &alpha in &a.alphas {
        println!("{}\t{}", sig6(alpha), sig6(cal.tuning_for_efficiency(alpha, a.efficiency)?));
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Help and version are successes; every other parse failure is a usage error.
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Bic(a) => cmd_bic(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Calibrate(a) => cmd_calibrate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

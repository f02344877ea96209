//! File formats: CSV input, fit output, calibration tables and campaign
//! reports.

use std::fs;
use std::path::Path;

use isogplm_core::{
    CalibrationRow, Dataset, Estimator, FitResult, Nuisance, ResponseScale, SimulationReport,
};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::format::{round6, sig6};

#[derive(Debug, Clone, Copy, Default)]
pub struct ReadOptions {
    /// Min-max rescale `t` onto `[0, 1]` instead of rejecting values outside.
    pub rescale_t: bool,
    /// `y` already holds `log y` (log-Gamma fits only).
    pub log_response: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedData {
    pub data: Dataset,
    /// Original `(min, max)` of `t` when it was rescaled.
    pub t_range: Option<(f64, f64)>,
}

/// Reads a CSV with header `y,t,x1,...,xp` (columns in any order).
pub fn read_dataset(path: &Path, opts: ReadOptions) -> Result<LoadedData> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, opts)
}

pub fn parse_dataset(text: &str, opts: ReadOptions) -> Result<LoadedData> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Format(format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::Format("empty input: expected header y,t,x1..xp".into()));
    }
    let find = |name: &str| header.iter().position(|h| h == name);
    let y_col = find("y").ok_or_else(|| Error::Format("missing column `y`".into()))?;
    let t_col = find("t").ok_or_else(|| Error::Format("missing column `t`".into()))?;
    let mut x_cols = Vec::new();
    while let Some(c) = find(&format!("x{}", x_cols.len() + 1)) {
        x_cols.push(c);
    }
    if x_cols.is_empty() {
        return Err(Error::Format("missing column `x1`: at least one linear carrier is required".into()));
    }
    if header.len() != 2 + x_cols.len() {
        let known = |h: &String| h == "y" || h == "t" || x_cols.iter().any(|&c| &header[c] == h);
        let extra = header.iter().find(|h| !known(h)).cloned().unwrap_or_default();
        return Err(Error::Format(format!("unexpected column `{extra}`; carriers must be named x1..xp")));
    }
    let p = x_cols.len();
    let (mut y, mut t, mut x) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::Field { line, column: "*".into(), message: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |c: usize| -> Result<f64> {
            let raw = rec.get(c).unwrap_or("");
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Field { line, column: header[c].clone(), message: format!("`{raw}` is not a finite number") }),
            }
        };
        y.push(field(y_col)?);
        let tv = field(t_col)?;
        if !opts.rescale_t && !(0.0..=1.0).contains(&tv) {
            return Err(Error::Field {
                line,
                column: "t".into(),
                message: format!("{tv} is outside [0, 1]; pass --rescale-t to min-max rescale"),
            });
        }
        t.push(tv);
        for &c in &x_cols {
            x.push(field(c)?);
        }
    }
    if y.is_empty() {
        return Err(Error::Format("no data rows".into()));
    }
    let t_range = if opts.rescale_t { Some(Dataset::rescale_t(&mut t)?) } else { None };
    let scale = if opts.log_response { ResponseScale::Log } else { ResponseScale::Raw };
    Ok(LoadedData { data: Dataset::new(y, x, t, p)?.with_scale(scale), t_range })
}

/// Writes `data` in the input format (full precision, so it reloads exactly).
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::from("y,t");
    for j in 1..=data.p {
        out.push_str(&format!(",x{j}"));
    }
    out.push('\n');
    for i in 0..data.n() {
        out.push_str(&format!("{},{}", data.response[i], data.t[i]));
        for v in data.row(i) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::Robust => "robust",
        Estimator::Classical => "classical",
        Estimator::Identity => "identity",
        Estimator::Logistic => "logistic",
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round6(x))
    } else {
        Value::Null
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

/// Structured text for a fit; every number carries six significant digits.
pub fn fit_json(fit: &FitResult, t_range: Option<(f64, f64)>, jackknife_sd: Option<&[f64]>) -> String {
    let nuisance = match fit.nuisance {
        Nuisance::Alpha(a) => json!({ "alpha": num(a) }),
        Nuisance::Sigma(s) => json!({ "sigma": num(s) }),
        Nuisance::None => Value::Null,
    };
    let curve: Vec<Value> = fit
        .bic_curve
        .iter()
        .map(|(k, b)| json!({ "k": k, "bic": b.map_or(Value::Null, num) }))
        .collect();
    let r = &fit.report;
    let v = json!({
        "estimator": estimator_name(fit.estimator),
        "beta": nums(&fit.beta),
        "beta_jackknife_sd": jackknife_sd.map_or(Value::Null, nums),
        "lambda": nums(&fit.lambda),
        "k": fit.k,
        "order": fit.eta.basis().order(),
        "interior_knots": nums(fit.eta.basis().knots().interior()),
        "nuisance": nuisance,
        "tuning": fit.tuning.map_or(Value::Null, num),
        "s_scale": fit.s_scale.map_or(Value::Null, num),
        "objective": num(fit.objective),
        "bic": num(fit.bic),
        "bic_curve": curve,
        "t_rescaled_from": t_range.map_or(Value::Null, |(lo, hi)| json!([num(lo), num(hi)])),
        "flags": fit.flags.iter().map(|f| format!("{f:?}")).collect::<Vec<_>>(),
        "solver": {
            "converged": r.converged(),
            "termination": format!("{:?}", r.termination),
            "iterations": r.iterations,
            "gradient_norm": num(r.gradient_norm),
            "active_set": r.active_set,
            "multipliers": nums(&r.multipliers),
        },
    });
    serde_json::to_string_pretty(&v).expect("json values serialize") + "\n"
}

/// Two-column `(t, eta_hat)` file on an equispaced grid of `points` values.
pub fn grid_text(fit: &FitResult, points: usize) -> Result<String> {
    let points = points.max(2);
    let mut out = String::from("t,eta_hat\n");
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        out.push_str(&format!("{},{}\n", sig6(t), sig6(fit.eta.eval(t)?)));
    }
    Ok(out)
}

const CALIBRATION_HEADER: &str = "alpha,sigma_star,c_e_090,c_e_095";

/// Calibration table as CSV. Values use the shortest representation that
/// parses back to the same `f64`, so a reload is exact.
pub fn calibration_csv(rows: &[CalibrationRow]) -> String {
    let mut out = format!("{CALIBRATION_HEADER}\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.alpha, r.sigma_star, r.c_e_090, r.c_e_095));
    }
    out
}

pub fn parse_calibration(text: &str) -> Result<Vec<CalibrationRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| Error::Format(e.to_string()))?;
    let names: Vec<&str> = header.iter().collect();
    if names.join(",") != CALIBRATION_HEADER {
        return Err(Error::Format(format!("calibration header must be `{CALIBRATION_HEADER}`")));
    }
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut v = [0.0; 4];
        for (c, slot) in v.iter_mut().enumerate() {
            let raw = rec.get(c).unwrap_or("");
            *slot = raw.parse().map_err(|_| Error::Field {
                line,
                column: names[c].clone(),
                message: format!("`{raw}` is not a number"),
            })?;
        }
        rows.push(CalibrationRow { alpha: v[0], sigma_star: v[1], c_e_090: v[2], c_e_095: v[3] });
    }
    Ok(rows)
}

pub fn read_calibration(path: &Path) -> Result<Vec<CalibrationRow>> {
    parse_calibration(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

pub const TABLE_HEADER: &str = "model\tscheme\testimator\tBias\tSD\tMSE\tMISE\tsuccesses\tfailures\tflagged";

/// Summary rows (scheme × estimator: Bias, SD, MSE, MISE) for one model.
pub fn table_rows(model: &str, report: &SimulationReport) -> String {
    let mut out = String::new();
    for s in &report.summaries {
        out.push_str(&format!(
            "{model}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            report.scenario.contamination.label(),
            estimator_name(s.estimator),
            sig6(s.bias),
            sig6(s.sd),
            sig6(s.mse),
            sig6(s.mise),
            s.successes,
            s.failures,
            s.flagged || s.sd_undefined,
        ));
    }
    out
}

pub const RAW_HEADER: &str = "model,scheme,rep,estimator,beta,ise,k,error";

/// Per-replication records, one line each.
pub fn raw_rows(model: &str, report: &SimulationReport) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), sig6);
    let mut out = String::new();
    for r in &report.records {
        let err = r.error.as_deref().unwrap_or("").replace(['"', ',', '\n'], " ");
        out.push_str(&format!(
            "{model},{},{},{},{},{},{},{}\n",
            report.scenario.contamination.label(),
            r.rep,
            estimator_name(r.estimator),
            opt(r.beta),
            opt(r.ise),
            r.k.map_or(String::new(), |k| k.to_string()),
            err,
        ));
    }
    out
}

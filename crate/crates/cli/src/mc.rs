//! Monte Carlo study over simulated markets.
//!
//! Replicate `r` at ladder level `j` draws its market seed and its
//! randomized-window seed from `derive_seed(derive_seed(master, j), ·)`, so
//! results do not depend on scheduling or on the worker count. The config's
//! `seed_u` is ignored in favour of these per-replicate seeds.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hurst_core::simulate::derive_seed;
use hurst_core::{estimate_with_inference, simulate_market, ErrorKind, EstimationConfig, ModelParams};
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{estimation_echo, model_echo};
use crate::error::{CliError, Result};
use crate::report::{to_json, RunReport};

/// Above this failure fraction (at any ladder level) the study is an error.
pub const MAX_FAILURE_RATE: f64 = 0.2;

pub const REPLICATES_CSV: &str = "replicates.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const REPORT_JSON: &str = "report.json";

#[derive(Debug, Clone)]
pub struct McStudy {
    pub model: ModelParams,
    pub cfg: EstimationConfig,
    pub reps: usize,
    /// Sample sizes; `δ = 1/n` at each.
    pub ns: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Replicate {
    pub n: usize,
    pub rep: usize,
    pub market_seed: u64,
    pub seed_u: u64,
    pub error: Option<(String, String, String)>,
    pub pilot: f64,
    pub bar_h: f64,
    pub hat_h: f64,
    pub final_h: f64,
    pub m_hat: usize,
    pub k_hat: usize,
    pub h_u: f64,
    pub gate_passed: bool,
    pub final_ci: (f64, f64),
    /// CI around `Ĥ`, when its variance could be formed.
    pub hat_ci: Option<(f64, f64)>,
    pub clamped: bool,
    pub clamp_count: usize,
    pub clamp_warning: bool,
}

pub struct McOutcome {
    pub report: RunReport,
    pub summary: Value,
    pub rows: Vec<Replicate>,
    /// Set when some level exceeded [`MAX_FAILURE_RATE`].
    pub failure: Option<String>,
}

fn kind_name(k: ErrorKind) -> &'static str {
    match k {
        ErrorKind::Data => "data",
        ErrorKind::Numeric => "numeric",
        ErrorKind::Config => "config",
    }
}

fn run_one(study: &McStudy, level: usize, n: usize, rep: usize) -> Replicate {
    let stream = derive_seed(study.seed, level as u64);
    let market_seed = derive_seed(stream, 2 * rep as u64);
    let seed_u = derive_seed(stream, 2 * rep as u64 + 1);
    let mut row = Replicate {
        n,
        rep,
        market_seed,
        seed_u,
        ..Default::default()
    };
    let market = match simulate_market(&study.model, n, 1.0 / n as f64, market_seed) {
        Ok(m) => m,
        Err(e) => {
            row.error = Some(("simulate".into(), kind_name(e.kind()).into(), e.to_string()));
            return row;
        }
    };
    row.clamp_count = market.clamp_count;
    row.clamp_warning = market.clamp_warning;
    let cfg = EstimationConfig {
        seed_u,
        ..study.cfg.clone()
    };
    match estimate_with_inference(&market.series, &cfg) {
        Ok(out) => {
            let e = out.estimate;
            row.pilot = e.pilot;
            row.bar_h = e.bar_h;
            row.hat_h = e.hat_h;
            row.final_h = e.final_h;
            row.m_hat = e.m_hat;
            row.k_hat = e.k_hat;
            row.h_u = e.h_u;
            row.gate_passed = e.gate_passed;
            row.final_ci = e.ci;
            row.hat_ci = out.asymptotics.map(|a| a.ci);
            row.clamped = e.clamped;
        }
        Err(e) => {
            let stage = e.stage().map(|s| s.to_string()).unwrap_or_else(|| "setup".into());
            row.error = Some((stage, kind_name(e.kind()).into(), e.to_string()));
        }
    }
    row
}

fn bias_rmse(values: &[f64], truth: f64) -> Value {
    if values.is_empty() {
        return json!({ "bias": Value::Null, "rmse": Value::Null });
    }
    let k = values.len() as f64;
    let bias = values.iter().map(|v| v - truth).sum::<f64>() / k;
    let rmse = (values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / k).sqrt();
    json!({ "bias": bias, "rmse": rmse })
}

fn rate(count: usize, total: usize) -> Value {
    if total == 0 {
        Value::Null
    } else {
        (count as f64 / total as f64).into()
    }
}

fn covers(ci: (f64, f64), h: f64) -> bool {
    ci.0 <= h && h <= ci.1
}

fn level_summary(rows: &[Replicate], n: usize, truth: f64) -> Value {
    let ok: Vec<&Replicate> = rows.iter().filter(|r| r.error.is_none()).collect();
    let failures = rows.len() - ok.len();
    let mut by_stage: BTreeMap<String, usize> = BTreeMap::new();
    for r in rows {
        if let Some((stage, _, _)) = &r.error {
            *by_stage.entry(stage.clone()).or_default() += 1;
        }
    }
    let col = |f: fn(&Replicate) -> f64| ok.iter().map(|r| f(r)).collect::<Vec<_>>();
    let mut abs_err: Vec<f64> = ok.iter().map(|r| (r.hat_h - truth).abs()).collect();
    abs_err.sort_by(f64::total_cmp);
    let median_abs = match abs_err.len() {
        0 => Value::Null,
        k if k % 2 == 1 => abs_err[k / 2].into(),
        k => (0.5 * (abs_err[k / 2 - 1] + abs_err[k / 2])).into(),
    };
    // Failed replicates and missing intervals count as misses.
    let hat_covered = ok
        .iter()
        .filter(|r| r.hat_ci.is_some_and(|ci| covers(ci, truth)))
        .count();
    let final_covered = ok.iter().filter(|r| covers(r.final_ci, truth)).count();
    json!({
        "n": n,
        "delta": 1.0 / n as f64,
        "reps": rows.len(),
        "failures": failures,
        "failure_rate": rate(failures, rows.len()),
        "failures_by_stage": by_stage,
        "pilot": bias_rmse(&col(|r| r.pilot), truth),
        "bar_h": bias_rmse(&col(|r| r.bar_h), truth),
        "hat_h": bias_rmse(&col(|r| r.hat_h), truth),
        "final_h": bias_rmse(&col(|r| r.final_h), truth),
        "hat_h_median_abs_error": median_abs,
        "coverage": rate(hat_covered, rows.len()),
        "final_ci_coverage": rate(final_covered, rows.len()),
        "gate_pass_rate": rate(ok.iter().filter(|r| r.gate_passed).count(), ok.len()),
        "clamp_warning_rate": rate(rows.iter().filter(|r| r.clamp_warning).count(), rows.len()),
    })
}

/// OLS slope of `ln y` on `ln x`.
fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn study_echo(study: &McStudy) -> Map<String, Value> {
    let mut echo = Map::new();
    model_echo(&study.model, &mut echo);
    estimation_echo(&study.cfg, &mut echo);
    echo.insert("reps".into(), study.reps.into());
    echo.insert("n".into(), study.ns[0].into());
    if study.ns.len() > 1 {
        echo.insert("n_ladder".into(), study.ns.clone().into());
    }
    echo.insert("seed".into(), study.seed.into());
    echo
}

/// Simulates and estimates every replicate, then aggregates.
pub fn run_mc_study(study: &McStudy) -> Result<McOutcome> {
    if study.reps < 1 {
        return Err(CliError::Config("reps must be at least 1".into()));
    }
    if study.ns.is_empty() {
        return Err(CliError::Config("need at least one sample size".into()));
    }
    if let Some(&n) = study.ns.iter().find(|&&n| n < 2) {
        return Err(CliError::Config(format!("sample size {n} is below 2")));
    }
    study.model.validate()?;
    study.cfg.validate()?;

    let start = Instant::now();
    let jobs: Vec<(usize, usize, usize)> = study
        .ns
        .iter()
        .enumerate()
        .flat_map(|(j, &n)| (0..study.reps).map(move |r| (j, n, r)))
        .collect();
    let mut rows: Vec<Replicate> = jobs.par_iter().map(|&(j, n, r)| run_one(study, j, n, r)).collect();
    // Aggregation reads the table in a fixed order.
    rows.sort_by_key(|r| (r.n, r.rep));

    let truth = study.model.hurst;
    let mut levels = Vec::new();
    let mut points = Vec::new();
    let mut failure = None;
    for &n in &study.ns {
        let level: Vec<Replicate> = rows.iter().filter(|r| r.n == n).cloned().collect();
        let s = level_summary(&level, n, truth);
        let fr = s["failure_rate"].as_f64().unwrap_or(0.0);
        if fr > MAX_FAILURE_RATE && failure.is_none() {
            failure = Some(format!(
                "n={n}: {} of {} replicates failed ({:.1}% > {:.0}%)",
                s["failures"],
                level.len(),
                100.0 * fr,
                100.0 * MAX_FAILURE_RATE
            ));
        }
        if let Some(rmse) = s["hat_h"]["rmse"].as_f64() {
            points.push((n as f64, rmse));
        }
        levels.push(s);
    }

    let mut summary = Map::new();
    summary.insert("true_h".into(), truth.into());
    summary.insert("levels".into(), Value::Array(levels));
    if study.ns.len() > 1 {
        let target = if truth < 0.5 {
            Value::from(-1.0 / (4.0 * truth + 2.0))
        } else {
            Value::Null
        };
        summary.insert(
            "rate_slope".into(),
            json!({
                "slope_ln_rmse_vs_ln_n": log_log_slope(&points),
                "target": target,
            }),
        );
    }
    summary.insert("replicates_csv".into(), REPLICATES_CSV.into());
    summary.insert("study_failed".into(), failure.is_some().into());
    let summary = Value::Object(summary);

    let mut timings = BTreeMap::new();
    timings.insert("total".into(), start.elapsed().as_secs_f64());
    let report = RunReport {
        command: "mc".into(),
        config_echo: study_echo(study),
        estimate: None,
        asymptotics: None,
        asymptotics_note: None,
        ci_reliable: None,
        mc_summary: Some(summary.clone()),
        timings,
    };
    Ok(McOutcome {
        report,
        summary,
        rows,
        failure,
    })
}

fn f17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_replicates<W: std::io::Write>(rows: &[Replicate], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "n",
        "rep",
        "market_seed",
        "seed_u",
        "status",
        "stage",
        "error_kind",
        "pilot",
        "bar_h",
        "hat_h",
        "final_h",
        "m_hat",
        "k_hat",
        "h_u",
        "gate_passed",
        "ci_lo",
        "ci_hi",
        "hat_ci_lo",
        "hat_ci_hi",
        "clamped",
        "clamp_count",
        "clamp_warning",
        "message",
    ])?;
    for r in rows {
        let mut rec: Vec<String> = vec![
            r.n.to_string(),
            r.rep.to_string(),
            r.market_seed.to_string(),
            r.seed_u.to_string(),
        ];
        match &r.error {
            Some((stage, kind, msg)) => {
                rec.extend(["error".into(), stage.clone(), kind.clone()]);
                rec.extend(std::iter::repeat_n(String::new(), 13));
                rec.extend([r.clamp_count.to_string(), r.clamp_warning.to_string(), msg.clone()]);
            }
            None => {
                let (hlo, hhi) = match r.hat_ci {
                    Some((a, b)) => (f17(a), f17(b)),
                    None => (String::new(), String::new()),
                };
                rec.extend([
                    "ok".into(),
                    String::new(),
                    String::new(),
                    f17(r.pilot),
                    f17(r.bar_h),
                    f17(r.hat_h),
                    f17(r.final_h),
                    r.m_hat.to_string(),
                    r.k_hat.to_string(),
                    f17(r.h_u),
                    r.gate_passed.to_string(),
                    f17(r.final_ci.0),
                    f17(r.final_ci.1),
                    hlo,
                    hhi,
                    r.clamped.to_string(),
                    r.clamp_count.to_string(),
                    r.clamp_warning.to_string(),
                    String::new(),
                ]);
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `replicates.csv`, `summary.json` (deterministic) and `report.json`.
pub fn write_outputs(outcome: &McOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let csv_path = dir.join(REPLICATES_CSV);
    let file = std::fs::File::create(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    write_replicates(&outcome.rows, std::io::BufWriter::new(file))
        .map_err(|e| CliError::io(&csv_path, std::io::Error::other(e.to_string())))?;
    for (name, value) in [
        (SUMMARY_JSON, to_json(&outcome.summary)),
        (REPORT_JSON, to_json(&outcome.report)),
    ] {
        let path = dir.join(name);
        let bytes = value.map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [1e2, 1e3, 1e4]
            .iter()
            .map(|&n: &f64| (n, 3.0 * n.powf(-0.3125)))
            .collect();
        assert!((log_log_slope(&pts).unwrap() + 0.3125).abs() < 1e-12);
        assert_eq!(log_log_slope(&pts[..1]), None);
    }

    #[test]
    fn summary_counts_failures_as_misses() {
        let ok = Replicate {
            n: 8,
            hat_h: 0.3,
            final_h: 0.3,
            final_ci: (0.2, 0.4),
            hat_ci: Some((0.2, 0.4)),
            gate_passed: true,
            ..Default::default()
        };
        let bad = Replicate {
            n: 8,
            rep: 1,
            error: Some(("pilot".into(), "data".into(), "x".into())),
            ..Default::default()
        };
        let s = level_summary(&[ok, bad], 8, 0.3);
        assert_eq!(s["failures"], 1);
        assert_eq!(s["coverage"].as_f64(), Some(0.5));
        assert_eq!(s["gate_pass_rate"].as_f64(), Some(1.0));
        assert_eq!(s["failures_by_stage"]["pilot"], 1);
        assert_eq!(s["hat_h"]["rmse"].as_f64(), Some(0.0));
    }
}

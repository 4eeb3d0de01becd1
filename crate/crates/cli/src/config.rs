//! Flat `key = value` configuration.
//!
//! Every key is optional and falls back to the library default. A file may
//! also be a JSON run report, in which case its `config_echo` is read back,
//! so any report can be replayed as-is.
//!
//! Estimation keys: `ell1`, `ell2`, `q`, `r_rule`, `lambda`, `h_lo`, `h_hi`,
//! `invert_tol`, `seed_u`, `t` (a time or `full`), `ci_level`.
//!
//! Model keys: `hurst`, `hurst_eta`, `hurst_etahat`, `c0`, `eta0`,
//! `etahat0`, `a`, `b`, `c_min`, `theta1`..`theta4`, `vartheta1`..`vartheta4`,
//! `rho_w1`..`rho_w4`, `rho_what1`..`rho_what4`.

use std::collections::HashSet;
use std::path::Path;
use std::str::FromStr;

use hurst_core::{EstimationConfig, ModelParams};
use serde_json::{Map, Value};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    /// 1-based source line, 0 for command-line overrides.
    pub line: usize,
    pub origin: String,
}

impl Entry {
    fn error(&self, msg: impl Into<String>) -> CliError {
        if self.line == 0 {
            CliError::Config(format!("{}: {}", self.origin, msg.into()))
        } else {
            CliError::ConfigLine {
                path: self.origin.clone(),
                line: self.line,
                msg: msg.into(),
            }
        }
    }

    fn parse<T: FromStr>(&self) -> Result<T> {
        self.value
            .parse()
            .map_err(|_| self.error(format!("cannot parse {} = {:?}", self.key, self.value)))
    }
}

/// Parses `key = value` lines; `#` starts a comment. Duplicate keys are rejected.
pub fn parse_kv(text: &str, origin: &str) -> Result<Vec<Entry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let entry_err = |msg: String| CliError::ConfigLine {
            path: origin.to_string(),
            line: idx + 1,
            msg,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| entry_err(format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(entry_err("empty key".into()));
        }
        if !seen.insert(k.to_string()) {
            return Err(entry_err(format!("duplicate key {k}")));
        }
        out.push(Entry {
            key: k.to_string(),
            value: v.to_string(),
            line: idx + 1,
            origin: origin.to_string(),
        });
    }
    Ok(out)
}

/// Entries from a JSON report's `config_echo`.
pub fn parse_echo(text: &str, origin: &str) -> Result<Vec<Entry>> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("{origin}: invalid JSON report: {e}")))?;
    let echo = doc
        .get("config_echo")
        .and_then(Value::as_object)
        .ok_or_else(|| CliError::Config(format!("{origin}: report has no config_echo object")))?;
    echo.iter()
        .map(|(k, v)| {
            let value = match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                Value::Array(items) => items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
                other => {
                    return Err(CliError::Config(format!(
                        "{origin}: unsupported config_echo value for {k}: {other}"
                    )))
                }
            };
            Ok(Entry {
                key: k.clone(),
                value,
                line: 0,
                origin: origin.to_string(),
            })
        })
        .collect()
}

/// Reads a key=value file or a JSON report.
pub fn read_config(path: &Path) -> Result<Vec<Entry>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let origin = path.display().to_string();
    if text.trim_start().starts_with('{') {
        parse_echo(&text, &origin)
    } else {
        parse_kv(&text, &origin)
    }
}

/// `--set key=value` overrides.
pub fn parse_overrides(items: &[String]) -> Result<Vec<Entry>> {
    items
        .iter()
        .map(|s| {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {s:?}")))?;
            Ok(Entry {
                key: k.trim().to_string(),
                value: v.trim().to_string(),
                line: 0,
                origin: "--set".into(),
            })
        })
        .collect()
}

/// Applies `e` if it is an estimation key; returns whether it was consumed.
pub fn apply_estimation(cfg: &mut EstimationConfig, e: &Entry) -> Result<bool> {
    match e.key.as_str() {
        "ell1" => cfg.ell1 = e.parse()?,
        "ell2" => cfg.ell2 = e.parse()?,
        "q" => cfg.q = e.parse()?,
        "r_rule" => cfg.r_rule = e.parse()?,
        "lambda" => cfg.lambda = e.parse()?,
        "h_lo" => cfg.h_lo = e.parse()?,
        "h_hi" => cfg.h_hi = e.parse()?,
        "invert_tol" => cfg.invert_tol = e.parse()?,
        "seed_u" => cfg.seed_u = e.parse()?,
        "ci_level" => cfg.ci_level = e.parse()?,
        "t" => {
            cfg.t = match e.value.as_str() {
                "full" | "" => None,
                _ => Some(e.parse()?),
            }
        }
        _ => return Ok(false),
    }
    Ok(true)
}

fn indexed(key: &str, prefix: &str) -> Option<usize> {
    let idx: usize = key.strip_prefix(prefix)?.parse().ok()?;
    (1..=4).contains(&idx).then(|| idx - 1)
}

/// Applies `e` if it is a model key; returns whether it was consumed.
pub fn apply_model(p: &mut ModelParams, e: &Entry) -> Result<bool> {
    let k = e.key.as_str();
    match k {
        "hurst" => p.hurst = e.parse()?,
        "hurst_eta" => p.hurst_eta = e.parse()?,
        "hurst_etahat" => p.hurst_etahat = e.parse()?,
        "c0" => p.c0 = e.parse()?,
        "eta0" => p.eta0 = e.parse()?,
        "etahat0" => p.etahat0 = e.parse()?,
        "a" => p.a = e.parse()?,
        "b" => p.b = e.parse()?,
        "c_min" => p.c_min = e.parse()?,
        _ => {
            if let Some(i) = indexed(k, "vartheta") {
                p.vartheta[i] = e.parse()?;
            } else if let Some(i) = indexed(k, "theta") {
                p.theta[i] = e.parse()?;
            } else if let Some(i) = indexed(k, "rho_what") {
                p.rho[1][i] = e.parse()?;
            } else if let Some(i) = indexed(k, "rho_w") {
                p.rho[0][i] = e.parse()?;
            } else {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

pub fn unknown_key(e: &Entry) -> CliError {
    e.error(format!("unknown key {}", e.key))
}

pub fn estimation_echo(cfg: &EstimationConfig, out: &mut Map<String, Value>) {
    out.insert("ell1".into(), cfg.ell1.into());
    out.insert("ell2".into(), cfg.ell2.into());
    out.insert("q".into(), cfg.q.into());
    out.insert("r_rule".into(), cfg.r_rule.into());
    out.insert("lambda".into(), cfg.lambda.into());
    out.insert("h_lo".into(), cfg.h_lo.into());
    out.insert("h_hi".into(), cfg.h_hi.into());
    out.insert("invert_tol".into(), cfg.invert_tol.into());
    out.insert("seed_u".into(), cfg.seed_u.into());
    out.insert(
        "t".into(),
        match cfg.t {
            Some(t) => t.into(),
            None => "full".into(),
        },
    );
    out.insert("ci_level".into(), cfg.ci_level.into());
}

pub fn model_echo(p: &ModelParams, out: &mut Map<String, Value>) {
    out.insert("hurst".into(), p.hurst.into());
    out.insert("hurst_eta".into(), p.hurst_eta.into());
    out.insert("hurst_etahat".into(), p.hurst_etahat.into());
    out.insert("c0".into(), p.c0.into());
    out.insert("eta0".into(), p.eta0.into());
    out.insert("etahat0".into(), p.etahat0.into());
    out.insert("a".into(), p.a.into());
    out.insert("b".into(), p.b.into());
    out.insert("c_min".into(), p.c_min.into());
    for i in 0..4 {
        out.insert(format!("theta{}", i + 1), p.theta[i].into());
    }
    for i in 0..4 {
        out.insert(format!("vartheta{}", i + 1), p.vartheta[i].into());
    }
    for (row, name) in ["rho_w", "rho_what"].iter().enumerate() {
        for i in 0..4 {
            out.insert(format!("{name}{}", i + 1), p.rho[row][i].into());
        }
    }
}

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use hurst_core::{estimate_with_inference, EstimationConfig, PriceSeries};
use serde_json::{Map, Value};

use crate::config::estimation_echo;
use crate::error::Result;
use crate::report::RunReport;

/// Full pipeline on one series, with the effective config echoed.
pub fn run_estimate(series: &PriceSeries, cfg: &EstimationConfig, data: Option<&Path>) -> Result<RunReport> {
    let start = Instant::now();
    let mut echo = Map::new();
    if let Some(path) = data {
        echo.insert("data".into(), Value::String(path.display().to_string()));
    }
    estimation_echo(cfg, &mut echo);

    let out = estimate_with_inference(series, cfg)?;
    let mut timings: BTreeMap<String, f64> = out.timings;
    timings.insert("total".into(), start.elapsed().as_secs_f64());
    Ok(RunReport {
        command: "estimate".into(),
        config_echo: echo,
        estimate: Some(out.estimate),
        asymptotics: out.asymptotics,
        asymptotics_note: out.asymptotics_note,
        ci_reliable: Some(out.ci_reliable),
        mc_summary: None,
        timings,
    })
}

//! End-to-end estimation: `Ĥ`, the `Γ̂` estimates, the gate verdict and a
//! feasible confidence interval.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{clt_variance, confidence_interval, gamma_hat, vov_integral_hat, AsymptoticSpec};
use crate::error::{Error, Result, Stage, StageExt};
use crate::hurst::{final_estimate, m_of_h, semimartingale_gate, EstimationConfig, HurstEstimate, MAX_WEIGHTS};
use crate::stats::PriceSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub estimate: HurstEstimate,
    /// Absent only when the gate sets `H = 1/2` and the variance of `Ĥ`
    /// cannot be formed (see `asymptotics_note`).
    pub asymptotics: Option<AsymptoticSpec>,
    pub asymptotics_note: Option<String>,
    /// False when some inversion hit the bracket edge.
    pub ci_reliable: bool,
    /// Wall-clock seconds per stage; not part of the deterministic output.
    #[serde(skip)]
    pub timings: BTreeMap<String, f64>,
}

fn asymptotic_spec(
    series: &PriceSeries,
    cfg: &EstimationConfig,
    est: &HurstEstimate,
    gamma_hats: (f64, f64, f64),
) -> Result<AsymptoticSpec> {
    let h = est.hat_h;
    let m = m_of_h(h);
    if m > MAX_WEIGHTS {
        return Err(Error::Numeric(format!("M(Ĥ) = {m} exceeds {MAX_WEIGHTS}")));
    }
    let vov = vov_integral_hat(series, cfg, est)?;
    let variance = clt_variance(h, m, gamma_hats, vov, cfg)?;
    if !(variance >= 0.0) {
        return Err(Error::Numeric(format!(
            "asymptotic variance estimate is {variance:e} < 0; Γ̂ estimates are inconsistent at this sample size"
        )));
    }
    let delta = series.delta();
    Ok(AsymptoticSpec {
        gamma_hats,
        vov_integral: vov,
        variance,
        rate: delta.powf(1.0 / (4.0 * h + 2.0)),
        ci: confidence_interval(h, variance, delta, cfg.ci_level),
        kappa_optimal: true,
    })
}

/// Runs estimation, `Γ̂`, the `H = 1/2` gate and the CLT interval.
pub fn estimate_with_inference(series: &PriceSeries, cfg: &EstimationConfig) -> Result<PipelineOutput> {
    cfg.validate()?;
    let mut timings = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
        timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
        clock = Instant::now();
    };

    let est = final_estimate(series, cfg)?;
    lap("estimate", &mut timings);
    let t = cfg.eval_time(series)?;
    let gamma_hats = gamma_hat(series, est.hat_h, est.k_hat, cfg.lambda, t).stage(Stage::GammaHat)?;
    lap("gamma_hat", &mut timings);
    let mut est = semimartingale_gate(series, cfg, &est, gamma_hats)?;
    lap("gate", &mut timings);

    let (asymptotics, note) = match asymptotic_spec(series, cfg, &est, gamma_hats) {
        Ok(spec) => (Some(spec), None),
        // With H = 1/2 declared there is no CLT for Ĥ to report.
        Err(e) if !est.gate_passed => (None, Some(format!("{}", e.at(Stage::Variance)))),
        Err(e) => return Err(e.at(Stage::Variance)),
    };
    lap("variance", &mut timings);

    est.ci = match &asymptotics {
        Some(spec) => spec.ci,
        None => (0.5, 0.5),
    };
    Ok(PipelineOutput {
        ci_reliable: !est.clamped && asymptotics.is_some(),
        estimate: est,
        asymptotics,
        asymptotics_note: note,
        timings,
    })
}

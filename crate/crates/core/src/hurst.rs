//! Estimators of `H`: pilot, Vandermonde-debiased iterates, the
//! rate-optimal estimator on a randomized window, and the `H = 1/2` gate.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::asymptotics::gamma_nu;
use crate::error::{Error, Result, Stage, StageExt};
use crate::stats::{grid_index, phi_const, PriceSeries, SquaredIncrements};

/// Grid size of the strict-monotonicity scan of `φ`.
const MONOTONE_GRID: usize = 10_000;
/// Largest number of Vandermonde weights we are willing to solve for.
pub const MAX_WEIGHTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub ell1: usize,
    pub ell2: usize,
    /// Randomization constant `q`; `q_n = q / ln(1/δ)`.
    pub q: f64,
    /// Exponent `ρ_r` in `r_n = ceil(δ^{-ρ_r})`.
    pub r_rule: f64,
    /// Exponent of the block multiplier in `K̂ = k̂ [δ^{-λ}]`.
    pub lambda: f64,
    pub h_lo: f64,
    pub h_hi: f64,
    pub invert_tol: f64,
    pub seed_u: u64,
    /// Evaluation time; `None` means the full horizon.
    pub t: Option<f64>,
    pub ci_level: f64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            ell1: 3,
            ell2: 4,
            q: 1.0,
            r_rule: 0.125,
            lambda: 0.3,
            h_lo: 1e-3,
            h_hi: 0.5 - 1e-3,
            invert_tol: 1e-8,
            seed_u: 0,
            t: None,
            ci_level: 0.95,
        }
    }
}

impl EstimationConfig {
    /// Checks ranges and that `φ` is strictly monotone on `[h_lo, h_hi]`.
    pub fn validate(&self) -> Result<()> {
        self.check_ranges()?;
        PhiInverse::new(self).map(|_| ())
    }

    fn check_ranges(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.ell1 < 3 || self.ell2 < 3 {
            return bad(format!("lags must be at least 3, got ({}, {})", self.ell1, self.ell2));
        }
        if self.ell1 == self.ell2 {
            return bad(format!("lags must differ, both are {}", self.ell1));
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return bad(format!("q must be positive, got {}", self.q));
        }
        if !(self.r_rule > 0.0 && self.r_rule < 0.25) {
            return bad(format!("r_rule must lie in (0, 1/4), got {}", self.r_rule));
        }
        if !(self.lambda > 0.0 && self.lambda < 0.5) {
            return bad(format!("lambda must lie in (0, 1/2), got {}", self.lambda));
        }
        if !(self.h_lo > 0.0 && self.h_lo < self.h_hi && self.h_hi < 0.5) {
            return bad(format!(
                "need 0 < h_lo < h_hi < 1/2, got h_lo={} h_hi={}",
                self.h_lo, self.h_hi
            ));
        }
        if !(self.invert_tol > 0.0 && self.invert_tol < 1e-2) {
            return bad(format!("invert_tol must lie in (0, 0.01), got {}", self.invert_tol));
        }
        if let Some(t) = self.t {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("t must be positive, got {t}"));
            }
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return bad(format!("ci_level must lie in (0, 1), got {}", self.ci_level));
        }
        Ok(())
    }

    /// Evaluation time for `series`, defaulting to its horizon.
    pub fn eval_time(&self, series: &PriceSeries) -> Result<f64> {
        let t = self.t.unwrap_or_else(|| series.horizon());
        if t > series.horizon() * (1.0 + 1e-12) {
            return Err(Error::Range(format!(
                "evaluation time {t} beyond horizon {}",
                series.horizon()
            )));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub pilot: f64,
    pub iterates: Vec<f64>,
    pub m_hat: usize,
    pub bar_h: f64,
    pub h_u: f64,
    pub k_hat: usize,
    pub hat_h: f64,
    pub final_h: f64,
    pub gate_passed: bool,
    pub ci: (f64, f64),
    pub clamped: bool,
    /// Every `V̂` evaluated along the way plus window and gate quantities.
    pub diagnostics: BTreeMap<String, f64>,
}

/// `φ(H) = Φ^H_{ℓ₁} / Φ^H_{ℓ₂}`.
pub fn phi_ratio(hurst: f64, ell1: usize, ell2: usize) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 0.5) {
        return Err(Error::Domain(format!(
            "φ is only defined for 0 < H < 1/2 (Φ vanishes at 1/2), got {hurst}"
        )));
    }
    let den = phi_const(hurst, ell2)?;
    if den == 0.0 {
        return Err(Error::Domain(format!("Φ^{hurst}_{ell2} is zero")));
    }
    Ok(phi_const(hurst, ell1)? / den)
}

/// Verified-monotone bisection inverse of `φ` on `[h_lo, h_hi]`.
#[derive(Debug, Clone)]
pub struct PhiInverse {
    ell1: usize,
    ell2: usize,
    h_lo: f64,
    h_hi: f64,
    tol: f64,
    r_lo: f64,
    r_hi: f64,
    increasing: bool,
}

impl PhiInverse {
    pub fn new(cfg: &EstimationConfig) -> Result<Self> {
        cfg.check_ranges()?;
        let (a, b) = (cfg.h_lo, cfg.h_hi);
        let f = |h: f64| phi_ratio(h, cfg.ell1, cfg.ell2);
        let r_lo = f(a)?;
        let r_hi = f(b)?;
        let increasing = r_hi > r_lo;
        let mut prev = r_lo;
        for i in 1..=MONOTONE_GRID {
            let h = a + (b - a) * i as f64 / MONOTONE_GRID as f64;
            let r = f(h)?;
            let ok = if increasing { r > prev } else { r < prev };
            if !ok || !r.is_finite() {
                return Err(Error::Config(format!(
                    "φ for lags ({}, {}) is not strictly monotone near H={h}",
                    cfg.ell1, cfg.ell2
                )));
            }
            prev = r;
        }
        Ok(Self {
            ell1: cfg.ell1,
            ell2: cfg.ell2,
            h_lo: a,
            h_hi: b,
            tol: cfg.invert_tol,
            r_lo,
            r_hi,
            increasing,
        })
    }

    /// Returns `(H, clamped)`.
    pub fn invert(&self, r: f64) -> Result<(f64, bool)> {
        if !r.is_finite() {
            return Err(Error::Numeric(format!("cannot invert non-finite ratio {r}")));
        }
        let (lo_r, hi_r) = if self.increasing {
            (self.r_lo, self.r_hi)
        } else {
            (self.r_hi, self.r_lo)
        };
        if r == self.r_lo {
            return Ok((self.h_lo, false));
        }
        if r == self.r_hi {
            return Ok((self.h_hi, false));
        }
        if r < lo_r || r > hi_r {
            // nearer endpoint in ratio space
            let h = if (r < lo_r) == self.increasing {
                self.h_lo
            } else {
                self.h_hi
            };
            return Ok((h, true));
        }
        let (mut a, mut b) = (self.h_lo, self.h_hi);
        while b - a > self.tol {
            let mid = 0.5 * (a + b);
            let v = phi_ratio(mid, self.ell1, self.ell2)?;
            if (v < r) == self.increasing {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok((0.5 * (a + b), false))
    }
}

pub fn invert_phi_ratio(r: f64, cfg: &EstimationConfig) -> Result<(f64, bool)> {
    PhiInverse::new(cfg)?.invert(r)
}

/// Solves `V_M w̃ = e_M` with `(V_M)_{p,m} = m^{-p}`; returns `(w̃, w̃/|w̃|)`.
///
/// With nodes `x_m = 1/m`, the last row of `V_M^{-1}` is the divided
/// difference functional, so `w̃_m = 1 / Π_{j≠m} (x_m - x_j)`.
pub fn vandermonde_weights(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m < 1 {
        return Err(Error::Domain("need at least one weight".into()));
    }
    if m > MAX_WEIGHTS {
        return Err(Error::Domain(format!(
            "{m} Vandermonde weights requested; more than {MAX_WEIGHTS} is ill-conditioned and unsupported"
        )));
    }
    let x: Vec<f64> = (1..=m).map(|i| 1.0 / i as f64).collect();
    let raw: Vec<f64> = (0..m)
        .map(|i| {
            let p: f64 = (0..m).filter(|&j| j != i).map(|j| x[i] - x[j]).product();
            1.0 / p
        })
        .collect();
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    let w = raw.iter().map(|v| v / norm).collect();
    Ok((raw, w))
}

/// `M(H) = [1/2 - H + 1/(4H)] + 1`.
pub fn m_of_h(hurst: f64) -> usize {
    (0.5 - hurst + 0.25 / hurst).floor() as usize + 1
}

/// Thresholds `H^{(j)}` where `1/2 - H + 1/(4H)` crosses the integer `j`.
pub fn h_threshold(j: usize) -> f64 {
    let j = j as f64;
    ((4.0 * j * j - 4.0 * j + 5.0).sqrt() - 2.0 * j + 1.0) / 4.0
}

/// `M̂ = [1/2 - H̃ + 1/(4H̃) + δ^{1/4} ln(1/δ)] + 1`.
pub fn m_hat(pilot: f64, delta: f64) -> usize {
    let v = 0.5 - pilot + 0.25 / pilot + delta.powf(0.25) * (1.0 / delta).ln();
    v.floor() as usize + 1
}

/// `[δ^{-2h/(2h+1)}]`, at least 1.
pub fn optimal_window(h: f64, delta: f64) -> usize {
    (delta.powf(-2.0 * h / (2.0 * h + 1.0)).floor() as usize).max(1)
}

/// `k̃ = [δ^{-1/2}]`.
pub fn pilot_window(delta: f64) -> usize {
    (delta.powf(-0.5).floor() as usize).max(1)
}

/// Shared per-series state: prefix sums, `[t/δ]`, and the `φ` inverse.
struct Workspace<'a> {
    series: &'a PriceSeries,
    sq: SquaredIncrements,
    n_t: usize,
    inverse: PhiInverse,
    diagnostics: BTreeMap<String, f64>,
    clamped: bool,
}

impl<'a> Workspace<'a> {
    fn new(series: &'a PriceSeries, cfg: &EstimationConfig) -> Result<Self> {
        let inverse = PhiInverse::new(cfg)?;
        let t = cfg.eval_time(series)?;
        let n_t = grid_index(t, series.delta())?;
        Ok(Self {
            series,
            sq: SquaredIncrements::new(series),
            n_t,
            inverse,
            diagnostics: BTreeMap::new(),
            clamped: false,
        })
    }

    fn v_hat(&mut self, tag: &str, ell: usize, k: usize) -> Result<f64> {
        let v = self.sq.v_hat_index(ell, k, self.n_t)?;
        self.diagnostics.insert(format!("{tag}.vhat.ell{ell}.k{k}"), v);
        Ok(v)
    }

    /// `φ^{-1}(Σ_m c_m V̂^{ℓ₁, m k} / Σ_m c_m V̂^{ℓ₂, m k})` with
    /// `c_m = w(M)_m m^{1/2 - h_prev}`.
    fn combined(&mut self, tag: &str, big_m: usize, k: usize, h_prev: f64, ell1: usize, ell2: usize) -> Result<f64> {
        let (_, w) = vandermonde_weights(big_m)?;
        let needed = (ell1.max(ell2) + 2) * big_m * k;
        if needed >= self.n_t + 1 {
            return Err(Error::Range(format!(
                "{tag}: window m·k = {}·{k} needs {needed} increments, only {} available",
                big_m, self.n_t
            )));
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (idx, wm) in w.iter().enumerate() {
            let m = idx + 1;
            let c = wm * (m as f64).powf(0.5 - h_prev);
            self.diagnostics.insert(format!("{tag}.weight.m{m}"), c);
            num += c * self.v_hat(tag, ell1, m * k)?;
            den += c * self.v_hat(tag, ell2, m * k)?;
        }
        if den == 0.0 || !den.is_finite() {
            return Err(Error::DegenerateData(format!(
                "{tag}: denominator autocovariance is {den}; the series has no volatility-of-volatility signal"
            )));
        }
        let (h, clamped) = self.inverse.invert(num / den)?;
        self.clamped |= clamped;
        Ok(h)
    }

    fn pilot(&mut self) -> Result<f64> {
        let k = pilot_window(self.series.delta());
        self.diagnostics.insert("pilot.k".into(), k as f64);
        let (l1, l2) = (self.inverse.ell1, self.inverse.ell2);
        self.combined("pilot", 1, k, 0.5, l1, l2)
    }

    fn refine(&mut self, pilot: f64, m_hat: usize) -> Result<Vec<f64>> {
        if m_hat < 1 {
            return Err(Error::Domain("M̂ must be at least 1".into()));
        }
        let delta = self.series.delta();
        let (l1, l2) = (self.inverse.ell1, self.inverse.ell2);
        let mut iterates = vec![pilot];
        for j in 1..m_hat {
            let k = optimal_window(h_threshold(j), delta);
            self.diagnostics.insert(format!("refine{j}.k"), k as f64);
            let prev = iterates[j - 1];
            let h = self.combined(&format!("refine{j}"), j, k, prev, l1, l2)?;
            iterates.push(h);
        }
        Ok(iterates)
    }
}

/// Pilot `H̃ = φ^{-1}(V̂^{ℓ₁,k̃} / V̂^{ℓ₂,k̃})`, `k̃ = [δ^{-1/2}]`.
pub fn pilot_estimate(series: &PriceSeries, cfg: &EstimationConfig) -> Result<f64> {
    Workspace::new(series, cfg)?.pilot()
}

/// Debiased iterates `[H̄^{(0)} = pilot, …, H̄^{(M̂-1)}]`.
pub fn refine(series: &PriceSeries, cfg: &EstimationConfig, pilot: f64, m_hat: usize) -> Result<Vec<f64>> {
    Workspace::new(series, cfg)?.refine(pilot, m_hat)
}

/// `r_n = ceil(δ^{-ρ_r})` and `q_n = q / ln(1/δ)`.
pub fn randomization_grid(delta: f64, cfg: &EstimationConfig) -> (f64, f64) {
    let r_n = delta.powf(-cfg.r_rule).ceil();
    let q_n = cfg.q / (1.0 / delta).ln();
    (r_n, q_n)
}

/// `H̄^U = ([r_n(h̄ + q_n) + u] + 1)/r_n` and `k̂ = [δ^{-2H̄^U/(2H̄^U+1)}]`.
pub fn randomized_window_with(bar_h: f64, delta: f64, r_n: f64, q_n: f64, u: f64) -> (f64, usize) {
    let h_u = ((r_n * (bar_h + q_n) + u).floor() + 1.0) / r_n;
    (h_u, optimal_window(h_u, delta))
}

pub fn randomized_window(bar_h: f64, delta: f64, cfg: &EstimationConfig, u: f64) -> Result<(f64, usize)> {
    if !(bar_h > 0.0 && bar_h <= 0.5) {
        return Err(Error::Domain(format!("H̄ = {bar_h} outside (0, 1/2]")));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(Error::Domain(format!("u = {u} outside [0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ = {delta} outside (0, 1)")));
    }
    let (r_n, q_n) = randomization_grid(delta, cfg);
    Ok(randomized_window_with(bar_h, delta, r_n, q_n, u))
}

/// The single uniform draw used by the randomized window.
pub fn uniform_draw(seed_u: u64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed_u).random::<f64>()
}

/// Pilot → `M̂` → refinement → randomized window → `Ĥ`. The gate and CI
/// fields are left at their conservative values (`final_h = 1/2`).
pub fn final_estimate(series: &PriceSeries, cfg: &EstimationConfig) -> Result<HurstEstimate> {
    let mut ws = Workspace::new(series, cfg)?;
    let delta = series.delta();
    if !(delta < 1.0) {
        return Err(Error::InvalidSeries(format!(
            "sampling interval δ = {delta} must be below 1; express time in units of the horizon"
        )));
    }

    let pilot = ws.pilot().stage(Stage::Pilot)?;
    let m = m_hat(pilot, delta);
    if m > MAX_WEIGHTS {
        return Err(Error::Domain(format!(
            "M̂ = {m} exceeds {MAX_WEIGHTS} (pilot H = {pilot}); unsupported"
        )))
        .stage(Stage::Refine);
    }
    let iterates = ws.refine(pilot, m).stage(Stage::Refine)?;
    let bar_h = *iterates.last().expect("refine returns the pilot at least");

    let u = uniform_draw(cfg.seed_u);
    let (h_u, k_hat) = randomized_window(bar_h, delta, cfg, u).stage(Stage::Window)?;
    let (r_n, q_n) = randomization_grid(delta, cfg);
    ws.diagnostics.insert("window.u".into(), u);
    ws.diagnostics.insert("window.r_n".into(), r_n);
    ws.diagnostics.insert("window.q_n".into(), q_n);

    let (l1, l2) = (cfg.ell1, cfg.ell2);
    let hat_h = ws.combined("final", m, k_hat, bar_h, l1, l2).stage(Stage::Final)?;

    Ok(HurstEstimate {
        pilot,
        iterates,
        m_hat: m,
        bar_h,
        h_u,
        k_hat,
        hat_h,
        final_h: 0.5,
        gate_passed: false,
        ci: (0.0, 0.5),
        clamped: ws.clamped,
        diagnostics: ws.diagnostics,
    })
}

/// Gate threshold `τ = δ^{3/4} ln(1/δ) (Σ_ν γ_ν^{ℓ₂,1,ℓ₂,1}(1/2) Γ̂_ν)^{1/2}`.
pub fn gate_threshold(delta: f64, ell2: usize, gamma_hats: (f64, f64, f64)) -> Result<f64> {
    let g = [gamma_hats.0, gamma_hats.1, gamma_hats.2];
    let ell = ell2 as f64;
    let mut agg = 0.0;
    for (i, gh) in g.iter().enumerate() {
        agg += gamma_nu(i + 1, ell, 1.0, ell, 1.0, 0.5, true) * gh;
    }
    if !(agg >= 0.0) {
        return Err(Error::Numeric(format!(
            "gate variance aggregate is {agg:e} < 0; the Γ̂ estimates are inconsistent"
        )));
    }
    Ok(delta.powf(0.75) * (1.0 / delta).ln() * agg.sqrt())
}

/// `true` iff `|v| > τ` (strict).
pub fn gate_decision(v: f64, tau: f64) -> bool {
    v.abs() > tau
}

/// Tests `H = 1/2` through `|V̂^{ℓ₂,k̃}_t|` and sets `final_h` accordingly.
pub fn semimartingale_gate(
    series: &PriceSeries,
    cfg: &EstimationConfig,
    est: &HurstEstimate,
    gamma_hats: (f64, f64, f64),
) -> Result<HurstEstimate> {
    let run = || -> Result<HurstEstimate> {
        let t = cfg.eval_time(series)?;
        let n_t = grid_index(t, series.delta())?;
        let k = pilot_window(series.delta());
        let v = SquaredIncrements::new(series).v_hat_index(cfg.ell2, k, n_t)?;
        let tau = gate_threshold(series.delta(), cfg.ell2, gamma_hats)?;
        let mut out = est.clone();
        out.gate_passed = gate_decision(v, tau);
        out.final_h = if out.gate_passed { est.hat_h } else { 0.5 };
        out.diagnostics.insert("gate.vhat".into(), v);
        out.diagnostics.insert("gate.tau".into(), tau);
        out.diagnostics.insert("gate.k".into(), k as f64);
        Ok(out)
    };
    run().stage(Stage::Gate)
}

/// Classical log-RV scaling regression on blocks of `k_day` increments.
pub fn scaling_regression_baseline(
    series: &PriceSeries,
    k_day: usize,
    q_list: &[f64],
    lag_list: &[usize],
) -> Result<f64> {
    if k_day == 0 {
        return Err(Error::Domain("block length must be at least 1".into()));
    }
    let max_lag = lag_list.iter().copied().max().unwrap_or(0);
    let n = series.n_increments();
    if n < 2 * k_day * max_lag {
        return Err(Error::Range(format!(
            "{n} increments cannot hold 2·{k_day}·{max_lag} for the scaling regression"
        )));
    }
    let sq = SquaredIncrements::new(series);
    let blocks = n / k_day;
    let mut log_rv = Vec::with_capacity(blocks);
    for j in 0..blocks {
        let rv = sq.window_sum(1 + j * k_day, k_day);
        if rv <= 0.0 {
            return Err(Error::DegenerateData(format!(
                "realized variance of block {} is zero",
                j + 1
            )));
        }
        log_rv.push(rv.ln());
    }
    scaling_regression_from_log_rv(&log_rv, k_day as f64 * series.delta(), q_list, lag_list)
}

/// Mean of `ζ_q / q`, where `ζ_q` is the OLS slope of
/// `ln m(q, Δ)` on `ln Δ` and `m(q, Δ)` the mean `|ln RV_{j+lag} - ln RV_j|^q`.
pub fn scaling_regression_from_log_rv(
    log_rv: &[f64],
    block_dt: f64,
    q_list: &[f64],
    lag_list: &[usize],
) -> Result<f64> {
    if q_list.is_empty() || q_list.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Domain("moment orders must be positive and non-empty".into()));
    }
    let mut lags: Vec<usize> = lag_list.to_vec();
    lags.sort_unstable();
    lags.dedup();
    if lags.len() < 2 || lags[0] == 0 {
        return Err(Error::Domain("need at least two distinct positive lags".into()));
    }
    let max_lag = *lags.last().unwrap();
    if log_rv.len() <= max_lag {
        return Err(Error::Range(format!(
            "{} blocks cannot hold lag {max_lag}",
            log_rv.len()
        )));
    }
    let xs: Vec<f64> = lags.iter().map(|&l| (l as f64 * block_dt).ln()).collect();
    let mut total = 0.0;
    for &q in q_list {
        let mut ys = Vec::with_capacity(lags.len());
        for &lag in &lags {
            let count = log_rv.len() - lag;
            let m: f64 = (0..count)
                .map(|j| (log_rv[j + lag] - log_rv[j]).abs().powf(q))
                .sum::<f64>()
                / count as f64;
            if !(m > 0.0) {
                return Err(Error::DegenerateData(format!("m(q={q}, lag={lag}) is zero")));
            }
            ys.push(m.ln());
        }
        total += ols_slope(&xs, &ys) / q;
    }
    Ok(total / q_list.len() as f64)
}

fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

//! Grid conventions, difference operators and the raw statistics computed
//! from a uniformly sampled log-price series: spot variance, the realized
//! autocovariance of spot variance increments, and the constants `Φ^H_ℓ`
//! that link that autocovariance to the roughness parameter.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{binom_int, forward_diff_pow, kernel_norm};
use crate::quad::tanh_sinh;

/// Uniformly sampled log prices `x_0, x_δ, …, x_{Nδ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    samples: Vec<f64>,
    delta: f64,
    label: Option<String>,
}

impl PriceSeries {
    pub fn new(samples: Vec<f64>, delta: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidSeries(format!(
                "need at least 2 samples, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidSeries(format!("non-finite sample at index {i}")));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidSeries(format!(
                "sampling interval must be positive, got {delta}"
            )));
        }
        Ok(Self {
            samples,
            delta,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Number of increments `N`.
    pub fn n_increments(&self) -> usize {
        self.samples.len() - 1
    }

    /// Horizon `T = N δ`.
    pub fn horizon(&self) -> f64 {
        self.n_increments() as f64 * self.delta
    }

    /// Increment `x_{iδ} - x_{(i-1)δ}` for `i >= 1`.
    pub fn increment(&self, i: usize) -> f64 {
        self.samples[i] - self.samples[i - 1]
    }
}

/// Integer and fractional part, `([x], {x})`, with `[x]` the floor.
pub fn floor_frac(x: f64) -> Result<(i64, f64)> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("floor_frac of non-finite value {x}")));
    }
    let fl = x.floor();
    let mut frac = x - fl;
    // x slightly below an integer can round the difference up to 1.0
    if frac >= 1.0 {
        frac = 0.0;
        return Ok((fl as i64 + 1, frac));
    }
    Ok((fl as i64, frac))
}

/// `[t/δ]`, snapping ratios within 1e-9 of an integer onto it so that grid
/// times such as `i·δ` map to `i` despite rounding in the division.
pub fn grid_index(t: f64, delta: f64) -> Result<usize> {
    let x = t / delta;
    let r = x.round();
    let idx = if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        floor_frac(x)?.0 as f64
    };
    if idx < 0.0 {
        return Err(Error::Range(format!("time {t} lies before the grid")));
    }
    Ok(idx as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffKind {
    Forward,
    Central,
}

/// An `order`-th forward (`Δⁿ_h`) or central (`δⁿ_h`) difference with step `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffSpec {
    pub order: usize,
    pub step: f64,
    pub kind: DiffKind,
}

impl DiffSpec {
    pub fn new(order: usize, step: f64, kind: DiffKind) -> Result<Self> {
        if !(1..=8).contains(&order) {
            return Err(Error::Domain(format!("difference order {order} outside 1..=8")));
        }
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Domain(format!("difference step must be positive, got {step}")));
        }
        Ok(Self { order, step, kind })
    }

    pub fn apply<F: Fn(f64) -> f64>(&self, f: F, x: f64) -> f64 {
        let n = self.order;
        (0..=n)
            .map(|i| {
                let c = binom_int(n, i);
                match self.kind {
                    DiffKind::Forward => {
                        let sign = if (n - i) % 2 == 0 { 1.0 } else { -1.0 };
                        sign * c * f(x + i as f64 * self.step)
                    }
                    DiffKind::Central => {
                        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                        sign * c * f(x + (n as f64 / 2.0 - i as f64) * self.step)
                    }
                }
            })
            .sum()
    }
}

const CENTRAL4: [f64; 5] = [1.0, -4.0, 6.0, -4.0, 1.0];

/// `δ⁴_h f(x) = Σ_{i=0}^{4} (-1)^i C(4,i) f(x + (2-i)h)`.
pub fn central_diff4<F: Fn(f64) -> f64>(f: F, h: f64, x: f64) -> f64 {
    (0..5).map(|i| CENTRAL4[i] * f(x + (2.0 - i as f64) * h)).sum()
}

/// Fallible variant of [`central_diff4`]; the first evaluator error is returned.
pub fn try_central_diff4<F, E>(f: F, h: f64, x: f64) -> std::result::Result<f64, E>
where
    F: Fn(f64) -> std::result::Result<f64, E>,
{
    let mut s = 0.0;
    for (i, c) in CENTRAL4.iter().enumerate() {
        s += c * f(x + (2.0 - i as f64) * h)?;
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSign {
    Minus,
    Plus,
}

/// `δ⁴_θ δ⁴_θ' |a ∓ b|^α`, the 25-term double central difference, with θ
/// acting on `a` and θ' on `b`.
pub fn double_central_diff4(alpha: f64, theta: f64, theta_p: f64, a: f64, b: f64, sign: PairSign) -> f64 {
    double_central_diff4_with(|x| x.abs().powf(alpha), theta, theta_p, a, b, sign)
}

/// Same 25-term double difference for an arbitrary even-symmetric profile `f(a ∓ b)`.
pub(crate) fn double_central_diff4_with<F: Fn(f64) -> f64>(
    f: F,
    theta: f64,
    theta_p: f64,
    a: f64,
    b: f64,
    sign: PairSign,
) -> f64 {
    let mut s = 0.0;
    for i in 0..5 {
        let ai = a + (2.0 - i as f64) * theta;
        for j in 0..5 {
            let bj = b + (2.0 - j as f64) * theta_p;
            let arg = match sign {
                PairSign::Minus => ai - bj,
                PairSign::Plus => ai + bj,
            };
            s += CENTRAL4[i] * CENTRAL4[j] * f(arg);
        }
    }
    s
}

/// Realized autocovariance `V̂^{n,ℓ,k}_t` together with its arguments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocovStat {
    pub ell: usize,
    pub k: usize,
    pub value_hat: f64,
    pub t: f64,
}

/// Prefix sums of squared increments, shared by every spot-variance and
/// autocovariance evaluation on one series.
#[derive(Debug, Clone)]
pub struct SquaredIncrements {
    /// `cum[j] = Σ_{i=1}^{j} (δ_i x)²`, `cum[0] = 0`.
    cum: Vec<f64>,
    delta: f64,
}

impl SquaredIncrements {
    pub fn new(series: &PriceSeries) -> Self {
        let n = series.n_increments();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        // Neumaier summation keeps every stored prefix within an ulp.
        let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
        for i in 1..=n {
            let d = series.increment(i);
            let v = d * d;
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
            cum.push(sum + comp);
        }
        Self {
            cum,
            delta: series.delta(),
        }
    }

    pub fn n_increments(&self) -> usize {
        self.cum.len() - 1
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `Σ_{i=from}^{to} (δ_i x)²` for `1 <= from`, `to <= N`.
    #[inline]
    pub fn range_sum(&self, from: usize, to: usize) -> f64 {
        self.cum[to] - self.cum[from - 1]
    }

    /// Raw window sum `Ĉ_{iδ, kδ}` = squared increments `i..i+k-1`.
    #[inline]
    pub fn window_sum(&self, i: usize, k: usize) -> f64 {
        self.cum[i + k - 1] - self.cum[i - 1]
    }

    /// Spot variance at grid index `i` with window `k` increments.
    pub fn spot_at(&self, i: usize, k: usize) -> Result<f64> {
        if k == 0 || i == 0 || i + k - 1 > self.n_increments() {
            return Err(Error::Range(format!(
                "spot window (i={i}, k={k}) exceeds series of {} increments",
                self.n_increments()
            )));
        }
        Ok(self.window_sum(i, k) / (k as f64 * self.delta))
    }

    /// `V̂^{n,ℓ,k}_t` in O(N).
    pub fn v_hat(&self, ell: usize, k: usize, t: f64) -> Result<AutocovStat> {
        let n_t = grid_index(t, self.delta)?;
        if n_t > self.n_increments() {
            return Err(Error::Range(format!(
                "evaluation time {t} beyond horizon {}",
                self.n_increments() as f64 * self.delta
            )));
        }
        let value_hat = self.v_hat_index(ell, k, n_t)?;
        Ok(AutocovStat { ell, k, value_hat, t })
    }

    /// `V̂` with `[t/δ] = n_t` supplied directly.
    pub fn v_hat_index(&self, ell: usize, k: usize, n_t: usize) -> Result<f64> {
        if k == 0 {
            return Err(Error::Domain("window k must be at least 1".into()));
        }
        let span = (ell + 2) * k;
        if n_t + 1 <= span {
            return Err(Error::SeriesTooShort {
                ell,
                k,
                needed: span,
                available: n_t,
            });
        }
        let count = n_t + 1 - span;
        let c = &self.cum;
        let mut acc = 0.0;
        for i in 1..=count {
            // (ĉ_{i+k} - ĉ_i) and (ĉ_{i+(ℓ+1)k} - ĉ_{i+ℓk}) up to the 1/(kδ) factor
            let b = i - 1;
            let d1 = c[b + 2 * k] - 2.0 * c[b + k] + c[b];
            let d2 = c[b + (ell + 2) * k] - 2.0 * c[b + (ell + 1) * k] + c[b + ell * k];
            acc += d1 * d2;
        }
        let kd = k as f64 * self.delta;
        Ok(self.delta * acc / (kd * kd))
    }
}

/// Spot variance estimator `ĉ_{t,kδ}` with the index range written out
/// literally: increments `[t/δ] ..= [(t+kδ)/δ] - 1`.
pub fn spot_vol(series: &PriceSeries, t: f64, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("window k must be at least 1".into()));
    }
    let delta = series.delta();
    let first = grid_index(t, delta)?;
    let last_excl = grid_index(t + k as f64 * delta, delta)?;
    if first < 1 || last_excl < first + 1 || last_excl - 1 > series.n_increments() {
        return Err(Error::Range(format!(
            "spot window [{first}, {last_excl}) exceeds series of {} increments",
            series.n_increments()
        )));
    }
    let s: f64 = (first..last_excl).map(|i| series.increment(i).powi(2)).sum();
    Ok(s / (k as f64 * delta))
}

/// `V̂^{n,ℓ,k}_t`, the realized autocovariance of spot variance increments.
pub fn v_hat(series: &PriceSeries, ell: usize, k: usize, t: f64) -> Result<AutocovStat> {
    SquaredIncrements::new(series).v_hat(ell, k, t)
}

/// `Ṽ^{n,ℓ,k}_t = (kδ)^{-2H} V̂^{n,ℓ,k}_t`.
pub fn v_tilde(series: &PriceSeries, ell: usize, k: usize, t: f64, hurst: f64) -> Result<f64> {
    if !(hurst > 0.0 && hurst <= 0.5) {
        return Err(Error::Domain(format!("H={hurst} outside (0, 1/2]")));
    }
    let stat = v_hat(series, ell, k, t)?;
    Ok((k as f64 * series.delta()).powf(-2.0 * hurst) * stat.value_hat)
}

/// `Φ^H_ℓ = δ⁴_1 |ℓ|^{2H+2} / (2(2H+1)(2H+2))`.
pub fn phi_const(hurst: f64, ell: usize) -> Result<f64> {
    if !(hurst > 0.0 && hurst <= 0.5) {
        return Err(Error::Domain(format!("H={hurst} outside (0, 1/2]")));
    }
    if ell < 2 {
        return Err(Error::Domain(format!("lag {ell} must be at least 2")));
    }
    Ok(phi_unchecked(hurst, ell as f64))
}

pub(crate) fn phi_unchecked(hurst: f64, ell: f64) -> f64 {
    let p = 2.0 * hurst + 2.0;
    let num = (ell + 2.0).powf(p) - 4.0 * (ell + 1.0).powf(p) + 6.0 * ell.powf(p) - 4.0 * (ell - 1.0).powf(p)
        + (ell - 2.0).powf(p);
    num / (2.0 * (2.0 * hurst + 1.0) * (2.0 * hurst + 2.0))
}

const PHI_QUAD_TOL: f64 = 1e-9;

/// `Φ^H_ℓ` as the overlap integral `∫_{-2}^∞ Δ²_1 G_H(v) Δ²_1 G_H(v+ℓ) dv`
/// with `G_H(t) = K_H^{-1} t_+^{H+1/2} / (H+1/2)`.
pub fn phi_const_integral(hurst: f64, ell: usize) -> Result<f64> {
    if !(hurst > 0.0 && hurst < 0.5) {
        return Err(Error::Domain(format!("H={hurst} outside (0, 1/2)")));
    }
    if ell < 2 {
        return Err(Error::Domain(format!("lag {ell} must be at least 2")));
    }
    let alpha = hurst + 0.5;
    let scale = 1.0 / (kernel_norm(hurst) * alpha);
    let lag = ell as f64;
    let integrand = |v: f64| scale * scale * forward_diff_pow(2, v, alpha) * forward_diff_pow(2, v + lag, alpha);

    // |Δ²G(v)| <= K_H^{-1} (1-α) v^{α-2} for v > 0, so the tail beyond L is
    // bounded by K_H^{-2} (1-α)² L^{2α-3} / (3-2α).
    let kinv = 1.0 / kernel_norm(hurst);
    let tail_bound = |l: f64| kinv * kinv * (1.0 - alpha).powi(2) * l.powf(2.0 * alpha - 3.0) / (3.0 - 2.0 * alpha);
    let mut upper = 2.0;
    while tail_bound(upper) > 0.1 * PHI_QUAD_TOL {
        upper *= 2.0;
    }

    // kinks of Δ²G at -2, -1, 0; smooth on each dyadic piece beyond 1
    let mut breaks = vec![-2.0, -1.0, 0.0, 1.0];
    let mut b = 2.0;
    while b <= upper {
        breaks.push(b);
        b *= 2.0;
    }
    let per_piece = 1e-3 * PHI_QUAD_TOL / breaks.len() as f64;
    let mut total = 0.0;
    let mut err_total = tail_bound(upper);
    for w in breaks.windows(2) {
        let (v, e) = tanh_sinh(integrand, w[0], w[1], per_piece.max(1e-15))?;
        total += v;
        err_total += e;
    }
    if err_total > PHI_QUAD_TOL {
        return Err(Error::Quadrature {
            achieved: err_total,
            requested: PHI_QUAD_TOL,
        });
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn series(xs: Vec<f64>, delta: f64) -> PriceSeries {
        PriceSeries::new(xs, delta).unwrap()
    }

    #[test]
    fn floor_frac_examples() {
        let (i, f) = floor_frac(2.7).unwrap();
        assert_eq!(i, 2);
        assert!((f - 0.7).abs() < 1e-12);
        assert_eq!(floor_frac(5.0).unwrap(), (5, 0.0));
        let (i, f) = floor_frac(-0.3).unwrap();
        assert_eq!(i, -1);
        assert!((f - 0.7).abs() < 1e-12);
        assert!(floor_frac(f64::NAN).is_err());
        assert!(floor_frac(f64::INFINITY).is_err());
    }

    #[test]
    fn central_diff4_examples() {
        let cube = |x: f64| x.abs().powi(3);
        assert_eq!(central_diff4(cube, 1.0, 0.0), 8.0);
        assert_eq!(central_diff4(cube, 1.0, 3.0), 0.0);
        assert!(central_diff4(|x| x * x, 0.37, -1.9).abs() < 1e-12);
        let r: std::result::Result<f64, &str> =
            try_central_diff4(|x| if x > 1.0 { Err("boom") } else { Ok(x) }, 1.0, 0.0);
        assert_eq!(r, Err("boom"));
    }

    #[test]
    fn double_central_diff4_examples() {
        assert_eq!(double_central_diff4(3.0, 1.0, 1.0, 0.5, 0.5, PairSign::Minus), 32.0);
        assert!(double_central_diff4(2.0, 0.7, 1.3, 0.2, -4.0, PairSign::Minus).abs() < 1e-10);
        assert!(double_central_diff4(2.0, 0.7, 1.3, 0.2, -4.0, PairSign::Plus).abs() < 1e-10);
        assert_eq!(double_central_diff4(3.0, 1.0, 1.0, 10.0, 0.0, PairSign::Minus), 0.0);
    }

    #[test]
    fn diff_spec_matches_named_operators() {
        let f = |x: f64| x.abs().powf(2.6);
        let c4 = DiffSpec::new(4, 0.8, DiffKind::Central).unwrap();
        assert!((c4.apply(f, 1.3) - central_diff4(f, 0.8, 1.3)).abs() < 1e-12);
        let fw = DiffSpec::new(2, 1.0, DiffKind::Forward).unwrap();
        assert!((fw.apply(|x| x * x, 5.0) - 2.0).abs() < 1e-12);
        assert!(DiffSpec::new(9, 1.0, DiffKind::Forward).is_err());
        assert!(DiffSpec::new(2, 0.0, DiffKind::Forward).is_err());
    }

    #[test]
    fn spot_vol_linear_and_constant() {
        let delta = 0.01;
        let lin = series((0..200).map(|i| i as f64 * delta).collect(), delta);
        for &(t, k) in &[(0.01, 5usize), (0.5, 30), (1.0, 10)] {
            let c = spot_vol(&lin, t, k).unwrap();
            assert!((c - delta).abs() < 1e-12, "t={t} k={k} c={c}");
        }
        let flat = series(vec![1.5; 50], delta);
        assert_eq!(spot_vol(&flat, 0.1, 7).unwrap(), 0.0);
        assert!(spot_vol(&flat, 0.45, 7).is_err());
        assert!(spot_vol(&flat, 0.0, 3).is_err());
    }

    #[test]
    fn spot_vol_agrees_with_prefix_sums() {
        let delta = 0.004;
        let xs: Vec<f64> = (0..300).map(|i| ((i * 7919) % 101) as f64 * 0.013).collect();
        let s = series(xs, delta);
        let pre = SquaredIncrements::new(&s);
        for i in [1usize, 17, 200] {
            for k in [1usize, 9, 50] {
                let lit = spot_vol(&s, i as f64 * delta, k).unwrap();
                let fast = pre.spot_at(i, k).unwrap();
                assert!((lit - fast).abs() <= 1e-12 * lit.abs().max(1.0));
            }
        }
    }

    #[test]
    fn v_hat_trivial_paths() {
        let delta = 1e-3;
        let flat = series(vec![0.3; 400], delta);
        assert_eq!(v_hat(&flat, 3, 10, flat.horizon()).unwrap().value_hat, 0.0);
        let lin = series((0..400).map(|i| 2.0 * i as f64 * delta).collect(), delta);
        assert!(v_hat(&lin, 3, 10, lin.horizon()).unwrap().value_hat.abs() < 1e-18);
    }

    #[test]
    fn v_hat_too_short() {
        let s = series(vec![0.0, 0.1, 0.3, 0.2, 0.5, 0.4], 0.1);
        // N = 5, (ℓ+2)k = 5*1 = 5 -> one summand
        assert!(v_hat(&s, 3, 1, s.horizon()).is_ok());
        let err = v_hat(&s, 4, 1, s.horizon()).unwrap_err();
        assert!(matches!(err, Error::SeriesTooShort { .. }), "{err}");
    }

    #[test]
    fn v_tilde_rescales_v_hat() {
        let delta = 0.01;
        let xs: Vec<f64> = (0..500).map(|i| ((i as f64) * 0.37).sin() * 0.1).collect();
        let s = series(xs, delta);
        let h = 0.23;
        let k = 12;
        let vh = v_hat(&s, 3, k, s.horizon()).unwrap().value_hat;
        let vt = v_tilde(&s, 3, k, s.horizon(), h).unwrap();
        assert_eq!(vt, (k as f64 * delta).powf(-2.0 * h) * vh);
    }

    #[test]
    fn v_tilde_unit_window_is_identity() {
        let delta = 0.02;
        let xs: Vec<f64> = (0..400).map(|i| ((i as f64) * 0.11).cos() * 0.05).collect();
        let s = series(xs, delta);
        let vh = v_hat(&s, 3, 50, s.horizon()).unwrap().value_hat;
        let vt = v_tilde(&s, 3, 50, s.horizon(), 0.3).unwrap();
        assert_eq!(vh, vt);
    }

    #[test]
    fn phi_examples() {
        for ell in 2..=10 {
            assert!(phi_const(0.5, ell).unwrap().abs() <= 1e-12);
        }
        let p = phi_const(0.25, 3).unwrap();
        assert!((p - (-0.026_00)).abs() < 5e-6, "{p}");
        assert!(phi_const(0.0, 3).is_err());
        assert!(phi_const(0.6, 3).is_err());
        assert!(phi_const(0.3, 1).is_err());
    }

    #[test]
    fn phi_negative_on_grid() {
        for i in 1..50 {
            let h = i as f64 * 0.01;
            for ell in 2..=10 {
                assert!(phi_const(h, ell).unwrap() < 0.0, "H={h} ell={ell}");
            }
        }
    }

    #[test]
    fn phi_integral_matches_closed_form() {
        for &h in &[0.05, 0.25, 0.45] {
            for ell in [2usize, 3, 6] {
                let a = phi_const(h, ell).unwrap();
                let b = phi_const_integral(h, ell).unwrap();
                assert!((a - b).abs() < 1e-6, "H={h} ell={ell}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn phi_integral_decays_in_lag() {
        let mut prev = f64::INFINITY;
        for ell in 2..=20 {
            let v = phi_const_integral(0.1, ell).unwrap().abs();
            assert!(v < prev, "ell={ell}");
            prev = v;
        }
    }

    #[test]
    fn second_difference_vanishes_left_of_support() {
        for &v in &[-2.0, -2.5, -10.0] {
            assert_eq!(forward_diff_pow(2, v, 0.8), 0.0);
        }
    }

    /// Brute-force V̂: every spot variance summed from the raw increments.
    fn v_hat_brute(s: &PriceSeries, ell: usize, k: usize) -> f64 {
        let d = s.delta();
        let n = s.n_increments();
        let chat = |i: usize| -> f64 { (i..i + k).map(|j| s.increment(j).powi(2)).sum::<f64>() / (k as f64 * d) };
        let mut acc = 0.0;
        for i in 1..=(n + 1 - (ell + 2) * k) {
            acc += (chat(i + k) - chat(i)) * (chat(i + (ell + 1) * k) - chat(i + ell * k));
        }
        d * acc
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn prefix_v_hat_matches_brute_force(
            incs in prop::collection::vec(-1.0f64..1.0, 40..500),
            ell in 0usize..6,
            k in 1usize..6,
        ) {
            let mut xs = vec![0.0];
            for d in &incs { xs.push(xs.last().unwrap() + d); }
            let s = series(xs, 1.0 / incs.len() as f64);
            prop_assume!(s.n_increments() + 1 > (ell + 2) * k);
            let fast = v_hat(&s, ell, k, s.horizon()).unwrap().value_hat;
            let slow = v_hat_brute(&s, ell, k);
            let scale: f64 = slow.abs().max(1e-300);
            prop_assert!((fast - slow).abs() <= 1e-10 * scale, "fast={} slow={}", fast, slow);
        }

        #[test]
        fn v_hat_shift_invariant_and_quartic(
            incs in prop::collection::vec(-1.0f64..1.0, 60..200),
            shift in -50.0f64..50.0,
            c in 0.1f64..4.0,
        ) {
            let mut xs = vec![0.0];
            for d in &incs { xs.push(xs.last().unwrap() + d); }
            let s = series(xs.clone(), 0.01);
            let base = v_hat(&s, 3, 4, s.horizon()).unwrap().value_hat;
            let shifted = series(xs.iter().map(|x| x + shift).collect(), 0.01);
            let vs = v_hat(&shifted, 3, 4, s.horizon()).unwrap().value_hat;
            prop_assert!((vs - base).abs() <= 1e-9 * base.abs().max(1e-12));
            let scaled = series(xs.iter().map(|x| x * c).collect(), 0.01);
            let vc = v_hat(&scaled, 3, 4, s.horizon()).unwrap().value_hat;
            prop_assert!((vc - c.powi(4) * base).abs() <= 1e-10 * (c.powi(4) * base).abs().max(1e-12));
        }

        #[test]
        fn central_diff4_kills_cubics(
            a0 in -10.0f64..10.0, a1 in -10.0f64..10.0, a2 in -10.0f64..10.0, a3 in -10.0f64..10.0,
            h in 0.01f64..2.0, x in -5.0f64..5.0,
        ) {
            let p = |t: f64| a0 + a1 * t + a2 * t * t + a3 * t * t * t;
            prop_assert!(central_diff4(p, h, x).abs() < 1e-9);
        }

        #[test]
        fn floor_frac_fraction_in_unit_interval(x in -1e6f64..1e6) {
            let (_, f) = floor_frac(x).unwrap();
            prop_assert!((0.0..1.0).contains(&f));
        }
    }
}

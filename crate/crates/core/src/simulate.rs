//! Rough-volatility market simulator.
//!
//! Squared volatility follows `c_t = c_0 + a t + ∫ g_H(t-s)(η_s dW_s + η̂_s dŴ_s)`
//! and the vol-of-vol levels `η², η̂²` are themselves power-law convolutions
//! of a four-dimensional Brownian driver `W̄`. Everything lives on the
//! observation grid; the latent paths are kept so that tests can compare
//! estimators with the quantities they target.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{forward_diff_pow, kernel_norm, rl_cell_weights};
use crate::stats::{grid_index, PriceSeries};

/// Fraction of clamped grid points above which a market is flagged.
pub const CLAMP_WARN_FRACTION: f64 = 0.05;

/// Mixes a master seed and a replicate index into an independent 64-bit seed
/// (two rounds of the SplitMix64 finaliser).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(mix(master.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// fGN autocovariance `γ(j) = (δ^{2H}/2)(|j+1|^{2H} - 2|j|^{2H} + |j-1|^{2H})`.
pub fn fgn_autocov(j: usize, hurst: f64, delta: f64) -> f64 {
    let p = 2.0 * hurst;
    let j = j as f64;
    let lower = if j >= 1.0 { (j - 1.0).powf(p) } else { 1.0 };
    0.5 * delta.powf(p) * ((j + 1.0).powf(p) - 2.0 * j.powf(p) + lower)
}

/// Exact fractional Gaussian noise by circulant embedding: `n` increments of
/// fractional Brownian motion with step `delta`.
pub fn sample_fgn(n: usize, hurst: f64, delta: f64, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Domain("fGN length must be at least 1".into()));
    }
    if !(hurst > 0.0 && hurst < 1.0) {
        return Err(Error::Domain(format!("H={hurst} outside (0, 1)")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {delta}")));
    }
    let m = 2 * n;
    let mut row: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(fgn_autocov(lag, hurst, delta), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);

    let max_eig = row.iter().map(|z| z.re).fold(0.0_f64, f64::max);
    let mut eig = Vec::with_capacity(m);
    for (index, z) in row.iter().enumerate() {
        if z.re < -1e-8 * max_eig {
            return Err(Error::Embedding { index, value: z.re });
        }
        eig.push(z.re.max(0.0));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut spec = vec![Complex::new(0.0, 0.0); m];
    spec[0] = Complex::new(eig[0].sqrt() * normal(), 0.0);
    spec[n] = Complex::new(eig[n].sqrt() * normal(), 0.0);
    for k in 1..n {
        let s = (0.5 * eig[k]).sqrt();
        let z = Complex::new(s * normal(), s * normal());
        spec[k] = z;
        spec[m - k] = z.conj();
    }
    fft.process(&mut spec);
    let norm = 1.0 / (m as f64).sqrt();
    Ok(spec[..n].iter().map(|z| z.re * norm).collect())
}

/// `out[i] = Σ_{j<i} weights[i-j-1] · inputs[j]` for `i = 0..=n`, computed
/// with an FFT of size ≥ 2n.
pub fn rl_convolve_fft(weights: &[f64], inputs: &[f64]) -> Vec<f64> {
    let n = inputs.len();
    assert!(weights.len() >= n, "need one kernel weight per lag");
    if n == 0 {
        return vec![0.0];
    }
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex<f64>> = inputs.iter().map(|&x| Complex::new(x, 0.0)).collect();
    a.resize(size, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = weights[..n].iter().map(|&x| Complex::new(x, 0.0)).collect();
    b.resize(size, Complex::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= *y;
    }
    inv.process(&mut a);
    let scale = 1.0 / size as f64;
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    out.extend(a[..n].iter().map(|z| z.re * scale));
    out
}

/// O(n²) reference for [`rl_convolve_fft`].
pub fn rl_convolve_direct(weights: &[f64], inputs: &[f64]) -> Vec<f64> {
    let n = inputs.len();
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = (0..i).map(|j| weights[i - j - 1] * inputs[j]).sum();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Roughness of `c`.
    pub hurst: f64,
    pub hurst_eta: f64,
    pub hurst_etahat: f64,
    pub c0: f64,
    /// Initial vol-of-vol levels `η_0`, `η̂_0` (not squared).
    pub eta0: f64,
    pub etahat0: f64,
    /// Linear drift rate of `c`.
    pub a: f64,
    /// Price drift.
    pub b: f64,
    /// Loadings of `η²` and `η̂²` on the four-dimensional driver `W̄`.
    pub theta: [f64; 4],
    pub vartheta: [f64; 4],
    /// Correlations of `W` (row 0) and `Ŵ` (row 1) with each component of `W̄`.
    pub rho: [[f64; 4]; 2],
    pub c_min: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            hurst: 0.3,
            hurst_eta: 0.5,
            hurst_etahat: 0.5,
            c0: 1.0,
            eta0: 0.5,
            etahat0: 0.5,
            a: 0.0,
            b: 0.0,
            theta: [0.0; 4],
            vartheta: [0.0; 4],
            rho: [[0.0; 4]; 2],
            c_min: 1e-4,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, h) in [
            ("H", self.hurst),
            ("H_eta", self.hurst_eta),
            ("H_etahat", self.hurst_etahat),
        ] {
            if !(h > 0.0 && h <= 0.5) {
                return Err(Error::Config(format!("{name}={h} outside (0, 1/2]")));
            }
        }
        if !(self.c_min > 0.0 && self.c_min < self.c0) {
            return Err(Error::Config(format!(
                "need 0 < c_min < c0, got c_min={} c0={}",
                self.c_min, self.c0
            )));
        }
        if self.eta0 < 0.0 || self.etahat0 < 0.0 {
            return Err(Error::Config("eta0 and etahat0 must be nonnegative".into()));
        }
        let all = [self.c0, self.eta0, self.etahat0, self.a, self.b, self.c_min]
            .into_iter()
            .chain(self.theta)
            .chain(self.vartheta)
            .chain(self.rho.iter().flatten().copied());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("model parameters must be finite".into()));
        }
        self.driver_factor()?;
        Ok(())
    }

    /// Lower Cholesky factor of the 6×6 correlation of `(W, Ŵ, W̄_1..W̄_4)`.
    fn driver_factor(&self) -> Result<[[f64; 6]; 6]> {
        let mut corr = [[0.0; 6]; 6];
        for (i, row) in corr.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for r in 0..2 {
            for j in 0..4 {
                corr[r][2 + j] = self.rho[r][j];
                corr[2 + j][r] = self.rho[r][j];
            }
        }
        let mut l = [[0.0; 6]; 6];
        for i in 0..6 {
            for j in 0..=i {
                let s: f64 = (0..j).map(|p| l[i][p] * l[j][p]).sum();
                if i == j {
                    let d = corr[i][i] - s;
                    if d < -1e-12 {
                        return Err(Error::Config(
                            "driver correlation matrix is not positive semidefinite".into(),
                        ));
                    }
                    l[i][j] = d.max(0.0).sqrt();
                } else if l[j][j] > 0.0 {
                    l[i][j] = (corr[i][j] - s) / l[j][j];
                }
            }
        }
        Ok(l)
    }

    fn has_correlation(&self) -> bool {
        self.rho.iter().flatten().any(|&r| r != 0.0)
    }
}

/// A simulated price series together with its latent paths.
#[derive(Debug, Clone)]
pub struct SimulatedMarket {
    pub series: PriceSeries,
    pub sigma_path: Vec<f64>,
    pub c_path: Vec<f64>,
    pub eta_path: Vec<f64>,
    pub etahat_path: Vec<f64>,
    /// Brownian increments `W_{(i+1)δ} - W_{iδ}` driving the price.
    pub dw: Vec<f64>,
    pub params: ModelParams,
    pub seed: u64,
    /// Grid points where `c` or `η²`/`η̂²` hit their floor.
    pub clamp_count: usize,
    pub clamp_warning: bool,
}

/// Convolutions are done by FFT; `Direct` is kept for cross-checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolutionMethod {
    Fft,
    Direct,
}

pub fn simulate_market(params: &ModelParams, n: usize, delta: f64, seed: u64) -> Result<SimulatedMarket> {
    simulate_market_with(params, n, delta, seed, ConvolutionMethod::Fft)
}

/// Simulates `n` steps of size `delta` (so `n + 1` grid points, horizon `nδ`).
pub fn simulate_market_with(
    params: &ModelParams,
    n: usize,
    delta: f64,
    seed: u64,
    method: ConvolutionMethod,
) -> Result<SimulatedMarket> {
    params.validate()?;
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 steps, got {n}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain(format!("step must be positive, got {delta}")));
    }
    let convolve = |w: &[f64], x: &[f64]| match method {
        ConvolutionMethod::Fft => rl_convolve_fft(w, x),
        ConvolutionMethod::Direct => rl_convolve_direct(w, x),
    };

    // Six unit-variance drivers per step, correlated through the Cholesky factor.
    let factor = params.driver_factor()?;
    let correlated = params.has_correlation();
    let sd = delta.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drivers = vec![[0.0f64; 6]; n];
    for d in drivers.iter_mut() {
        let mut z = [0.0f64; 6];
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        if correlated {
            for i in 0..6 {
                d[i] = sd * (0..=i).map(|j| factor[i][j] * z[j]).sum::<f64>();
            }
        } else {
            for i in 0..6 {
                d[i] = sd * z[i];
            }
        }
    }

    let mut clamp_count = 0usize;
    let mut vov_level = |level0: f64, hurst: f64, loadings: &[f64; 4]| -> Vec<f64> {
        if loadings.iter().all(|&x| x == 0.0) {
            return vec![level0 * level0; n + 1];
        }
        let forcing: Vec<f64> = drivers
            .iter()
            .map(|d| (0..4).map(|j| loadings[j] * d[2 + j]).sum())
            .collect();
        let w = rl_cell_weights(hurst, delta, n);
        let conv = convolve(&w, &forcing);
        conv.into_iter()
            .map(|v| {
                let e2 = level0 * level0 + v;
                if e2 < 0.0 {
                    clamp_count += 1;
                    0.0
                } else {
                    e2
                }
            })
            .collect()
    };
    let eta2 = vov_level(params.eta0, params.hurst_eta, &params.theta);
    let etahat2 = vov_level(params.etahat0, params.hurst_etahat, &params.vartheta);
    let eta_path: Vec<f64> = eta2.iter().map(|v| v.sqrt()).collect();
    let etahat_path: Vec<f64> = etahat2.iter().map(|v| v.sqrt()).collect();

    let forcing: Vec<f64> = (0..n)
        .map(|j| eta_path[j] * drivers[j][0] + etahat_path[j] * drivers[j][1])
        .collect();
    let w = rl_cell_weights(params.hurst, delta, n);
    let conv = convolve(&w, &forcing);
    let c_path: Vec<f64> = conv
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let c = params.c0 + params.a * i as f64 * delta + v;
            if c < params.c_min {
                clamp_count += 1;
                params.c_min
            } else {
                c
            }
        })
        .collect();
    let sigma_path: Vec<f64> = c_path.iter().map(|c| c.sqrt()).collect();

    let dw: Vec<f64> = drivers.iter().map(|d| d[0]).collect();
    let mut x = Vec::with_capacity(n + 1);
    x.push(0.0);
    for i in 0..n {
        let next = x[i] + params.b * delta + sigma_path[i] * dw[i];
        x.push(next);
    }
    let series = PriceSeries::new(x, delta)?;
    let clamp_warning = clamp_count as f64 > CLAMP_WARN_FRACTION * (n + 1) as f64;

    Ok(SimulatedMarket {
        series,
        sigma_path,
        c_path,
        eta_path,
        etahat_path,
        dw,
        params: params.clone(),
        seed,
        clamp_count,
        clamp_warning,
    })
}

impl SimulatedMarket {
    /// Writes `t,x,c,sigma,eta,etahat`, one row per grid point, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,x,c,sigma,eta,etahat")?;
        let delta = self.series.delta();
        for (i, x) in self.series.samples().iter().enumerate() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                i as f64 * delta,
                x,
                self.c_path[i],
                self.sigma_path[i],
                self.eta_path[i],
                self.etahat_path[i]
            )?;
        }
        Ok(())
    }
}

fn trapezoid(values: impl Iterator<Item = f64>, delta: f64) -> f64 {
    let v: Vec<f64> = values.collect();
    if v.len() < 2 {
        return 0.0;
    }
    let inner: f64 = v[1..v.len() - 1].iter().sum();
    delta * (inner + 0.5 * (v[0] + v[v.len() - 1]))
}

/// Integrated latent functionals `(∫σ⁸, ∫(η²+η̂²)², ∫σ⁴(η²+η̂²))` on `[0, t]`.
pub fn true_gammas(market: &SimulatedMarket, t: f64) -> Result<(f64, f64, f64)> {
    let delta = market.series.delta();
    let n_t = grid_index(t, delta)?;
    if n_t > market.series.n_increments() {
        return Err(Error::Range(format!("t={t} beyond simulated horizon")));
    }
    let vov = |i: usize| market.eta_path[i].powi(2) + market.etahat_path[i].powi(2);
    let g1 = trapezoid((0..=n_t).map(|i| market.sigma_path[i].powi(8)), delta);
    let g2 = trapezoid((0..=n_t).map(|i| vov(i).powi(2)), delta);
    let g3 = trapezoid((0..=n_t).map(|i| market.sigma_path[i].powi(4) * vov(i)), delta);
    Ok((g1, g2, g3))
}

/// Latent bias `𝒜^{n,ℓ,k}_t` of the realized autocovariance.
///
/// On each cell `[jδ, (j+1)δ)` the inner stochastic integral is `σ_j ΔW_j`
/// at the right end and zero at the left, so the `du`-integral is taken by
/// the trapezoid rule with the kernel sum evaluated at `{u/δ} = 1`.
pub fn bias_oracle(market: &SimulatedMarket, ell: usize, k: usize, t: f64) -> Result<f64> {
    if ell < 2 {
        return Err(Error::Domain(format!("lag {ell} must be at least 2")));
    }
    if k == 0 {
        return Err(Error::Domain("window k must be at least 1".into()));
    }
    let delta = market.series.delta();
    let n_t = grid_index(t, delta)?;
    if n_t > market.series.n_increments() {
        return Err(Error::Range(format!("t={t} beyond simulated horizon")));
    }
    let hurst = market.params.hurst;
    let alpha = hurst + 0.5;
    let kf = k as f64;
    let frac = 1.0;
    let kernel_sum: f64 = (0..k)
        .map(|i| forward_diff_pow(3, ell as f64 - 1.0 - (i as f64 + frac) / kf, alpha))
        .sum::<f64>()
        / kf;

    let s = &market.sigma_path;
    let e = &market.eta_path;
    let mut integral = 0.0;
    for j in 0..n_t {
        let inner = s[j] * market.dw[j];
        let jump = s[j + 1] * e[j + 1] - s[j] * e[j];
        integral += 0.5 * delta * kernel_sum * inner * jump;
    }
    let pre = -2.0 / (kernel_norm(hurst) * alpha) * (kf * delta).powf(-0.5 - hurst);
    Ok(pre * integral)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(x: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    fn lag1_corr(x: &[f64]) -> f64 {
        let (m, v) = mean_var(x);
        let c: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (x.len() as f64 - 1.0);
        c / v
    }

    #[test]
    fn fgn_brownian_case_is_white() {
        let n = 1 << 14;
        let x = sample_fgn(n, 0.5, 0.01, 7).unwrap();
        assert!(lag1_corr(&x).abs() < 3.0 / (n as f64).sqrt());
        let (_, v) = mean_var(&x);
        // Var of sample variance for Gaussian data ≈ 2σ⁴/n
        let se = 0.01 * (2.0 / n as f64).sqrt();
        assert!((v - 0.01).abs() < 3.0 * se, "var {v}");
    }

    #[test]
    fn fgn_rough_lag_one_correlation() {
        let h = 0.1;
        let expected = (2f64.powf(2.0 * h) - 2.0) / 2.0;
        let reps = 40;
        let n = 4096;
        let delta = 1.0 / n as f64;
        let rhos: Vec<f64> = (0..reps)
            .map(|r| lag1_corr(&sample_fgn(n, h, delta, 100 + r).unwrap()))
            .collect();
        let (m, v) = mean_var(&rhos);
        let se = (v / reps as f64).sqrt();
        assert!(
            (m - expected).abs() < 3.0 * se + 1e-3,
            "mean {m} expected {expected} se {se}"
        );
        let vars: Vec<f64> = (0..reps)
            .map(|r| mean_var(&sample_fgn(n, h, delta, 500 + r).unwrap()).1)
            .collect();
        let (mv, vv) = mean_var(&vars);
        let target = delta.powf(2.0 * h);
        let se = (vv / reps as f64).sqrt();
        assert!((mv - target).abs() < 3.0 * se + 1e-3 * target, "var {mv} vs {target}");
    }

    #[test]
    fn fgn_is_deterministic_and_validates() {
        assert_eq!(
            sample_fgn(100, 0.3, 0.1, 5).unwrap(),
            sample_fgn(100, 0.3, 0.1, 5).unwrap()
        );
        assert!(sample_fgn(0, 0.3, 0.1, 5).is_err());
        assert!(sample_fgn(10, 0.0, 0.1, 5).is_err());
        assert_eq!(sample_fgn(1, 0.3, 0.1, 5).unwrap().len(), 1);
    }

    #[test]
    fn fft_convolution_matches_direct() {
        for &n in &[1usize, 2, 17, 1000, 4096] {
            let w = rl_cell_weights(0.12, 1.0 / n as f64, n);
            let x = sample_fgn(n, 0.5, 1.0, n as u64).unwrap();
            let a = rl_convolve_fft(&w, &x);
            let b = rl_convolve_direct(&w, &x);
            let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() <= 1e-9 * scale, "n={n}: {p} vs {q}");
            }
        }
    }

    #[test]
    fn degenerate_vov_gives_brownian_price() {
        let params = ModelParams {
            c0: 0.04,
            eta0: 0.0,
            etahat0: 0.0,
            ..ModelParams::default()
        };
        let m = simulate_market(&params, 1000, 0.001, 3).unwrap();
        assert!(m.c_path.iter().all(|&c| c == 0.04));
        assert_eq!(m.clamp_count, 0);
        let sd = 0.2;
        for i in 0..1000 {
            let inc = m.series.increment(i + 1);
            assert!((inc - sd * m.dw[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let p = ModelParams::default();
        let a = simulate_market(&p, 512, 1.0 / 512.0, 11).unwrap();
        let b = simulate_market(&p, 512, 1.0 / 512.0, 11).unwrap();
        assert_eq!(a.series, b.series);
        assert_eq!(a.c_path, b.c_path);
        let c = simulate_market(&p, 512, 1.0 / 512.0, 12).unwrap();
        assert_ne!(a.series, c.series);
    }

    #[test]
    fn fft_and_direct_markets_agree() {
        let p = ModelParams {
            theta: [0.2, 0.0, 0.1, 0.0],
            hurst_eta: 0.3,
            ..ModelParams::default()
        };
        let a = simulate_market_with(&p, 2048, 1.0 / 2048.0, 9, ConvolutionMethod::Fft).unwrap();
        let b = simulate_market_with(&p, 2048, 1.0 / 2048.0, 9, ConvolutionMethod::Direct).unwrap();
        for (x, y) in a.c_path.iter().zip(&b.c_path) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn variance_of_c_matches_kernel_integral() {
        let h = 0.3;
        let params = ModelParams {
            hurst: h,
            c0: 10.0,
            eta0: 1.0,
            etahat0: 0.0,
            ..ModelParams::default()
        };
        let n = 2048;
        let delta = 1.0 / n as f64;
        let reps = 300;
        let ends: Vec<f64> = (0..reps)
            .map(|r| simulate_market(&params, n, delta, derive_seed(1, r)).unwrap().c_path[n])
            .collect();
        let (_, v) = mean_var(&ends);
        let target = crate::kernel::rl_kernel_sq_integral(h, 1.0);
        let se = v * (2.0 / reps as f64).sqrt();
        assert!((v - target).abs() < 3.0 * se, "var {v} target {target}");
    }

    #[test]
    fn brownian_vol_has_uncorrelated_increments() {
        let params = ModelParams {
            hurst: 0.5,
            c0: 10.0,
            eta0: 1.0,
            etahat0: 0.5,
            ..ModelParams::default()
        };
        let n = 1000;
        let reps = 400;
        let mut first = Vec::new();
        let mut second = Vec::new();
        let mut incs = Vec::new();
        for r in 0..reps {
            let m = simulate_market(&params, n, 1e-3, derive_seed(2, r)).unwrap();
            first.push(m.c_path[400] - m.c_path[0]);
            second.push(m.c_path[900] - m.c_path[500]);
            incs.push(m.c_path[700] - m.c_path[600]);
        }
        let (m1, v1) = mean_var(&first);
        let (m2, v2) = mean_var(&second);
        let cov: f64 = first.iter().zip(&second).map(|(a, b)| (a - m1) * (b - m2)).sum::<f64>() / (reps as f64 - 1.0);
        let corr = cov / (v1 * v2).sqrt();
        assert!(corr.abs() < 3.0 / (reps as f64).sqrt(), "corr {corr}");
        // Var(c_{t+Δ} - c_t) = (η² + η̂²) Δ
        let (_, vi) = mean_var(&incs);
        let target = 1.25 * 0.1;
        assert!(
            (vi - target).abs() < 3.0 * target * (2.0 / reps as f64).sqrt(),
            "{vi} vs {target}"
        );
    }

    fn flat_market(n: usize, sigma: f64, eta: f64, etahat: f64) -> SimulatedMarket {
        let delta = 1.0 / n as f64;
        let series = PriceSeries::new(vec![0.0; n + 1], delta).unwrap();
        SimulatedMarket {
            series,
            sigma_path: vec![sigma; n + 1],
            c_path: vec![sigma * sigma; n + 1],
            eta_path: vec![eta; n + 1],
            etahat_path: vec![etahat; n + 1],
            dw: vec![0.01; n],
            params: ModelParams::default(),
            seed: 0,
            clamp_count: 0,
            clamp_warning: false,
        }
    }

    #[test]
    fn true_gammas_constant_paths() {
        let m = flat_market(100, 1.0, 0.0, 0.0);
        let (g1, g2, g3) = true_gammas(&m, 0.5).unwrap();
        assert!((g1 - 0.5).abs() < 1e-12 && g2 == 0.0 && g3 == 0.0);
        let m = flat_market(100, 1.0, 1.0, 0.0);
        let (g1, g2, g3) = true_gammas(&m, 1.0).unwrap();
        for g in [g1, g2, g3] {
            assert!((g - 1.0).abs() < 1e-12);
        }
        let sim = simulate_market(&ModelParams::default(), 256, 1.0 / 256.0, 4).unwrap();
        let mut scaled = sim.clone();
        let c = 1.7f64;
        scaled.sigma_path.iter_mut().for_each(|s| *s *= c);
        let a = true_gammas(&sim, 1.0).unwrap();
        let b = true_gammas(&scaled, 1.0).unwrap();
        assert!((b.0 - c.powi(8) * a.0).abs() <= 1e-12 * b.0);
        assert!((b.2 - c.powi(4) * a.2).abs() <= 1e-12 * b.2);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn bias_oracle_vanishes_without_vov_motion() {
        let m = flat_market(200, 0.8, 0.4, 0.1);
        assert_eq!(bias_oracle(&m, 3, 4, 1.0).unwrap(), 0.0);
        let m = flat_market(200, 0.8, 0.0, 0.0);
        assert_eq!(bias_oracle(&m, 3, 4, 1.0).unwrap(), 0.0);
        let p = ModelParams {
            eta0: 0.0,
            etahat0: 0.0,
            ..ModelParams::default()
        };
        let sim = simulate_market(&p, 300, 1.0 / 300.0, 1).unwrap();
        assert_eq!(bias_oracle(&sim, 3, 8, 1.0).unwrap(), 0.0);
        assert!(bias_oracle(&sim, 1, 8, 1.0).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let m = simulate_market(&ModelParams::default(), 8, 0.125, 3).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x,c,sigma,eta,etahat");
        assert_eq!(lines.len(), 10);
        let fields: Vec<f64> = lines[3].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields[0], 0.25);
        assert_eq!(fields[2], m.c_path[2]);
    }
}

//! Power-law (Riemann–Liouville) kernels and finite differences of powers.

use statrs::function::gamma::gamma;
use std::f64::consts::PI;

/// Normalising constant `K_H = Γ(H+1/2) / sqrt(sin(πH) Γ(2H+1))`.
///
/// With this constant the Riemann–Liouville kernel `K_H^{-1} t^{H-1/2}`
/// yields increments of variance `s^{2H}` in the stationary (Mandelbrot–van
/// Ness) representation.
pub fn kernel_norm(hurst: f64) -> f64 {
    gamma(hurst + 0.5) / ((PI * hurst).sin() * gamma(2.0 * hurst + 1.0)).sqrt()
}

/// `g_H(t) = K_H^{-1} t_+^{H-1/2}`.
pub fn rl_kernel(hurst: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    t.powf(hurst - 0.5) / kernel_norm(hurst)
}

/// `∫_0^t g_H(s)^2 ds = K_H^{-2} t^{2H} / (2H)`.
pub fn rl_kernel_sq_integral(hurst: f64, t: f64) -> f64 {
    let k = kernel_norm(hurst);
    t.max(0.0).powf(2.0 * hurst) / (2.0 * hurst * k * k)
}

/// Cell-averaged kernel weights `w_m = δ^{-1} ∫_{(m-1)δ}^{mδ} g_H(s) ds`, m = 1..=n.
pub fn rl_cell_weights(hurst: f64, delta: f64, n: usize) -> Vec<f64> {
    let alpha = hurst + 0.5;
    let scale = delta.powf(hurst - 0.5) / (kernel_norm(hurst) * alpha);
    let mut prev = 0.0_f64;
    (1..=n)
        .map(|m| {
            let cur = (m as f64).powf(alpha);
            let w = scale * (cur - prev);
            prev = cur;
            w
        })
        .collect()
}

#[inline]
pub(crate) fn pos_pow(x: f64, alpha: f64) -> f64 {
    if x > 0.0 {
        x.powf(alpha)
    } else {
        0.0
    }
}

/// Generalised binomial coefficient `C(alpha, m)`.
fn binom_real(alpha: f64, m: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..m {
        c *= (alpha - j as f64) / (j as f64 + 1.0);
    }
    c
}

/// Forward difference `Δ^order_1 x_+^alpha` evaluated at `v`.
///
/// Far from the kinks the alternating sum cancels catastrophically, so for
/// `v` large relative to `order` the binomial series in `1/v` is summed
/// instead.
pub fn forward_diff_pow(order: usize, v: f64, alpha: f64) -> f64 {
    let span = order as f64;
    if v >= 4.0 * span.max(2.0) {
        // v^α Σ_m C(α,m) v^{-m} Σ_i (-1)^{order-i} C(order,i) i^m
        let mut total = 0.0;
        let inv = 1.0 / v;
        let mut vpow = 1.0;
        for m in 0..200 {
            let mut moment = 0.0;
            for i in 0..=order {
                let sign = if (order - i) % 2 == 0 { 1.0 } else { -1.0 };
                moment += sign * binom_int(order, i) * (i as f64).powi(m as i32);
            }
            let term = binom_real(alpha, m) * vpow * moment;
            total += term;
            if m > order && term.abs() <= 1e-18 * total.abs() {
                break;
            }
            vpow *= inv;
        }
        return v.powf(alpha) * total;
    }
    let mut s = 0.0;
    for i in 0..=order {
        let sign = if (order - i) % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * binom_int(order, i) * pos_pow(v + i as f64, alpha);
    }
    s
}

pub(crate) fn binom_int(n: usize, k: usize) -> f64 {
    let mut c = 1.0;
    for j in 0..k {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c
}

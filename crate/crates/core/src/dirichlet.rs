//! Dirichlet kernel `D_M(x) = sin(Mx/2) / sin(x/2)` and its derivative.
//!
//! Both are evaluated after reducing `x` to `[-pi, pi)`; the kernel is
//! `2pi`-periodic for odd `M` and anti-periodic for even `M`, so
//! `D_M(x + 2pi k) = (-1)^((M+1)k) D_M(x)`. Near the removable singularity at
//! `x = 0` the quotients are replaced by series expansions.

use std::f64::consts::PI;

/// `|sin(x/2)|` below this switches the kernel to its guarded form.
pub const SINGULAR_GUARD: f64 = 1e-7;

/// `M |x|` below this switches the derivative to its Taylor series.
const DERIVATIVE_SERIES_BAND: f64 = 0.1;

/// Splits `x = 2 pi k + r` with `r` in `[-pi, pi)`; returns the sign
/// `(-1)^((M+1)k)` and `r`.
#[inline]
fn reduce(m: u64, x: f64) -> (f64, f64) {
    let two_pi = 2.0 * PI;
    let k = (x / two_pi).round();
    let r = x - two_pi * k;
    let odd = (m + 1) % 2 == 1 && (k as i64).rem_euclid(2) == 1;
    (if odd { -1.0 } else { 1.0 }, r)
}

#[inline]
fn kernel_reduced(m: f64, r: f64) -> f64 {
    let half = 0.5 * r;
    let s = half.sin();
    if s.abs() < SINGULAR_GUARD {
        if half == 0.0 {
            return m;
        }
        let a = m * half;
        let num_over_half = if a.abs() < 1e-4 {
            m * (1.0 - a * a / 6.0)
        } else {
            a.sin() / half
        };
        // half / sin(half) = 1 + half^2 / 6 + O(half^4)
        num_over_half * (1.0 + half * half / 6.0)
    } else {
        (m * half).sin() / s
    }
}

#[inline]
fn derivative_reduced(m: f64, r: f64) -> f64 {
    if (m * r).abs() < DERIVATIVE_SERIES_BAND {
        // D_M(r) = sum_k cos(k r) over the M symmetric (half-)integers k, so
        // D'(r) = -r S2 + r^3 S4 / 6 - r^5 S6 / 120 with S2n = sum_k k^(2n).
        let m2 = m * m;
        let s2 = m * (m2 - 1.0) / 12.0;
        let s4 = m * (m2 - 1.0) * (3.0 * m2 - 7.0) / 240.0;
        let s6 = m * (m2 - 1.0) * (3.0 * m2 * m2 - 18.0 * m2 + 31.0) / 1344.0;
        let r2 = r * r;
        return r * (-s2 + r2 * (s4 / 6.0 - r2 * s6 / 120.0));
    }
    let half = 0.5 * r;
    let (s, c) = half.sin_cos();
    let (sm, cm) = (m * half).sin_cos();
    (m * cm * s - sm * c) / (2.0 * s * s)
}

/// `D_M(x)`, continuous across `x = 2 pi k` where it takes the value `+-M`.
pub fn dirichlet(m: u64, x: f64) -> f64 {
    let (sign, r) = reduce(m, x);
    sign * kernel_reduced(m as f64, r)
}

/// `D_M'(x)`; zero at `x = 2 pi k`.
pub fn dirichlet_derivative(m: u64, x: f64) -> f64 {
    let (sign, r) = reduce(m, x);
    sign * derivative_reduced(m as f64, r)
}

/// `(D_M(x), D_M'(x))` with one argument reduction.
#[inline]
pub fn dirichlet_with_derivative(m: u64, x: f64) -> (f64, f64) {
    let (sign, r) = reduce(m, x);
    let mf = m as f64;
    (sign * kernel_reduced(mf, r), sign * derivative_reduced(mf, r))
}

/// Grid offset `phi_y = theta - 2 pi y / M`.
#[inline]
pub fn grid_offset(m: u64, theta: f64, y: u64) -> f64 {
    theta - 2.0 * PI * (y as f64) / (m as f64)
}

/// `sum_y D_M'(theta - 2 pi y / M)^2` over `y = 0..M-1`, computed numerically.
/// Equals `M^2 (M^2 - 1) / 12` for every `theta`.
pub fn squared_derivative_sum(m: u64, theta: f64) -> f64 {
    (0..m)
        .map(|y| {
            let d = dirichlet_derivative(m, grid_offset(m, theta, y));
            d * d
        })
        .sum()
}

/// `sum_y D_M(theta - 2 pi y / M)^2`; equals `M^2`.
pub fn squared_kernel_sum(m: u64, theta: f64) -> f64 {
    (0..m)
        .map(|y| {
            let d = dirichlet(m, grid_offset(m, theta, y));
            d * d
        })
        .sum()
}

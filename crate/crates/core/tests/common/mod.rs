//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sorted phases in `[-1, 1]` with pairwise gaps of at least `min_gap`, and
/// positive overlaps summing to one.
pub fn random_spectrum(r: &mut ChaCha8Rng, modes: usize, min_gap: f64) -> (Vec<f64>, Vec<f64>) {
    let phases = loop {
        let mut p: Vec<f64> = (0..modes).map(|_| r.random_range(-1.0..1.0)).collect();
        p.sort_by(f64::total_cmp);
        if p.windows(2).all(|w| w[1] - w[0] >= min_gap) {
            break p;
        }
    };
    let raw: Vec<f64> = (0..modes).map(|_| r.random_range(0.05..1.0)).collect();
    let sum: f64 = raw.iter().sum();
    (phases, raw.iter().map(|c| c / sum).collect())
}

/// `sin(M x / 2) / sin(x / 2)`, evaluated directly (callers stay off the grid).
pub fn kernel(m: f64, x: f64) -> f64 {
    let s = (x / 2.0).sin();
    if s.abs() < 1e-12 {
        return m * if ((x / (2.0 * PI)).round() as i64 * (m as i64 + 1)) % 2 == 0 { 1.0 } else { -1.0 };
    }
    (m * x / 2.0).sin() / s
}

/// QFT outcome probabilities with free (unnormalized) overlaps.
pub fn qft_probs(params: &[f64], modes: usize, n: u32) -> Vec<f64> {
    let m = (1u64 << n) as f64;
    (0..1u64 << n)
        .map(|y| {
            (0..modes)
                .map(|l| {
                    let d = kernel(m, params[l] - 2.0 * PI * y as f64 / m);
                    params[modes + l] * d * d / (m * m)
                })
                .sum()
        })
        .collect()
}

/// Hadamard-test outcome probabilities `[(1+C)/2, (1-C)/2, (1+S)/2, (1-S)/2]`.
pub fn ht_probs(params: &[f64], modes: usize, t: f64) -> Vec<f64> {
    let c: f64 = (0..modes).map(|l| params[modes + l] * (t * params[l]).cos()).sum();
    let s: f64 = (0..modes).map(|l| params[modes + l] * (t * params[l]).sin()).sum();
    vec![(1.0 + c) / 2.0, (1.0 - c) / 2.0, (1.0 + s) / 2.0, (1.0 - s) / 2.0]
}

/// `sum_y d_a p d_b p / p` with central differences, row-major `2L x 2L`.
pub fn fd_fisher<F: Fn(&[f64]) -> Vec<f64>>(probs: F, params: &[f64]) -> Vec<f64> {
    let k = params.len();
    let h = 1e-6;
    let p0 = probs(params);
    let grads: Vec<Vec<f64>> = (0..k)
        .map(|a| {
            let mut up = params.to_vec();
            let mut dn = params.to_vec();
            up[a] += h;
            dn[a] -= h;
            let (pu, pd) = (probs(&up), probs(&dn));
            pu.iter().zip(&pd).map(|(u, d)| (u - d) / (2.0 * h)).collect()
        })
        .collect();
    let mut f = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            f[a * k + b] = p0
                .iter()
                .enumerate()
                .filter(|(_, p)| **p > 1e-300)
                .map(|(y, p)| grads[a][y] * grads[b][y] / p)
                .sum();
        }
    }
    f
}

/// Largest entrywise gap scaled by `sqrt(F_aa F_bb)`.
pub fn scaled_gap(a: &[f64], b: &[f64], k: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..k {
        for j in 0..k {
            let scale = (b[i * k + i] * b[j * k + j]).sqrt().max(f64::MIN_POSITIVE);
            worst = worst.max((a[i * k + j] - b[i * k + j]).abs() / scale);
        }
    }
    worst
}

//! Classical post-processing: phase estimates from measurement records.
//!
//! The three Hadamard-test estimators all search the filtered statistic
//! `G(x) = (1/N_t) sum_k z_hat(t_k) e^{-i x t_k}`; they differ in which
//! times feed it and how candidates are chosen. QMEGS takes the global
//! maximum of `|G|`, QCELS maximizes the same statistic (the closed-form `r`
//! of its least-squares fit) level by level on growing prefixes of an
//! arithmetic schedule, and CSQPE runs orthogonal matching pursuit with it.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::dirichlet::{dirichlet_with_derivative, grid_offset};
use crate::error::{QpeError, Result};
use crate::fim::grid_size;
use crate::simulate::{HtSample, QftSample};
use crate::spectrum::wrap_phase;

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const NEWTON_MAX: usize = 50;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// Search grid spacing of the final (or only) level.
    pub grid_step: f64,
    /// Refinement iterations summed over all stages.
    pub iterations: usize,
    /// Mean squared residual of the fitted model, where one exists.
    pub residual: f64,
    /// Number of resolution levels or fitted components.
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    /// Estimated target phase in `(-pi, pi]`.
    pub theta_hat: f64,
    /// Fitted phases of every component (multi-peak estimators).
    pub phases: Option<Vec<f64>>,
    /// Fitted amplitude magnitudes matching `phases`.
    pub amplitudes: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

/// `G(x)` over one set of times and values.
struct Filtered<'a> {
    t: &'a [f64],
    z: &'a [Complex64],
}

impl Filtered<'_> {
    fn value(&self, x: f64) -> Complex64 {
        let sum: Complex64 = self
            .t
            .iter()
            .zip(self.z)
            .map(|(&t, &z)| z * Complex64::from_polar(1.0, -x * t))
            .sum();
        sum / self.t.len() as f64
    }

    fn power(&self, x: f64) -> f64 {
        self.value(x).norm_sqr()
    }

    /// `|G|^2` with its first two derivatives.
    fn power_derivatives(&self, x: f64) -> (f64, f64, f64) {
        let (mut g, mut g1, mut g2) = (Complex64::ZERO, Complex64::ZERO, Complex64::ZERO);
        for (&t, &z) in self.t.iter().zip(self.z) {
            let w = z * Complex64::from_polar(1.0, -x * t);
            g += w;
            g1 += w * Complex64::new(0.0, -t);
            g2 += w * (-t * t);
        }
        let n = self.t.len() as f64;
        let (g, g1, g2) = (g / n, g1 / n, g2 / n);
        (
            g.norm_sqr(),
            2.0 * (g.conj() * g1).re,
            2.0 * (g1.norm_sqr() + (g.conj() * g2).re),
        )
    }

    /// `|G|^2` at `start + j step`, `j < count`, by phase rotation.
    fn scan(&self, start: f64, step: f64, count: usize) -> Vec<f64> {
        let mut acc = vec![Complex64::ZERO; count];
        for (&t, &z) in self.t.iter().zip(self.z) {
            let mut w = z * Complex64::from_polar(1.0, -start * t);
            let rot = Complex64::from_polar(1.0, -step * t);
            for a in acc.iter_mut() {
                *a += w;
                w *= rot;
            }
        }
        let n2 = (self.t.len() as f64).powi(2);
        acc.iter().map(|a| a.norm_sqr() / n2).collect()
    }

    /// Location of the largest scanned value.
    fn scan_argmax(&self, start: f64, step: f64, count: usize) -> f64 {
        let p = self.scan(start, step, count);
        let j = p
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
            .0;
        start + j as f64 * step
    }

    /// Golden-section maximization on `[x0 - half, x0 + half]` to `tol`,
    /// then (optionally) Newton steps on the derivative inside the bracket.
    fn refine(&self, x0: f64, half: f64, tol: f64, newton: bool) -> (f64, usize) {
        let (mut a, mut b) = (x0 - half, x0 + half);
        let mut c = b - GOLDEN * (b - a);
        let mut d = a + GOLDEN * (b - a);
        let (mut fc, mut fd) = (self.power(c), self.power(d));
        let mut iters = 0;
        while b - a > tol {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - GOLDEN * (b - a);
                fc = self.power(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + GOLDEN * (b - a);
                fd = self.power(d);
            }
            iters += 1;
        }
        let mut x = 0.5 * (a + b);
        if newton {
            let (lo, hi) = (x0 - half, x0 + half);
            for _ in 0..NEWTON_MAX {
                let (_, d1, d2) = self.power_derivatives(x);
                iters += 1;
                if !(d2 < 0.0) {
                    break;
                }
                let next = (x - d1 / d2).clamp(lo, hi);
                let moved = (next - x).abs();
                x = next;
                if moved <= 1e-15 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        (x, iters)
    }
}

/// Grid step dividing `2 pi` evenly into an even number of cells, no larger
/// than `step`. The even count keeps `0` on the grid so mirrored data give
/// mirrored grids.
fn even_grid(step: f64) -> (f64, usize) {
    let mut count = (2.0 * PI / step).ceil() as usize;
    if count % 2 == 1 {
        count += 1;
    }
    (2.0 * PI / count as f64, count)
}

fn check_data(data: &HtSample) -> Result<()> {
    if data.is_empty() {
        return Err(QpeError::EmptyData);
    }
    Ok(())
}

/// QMEGS: global maximum of `|G(x)|` over `(-pi, pi]`.
///
/// The grid step is `min(grid_step, 0.5/T)`. With `refine` the maximum is
/// polished by golden-section search to `1e-3/T` within one cell and then by
/// Newton steps on `d|G|^2/dx`.
pub fn estimate_qmegs(data: &HtSample, max_time: f64, grid_step: f64, refine: bool) -> Result<Estimate> {
    check_data(data)?;
    if !(max_time > 0.0) || !(grid_step > 0.0) {
        return Err(QpeError::InvalidArgument("T and grid step must be positive".into()));
    }
    let times = data.times();
    let f = Filtered {
        t: &times,
        z: &data.z_hat,
    };
    let (step, count) = even_grid(grid_step.min(0.5 / max_time));
    let x0 = f.scan_argmax(-PI + step, step, count);
    let (x, iterations) = if refine {
        f.refine(x0, step, 1e-3 / max_time, true)
    } else {
        (x0, 0)
    };
    Ok(Estimate {
        theta_hat: wrap_phase(x),
        phases: None,
        amplitudes: Some(vec![f.value(x).norm()]),
        diagnostics: Diagnostics {
            grid_step: step,
            iterations,
            residual: 0.0,
            levels: 1,
        },
    })
}

/// Default level count `max(1, floor(log2(N_t / 16)) + 1)`.
pub fn qcels_default_levels(n_times: usize) -> usize {
    if n_times < 32 {
        1
    } else {
        (n_times as f64 / 16.0).log2().floor() as usize + 1
    }
}

/// Spacing of an arithmetic progression, or `ScheduleMismatch`.
fn arithmetic_step(times: &[f64]) -> Result<f64> {
    let n = times.len();
    if n == 1 {
        return Ok(times[0]);
    }
    let step = (times[n - 1] - times[0]) / (n - 1) as f64;
    let scale = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    for (k, &t) in times.iter().enumerate() {
        if (t - (times[0] + k as f64 * step)).abs() > 1e-9 * scale || step == 0.0 {
            return Err(QpeError::ScheduleMismatch(format!(
                "time {k} = {t} breaks the arithmetic progression"
            )));
        }
    }
    Ok(step)
}

/// Multi-level QCELS with the default level count.
pub fn estimate_qcels(data: &HtSample) -> Result<Estimate> {
    estimate_qcels_levels(data, qcels_default_levels(data.len()))
}

/// QCELS fit `z_hat(t) ~ r e^{i theta t}` on an arithmetic schedule.
///
/// For fixed `theta` the optimal `r` is `G(theta)` and the residual is
/// `mean|z|^2 - |G(theta)|^2`, so each level maximizes `|G|` over a prefix of
/// the times: level 1 scans the principal alias band `|x| < pi/dt` with step
/// `pi/(2 T_1)`, later levels rescan `+-2pi/T_j` around the previous estimate
/// with `T_j` doubling up to `T`.
pub fn estimate_qcels_levels(data: &HtSample, levels: usize) -> Result<Estimate> {
    check_data(data)?;
    if levels == 0 {
        return Err(QpeError::InvalidArgument("QCELS needs at least one level".into()));
    }
    let times = data.times();
    let dt = arithmetic_step(&times)?.abs();
    let n = times.len();
    let mut theta = 0.0;
    let mut iterations = 0;
    let mut step = 0.0;
    for j in 1..=levels {
        let count = n.div_ceil(1 << (levels - j)).max(1);
        let f = Filtered {
            t: &times[..count],
            z: &data.z_hat[..count],
        };
        let t_j = times[..count].iter().fold(0.0f64, |m, t| m.max(t.abs()));
        step = PI / (2.0 * t_j);
        let start;
        let cells;
        if j == 1 {
            let band = if dt > 1.0 { PI / dt } else { PI };
            let (s, c) = even_grid(step.min(2.0 * band / 8.0));
            step = s * (band / PI);
            cells = c;
            start = -band + step;
        } else {
            let half = 2.0 * PI / t_j;
            cells = (2.0 * half / step).round() as usize + 1;
            start = theta - half;
        }
        let x0 = f.scan_argmax(start, step, cells);
        let (x, it) = f.refine(x0, step, 1e-3 / t_j, true);
        theta = x;
        iterations += it;
    }
    let f = Filtered {
        t: &times,
        z: &data.z_hat,
    };
    let r = f.value(theta);
    let residual = times
        .iter()
        .zip(&data.z_hat)
        .map(|(&t, &z)| (z - r * Complex64::from_polar(1.0, theta * t)).norm_sqr())
        .sum::<f64>()
        / n as f64;
    Ok(Estimate {
        theta_hat: wrap_phase(theta),
        phases: None,
        amplitudes: Some(vec![r.norm()]),
        diagnostics: Diagnostics {
            grid_step: step,
            iterations,
            residual,
            levels,
        },
    })
}

/// Solves a small dense complex system by Gaussian elimination with partial
/// pivoting. `a` is row-major `n x n`.
fn solve_complex(mut a: Vec<Complex64>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].norm().total_cmp(&a[j * n + col].norm()))?;
        if a[piv * n + col].norm() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for i in col + 1..n {
            let f = a[i * n + col] / a[col * n + col];
            for k in col..n {
                let v = a[col * n + k];
                a[i * n + k] -= f * v;
            }
            let v = b[col];
            b[i] -= f * v;
        }
    }
    let mut x = vec![Complex64::ZERO; n];
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= a[i * n + k] * x[k];
        }
        x[i] = v / a[i * n + i];
    }
    Some(x)
}

/// Least-squares amplitudes of atoms `e^{i f_m t}` fitted to `z`.
fn refit_amplitudes(times: &[f64], z: &[Complex64], freqs: &[f64]) -> Option<Vec<Complex64>> {
    let k = freqs.len();
    let mut gram = vec![Complex64::ZERO; k * k];
    let mut rhs = vec![Complex64::ZERO; k];
    for (&t, &zt) in times.iter().zip(z) {
        let atoms: Vec<Complex64> = freqs.iter().map(|&f| Complex64::from_polar(1.0, f * t)).collect();
        for m in 0..k {
            rhs[m] += atoms[m].conj() * zt;
            for q in 0..k {
                gram[m * k + q] += atoms[m].conj() * atoms[q];
            }
        }
    }
    solve_complex(gram, rhs)
}

fn subtract_atoms(times: &[f64], z: &[Complex64], freqs: &[f64], amps: &[Complex64], skip: Option<usize>) -> Vec<Complex64> {
    times
        .iter()
        .zip(z)
        .map(|(&t, &zt)| {
            let model: Complex64 = freqs
                .iter()
                .zip(amps)
                .enumerate()
                .filter(|(m, _)| Some(*m) != skip)
                .map(|(_, (&f, &a))| a * Complex64::from_polar(1.0, f * t))
                .sum();
            zt - model
        })
        .collect()
}

/// CSQPE: orthogonal matching pursuit over atoms `e^{i x t_k}`.
///
/// Each of `sparsity` rounds picks the grid frequency (step `pi/(2T)`) best
/// correlated with the residual, refits all amplitudes by least squares and
/// then re-optimizes every selected frequency against the data with the
/// other atoms removed, alternating until the frequencies settle. The phase
/// with the largest fitted amplitude is returned.
pub fn estimate_csqpe(data: &HtSample, sparsity: usize) -> Result<Estimate> {
    check_data(data)?;
    if sparsity < 1 {
        return Err(QpeError::InvalidArgument("sparsity K must be >= 1".into()));
    }
    let times = data.times();
    let z = &data.z_hat;
    let max_time = times.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if max_time == 0.0 {
        return Err(QpeError::InvalidArgument("all evolution times are zero".into()));
    }
    let (step, count) = even_grid(PI / (2.0 * max_time));
    let tol = 1e-3 / max_time;
    let mut freqs: Vec<f64> = Vec::new();
    let mut amps: Vec<Complex64> = Vec::new();
    let mut residual = z.clone();
    let mut iterations = 0;

    for _ in 0..sparsity {
        let f = Filtered {
            t: &times,
            z: &residual,
        };
        let x0 = f.scan_argmax(-PI + step, step, count);
        if f.power(x0) < 1e-28 {
            break;
        }
        let (x, it) = f.refine(x0, step, tol, true);
        iterations += it;
        if freqs.iter().any(|&g| wrap_phase(x - g).abs() < 1e-9) {
            break;
        }
        freqs.push(x);
        amps = match refit_amplitudes(&times, z, &freqs) {
            Some(a) => a,
            None => {
                freqs.pop();
                break;
            }
        };
        for _ in 0..20 {
            let mut moved = 0.0f64;
            for m in 0..freqs.len() {
                let partial = subtract_atoms(&times, z, &freqs, &amps, Some(m));
                let fm = Filtered {
                    t: &times,
                    z: &partial,
                };
                let (x, it) = fm.refine(freqs[m], 0.5 * step, tol, true);
                iterations += it;
                moved = moved.max((x - freqs[m]).abs());
                freqs[m] = x;
                if let Some(a) = refit_amplitudes(&times, z, &freqs) {
                    amps = a;
                }
            }
            if moved < 1e-13 {
                break;
            }
        }
        residual = subtract_atoms(&times, z, &freqs, &amps, None);
    }
    if freqs.is_empty() {
        return Err(QpeError::EmptyData);
    }
    let best = (0..freqs.len())
        .max_by(|&a, &b| amps[a].norm().total_cmp(&amps[b].norm()))
        .unwrap_or(0);
    let res = residual.iter().map(|r| r.norm_sqr()).sum::<f64>() / times.len() as f64;
    Ok(Estimate {
        theta_hat: wrap_phase(freqs[best]),
        phases: Some(freqs.iter().map(|&f| wrap_phase(f)).collect()),
        amplitudes: Some(amps.iter().map(|a| a.norm()).collect()),
        diagnostics: Diagnostics {
            grid_step: step,
            iterations,
            residual: res,
            levels: freqs.len(),
        },
    })
}

/// Most peaks the curve fit will model.
pub const MAX_PEAKS: usize = 10;

/// Peaks of an outcome histogram: local maxima above
/// `max(3/N_s, 0.01 max p)`, at least two bins apart, strongest first.
/// A candidate is also dropped when it sits below the sidelobe envelope
/// `sum_a h_a / (4 d_a^2)` of the stronger peaks already kept, which removes
/// the kernel's own sidelobes. `n_shots = None` marks an exact histogram.
pub fn detect_peaks(p_hat: &[f64], n_shots: Option<f64>) -> Vec<usize> {
    let m = p_hat.len();
    let max = p_hat.iter().cloned().fold(0.0, f64::max);
    let floor = n_shots.map_or(0.0, |n| 3.0 / n);
    let threshold = floor.max(0.01 * max);
    let mut cand: Vec<usize> = (0..m)
        .filter(|&y| {
            let v = p_hat[y];
            v > threshold && v >= p_hat[(y + m - 1) % m] && v >= p_hat[(y + 1) % m]
        })
        .collect();
    cand.sort_by(|&a, &b| p_hat[b].total_cmp(&p_hat[a]).then(a.cmp(&b)));
    let dist = |a: usize, b: usize| {
        let d = a.abs_diff(b);
        d.min(m - d)
    };
    let mut kept: Vec<usize> = Vec::new();
    for y in cand {
        if kept.len() == MAX_PEAKS {
            break;
        }
        if kept.iter().any(|&k| dist(k, y) < 2) {
            continue;
        }
        let envelope: f64 = kept
            .iter()
            .map(|&k| p_hat[k] / (4.0 * (dist(k, y) as f64).powi(2)))
            .sum();
        if p_hat[y] <= envelope {
            continue;
        }
        kept.push(y);
    }
    kept
}

/// Sum of squared residuals and, optionally, the Gauss-Newton system.
fn kernel_fit_system(
    m: u64,
    p_hat: &[f64],
    theta: &[f64],
    amp: &[f64],
    jtj: Option<(&mut [f64], &mut [f64])>,
) -> f64 {
    let k = theta.len();
    let mf = m as f64;
    let m2 = mf * mf;
    let dim = 2 * k;
    let mut cost = 0.0;
    let mut row = vec![0.0; dim];
    let want = jtj.is_some();
    let (mut jtj_buf, mut jtr_buf) = (vec![0.0; dim * dim], vec![0.0; dim]);
    for (y, &p) in p_hat.iter().enumerate() {
        let mut f = 0.0;
        for q in 0..k {
            let (d, dd) = dirichlet_with_derivative(m, grid_offset(m, theta[q], y as u64));
            let kern = d * d / m2;
            f += amp[q] * kern;
            if want {
                row[q] = amp[q] * 2.0 * d * dd / m2;
                row[k + q] = kern;
            }
        }
        let r = f - p;
        cost += r * r;
        if want {
            for a in 0..dim {
                if row[a] == 0.0 {
                    continue;
                }
                jtr_buf[a] += row[a] * r;
                for b in a..dim {
                    jtj_buf[a * dim + b] += row[a] * row[b];
                }
            }
        }
    }
    if let Some((jtj, jtr)) = jtj {
        for a in 0..dim {
            for b in a..dim {
                jtj[a * dim + b] = jtj_buf[a * dim + b];
                jtj[b * dim + a] = jtj_buf[a * dim + b];
            }
            jtr[a] = jtr_buf[a];
        }
    }
    cost
}

fn solve_real(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            b.swap(piv, col);
        }
        for i in col + 1..n {
            let f = a[i * n + col] / a[col * n + col];
            for k in col..n {
                a[i * n + k] -= f * a[col * n + k];
            }
            b[i] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in i + 1..n {
            v -= a[i * n + k] * x[k];
        }
        x[i] = v / a[i * n + i];
    }
    Some(x)
}

/// Levenberg-Marquardt (damped Gauss-Newton) on the kernel superposition.
fn fit_kernels(m: u64, p_hat: &[f64], theta: &mut [f64], amp: &mut [f64]) -> (f64, usize) {
    let k = theta.len();
    let dim = 2 * k;
    let mut lambda = 1e-3;
    let mut jtj = vec![0.0; dim * dim];
    let mut jtr = vec![0.0; dim];
    let mut cost = kernel_fit_system(m, p_hat, theta, amp, Some((&mut jtj, &mut jtr)));
    let mut iters = 0;
    for _ in 0..200 {
        iters += 1;
        let mut a = jtj.clone();
        for i in 0..dim {
            a[i * dim + i] += lambda * jtj[i * dim + i].max(1e-300);
        }
        let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
        let Some(delta) = solve_real(a, rhs) else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
            continue;
        };
        let new_theta: Vec<f64> = theta.iter().zip(&delta[..k]).map(|(t, d)| t + d).collect();
        let new_amp: Vec<f64> = amp.iter().zip(&delta[k..]).map(|(a, d)| a + d).collect();
        let new_cost = kernel_fit_system(m, p_hat, &new_theta, &new_amp, None);
        if new_cost <= cost {
            theta.copy_from_slice(&new_theta);
            amp.copy_from_slice(&new_amp);
            let improvement = cost - new_cost;
            cost = kernel_fit_system(m, p_hat, theta, amp, Some((&mut jtj, &mut jtr)));
            lambda = (lambda * 0.1).max(1e-12);
            let small_step = delta[..k].iter().all(|d| d.abs() < 1e-14);
            if small_step || improvement <= 1e-30 + 1e-15 * cost {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
    }
    (cost, iters)
}

/// Curve-fitted QFT-QPE on a sampled record.
pub fn estimate_curvefit_qft(sample: &QftSample) -> Result<Estimate> {
    if sample.outcomes.is_empty() {
        return Err(QpeError::EmptyData);
    }
    let ns = sample.outcomes.len() as f64;
    let p_hat: Vec<f64> = sample.histogram().iter().map(|&c| c as f64 / ns).collect();
    estimate_curvefit_histogram(&p_hat, sample.n, Some(ns))
}

/// Curve fit of `f(y) = sum_m A_m D^2(theta_m - 2 pi y / M) / M^2` to an
/// empirical (or exact, `n_shots = None`) histogram. Each detected peak seeds
/// one kernel; the fit is started with every seed at its bin centre and
/// shifted by `-1/2` and `+1/2` bin, keeping the lowest residual. Returns the
/// phase of the largest fitted amplitude.
pub fn estimate_curvefit_histogram(p_hat: &[f64], n: u32, n_shots: Option<f64>) -> Result<Estimate> {
    let m = grid_size(n)?;
    if p_hat.len() as u64 != m {
        return Err(QpeError::InvalidArgument(format!(
            "histogram has {} bins, expected {m}",
            p_hat.len()
        )));
    }
    let peaks = detect_peaks(p_hat, n_shots);
    if peaks.is_empty() {
        return Err(QpeError::NoPeaksDetected);
    }
    let bin = 2.0 * PI / m as f64;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    for shift in [0.0, -0.5, 0.5] {
        let mut theta: Vec<f64> = peaks.iter().map(|&y| (y as f64 + shift) * bin).collect();
        let mut amp: Vec<f64> = peaks.iter().map(|&y| p_hat[y]).collect();
        let (cost, it) = fit_kernels(m, p_hat, &mut theta, &mut amp);
        iterations += it;
        if best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, theta, amp));
        }
    }
    let (cost, theta, amp) = best.expect("at least one start");
    let top = (0..amp.len())
        .max_by(|&a, &b| amp[a].total_cmp(&amp[b]))
        .unwrap_or(0);
    Ok(Estimate {
        theta_hat: wrap_phase(theta[top]),
        phases: Some(theta.iter().map(|&t| wrap_phase(t)).collect()),
        amplitudes: Some(amp),
        diagnostics: Diagnostics {
            grid_step: bin,
            iterations,
            residual: cost / m as f64,
            levels: peaks.len(),
        },
    })
}

/// `theta_hat - theta` unwrapped to the nearest `2 pi` image.
pub fn phase_error(theta_hat: f64, theta: f64) -> f64 {
    wrap_phase(theta_hat - theta)
}

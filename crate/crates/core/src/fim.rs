//! Fisher information of the phase-estimation outcome distributions.
//!
//! Parameters are ordered `(theta_0..theta_{L-1}, c_0..c_{L-1})` in the
//! spectrum's storage order, with every overlap treated as a free parameter.
//!
//! For the continuous QMEGS schedule the information about `sum_l c_l`
//! diverges (the real-part circuit is deterministic at `t = 0` and at every
//! alignment point `|C(t)| = 1`). Such matrices are returned *sum-pinned*:
//! the overlap blocks are projected onto the complement of the all-ones
//! direction, which is the finite part of the matrix, and the bound routines
//! invert on that subspace. This is the limit of the free-overlap bound as
//! the information along `sum_l c_l` goes to infinity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dirichlet::{dirichlet_with_derivative, grid_offset};
use crate::error::{QpeError, Result};
use crate::schedules::{self, TruncatedNormal};
use crate::spectrum::Spectrum;

/// `|1 - C(t)^2|` (or `|1 - S(t)^2|`) below this uses the singular-point limit.
pub const SINGULAR_TOL: f64 = 1e-12;

/// Largest supported ancilla count.
pub const MAX_ANCILLAS: u32 = 26;

const QUAD_NODES: usize = 8;
const QUAD_REL_TOL: f64 = 1e-6;
const QUAD_MAX_DOUBLINGS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProtocolKind {
    #[serde(rename = "qft")]
    QftQpe,
    #[serde(rename = "qmegs")]
    Qmegs,
    #[serde(rename = "csqpe")]
    Csqpe,
    #[serde(rename = "qcels")]
    Qcels,
    #[serde(rename = "rpe")]
    Rpe,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::QftQpe,
        ProtocolKind::Qmegs,
        ProtocolKind::Csqpe,
        ProtocolKind::Qcels,
        ProtocolKind::Rpe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::QftQpe => "qft",
            ProtocolKind::Qmegs => "qmegs",
            ProtocolKind::Csqpe => "csqpe",
            ProtocolKind::Qcels => "qcels",
            ProtocolKind::Rpe => "rpe",
        }
    }

    pub fn is_hadamard_test(self) -> bool {
        !matches!(self, ProtocolKind::QftQpe)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProtocolKind {
    type Err = QpeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qft" | "qft-qpe" | "qftqpe" => Ok(ProtocolKind::QftQpe),
            "qmegs" => Ok(ProtocolKind::Qmegs),
            "csqpe" => Ok(ProtocolKind::Csqpe),
            "qcels" | "ml-qcels" => Ok(ProtocolKind::Qcels),
            "rpe" => Ok(ProtocolKind::Rpe),
            other => Err(QpeError::InvalidArgument(format!("unknown protocol '{other}'"))),
        }
    }
}

/// `2L x 2L` Fisher information in `(theta, c)` block form.
///
/// Blocks are row-major `L x L`; the `c-theta` block is the transpose of
/// `theta_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFim {
    pub modes: usize,
    /// Mode label of each storage position.
    pub labels: Vec<usize>,
    pub theta_theta: Vec<f64>,
    pub theta_c: Vec<f64>,
    pub cc: Vec<f64>,
    /// Overlap blocks are projected off the all-ones direction; see module docs.
    pub sum_pinned: bool,
}

impl BlockFim {
    pub fn zeros(labels: Vec<usize>) -> Self {
        let l = labels.len();
        Self {
            modes: l,
            labels,
            theta_theta: vec![0.0; l * l],
            theta_c: vec![0.0; l * l],
            cc: vec![0.0; l * l],
            sum_pinned: false,
        }
    }

    /// Builds from a full symmetric `2L x 2L` row-major matrix.
    pub fn from_full(labels: Vec<usize>, full: &[f64]) -> Result<Self> {
        let l = labels.len();
        let n = 2 * l;
        if full.len() != n * n {
            return Err(QpeError::InvalidArgument(format!(
                "expected {} entries, got {}",
                n * n,
                full.len()
            )));
        }
        let mut fim = Self::zeros(labels);
        for i in 0..l {
            for j in 0..l {
                fim.theta_theta[i * l + j] = full[i * n + j];
                fim.theta_c[i * l + j] = full[i * n + l + j];
                fim.cc[i * l + j] = full[(l + i) * n + l + j];
            }
        }
        Ok(fim)
    }

    #[inline]
    pub fn tt(&self, i: usize, j: usize) -> f64 {
        self.theta_theta[i * self.modes + j]
    }

    #[inline]
    pub fn tc(&self, i: usize, j: usize) -> f64 {
        self.theta_c[i * self.modes + j]
    }

    #[inline]
    pub fn c_c(&self, i: usize, j: usize) -> f64 {
        self.cc[i * self.modes + j]
    }

    pub fn dim(&self) -> usize {
        2 * self.modes
    }

    /// Storage position of `label`.
    pub fn position(&self, label: usize) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| QpeError::InvalidArgument(format!("no mode with label {label}")))
    }

    /// `(I)^{theta theta}_{i,i}` for the mode with `label`.
    pub fn theta_diag(&self, label: usize) -> Result<f64> {
        let p = self.position(label)?;
        Ok(self.tt(p, p))
    }

    /// Full row-major `2L x 2L` matrix.
    pub fn full(&self) -> Vec<f64> {
        let l = self.modes;
        let n = 2 * l;
        let mut m = vec![0.0; n * n];
        for i in 0..l {
            for j in 0..l {
                m[i * n + j] = self.tt(i, j);
                m[i * n + l + j] = self.tc(i, j);
                m[(l + j) * n + i] = self.tc(i, j);
                m[(l + i) * n + l + j] = self.c_c(i, j);
            }
        }
        m
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self
            .theta_theta
            .iter_mut()
            .chain(self.theta_c.iter_mut())
            .chain(self.cc.iter_mut())
        {
            *v *= factor;
        }
    }

    /// Projects the overlap blocks off the all-ones direction and marks the
    /// matrix as sum-pinned. Idempotent.
    pub fn pin_sum(&mut self) {
        if self.sum_pinned {
            return;
        }
        let l = self.modes;
        for i in 0..l {
            let row = &mut self.theta_c[i * l..(i + 1) * l];
            let mean = row.iter().sum::<f64>() / l as f64;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        let row_means: Vec<f64> = (0..l)
            .map(|i| self.cc[i * l..(i + 1) * l].iter().sum::<f64>() / l as f64)
            .collect();
        let total_mean = row_means.iter().sum::<f64>() / l as f64;
        for i in 0..l {
            for j in 0..l {
                // cc is symmetric, so column means equal row means
                self.cc[i * l + j] += total_mean - row_means[i] - row_means[j];
            }
        }
        self.sum_pinned = true;
    }

    /// Entrywise sum; a pinned operand pins the result.
    pub fn add(&self, other: &BlockFim) -> Result<BlockFim> {
        if self.labels != other.labels {
            return Err(QpeError::InvalidArgument(
                "cannot add FIMs over different modes".into(),
            ));
        }
        let mut a = self.clone();
        let mut b = other.clone();
        if a.sum_pinned || b.sum_pinned {
            a.pin_sum();
            b.pin_sum();
        }
        for (x, y) in a.theta_theta.iter_mut().zip(&b.theta_theta) {
            *x += y;
        }
        for (x, y) in a.theta_c.iter_mut().zip(&b.theta_c) {
            *x += y;
        }
        for (x, y) in a.cc.iter_mut().zip(&b.cc) {
            *x += y;
        }
        Ok(a)
    }

    pub fn is_finite(&self) -> bool {
        self.theta_theta
            .iter()
            .chain(&self.theta_c)
            .chain(&self.cc)
            .all(|v| v.is_finite())
    }

    fn add_rank_one(&mut self, weight: f64, g_theta: &[f64], g_c: &[f64]) {
        let l = self.modes;
        for i in 0..l {
            let wi = weight * g_theta[i];
            let wci = weight * g_c[i];
            for j in 0..l {
                self.theta_theta[i * l + j] += wi * g_theta[j];
                self.theta_c[i * l + j] += wi * g_c[j];
                self.cc[i * l + j] += wci * g_c[j];
            }
        }
    }
}

/// `M = 2^n` for `1 <= n <= 26`.
pub fn grid_size(n_ancillas: u32) -> Result<u64> {
    if n_ancillas == 0 || n_ancillas > MAX_ANCILLAS {
        return Err(QpeError::InvalidArgument(format!(
            "ancilla count must lie in 1..={MAX_ANCILLAS}, got {n_ancillas}"
        )));
    }
    Ok(1u64 << n_ancillas)
}

/// Ancilla count `n` with `T = 2^n - 1`.
pub fn ancillas_for_depth(max_time: f64) -> Result<u32> {
    let m = max_time + 1.0;
    if max_time < 1.0 || m.fract() != 0.0 || m > 2f64.powi(MAX_ANCILLAS as i32) {
        return Err(QpeError::InvalidArgument(format!(
            "QFT-QPE depth T = {max_time} is not 2^n - 1 with n <= {MAX_ANCILLAS}"
        )));
    }
    let m = m as u64;
    if !m.is_power_of_two() {
        return Err(QpeError::InvalidArgument(format!(
            "QFT-QPE depth T = {max_time} is not 2^n - 1"
        )));
    }
    Ok(m.trailing_zeros())
}

/// Per-shot Fisher information of QFT-QPE with `n` ancillas.
pub fn qft_fim(s: &Spectrum, n_ancillas: u32) -> Result<BlockFim> {
    let m = grid_size(n_ancillas)?;
    let mf = m as f64;
    let m2 = mf * mf;
    let l = s.len();
    let phases = s.phases();
    let c = s.overlaps();
    let mut fim = BlockFim::zeros(s.labels().to_vec());

    if l == 1 {
        // p(y) = D^2 / M^2 exactly, so the ratio simplifies without division.
        let (mut tt, mut tc, mut cc) = (0.0, 0.0, 0.0);
        for y in 0..m {
            let (d, dd) = dirichlet_with_derivative(m, grid_offset(m, phases[0], y));
            tt += 4.0 * c[0] * dd * dd;
            tc += 2.0 * d * dd;
            cc += d * d / c[0];
        }
        fim.theta_theta[0] = tt / m2;
        fim.theta_c[0] = tc / m2;
        fim.cc[0] = cc / m2;
        return Ok(fim);
    }

    let mut g_theta = vec![0.0; l];
    let mut g_c = vec![0.0; l];
    for y in 0..m {
        let mut den = 0.0;
        for k in 0..l {
            let (d, dd) = dirichlet_with_derivative(m, grid_offset(m, phases[k], y));
            g_theta[k] = 2.0 * c[k] * d * dd;
            g_c[k] = d * d;
            den += c[k] * d * d;
        }
        if den < 1e-300 {
            return Err(QpeError::DegenerateDistribution {
                outcome: y as usize,
                total: den / m2,
            });
        }
        fim.add_rank_one(1.0 / (m2 * den), &g_theta, &g_c);
    }
    Ok(fim)
}

/// `(I^QFT)^{theta theta}_{i,i}` for every storage position, without the
/// off-diagonal work.
pub fn qft_theta_diagonal(s: &Spectrum, n_ancillas: u32) -> Result<Vec<f64>> {
    let m = grid_size(n_ancillas)?;
    let mf = m as f64;
    let l = s.len();
    let phases = s.phases();
    let c = s.overlaps();
    let mut diag = vec![0.0; l];
    let mut num = vec![0.0; l];
    for y in 0..m {
        let mut den = 0.0;
        for k in 0..l {
            let (d, dd) = dirichlet_with_derivative(m, grid_offset(m, phases[k], y));
            num[k] = 4.0 * c[k] * c[k] * d * d * dd * dd;
            den += c[k] * d * d;
        }
        if l == 1 {
            let (_, dd) = dirichlet_with_derivative(m, grid_offset(m, phases[0], y));
            diag[0] += 4.0 * c[0] * dd * dd;
            continue;
        }
        if den < 1e-300 {
            return Err(QpeError::DegenerateDistribution {
                outcome: y as usize,
                total: den / (mf * mf),
            });
        }
        for k in 0..l {
            diag[k] += num[k] / den;
        }
    }
    diag.iter_mut().for_each(|v| *v /= mf * mf);
    Ok(diag)
}

/// `(C(t), S(t)) = (sum c_l cos(t theta_l), sum c_l sin(t theta_l))`.
pub fn ht_expectations(s: &Spectrum, t: f64) -> (f64, f64) {
    s.phases()
        .iter()
        .zip(s.overlaps())
        .fold((0.0, 0.0), |(cs, sn), (&th, &c)| {
            let (si, co) = (t * th).sin_cos();
            (cs + c * co, sn + c * si)
        })
}

/// Per-mode trigonometric values at one time plus `1 - C^2` and `1 - S^2`
/// evaluated through half-angle sums so they keep relative accuracy when
/// `|C|` or `|S|` approaches one.
struct HtPoint {
    sin: Vec<f64>,
    cos: Vec<f64>,
    den_c: f64,
    den_s: f64,
}

impl HtPoint {
    fn new(s: &Spectrum, t: f64) -> Self {
        let l = s.len();
        let mut sin = Vec::with_capacity(l);
        let mut cos = Vec::with_capacity(l);
        let (mut one_m_c, mut one_p_c, mut one_m_s, mut one_p_s) = (0.0, 0.0, 0.0, 0.0);
        let quarter = std::f64::consts::FRAC_PI_4;
        let mut csum = 0.0;
        for (&th, &c) in s.phases().iter().zip(s.overlaps()) {
            let x = t * th;
            let (si, co) = x.sin_cos();
            sin.push(si);
            cos.push(co);
            let h = 0.5 * x;
            let (sh, ch) = h.sin_cos();
            let a = (quarter - h).sin();
            let b = (quarter + h).sin();
            one_m_c += c * 2.0 * sh * sh;
            one_p_c += c * 2.0 * ch * ch;
            one_m_s += c * 2.0 * a * a;
            one_p_s += c * 2.0 * b * b;
            csum += c;
        }
        let slack = 1.0 - csum;
        Self {
            sin,
            cos,
            den_c: (one_m_c + slack) * (one_p_c - slack),
            den_s: (one_m_s + slack) * (one_p_s - slack),
        }
    }
}

/// `theta_i^2 / sum_l c_l theta_l^2`, the limit of each quotient in `F_i` at a
/// singular point. Falls back to 1 when the second moment vanishes.
fn limit_ratio(theta_i: f64, second_moment: f64) -> f64 {
    if second_moment > 0.0 {
        theta_i * theta_i / second_moment
    } else {
        1.0
    }
}

/// Adds `weight * I^HT(t)` into `acc`. A singular real or imaginary circuit
/// contributes its finite `theta-theta` limit and pins `acc`. Into a pinned
/// `acc` the overlap gradients are centered first, which applies the
/// projection one rank-one term at a time.
fn ht_accumulate(s: &Spectrum, t: f64, weight: f64, acc: &mut BlockFim) {
    let l = s.len();
    let p = HtPoint::new(s, t);
    let c = s.overlaps();
    let phases = s.phases();
    let singular = [p.den_c.abs() < SINGULAR_TOL, p.den_s.abs() < SINGULAR_TOL];
    if singular[0] || singular[1] {
        acc.pin_sum();
    }
    let mut g_theta = vec![0.0; l];
    let mut g_c = vec![0.0; l];

    for (circuit, den) in [p.den_c, p.den_s].into_iter().enumerate() {
        if singular[circuit] {
            continue;
        }
        for k in 0..l {
            if circuit == 0 {
                g_theta[k] = -c[k] * t * p.sin[k];
                g_c[k] = p.cos[k];
            } else {
                g_theta[k] = c[k] * t * p.cos[k];
                g_c[k] = p.sin[k];
            }
        }
        if acc.sum_pinned {
            let mean = g_c.iter().sum::<f64>() / l as f64;
            g_c.iter_mut().for_each(|v| *v -= mean);
        }
        acc.add_rank_one(weight / den, &g_theta, &g_c);
    }

    let count = singular.iter().filter(|&&x| x).count() as f64;
    if count > 0.0 {
        let m2 = s.second_moment();
        for i in 0..l {
            for j in 0..l {
                let lim = if m2 > 0.0 {
                    phases[i] * phases[j] / m2
                } else {
                    1.0
                };
                acc.theta_theta[i * l + j] += weight * count * c[i] * c[j] * t * t * lim;
            }
        }
    }
}

/// Fisher information of one real-part and one imaginary-part Hadamard test
/// at time `t`.
pub fn ht_fim_single(s: &Spectrum, t: f64) -> BlockFim {
    let mut fim = BlockFim::zeros(s.labels().to_vec());
    ht_accumulate(s, t, 1.0, &mut fim);
    fim
}

/// Same as [`ht_fim_single`] but projected (sum-pinned) regardless of `t`.
pub fn ht_fim_single_pinned(s: &Spectrum, t: f64) -> BlockFim {
    let mut fim = BlockFim::zeros(s.labels().to_vec());
    fim.sum_pinned = true;
    ht_accumulate(s, t, 1.0, &mut fim);
    fim
}

/// `F_i(t) = sin^2(t theta_i)/(1 - C^2) + cos^2(t theta_i)/(1 - S^2)` for
/// the mode with `label`. Returns the singular-point limit `F_i^max` where a
/// denominator vanishes.
pub fn f_i(s: &Spectrum, label: usize, t: f64) -> Result<f64> {
    let pos = s.position(label)?;
    let p = HtPoint::new(s, t);
    let m2 = s.second_moment();
    if p.den_c.abs() < SINGULAR_TOL || p.den_s.abs() < SINGULAR_TOL {
        return Ok(1.0 + limit_ratio(s.phases()[pos], m2));
    }
    Ok(p.sin[pos] * p.sin[pos] / p.den_c + p.cos[pos] * p.cos[pos] / p.den_s)
}

/// `F_i^max = 1 + theta_i^2 / sum_l c_l theta_l^2`.
pub fn f_i_max(s: &Spectrum, label: usize) -> Result<f64> {
    let m2 = s.second_moment();
    if m2 <= 0.0 {
        return Err(QpeError::ZeroSecondMoment);
    }
    let th = s.phase_of(label)?;
    Ok(1.0 + th * th / m2)
}

/// `c_i^2 t^2 F_i(t)` for every storage position.
fn ht_theta_diagonal_at(s: &Spectrum, t: f64, weight: f64, acc: &mut [f64]) {
    let p = HtPoint::new(s, t);
    let c = s.overlaps();
    let phases = s.phases();
    let m2 = s.second_moment();
    let re_sing = p.den_c.abs() < SINGULAR_TOL;
    let im_sing = p.den_s.abs() < SINGULAR_TOL;
    for k in 0..s.len() {
        let re = if re_sing {
            limit_ratio(phases[k], m2)
        } else {
            p.sin[k] * p.sin[k] / p.den_c
        };
        let im = if im_sing {
            limit_ratio(phases[k], m2)
        } else {
            p.cos[k] * p.cos[k] / p.den_s
        };
        acc[k] += weight * c[k] * c[k] * t * t * (re + im);
    }
}

fn check_counts(max_time: f64, n_times: usize, n_shots: usize) -> Result<()> {
    if !(max_time >= 1.0) || !max_time.is_finite() {
        return Err(QpeError::InvalidArgument(format!(
            "T must be finite and >= 1, got {max_time}"
        )));
    }
    if n_times == 0 || n_shots == 0 {
        return Err(QpeError::InvalidArgument("N_t and N_s must be >= 1".into()));
    }
    Ok(())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * z * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss-Legendre on `[0, T]` of `2 a(t) f(t)` where `a` is the
/// QMEGS density; panel count doubles until successive results agree.
/// `visit(t, weight)` accumulates one node, `snapshot` reads the current sum
/// and `close` decides whether two snapshots agree.
fn qmegs_quadrature<S, V, R>(
    max_time: f64,
    mut reset: R,
    mut visit: V,
    mut snapshot: S,
    close: fn(&[f64], &[f64]) -> bool,
) -> Result<()>
where
    R: FnMut(),
    V: FnMut(f64, f64),
    S: FnMut() -> Vec<f64>,
{
    let dist = TruncatedNormal::new(max_time);
    let (xs, ws) = gauss_legendre(QUAD_NODES);
    let mut panels = max_time.ceil().max(1.0) as usize;
    let mut previous: Option<Vec<f64>> = None;
    for _ in 0..=QUAD_MAX_DOUBLINGS {
        reset();
        let h = max_time / panels as f64;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for (x, w) in xs.iter().zip(&ws) {
                let t = mid + 0.5 * h * x;
                visit(t, 2.0 * dist.density(t) * 0.5 * h * w);
            }
        }
        let current = snapshot();
        if let Some(prev) = previous.as_ref() {
            if close(prev, &current) {
                return Ok(());
            }
        }
        previous = Some(current);
        panels *= 2;
    }
    Ok(())
}

/// Relative Frobenius agreement.
fn relative_close(a: &[f64], b: &[f64]) -> bool {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let norm: f64 = b.iter().map(|y| y * y).sum();
    diff.sqrt() <= QUAD_REL_TOL * norm.sqrt()
}

/// Agreement of two full square matrices after scaling both to the unit
/// diagonal of `b`, so each entry is compared on its correlation scale.
fn equilibrated_close(a: &[f64], b: &[f64]) -> bool {
    let n = (b.len() as f64).sqrt().round() as usize;
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = b[i * n + i];
            if v > 0.0 {
                1.0 / v.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    (0..n).all(|i| {
        (0..n).all(|j| ((a[i * n + j] - b[i * n + j]) * d[i] * d[j]).abs() <= QUAD_REL_TOL)
    })
}

/// Expected total Fisher information `E[N_s sum_k I(t_k)]` of a protocol.
///
/// QFT-QPE uses `T = 2^n - 1` and ignores `n_times`; RPE ignores `n_times`.
pub fn total_fim(
    s: &Spectrum,
    kind: ProtocolKind,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
) -> Result<BlockFim> {
    let ns = n_shots as f64;
    match kind {
        ProtocolKind::QftQpe => {
            if n_shots == 0 {
                return Err(QpeError::InvalidArgument("N_s must be >= 1".into()));
            }
            let n = ancillas_for_depth(max_time)?;
            let mut fim = qft_fim(s, n)?;
            fim.scale(ns);
            Ok(fim)
        }
        ProtocolKind::Rpe => {
            if n_shots == 0 {
                return Err(QpeError::InvalidArgument("N_s must be >= 1".into()));
            }
            let mut fim = BlockFim::zeros(s.labels().to_vec());
            for t in schedules::rpe_times(max_time)? {
                ht_accumulate(s, t, ns, &mut fim);
            }
            Ok(fim)
        }
        ProtocolKind::Qcels => {
            check_counts(max_time, n_times, n_shots)?;
            let mut fim = BlockFim::zeros(s.labels().to_vec());
            for t in schedules::qcels_times(max_time, n_times) {
                ht_accumulate(s, t, ns, &mut fim);
            }
            Ok(fim)
        }
        ProtocolKind::Csqpe => {
            check_counts(max_time, n_times, n_shots)?;
            csqpe_check(max_time)?;
            let top = max_time as u64;
            let w = ns * n_times as f64 / max_time;
            let mut fim = BlockFim::zeros(s.labels().to_vec());
            for t in 1..=top {
                ht_accumulate(s, t as f64, w, &mut fim);
            }
            Ok(fim)
        }
        ProtocolKind::Qmegs => {
            check_counts(max_time, n_times, n_shots)?;
            let labels = s.labels().to_vec();
            let fim = std::cell::RefCell::new(BlockFim::zeros(labels.clone()));
            qmegs_quadrature(
                max_time,
                || {
                    let mut z = BlockFim::zeros(labels.clone());
                    z.sum_pinned = true;
                    *fim.borrow_mut() = z;
                },
                |t, w| ht_accumulate(s, t, w, &mut fim.borrow_mut()),
                || fim.borrow().full(),
                equilibrated_close,
            )?;
            let mut fim = fim.into_inner();
            fim.scale(ns * n_times as f64);
            Ok(fim)
        }
    }
}

fn csqpe_check(max_time: f64) -> Result<()> {
    if max_time.fract() != 0.0 {
        return Err(QpeError::InvalidArgument(format!(
            "CSQPE uses integer times; T = {max_time} is not an integer"
        )));
    }
    Ok(())
}

/// Diagonal of the `theta-theta` block of [`total_fim`], storage order.
/// Much cheaper than the full matrix.
pub fn total_theta_diagonal(
    s: &Spectrum,
    kind: ProtocolKind,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
) -> Result<Vec<f64>> {
    let ns = n_shots as f64;
    let l = s.len();
    let mut diag = vec![0.0; l];
    match kind {
        ProtocolKind::QftQpe => {
            if n_shots == 0 {
                return Err(QpeError::InvalidArgument("N_s must be >= 1".into()));
            }
            let n = ancillas_for_depth(max_time)?;
            diag = qft_theta_diagonal(s, n)?;
            diag.iter_mut().for_each(|v| *v *= ns);
        }
        ProtocolKind::Rpe => {
            if n_shots == 0 {
                return Err(QpeError::InvalidArgument("N_s must be >= 1".into()));
            }
            for t in schedules::rpe_times(max_time)? {
                ht_theta_diagonal_at(s, t, ns, &mut diag);
            }
        }
        ProtocolKind::Qcels => {
            check_counts(max_time, n_times, n_shots)?;
            for t in schedules::qcels_times(max_time, n_times) {
                ht_theta_diagonal_at(s, t, ns, &mut diag);
            }
        }
        ProtocolKind::Csqpe => {
            check_counts(max_time, n_times, n_shots)?;
            csqpe_check(max_time)?;
            let w = ns * n_times as f64 / max_time;
            for t in 1..=(max_time as u64) {
                ht_theta_diagonal_at(s, t as f64, w, &mut diag);
            }
        }
        ProtocolKind::Qmegs => {
            check_counts(max_time, n_times, n_shots)?;
            let acc = std::cell::RefCell::new(vec![0.0; l]);
            qmegs_quadrature(
                max_time,
                || acc.borrow_mut().iter_mut().for_each(|v| *v = 0.0),
                |t, w| ht_theta_diagonal_at(s, t, w, &mut acc.borrow_mut()),
                || acc.borrow().clone(),
                relative_close,
            )?;
            diag = acc.into_inner();
            diag.iter_mut().for_each(|v| *v *= ns * n_times as f64);
        }
    }
    Ok(diag)
}

/// Number of circuits per shot count `N_t` actually used by a protocol.
pub fn effective_n_times(kind: ProtocolKind, max_time: f64, n_times: usize) -> Result<usize> {
    match kind {
        ProtocolKind::QftQpe => Ok(1),
        ProtocolKind::Rpe => schedules::rpe_levels(max_time),
        _ => Ok(n_times),
    }
}

/// Information acquisition efficiency `g_i = (I_total)_{i,i} / (N T^2)`.
pub fn g_i(
    s: &Spectrum,
    kind: ProtocolKind,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
    label: usize,
) -> Result<f64> {
    let diag = total_theta_diagonal(s, kind, max_time, n_times, n_shots)?;
    let pos = s.position(label)?;
    let n = (n_shots * effective_n_times(kind, max_time, n_times)?) as f64;
    Ok(diag[pos] / (n * max_time * max_time))
}

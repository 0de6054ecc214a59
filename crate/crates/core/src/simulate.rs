//! Measurement records drawn from the exact outcome distributions.

use std::io::{BufRead, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::dirichlet::{dirichlet, grid_offset};
use crate::error::{QpeError, Result};
use crate::fim::{grid_size, ht_expectations};
use crate::rng;
use crate::schedules::Schedule;
use crate::spectrum::Spectrum;

/// Tabulated sampling below this ancilla count, per-mode lobe walks above.
pub const TABULATION_LIMIT: u32 = 20;

const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QftSample {
    pub outcomes: Vec<u64>,
    pub n: u32,
    pub seed: u64,
}

impl QftSample {
    pub fn grid(&self) -> u64 {
        1u64 << self.n
    }

    /// Counts per outcome, length `2^n`.
    pub fn histogram(&self) -> Vec<u64> {
        let mut h = vec![0u64; self.grid() as usize];
        for &y in &self.outcomes {
            h[y as usize] += 1;
        }
        h
    }
}

/// Shot counts of one evolution time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HtRecord {
    pub t: f64,
    pub n_re0: u64,
    pub n_re1: u64,
    pub n_im0: u64,
    pub n_im1: u64,
}

impl HtRecord {
    pub fn z_hat(&self) -> Complex64 {
        let re_n = (self.n_re0 + self.n_re1) as f64;
        let im_n = (self.n_im0 + self.n_im1) as f64;
        Complex64::new(
            (self.n_re0 as f64 - self.n_re1 as f64) / re_n,
            (self.n_im0 as f64 - self.n_im1 as f64) / im_n,
        )
    }
}

/// Hadamard-test data: one record and one `z_hat` per time. Exact-expectation
/// samples have `n_shots == 0` and zero counts.
#[derive(Debug, Clone, PartialEq)]
pub struct HtSample {
    pub records: Vec<HtRecord>,
    pub z_hat: Vec<Complex64>,
    pub n_shots: u64,
    pub seed: u64,
}

impl HtSample {
    pub fn times(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.t).collect()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.n_shots == 0
    }

    /// Builds from counts, recomputing `z_hat`.
    pub fn from_records(records: Vec<HtRecord>, seed: u64) -> Result<Self> {
        let n_shots = records.first().map_or(0, |r| r.n_re0 + r.n_re1);
        for r in &records {
            if r.n_re0 + r.n_re1 != n_shots || r.n_im0 + r.n_im1 != n_shots || n_shots == 0 {
                return Err(QpeError::InvalidArgument(format!(
                    "record at t = {} has inconsistent shot counts",
                    r.t
                )));
            }
        }
        let z_hat = records.iter().map(HtRecord::z_hat).collect();
        Ok(Self {
            records,
            z_hat,
            n_shots,
            seed,
        })
    }
}

/// Outcome distribution `p(y) = sum_l c_l D_M^2(theta_l - 2 pi y / M) / M^2`.
pub fn qft_probabilities(s: &Spectrum, n: u32) -> Result<Vec<f64>> {
    let m = grid_size(n)?;
    let m2 = (m as f64) * (m as f64);
    let p: Vec<f64> = (0..m)
        .map(|y| {
            s.phases()
                .iter()
                .zip(s.overlaps())
                .map(|(&th, &c)| {
                    let d = dirichlet(m, grid_offset(m, th, y));
                    c * d * d
                })
                .sum::<f64>()
                / m2
        })
        .collect();
    let sum: f64 = p.iter().sum();
    let target: f64 = s.overlaps().iter().sum();
    if (sum - target).abs() >= NORMALIZATION_TOL || (target - 1.0).abs() >= NORMALIZATION_TOL {
        return Err(QpeError::NormalizationFailure { sum });
    }
    Ok(p)
}

fn sample_index<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|&v| v <= u).min(cdf.len() - 1)
}

/// One draw from the single-mode kernel `D_M^2(theta - 2 pi y / M) / M^2`,
/// walking bins outward from the lobe centre.
fn sample_single_mode<R: Rng + ?Sized>(m: u64, theta: f64, rng: &mut R) -> u64 {
    let mf = m as f64;
    let center = (theta * mf / (2.0 * std::f64::consts::PI)).round() as i64;
    let prob = |k: i64| {
        let y = (center + k).rem_euclid(m as i64) as u64;
        let d = dirichlet(m, grid_offset(m, theta, y));
        (d * d / (mf * mf), y)
    };
    let mut u: f64 = rng.random();
    let (p0, y0) = prob(0);
    u -= p0;
    if u < 0.0 {
        return y0;
    }
    let mut last = y0;
    let half = (m / 2) as i64;
    for k in 1..=half {
        for kk in [k, -k] {
            if kk == -half && m.is_multiple_of(2) {
                continue;
            }
            let (p, y) = prob(kk);
            last = y;
            u -= p;
            if u < 0.0 {
                return y;
            }
        }
    }
    last
}

/// `N_s` QFT-QPE outcomes with `n` ancillas.
pub fn sample_qft(s: &Spectrum, n: u32, n_shots: usize, seed: u64) -> Result<QftSample> {
    let m = grid_size(n)?;
    let mut rng = rng::stream(seed);
    let outcomes = if n < TABULATION_LIMIT {
        let p = qft_probabilities(s, n)?;
        let mut acc = 0.0;
        let cdf: Vec<f64> = p
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        (0..n_shots)
            .map(|_| sample_index(&cdf, &mut rng) as u64)
            .collect()
    } else {
        let mut acc = 0.0;
        let mode_cdf: Vec<f64> = s
            .overlaps()
            .iter()
            .map(|c| {
                acc += c;
                acc
            })
            .collect();
        (0..n_shots)
            .map(|_| {
                let l = sample_index(&mode_cdf, &mut rng);
                sample_single_mode(m, s.phases()[l], &mut rng)
            })
            .collect()
    };
    Ok(QftSample { outcomes, n, seed })
}

/// Real- and imaginary-part Hadamard tests, `N_s` shots each, at every time of
/// the schedule.
pub fn sample_ht(s: &Spectrum, schedule: &Schedule, n_shots: u64, seed: u64) -> Result<HtSample> {
    if n_shots == 0 {
        return Err(QpeError::InvalidArgument("N_s must be >= 1".into()));
    }
    let mut rng = rng::stream(seed);
    let mut records = Vec::with_capacity(schedule.times.len());
    for &t in &schedule.times {
        let (c, sn) = ht_expectations(s, t);
        let p_re = (0.5 * (1.0 + c)).clamp(0.0, 1.0);
        let p_im = (0.5 * (1.0 + sn)).clamp(0.0, 1.0);
        let n_re0 = Binomial::new(n_shots, p_re)
            .map_err(|e| QpeError::InvalidArgument(e.to_string()))?
            .sample(&mut rng);
        let n_im0 = Binomial::new(n_shots, p_im)
            .map_err(|e| QpeError::InvalidArgument(e.to_string()))?
            .sample(&mut rng);
        records.push(HtRecord {
            t,
            n_re0,
            n_re1: n_shots - n_re0,
            n_im0,
            n_im1: n_shots - n_im0,
        });
    }
    HtSample::from_records(records, seed)
}

/// Infinite-shot limit: `z_hat(t) = C(t) + i S(t)` exactly.
pub fn sample_ht_exact(s: &Spectrum, times: &[f64]) -> HtSample {
    let records = times
        .iter()
        .map(|&t| HtRecord {
            t,
            n_re0: 0,
            n_re1: 0,
            n_im0: 0,
            n_im1: 0,
        })
        .collect();
    let z_hat = times
        .iter()
        .map(|&t| {
            let (c, sn) = ht_expectations(s, t);
            Complex64::new(c, sn)
        })
        .collect();
    HtSample {
        records,
        z_hat,
        n_shots: 0,
        seed: 0,
    }
}

/// Writes `trial,y` rows.
pub fn write_qft_csv<W: Write>(w: &mut W, header: &str, trials: &[(usize, &QftSample)]) -> Result<()> {
    writeln!(w, "{header}")?;
    writeln!(w, "trial,n,y")?;
    for (trial, s) in trials {
        for y in &s.outcomes {
            writeln!(w, "{trial},{},{y}", s.n)?;
        }
    }
    Ok(())
}

/// Writes `trial,t,n_re0,n_re1,n_im0,n_im1` rows.
pub fn write_ht_csv<W: Write>(w: &mut W, header: &str, trials: &[(usize, &HtSample)]) -> Result<()> {
    writeln!(w, "{header}")?;
    writeln!(w, "trial,t,n_re0,n_re1,n_im0,n_im1")?;
    for (trial, s) in trials {
        for r in &s.records {
            writeln!(
                w,
                "{trial},{},{},{},{},{}",
                r.t, r.n_re0, r.n_re1, r.n_im0, r.n_im1
            )?;
        }
    }
    Ok(())
}

fn data_rows<R: BufRead>(r: R, expected: &str) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    let mut seen_header = false;
    for line in r.lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !seen_header {
            if line != expected {
                return Err(QpeError::Config(format!(
                    "expected header '{expected}', found '{line}'"
                )));
            }
            seen_header = true;
            continue;
        }
        rows.push(line.split(',').map(|f| f.trim().to_string()).collect());
    }
    Ok(rows)
}

fn field<T: std::str::FromStr>(row: &[String], i: usize) -> Result<T> {
    row.get(i)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| QpeError::Config(format!("bad field {i} in row {}", row.join(","))))
}

/// Reads the output of [`write_qft_csv`], grouped by trial in file order.
pub fn read_qft_csv<R: BufRead>(r: R) -> Result<Vec<(usize, QftSample)>> {
    let mut out: Vec<(usize, QftSample)> = Vec::new();
    for row in data_rows(r, "trial,n,y")? {
        let trial: usize = field(&row, 0)?;
        let n: u32 = field(&row, 1)?;
        let y: u64 = field(&row, 2)?;
        if y >= grid_size(n)? {
            return Err(QpeError::Config(format!("outcome {y} out of range for n = {n}")));
        }
        match out.last_mut() {
            Some((t, s)) if *t == trial && s.n == n => s.outcomes.push(y),
            _ => out.push((
                trial,
                QftSample {
                    outcomes: vec![y],
                    n,
                    seed: 0,
                },
            )),
        }
    }
    Ok(out)
}

/// Reads the output of [`write_ht_csv`], grouped by trial in file order.
pub fn read_ht_csv<R: BufRead>(r: R) -> Result<Vec<(usize, HtSample)>> {
    let mut grouped: Vec<(usize, Vec<HtRecord>)> = Vec::new();
    for row in data_rows(r, "trial,t,n_re0,n_re1,n_im0,n_im1")? {
        let trial: usize = field(&row, 0)?;
        let rec = HtRecord {
            t: field(&row, 1)?,
            n_re0: field(&row, 2)?,
            n_re1: field(&row, 3)?,
            n_im0: field(&row, 4)?,
            n_im1: field(&row, 5)?,
        };
        match grouped.last_mut() {
            Some((t, recs)) if *t == trial => recs.push(rec),
            _ => grouped.push((trial, vec![rec])),
        }
    }
    grouped
        .into_iter()
        .map(|(trial, recs)| Ok((trial, HtSample::from_records(recs, 0)?)))
        .collect()
}

//! Campaign runner: bound sweeps, diagonal checks and Monte Carlo efficiency
//! ratios over a grid of spectra and protocol settings.

use std::fmt::Display;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{QpeError, Result};
use crate::estimators::{self, phase_error};
use crate::fim::{self, ProtocolKind};
use crate::rng::derive_seed;
use crate::schedules;
use crate::simulate;
use crate::spectrum::{PhaseFamily, Spectrum};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default OMP sparsity for CSQPE.
pub const DEFAULT_SPARSITY: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub family: PhaseFamily,
    pub modes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    /// Circuit depths `T`; for QFT-QPE each must be `2^n - 1`.
    pub max_times: Vec<f64>,
    #[serde(default = "one")]
    pub n_times: usize,
    pub n_shots: usize,
    /// CSQPE sparsity `K`.
    #[serde(default)]
    pub sparsity: Option<usize>,
}

fn one() -> usize {
    1
}

fn default_trials() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub spectrum: SpectrumSpec,
    pub alphas: Vec<f64>,
    pub protocols: Vec<ProtocolSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    /// Label of the target mode.
    #[serde(default)]
    pub target: usize,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| QpeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(QpeError::Config(m));
        if self.spectrum.modes == 0 {
            return bad("spectrum.modes must be >= 1".into());
        }
        if self.target >= self.spectrum.modes {
            return bad(format!("target {} is not a mode label", self.target));
        }
        if self.alphas.is_empty() {
            return bad("alphas must be nonempty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} outside (0, 1)"));
        }
        if self.protocols.is_empty() {
            return bad("protocols must be nonempty".into());
        }
        if self.trials < 2 {
            return bad(format!("trials must be >= 2, got {}", self.trials));
        }
        for p in &self.protocols {
            if p.max_times.is_empty() {
                return bad(format!("{}: max_times must be nonempty", p.kind));
            }
            if let Some(t) = p.max_times.iter().find(|t| !(**t >= 1.0 && t.is_finite())) {
                return bad(format!("{}: T = {t} must be finite and >= 1", p.kind));
            }
            if p.n_times == 0 || p.n_shots == 0 {
                return bad(format!("{}: n_times and n_shots must be >= 1", p.kind));
            }
            if p.sparsity == Some(0) {
                return bad(format!("{}: sparsity must be >= 1", p.kind));
            }
        }
        Ok(())
    }

    pub fn spectrum_for(&self, alpha: f64) -> Result<Spectrum> {
        Spectrum::geometric(self.spectrum.family, self.spectrum.modes, alpha)
    }
}

/// CSV header comment line.
pub fn header_comment(seed: u64) -> String {
    format!("# qpe-bounds v{VERSION} seed={seed}")
}

fn cell<T: Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn status_of<T>(r: &Result<T>) -> String {
    match r {
        Ok(_) => "ok".to_string(),
        Err(e) => format!("\"{}\"", e.to_string().replace('"', "'")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub family: PhaseFamily,
    pub modes: usize,
    pub alpha: f64,
    pub c0: f64,
    pub protocol: ProtocolKind,
    pub max_time: f64,
    pub n_times: usize,
    pub n_shots: usize,
    pub trials: usize,
    pub metrics: std::result::Result<BenchMetrics, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchMetrics {
    /// Mean squared error of `theta_hat_0`, radians^2.
    pub mse: f64,
    /// Standard error of `mse` over trials.
    pub mse_se: f64,
    /// `gamma / g_0`.
    pub bound: f64,
    /// `T t_total mse / bound`.
    pub ratio_r: f64,
    pub t_total: f64,
    pub g0: f64,
    pub gamma: f64,
    pub f0_max: Option<f64>,
    pub diag_ratio: f64,
}

impl BenchResult {
    pub fn is_ok(&self) -> bool {
        self.metrics.is_ok()
    }

    pub fn ratio_r(&self) -> Option<f64> {
        self.metrics.as_ref().ok().map(|m| m.ratio_r)
    }
}

/// One trial's squared error.
fn run_trial(s: &Spectrum, spec: &ProtocolSpec, max_time: f64, target: usize, seed: u64) -> Result<f64> {
    let estimate = match spec.kind {
        ProtocolKind::QftQpe => {
            let n = fim::ancillas_for_depth(max_time)?;
            let sample = simulate::sample_qft(s, n, spec.n_shots, seed)?;
            estimators::estimate_curvefit_qft(&sample)?
        }
        ProtocolKind::Rpe => {
            return Err(QpeError::Unsupported(
                "RPE post-processing is not implemented".into(),
            ))
        }
        kind => {
            let schedule = schedules::realize(kind, max_time, spec.n_times, derive_seed(seed, &[0]))?;
            let data = simulate::sample_ht(s, &schedule, spec.n_shots as u64, derive_seed(seed, &[1]))?;
            match kind {
                ProtocolKind::Qmegs => estimators::estimate_qmegs(&data, max_time, 1.0, true)?,
                ProtocolKind::Qcels => estimators::estimate_qcels(&data)?,
                _ => estimators::estimate_csqpe(&data, spec.sparsity.unwrap_or(DEFAULT_SPARSITY))?,
            }
        }
    };
    let e = phase_error(estimate.theta_hat, s.phase_of(target)?);
    Ok(e * e)
}

fn protocol_gamma(kind: ProtocolKind, max_time: f64, n_times: usize) -> Result<f64> {
    match kind {
        ProtocolKind::QftQpe => Ok(1.0),
        _ => schedules::gamma(kind, max_time, n_times),
    }
}

fn grid_point(
    s: &Spectrum,
    spec: &ProtocolSpec,
    max_time: f64,
    target: usize,
    trials: usize,
    seeds: &[u64],
) -> Result<BenchMetrics> {
    let gamma = protocol_gamma(spec.kind, max_time, spec.n_times)?;
    let total = fim::total_fim(s, spec.kind, max_time, spec.n_times, spec.n_shots)?;
    let report = bounds::report_from_fim(&total, s, spec.kind, max_time, spec.n_times, spec.n_shots, target)?;
    let bound = report
        .cost_product_bound
        .ok_or(QpeError::NoLinearCostForm("protocol"))?;
    let t_total = schedules::t_total(spec.kind, max_time, spec.n_times, spec.n_shots)?;
    let errors: Vec<f64> = seeds
        .par_iter()
        .map(|&seed| run_trial(s, spec, max_time, target, seed))
        .collect::<Result<Vec<f64>>>()?;
    let n = trials as f64;
    let mse = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mse).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BenchMetrics {
        mse,
        mse_se: (var / n).sqrt(),
        bound,
        ratio_r: max_time * t_total * mse / bound,
        t_total,
        g0: gamma / bound,
        gamma,
        f0_max: fim::f_i_max(s, target).ok(),
        diag_ratio: report.diag_ratio,
    })
}

/// Runs every (alpha, protocol, T) grid point in that order. A failing grid
/// point records its error and the sweep continues.
pub fn run_campaign(config: &CampaignConfig) -> Result<Vec<BenchResult>> {
    config.validate()?;
    let mut out = Vec::new();
    for (ai, &alpha) in config.alphas.iter().enumerate() {
        let s = config.spectrum_for(alpha)?;
        let c0 = s.overlap_of(config.target)?;
        for (pi, spec) in config.protocols.iter().enumerate() {
            for (ti, &max_time) in spec.max_times.iter().enumerate() {
                let seeds: Vec<u64> = (0..config.trials)
                    .map(|k| derive_seed(config.seed, &[ai as u64, pi as u64, ti as u64, k as u64]))
                    .collect();
                let metrics = grid_point(&s, spec, max_time, config.target, config.trials, &seeds)
                    .map_err(|e| e.to_string());
                out.push(BenchResult {
                    family: config.spectrum.family,
                    modes: config.spectrum.modes,
                    alpha,
                    c0,
                    protocol: spec.kind,
                    max_time,
                    n_times: fim::effective_n_times(spec.kind, max_time, spec.n_times).unwrap_or(spec.n_times),
                    n_shots: spec.n_shots,
                    trials: config.trials,
                    metrics,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_bench_csv<W: Write>(w: &mut W, seed: u64, rows: &[BenchResult]) -> Result<()> {
    writeln!(w, "{}", header_comment(seed))?;
    writeln!(
        w,
        "family,modes,alpha,c0,protocol,T,n_times,n_shots,trials,mse,mse_se,bound,ratio_r,t_total,g0,gamma,f0_max,diag_ratio,status"
    )?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{},",
            r.family.name(),
            r.modes,
            r.alpha,
            r.c0,
            r.protocol,
            r.max_time,
            r.n_times,
            r.n_shots,
            r.trials
        )?;
        match &r.metrics {
            Ok(m) => writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},ok",
                m.mse,
                m.mse_se,
                m.bound,
                m.ratio_r,
                m.t_total,
                m.g0,
                m.gamma,
                cell(m.f0_max),
                m.diag_ratio
            )?,
            Err(e) => writeln!(
                w,
                "NA,NA,NA,NA,NA,NA,NA,NA,NA,\"{}\"",
                e.replace('"', "'")
            )?,
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub alpha: f64,
    pub c0: f64,
    pub protocol: ProtocolKind,
    pub max_time: f64,
    pub n_times: usize,
    pub g0: Option<f64>,
    pub gamma: Option<f64>,
    pub bound: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsSweep {
    pub rows: Vec<BoundRow>,
    /// `c0` where the QFT-QPE bound meets the best Hadamard-test bound.
    pub crossover: Option<f64>,
}

fn bound_row(s: &Spectrum, alpha: f64, target: usize, spec: &ProtocolSpec, max_time: f64) -> Result<BoundRow> {
    let c0 = s.overlap_of(target)?;
    let g = fim::g_i(s, spec.kind, max_time, spec.n_times, spec.n_shots, target);
    let gamma = protocol_gamma(spec.kind, max_time, spec.n_times);
    let bound = match (&g, &gamma) {
        (Ok(g), Ok(gm)) if *g > 0.0 => Ok(gm / g),
        (Ok(_), Ok(_)) => Err(QpeError::SingularFim {
            condition: f64::INFINITY,
        }),
        (Err(e), _) | (_, Err(e)) => Err(e.clone()),
    };
    Ok(BoundRow {
        alpha,
        c0,
        protocol: spec.kind,
        max_time,
        n_times: fim::effective_n_times(spec.kind, max_time, spec.n_times).unwrap_or(spec.n_times),
        g0: g.as_ref().ok().copied(),
        gamma: gamma.as_ref().ok().copied(),
        status: status_of(&bound),
        bound: bound.ok(),
    })
}

/// Bound evaluation (no sampling) over the alpha grid, with the crossover
/// between QFT-QPE and the best Hadamard-test protocol at each protocol's
/// largest `T`.
pub fn sweep_bounds(config: &CampaignConfig) -> Result<BoundsSweep> {
    config.validate()?;
    let mut rows = Vec::new();
    for &alpha in &config.alphas {
        let s = config.spectrum_for(alpha)?;
        for spec in &config.protocols {
            for &t in &spec.max_times {
                rows.push(bound_row(&s, alpha, config.target, spec, t)?);
            }
        }
    }
    let crossover = crossover(&rows, config);
    Ok(BoundsSweep { rows, crossover })
}

fn largest_t(spec: &ProtocolSpec) -> f64 {
    spec.max_times.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

fn crossover(rows: &[BoundRow], config: &CampaignConfig) -> Option<f64> {
    let top: Vec<(ProtocolKind, f64)> = config.protocols.iter().map(|p| (p.kind, largest_t(p))).collect();
    let mut points: Vec<(f64, f64)> = config
        .alphas
        .iter()
        .filter_map(|&alpha| {
            let at = |r: &&BoundRow| r.alpha == alpha && top.contains(&(r.protocol, r.max_time));
            let qft = rows
                .iter()
                .filter(at)
                .filter(|r| r.protocol == ProtocolKind::QftQpe)
                .filter_map(|r| r.bound)
                .fold(f64::INFINITY, f64::min);
            let ht = rows
                .iter()
                .filter(at)
                .filter(|r| r.protocol.is_hadamard_test())
                .filter_map(|r| r.bound)
                .fold(f64::INFINITY, f64::min);
            let c0 = rows.iter().find(|r| r.alpha == alpha)?.c0;
            (qft.is_finite() && ht.is_finite()).then_some((c0, qft - ht))
        })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.windows(2).find_map(|w| {
        let ((c_a, d_a), (c_b, d_b)) = (w[0], w[1]);
        (d_a < 0.0 && d_b >= 0.0).then(|| c_a + (c_b - c_a) * (-d_a) / (d_b - d_a))
    })
}

pub fn write_bounds_csv<W: Write>(w: &mut W, seed: u64, sweep: &BoundsSweep) -> Result<()> {
    writeln!(w, "{}", header_comment(seed))?;
    writeln!(w, "alpha,c0,protocol,T,n_times,g0,gamma,bound,status")?;
    for r in &sweep.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.c0,
            r.protocol,
            r.max_time,
            r.n_times,
            cell(r.g0),
            cell(r.gamma),
            cell(r.bound),
            r.status
        )?;
    }
    match sweep.crossover {
        Some(c) => writeln!(w, "# crossover c0={c}")?,
        None => writeln!(w, "# crossover none")?,
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagRow {
    pub alpha: f64,
    pub c0: f64,
    pub protocol: ProtocolKind,
    pub max_time: f64,
    pub n_times: usize,
    pub diag_ratio: Option<f64>,
    pub crlb_full: Option<f64>,
    pub crlb_diag: Option<f64>,
    pub status: String,
}

/// `I_00 (I^-1)_00` at every grid point.
pub fn check_diag(config: &CampaignConfig) -> Result<Vec<DiagRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for &alpha in &config.alphas {
        let s = config.spectrum_for(alpha)?;
        let c0 = s.overlap_of(config.target)?;
        for spec in &config.protocols {
            for &t in &spec.max_times {
                let r = fim::total_fim(&s, spec.kind, t, spec.n_times, spec.n_shots)
                    .and_then(|f| bounds::report_from_fim(&f, &s, spec.kind, t, spec.n_times, spec.n_shots, config.target));
                rows.push(DiagRow {
                    alpha,
                    c0,
                    protocol: spec.kind,
                    max_time: t,
                    n_times: fim::effective_n_times(spec.kind, t, spec.n_times).unwrap_or(spec.n_times),
                    diag_ratio: r.as_ref().ok().map(|r| r.diag_ratio),
                    crlb_full: r.as_ref().ok().map(|r| r.crlb_full),
                    crlb_diag: r.as_ref().ok().map(|r| r.crlb_diag),
                    status: status_of(&r),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_diag_csv<W: Write>(w: &mut W, seed: u64, rows: &[DiagRow]) -> Result<()> {
    writeln!(w, "{}", header_comment(seed))?;
    writeln!(w, "alpha,c0,protocol,T,n_times,diag_ratio,crlb_full,crlb_diag,status")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.c0,
            r.protocol,
            r.max_time,
            r.n_times,
            cell(r.diag_ratio),
            cell(r.crlb_full),
            cell(r.crlb_diag),
            r.status
        )?;
    }
    Ok(())
}

/// Least-squares line through `(ln c0, ln g0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingFit {
    pub protocol: ProtocolKind,
    pub slope: f64,
    /// `exp(intercept)`, the prefactor of `g0 ~ k c0^slope`.
    pub prefactor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GiSweep {
    pub rows: Vec<BoundRow>,
    pub fits: Vec<ScalingFit>,
}

fn loglog_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, (my - slope * mx).exp()))
}

/// `g0` against `c0` over the alpha grid, with log-log slopes per protocol
/// at its largest `T`.
pub fn gi_sweep(config: &CampaignConfig) -> Result<GiSweep> {
    let sweep = sweep_bounds(config)?;
    let fits = config
        .protocols
        .iter()
        .filter_map(|p| {
            let t = largest_t(p);
            let pts: Vec<(f64, f64)> = sweep
                .rows
                .iter()
                .filter(|r| r.protocol == p.kind && r.max_time == t)
                .filter_map(|r| r.g0.map(|g| (r.c0, g)))
                .collect();
            loglog_fit(&pts).map(|(slope, prefactor)| ScalingFit {
                protocol: p.kind,
                slope,
                prefactor,
            })
        })
        .collect();
    Ok(GiSweep {
        rows: sweep.rows,
        fits,
    })
}

pub fn write_gi_csv<W: Write>(w: &mut W, seed: u64, sweep: &GiSweep) -> Result<()> {
    writeln!(w, "{}", header_comment(seed))?;
    writeln!(w, "alpha,c0,protocol,T,n_times,g0,g0_over_c0,g0_over_c0_sq,status")?;
    for r in &sweep.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.alpha,
            r.c0,
            r.protocol,
            r.max_time,
            r.n_times,
            cell(r.g0),
            cell(r.g0.map(|g| g / r.c0)),
            cell(r.g0.map(|g| g / (r.c0 * r.c0))),
            r.status
        )?;
    }
    for f in &sweep.fits {
        writeln!(w, "# slope {} {} prefactor {}", f.protocol, f.slope, f.prefactor)?;
    }
    Ok(())
}

/// Writes raw samples for every (alpha, protocol, T) of the config into
/// `dir`, one CSV per grid point. Returns the file paths.
pub fn write_samples(config: &CampaignConfig, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(dir)?;
    let header = header_comment(config.seed);
    let mut paths = Vec::new();
    for (ai, &alpha) in config.alphas.iter().enumerate() {
        let s = config.spectrum_for(alpha)?;
        for (pi, spec) in config.protocols.iter().enumerate() {
            for (ti, &t) in spec.max_times.iter().enumerate() {
                let path = dir.join(format!("samples_{}_a{}_T{}.csv", spec.kind, alpha, t));
                let seeds: Vec<u64> = (0..config.trials)
                    .map(|k| derive_seed(config.seed, &[ai as u64, pi as u64, ti as u64, k as u64]))
                    .collect();
                let mut buf = Vec::new();
                match spec.kind {
                    ProtocolKind::QftQpe => {
                        let n = fim::ancillas_for_depth(t)?;
                        let samples = seeds
                            .iter()
                            .map(|&seed| simulate::sample_qft(&s, n, spec.n_shots, seed))
                            .collect::<Result<Vec<_>>>()?;
                        let refs: Vec<(usize, &simulate::QftSample)> = samples.iter().enumerate().collect();
                        simulate::write_qft_csv(&mut buf, &header, &refs)?;
                    }
                    kind => {
                        let samples = seeds
                            .iter()
                            .map(|&seed| {
                                let sched = schedules::realize(kind, t, spec.n_times, derive_seed(seed, &[0]))?;
                                simulate::sample_ht(&s, &sched, spec.n_shots as u64, derive_seed(seed, &[1]))
                            })
                            .collect::<Result<Vec<_>>>()?;
                        let refs: Vec<(usize, &simulate::HtSample)> = samples.iter().enumerate().collect();
                        simulate::write_ht_csv(&mut buf, &header, &refs)?;
                    }
                }
                std::fs::write(&path, buf)?;
                paths.push(path);
            }
        }
    }
    Ok(paths)
}

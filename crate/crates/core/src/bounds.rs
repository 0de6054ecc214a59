//! Cramér-Rao bounds built from the total Fisher information.

use serde::Serialize;

use crate::error::{QpeError, Result};
use crate::fim::{self, BlockFim, ProtocolKind};
use crate::linalg::{householder_to_last, matmul, Cholesky};
use crate::schedules;
use crate::spectrum::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    /// `(I^-1)_{ii}`, radians^2.
    pub crlb_full: f64,
    /// `1 / I_{ii}`.
    pub crlb_diag: f64,
    /// `I_{ii} (I^-1)_{ii}`.
    pub diag_ratio: f64,
    /// `gamma / g_i`; `None` where the protocol has no linear cost form.
    pub cost_product_bound: Option<f64>,
    pub target_index: usize,
    pub condition: f64,
}

/// Inverse of the FIM restricted to the parameters it can resolve: the full
/// inverse, or for a sum-pinned matrix the inverse on the complement of the
/// all-ones overlap direction. Returns the row-major `2L x 2L` result and the
/// condition estimate.
pub fn fim_inverse(fim: &BlockFim) -> Result<(Vec<f64>, f64)> {
    let n = fim.dim();
    let full = fim.full();
    if !fim.sum_pinned {
        let chol = Cholesky::new(&full, n)?;
        return Ok((chol.inverse(), chol.condition));
    }
    let l = fim.modes;
    let mut u = vec![0.0; n];
    u[l..].iter_mut().for_each(|v| *v = 1.0);
    let h = householder_to_last(&u);
    let rotated = matmul(&matmul(&h, &full, n), &h, n);
    let k = n - 1;
    let mut block = vec![0.0; k * k];
    for i in 0..k {
        block[i * k..(i + 1) * k].copy_from_slice(&rotated[i * n..i * n + k]);
    }
    let chol = Cholesky::new(&block, k)?;
    let inner = chol.inverse();
    let mut padded = vec![0.0; n * n];
    for i in 0..k {
        padded[i * n..i * n + k].copy_from_slice(&inner[i * k..(i + 1) * k]);
    }
    Ok((matmul(&matmul(&h, &padded, n), &h, n), chol.condition))
}

/// `(I^-1)_{ii}` for the mode with `label`.
pub fn crlb_full(fim: &BlockFim, label: usize) -> Result<f64> {
    let pos = fim.position(label)?;
    if !fim.sum_pinned {
        let n = fim.dim();
        let chol = Cholesky::new(&fim.full(), n)?;
        let mut e = vec![0.0; n];
        e[pos] = 1.0;
        return Ok(chol.solve(&e)[pos]);
    }
    let (inv, _) = fim_inverse(fim)?;
    Ok(inv[pos * fim.dim() + pos])
}

/// `1 / I_{ii}`.
pub fn crlb_diag(fim: &BlockFim, label: usize) -> Result<f64> {
    let d = fim.theta_diag(label)?;
    if !(d > 0.0) {
        return Err(QpeError::SingularFim {
            condition: f64::INFINITY,
        });
    }
    Ok(1.0 / d)
}

/// `I_{ii} (I^-1)_{ii}`, at least 1 for any positive-definite matrix.
pub fn diag_ratio(fim: &BlockFim, label: usize) -> Result<f64> {
    Ok(fim.theta_diag(label)? * crlb_full(fim, label)?)
}

fn protocol_gamma(kind: ProtocolKind, max_time: f64, n_times: usize) -> Result<f64> {
    match kind {
        ProtocolKind::QftQpe => Ok(1.0),
        _ => schedules::gamma(kind, max_time, n_times),
    }
}

/// Lower bound `gamma / g_i` on `T t_total MSE_i`. QFT-QPE uses `gamma = 1`.
pub fn cost_product_bound(
    s: &Spectrum,
    kind: ProtocolKind,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
    label: usize,
) -> Result<f64> {
    let gamma = protocol_gamma(kind, max_time, n_times)?;
    let g = fim::g_i(s, kind, max_time, n_times, n_shots, label)?;
    if !(g > 0.0) {
        return Err(QpeError::SingularFim {
            condition: f64::INFINITY,
        });
    }
    Ok(gamma / g)
}

/// `T t_total / (I_total)_{ii}`, the same quantity as [`cost_product_bound`]
/// computed from the cost model rather than from `g_i`.
pub fn cost_product_direct(
    s: &Spectrum,
    kind: ProtocolKind,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
    label: usize,
) -> Result<f64> {
    protocol_gamma(kind, max_time, n_times)?;
    let diag = fim::total_theta_diagonal(s, kind, max_time, n_times, n_shots)?;
    let total = schedules::t_total(kind, max_time, n_times, n_shots)?;
    Ok(max_time * total / diag[s.position(label)?])
}

/// RPE bracket `N_s c_i^2 (4T^2 - 1)/3 <= (I_total)_{ii} <= F_i^max` times that.
pub fn rpe_fim_bounds(s: &Spectrum, max_time: f64, n_shots: usize, label: usize) -> Result<(f64, f64)> {
    schedules::rpe_levels(max_time)?;
    let c = s.overlap_of(label)?;
    let lower = n_shots as f64 * c * c * (4.0 * max_time * max_time - 1.0) / 3.0;
    if lower == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((lower, lower * fim::f_i_max(s, label)?))
}

/// Every bound for one protocol configuration.
pub fn bound_report(
    s: &Spectrum,
    kind: ProtocolKind,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
    label: usize,
) -> Result<BoundReport> {
    let total = fim::total_fim(s, kind, max_time, n_times, n_shots)?;
    report_from_fim(&total, s, kind, max_time, n_times, n_shots, label)
}

/// As [`bound_report`] with a precomputed total FIM.
pub fn report_from_fim(
    total: &BlockFim,
    s: &Spectrum,
    kind: ProtocolKind,
    max_time: f64,
    n_times: usize,
    n_shots: usize,
    label: usize,
) -> Result<BoundReport> {
    let (inv, condition) = fim_inverse(total)?;
    let pos = total.position(label)?;
    let crlb_full = inv[pos * total.dim() + pos];
    let crlb_diag = crlb_diag(total, label)?;
    let cost_product_bound = match protocol_gamma(kind, max_time, n_times) {
        Ok(gamma) => {
            let n = (n_shots * fim::effective_n_times(kind, max_time, n_times)?) as f64;
            let g = total.tt(pos, pos) / (n * max_time * max_time);
            Some(gamma / g)
        }
        Err(QpeError::NoLinearCostForm(_)) => None,
        Err(e) => return Err(e),
    };
    let _ = s;
    Ok(BoundReport {
        crlb_full,
        crlb_diag,
        diag_ratio: crlb_full / crlb_diag,
        cost_product_bound,
        target_index: label,
        condition,
    })
}

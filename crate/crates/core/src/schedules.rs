//! Evolution-time schedules for the Hadamard-test protocols and their
//! moment constants.
//!
//! With `N = N_s N_t`, every linear-cost schedule satisfies
//! `t_total = gamma N T` and `E[sum_k t_k^2] = chi N_t T^2`.

use std::f64::consts::{E, PI};

use rand::Rng;
use statrs::function::erf::{erf, erf_inv};

use crate::error::{QpeError, Result};
use crate::fim::ProtocolKind;
use crate::rng;

/// `erf(1/sqrt 2)`, the mass of a standard normal inside one sigma.
pub fn truncation_mass() -> f64 {
    erf(std::f64::consts::FRAC_1_SQRT_2)
}

/// Normal distribution with standard deviation `T` truncated to `[-T, T]`.
#[derive(Debug, Clone, Copy)]
pub struct TruncatedNormal {
    max_time: f64,
    mass: f64,
}

impl TruncatedNormal {
    pub fn new(max_time: f64) -> Self {
        Self {
            max_time,
            mass: truncation_mass(),
        }
    }

    /// Density at `t`.
    pub fn density(&self, t: f64) -> f64 {
        if t.abs() > self.max_time {
            return 0.0;
        }
        let x = t / self.max_time;
        (-0.5 * x * x).exp() / (self.mass * (2.0 * PI).sqrt() * self.max_time)
    }

    /// Inverse-CDF draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let x = std::f64::consts::SQRT_2 * erf_inv(self.mass * (2.0 * u - 1.0));
        (self.max_time * x).clamp(-self.max_time, self.max_time)
    }
}

/// A realized sequence of evolution times.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub kind: ProtocolKind,
    pub max_time: f64,
    pub n_times: usize,
    pub times: Vec<f64>,
    pub seed: u64,
}

fn check_positive(max_time: f64, n_times: usize) -> Result<()> {
    if !(max_time >= 1.0) || !max_time.is_finite() {
        return Err(QpeError::InvalidArgument(format!(
            "T must be finite and >= 1, got {max_time}"
        )));
    }
    if n_times == 0 {
        return Err(QpeError::InvalidArgument("N_t must be >= 1".into()));
    }
    Ok(())
}

/// Number of RPE levels `m` with `T = 2^(m-1)`.
pub fn rpe_levels(max_time: f64) -> Result<usize> {
    if max_time < 1.0 || max_time.fract() != 0.0 || max_time > 2f64.powi(62) {
        return Err(QpeError::RpeRequiresPowerOfTwo(max_time));
    }
    let t = max_time as u64;
    if !t.is_power_of_two() {
        return Err(QpeError::RpeRequiresPowerOfTwo(max_time));
    }
    Ok(t.trailing_zeros() as usize + 1)
}

/// RPE times `1, 2, 4, ..., T`.
pub fn rpe_times(max_time: f64) -> Result<Vec<f64>> {
    let m = rpe_levels(max_time)?;
    Ok((0..m).map(|k| 2f64.powi(k as i32)).collect())
}

/// QCELS times `k T / N_t`, `k = 1..N_t`.
pub fn qcels_times(max_time: f64, n_times: usize) -> Vec<f64> {
    let step = max_time / n_times as f64;
    (1..=n_times).map(|k| k as f64 * step).collect()
}

/// Draws (or lays out) the time sequence of one protocol run.
///
/// `n_times` is ignored for RPE. Deterministic kinds ignore the seed.
pub fn realize(kind: ProtocolKind, max_time: f64, n_times: usize, seed: u64) -> Result<Schedule> {
    let times = match kind {
        ProtocolKind::QftQpe => {
            return Err(QpeError::Unsupported(
                "QFT-QPE runs a single circuit and has no time schedule".into(),
            ))
        }
        ProtocolKind::Rpe => rpe_times(max_time)?,
        ProtocolKind::Qcels => {
            check_positive(max_time, n_times)?;
            qcels_times(max_time, n_times)
        }
        ProtocolKind::Qmegs => {
            check_positive(max_time, n_times)?;
            let dist = TruncatedNormal::new(max_time);
            let mut rng = rng::stream(seed);
            (0..n_times).map(|_| dist.sample(&mut rng)).collect()
        }
        ProtocolKind::Csqpe => {
            check_positive(max_time, n_times)?;
            if max_time.fract() != 0.0 {
                return Err(QpeError::InvalidArgument(format!(
                    "CSQPE draws integer times; T = {max_time} is not an integer"
                )));
            }
            let top = max_time as u64;
            let mut rng = rng::stream(seed);
            (0..n_times)
                .map(|_| rng.random_range(1..=top) as f64)
                .collect()
        }
    };
    Ok(Schedule {
        kind,
        max_time,
        n_times: times.len(),
        times,
        seed,
    })
}

/// Cost constant `gamma` in `t_total = gamma N T`.
pub fn gamma(kind: ProtocolKind, max_time: f64, n_times: usize) -> Result<f64> {
    match kind {
        ProtocolKind::Qmegs => {
            let c = truncation_mass();
            Ok(2.0 * (2.0 / PI).sqrt() / c * (1.0 - 1.0 / E.sqrt()))
        }
        ProtocolKind::Csqpe => Ok((max_time + 1.0) / max_time),
        ProtocolKind::Qcels => {
            let n = n_times as f64;
            Ok((n + 1.0) / n)
        }
        ProtocolKind::Rpe => Err(QpeError::NoLinearCostForm("RPE")),
        ProtocolKind::QftQpe => Err(QpeError::NoLinearCostForm("QFT-QPE")),
    }
}

/// Second-moment constant `chi = E[sum_k t_k^2] / (N_t T^2)`.
pub fn chi(kind: ProtocolKind, max_time: f64, n_times: usize) -> Result<f64> {
    match kind {
        ProtocolKind::Qmegs => {
            let c = truncation_mass();
            Ok(1.0 - (2.0 / (PI * E)).sqrt() / c)
        }
        ProtocolKind::Csqpe => {
            let t = max_time;
            Ok((t + 1.0) * (2.0 * t + 1.0) / (6.0 * t * t))
        }
        ProtocolKind::Qcels => {
            let n = n_times as f64;
            Ok((n + 1.0) * (2.0 * n + 1.0) / (6.0 * n * n))
        }
        ProtocolKind::Rpe => {
            let m = rpe_levels(max_time)?;
            let sum: f64 = (0..m).map(|k| 4f64.powi(k as i32)).sum();
            Ok(sum / (m as f64 * max_time * max_time))
        }
        ProtocolKind::QftQpe => Err(QpeError::Unsupported(
            "chi is defined for Hadamard-test schedules only".into(),
        )),
    }
}

/// Total number of controlled-U applications over the whole protocol.
pub fn t_total(kind: ProtocolKind, max_time: f64, n_times: usize, n_shots: usize) -> Result<f64> {
    let ns = n_shots as f64;
    match kind {
        ProtocolKind::QftQpe => Ok(ns * max_time),
        ProtocolKind::Rpe => {
            rpe_levels(max_time)?;
            Ok(2.0 * ns * (2.0 * max_time - 1.0))
        }
        _ => Ok(gamma(kind, max_time, n_times)? * ns * n_times as f64 * max_time),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn deterministic_examples() {
        let q = realize(ProtocolKind::Qcels, 4.0, 4, 0).unwrap();
        assert_eq!(q.times, vec![1.0, 2.0, 3.0, 4.0]);
        let r = realize(ProtocolKind::Rpe, 8.0, 0, 0).unwrap();
        assert_eq!(r.times, vec![1.0, 2.0, 4.0, 8.0]);
        assert_eq!(r.n_times, 4);
        assert_eq!(
            realize(ProtocolKind::Rpe, 12.0, 0, 0),
            Err(QpeError::RpeRequiresPowerOfTwo(12.0))
        );
        let a = realize(ProtocolKind::Qcels, 10.0, 7, 1).unwrap();
        let b = realize(ProtocolKind::Qcels, 10.0, 7, 99).unwrap();
        assert_eq!(a.times, b.times);
    }

    #[test]
    fn constants() {
        assert!((gamma(ProtocolKind::Qmegs, 1.0, 1).unwrap() - 0.92).abs() < 0.005);
        assert!((chi(ProtocolKind::Qmegs, 1.0, 1).unwrap() - 0.29).abs() < 0.005);
        assert_relative_eq!(gamma(ProtocolKind::Csqpe, 1e12, 1).unwrap(), 1.0, max_relative = 1e-11);
        assert_eq!(gamma(ProtocolKind::Qcels, 10.0, 4).unwrap(), 1.25);
        assert_eq!(chi(ProtocolKind::Csqpe, 2.0, 1).unwrap(), 0.625);
        assert_relative_eq!(chi(ProtocolKind::Qcels, 1.0, 10_000_000).unwrap(), 1.0 / 3.0, max_relative = 1e-6);
        assert!(matches!(gamma(ProtocolKind::Rpe, 8.0, 1), Err(QpeError::NoLinearCostForm(_))));
        assert!(matches!(gamma(ProtocolKind::QftQpe, 7.0, 1), Err(QpeError::NoLinearCostForm(_))));
        assert_relative_eq!(chi(ProtocolKind::Rpe, 8.0, 0).unwrap(), 85.0 / (4.0 * 64.0));
    }

    #[test]
    fn total_cost_examples() {
        assert_eq!(t_total(ProtocolKind::Qcels, 4.0, 4, 1).unwrap(), 20.0);
        assert_eq!(t_total(ProtocolKind::QftQpe, 1023.0, 1, 50).unwrap(), 51150.0);
        assert_eq!(t_total(ProtocolKind::Rpe, 8.0, 0, 3).unwrap(), 90.0);
    }

    #[test]
    fn deterministic_totals_match_time_sums() {
        for (t, n) in [(4.0, 4usize), (100.0, 7), (1000.0, 500)] {
            let s = realize(ProtocolKind::Qcels, t, n, 0).unwrap();
            let direct = 2.0 * 3.0 * s.times.iter().sum::<f64>();
            assert_relative_eq!(t_total(ProtocolKind::Qcels, t, n, 3).unwrap(), direct, max_relative = 1e-12);
        }
        for t in [1.0, 8.0, 64.0] {
            let s = realize(ProtocolKind::Rpe, t, 0, 0).unwrap();
            let direct = 2.0 * 5.0 * s.times.iter().sum::<f64>();
            assert_eq!(t_total(ProtocolKind::Rpe, t, 0, 5).unwrap(), direct);
        }
    }

    #[test]
    fn stochastic_schedules_are_bounded_and_seeded() {
        let a = realize(ProtocolKind::Qmegs, 50.0, 2000, 3).unwrap();
        let b = realize(ProtocolKind::Qmegs, 50.0, 2000, 3).unwrap();
        let c = realize(ProtocolKind::Qmegs, 50.0, 2000, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.times, c.times);
        assert!(a.times.iter().all(|t| t.abs() <= 50.0));
        let cs = realize(ProtocolKind::Csqpe, 9.0, 2000, 5).unwrap();
        assert!(cs.times.iter().all(|&t| t.fract() == 0.0 && (1.0..=9.0).contains(&t)));
        assert!(realize(ProtocolKind::Csqpe, 9.5, 3, 5).is_err());
        assert!(realize(ProtocolKind::Qmegs, 0.5, 3, 5).is_err());
        assert!(realize(ProtocolKind::Qmegs, 5.0, 0, 5).is_err());
    }

    #[test]
    fn moment_bounds() {
        for kind in [ProtocolKind::Qmegs, ProtocolKind::Csqpe, ProtocolKind::Qcels] {
            for (t, n) in [(1.0, 1usize), (3.0, 2), (100.0, 50)] {
                assert!(chi(kind, t, n).unwrap() <= 1.0);
                assert!(gamma(kind, t, n).unwrap() <= 2.0);
            }
        }
    }

    #[test]
    fn truncated_normal_density_integrates_to_one() {
        let d = TruncatedNormal::new(3.0);
        let n = 20_000;
        let h = 6.0 / n as f64;
        let total: f64 = (0..n).map(|k| d.density(-3.0 + (k as f64 + 0.5) * h) * h).sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-7);
        assert_eq!(d.density(3.5), 0.0);
    }
}

//! Signal model: eigenphases paired with overlaps.
//!
//! A [`Spectrum`] stores its modes sorted by phase. Each mode keeps the label
//! it was generated with, so "mode 0" always means the first generated mode
//! (the largest-overlap one for geometric overlaps) regardless of where it
//! lands after sorting.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QpeError, Result};

/// Tolerance on `sum(overlaps) == 1`.
pub const OVERLAP_SUM_TOL: f64 = 1e-12;

/// Phase families used in the benchmark campaigns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseFamily {
    Uniform,
    HeadDense,
    TailDense,
}

impl PhaseFamily {
    pub fn phases(self, modes: usize) -> Result<Vec<f64>> {
        match self {
            PhaseFamily::Uniform => uniform_phases(modes),
            PhaseFamily::HeadDense => head_dense_phases(modes),
            PhaseFamily::TailDense => tail_dense_phases(modes),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhaseFamily::Uniform => "uniform",
            PhaseFamily::HeadDense => "head_dense",
            PhaseFamily::TailDense => "tail_dense",
        }
    }
}

/// `theta_i = -1 + (2i + 1) / L`.
pub fn uniform_phases(modes: usize) -> Result<Vec<f64>> {
    if modes == 0 {
        return Err(QpeError::InvalidArgument("mode count must be >= 1".into()));
    }
    let l = modes as f64;
    Ok((0..modes)
        .map(|i| -1.0 + (2 * i + 1) as f64 / l)
        .collect())
}

/// `theta_i = -1 + 2 (i / (L-1))^2`, dense near -1.
pub fn head_dense_phases(modes: usize) -> Result<Vec<f64>> {
    if modes < 2 {
        return Err(QpeError::InvalidArgument(
            "head-dense phases need at least 2 modes".into(),
        ));
    }
    let d = (modes - 1) as f64;
    Ok((0..modes)
        .map(|i| {
            let x = i as f64 / d;
            -1.0 + 2.0 * x * x
        })
        .collect())
}

/// `theta_i = -1 + 2 ((L-1-i) / (L-1))^2`, descending in `i`.
pub fn tail_dense_phases(modes: usize) -> Result<Vec<f64>> {
    if modes < 2 {
        return Err(QpeError::InvalidArgument(
            "tail-dense phases need at least 2 modes".into(),
        ));
    }
    let d = (modes - 1) as f64;
    Ok((0..modes)
        .map(|i| {
            let x = (modes - 1 - i) as f64 / d;
            -1.0 + 2.0 * x * x
        })
        .collect())
}

/// Truncated geometric overlaps `c_l = (1 - a) a^l / (1 - a^L)`.
pub fn geometric_overlaps(modes: usize, alpha: f64) -> Result<Vec<f64>> {
    if modes == 0 {
        return Err(QpeError::InvalidArgument("mode count must be >= 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(QpeError::InvalidArgument(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let norm = 1.0 - alpha.powi(modes as i32);
    Ok((0..modes)
        .map(|l| (1.0 - alpha) * alpha.powi(l as i32) / norm)
        .collect())
}

/// Eigenphases (radians) and overlaps of the input state, sorted by phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    phases: Vec<f64>,
    overlaps: Vec<f64>,
    labels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct SpectrumRecord {
    phases: Vec<f64>,
    overlaps: Vec<f64>,
}

impl Spectrum {
    /// Builds a spectrum; mode `k` of the arguments gets label `k`.
    pub fn new(phases: Vec<f64>, overlaps: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(QpeError::InvalidSpectrum("no modes".into()));
        }
        if phases.len() != overlaps.len() {
            return Err(QpeError::InvalidSpectrum(format!(
                "{} phases but {} overlaps",
                phases.len(),
                overlaps.len()
            )));
        }
        for &p in &phases {
            if !p.is_finite() || p <= -PI || p > PI {
                return Err(QpeError::InvalidSpectrum(format!(
                    "phase {p} outside (-pi, pi]"
                )));
            }
        }
        for &c in &overlaps {
            if !c.is_finite() || c < 0.0 {
                return Err(QpeError::InvalidSpectrum(format!(
                    "overlap {c} is negative or not finite"
                )));
            }
        }
        let sum: f64 = overlaps.iter().sum();
        if (sum - 1.0).abs() > OVERLAP_SUM_TOL {
            return Err(QpeError::InvalidSpectrum(format!(
                "overlaps sum to {sum}, expected 1"
            )));
        }

        let mut order: Vec<usize> = (0..phases.len()).collect();
        order.sort_by(|&a, &b| phases[a].total_cmp(&phases[b]));
        let spectrum = Spectrum {
            phases: order.iter().map(|&k| phases[k]).collect(),
            overlaps: order.iter().map(|&k| overlaps[k]).collect(),
            labels: order,
        };
        if spectrum.spectral_gap() <= 0.0 {
            return Err(QpeError::InvalidSpectrum(
                "degenerate phases (zero spectral gap)".into(),
            ));
        }
        Ok(spectrum)
    }

    /// One of the benchmark phase families paired with geometric overlaps.
    pub fn geometric(family: PhaseFamily, modes: usize, alpha: f64) -> Result<Self> {
        let phases = family.phases(modes)?;
        let overlaps = geometric_overlaps(modes, alpha)?;
        Self::new(phases, overlaps)
    }

    /// Single eigenstate input.
    pub fn eigenstate(phase: f64) -> Result<Self> {
        Self::new(vec![phase], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Phases in storage (ascending) order.
    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// Overlaps in storage order.
    pub fn overlaps(&self) -> &[f64] {
        &self.overlaps
    }

    /// Generation labels in storage order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Storage position of the mode carrying `label`.
    pub fn position(&self, label: usize) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| QpeError::InvalidArgument(format!("no mode with label {label}")))
    }

    pub fn phase_of(&self, label: usize) -> Result<f64> {
        Ok(self.phases[self.position(label)?])
    }

    pub fn overlap_of(&self, label: usize) -> Result<f64> {
        Ok(self.overlaps[self.position(label)?])
    }

    /// Minimum distance between two phases; `+inf` for a single mode.
    pub fn spectral_gap(&self) -> f64 {
        spectral_gap(&self.phases)
    }

    /// `sum_l c_l theta_l^2`.
    pub fn second_moment(&self) -> f64 {
        self.phases
            .iter()
            .zip(&self.overlaps)
            .map(|(t, c)| c * t * t)
            .sum()
    }

    /// Same spectrum with every phase shifted by `delta` (wrapped into (-pi, pi]).
    pub fn shifted(&self, delta: f64) -> Result<Self> {
        let mut phases = vec![0.0; self.len()];
        let mut overlaps = vec![0.0; self.len()];
        for (k, &label) in self.labels.iter().enumerate() {
            phases[label] = wrap_phase(self.phases[k] + delta);
            overlaps[label] = self.overlaps[k];
        }
        Self::new(phases, overlaps)
    }

    /// Phases and overlaps in label order, as originally supplied.
    pub fn by_label(&self) -> (Vec<f64>, Vec<f64>) {
        let mut phases = vec![0.0; self.len()];
        let mut overlaps = vec![0.0; self.len()];
        for (k, &label) in self.labels.iter().enumerate() {
            phases[label] = self.phases[k];
            overlaps[label] = self.overlaps[k];
        }
        (phases, overlaps)
    }

    /// `{ "phases": [...], "overlaps": [...] }` in label order.
    pub fn to_json(&self) -> String {
        let (phases, overlaps) = self.by_label();
        serde_json::to_string(&SpectrumRecord { phases, overlaps })
            .expect("spectrum record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: SpectrumRecord = serde_json::from_str(text)
            .map_err(|e| QpeError::InvalidSpectrum(format!("bad spectrum JSON: {e}")))?;
        Self::new(rec.phases, rec.overlaps)
    }
}

/// Minimum pairwise distance; `+inf` when fewer than two phases are given.
pub fn spectral_gap(phases: &[f64]) -> f64 {
    let mut sorted = phases.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(x: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = x.rem_euclid(two_pi);
    if r > PI {
        r -= two_pi;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_examples() {
        assert_abs_diff_eq!(uniform_phases(20).unwrap()[0], -0.95, epsilon = 1e-15);
        assert_eq!(uniform_phases(1).unwrap(), vec![0.0]);
        let p = uniform_phases(4).unwrap();
        for (a, b) in p.iter().zip([-0.75, -0.25, 0.25, 0.75]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(uniform_phases(0).is_err());
    }

    #[test]
    fn dense_examples() {
        assert_eq!(head_dense_phases(3).unwrap(), vec![-1.0, -0.5, 1.0]);
        assert_eq!(tail_dense_phases(3).unwrap(), vec![1.0, -0.5, -1.0]);
        assert_eq!(head_dense_phases(20).unwrap()[19], 1.0);
        assert!(head_dense_phases(1).is_err());
        assert!(tail_dense_phases(1).is_err());
    }

    #[test]
    fn geometric_examples() {
        let c = geometric_overlaps(2, 0.5).unwrap();
        assert_abs_diff_eq!(c[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c[1], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(geometric_overlaps(1, 0.3).unwrap(), vec![1.0]);
        let c = geometric_overlaps(20, 0.1).unwrap();
        assert_abs_diff_eq!(c[0], 0.9 / (1.0 - 1e-20), epsilon = 1e-15);
        assert!(geometric_overlaps(3, 0.0).is_err());
        assert!(geometric_overlaps(3, 1.0).is_err());
        assert!(geometric_overlaps(3, -0.2).is_err());
    }

    #[test]
    fn gap_examples() {
        let s = Spectrum::geometric(PhaseFamily::Uniform, 20, 0.4).unwrap();
        assert_abs_diff_eq!(s.spectral_gap(), 0.1, epsilon = 1e-12);
        assert_eq!(Spectrum::eigenstate(0.3).unwrap().spectral_gap(), f64::INFINITY);
        assert_abs_diff_eq!(spectral_gap(&head_dense_phases(3).unwrap()), 0.5);
    }

    #[test]
    fn tail_dense_keeps_labels() {
        let s = Spectrum::geometric(PhaseFamily::TailDense, 5, 0.5).unwrap();
        assert!(s.phases().windows(2).all(|w| w[0] < w[1]));
        // label 0 was generated at +1 with the largest overlap
        assert_eq!(s.phase_of(0).unwrap(), 1.0);
        assert_eq!(s.position(0).unwrap(), 4);
        let c = geometric_overlaps(5, 0.5).unwrap();
        assert_eq!(s.overlap_of(0).unwrap(), c[0]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Spectrum::new(vec![], vec![]).is_err());
        assert!(Spectrum::new(vec![0.1, 0.2], vec![1.0]).is_err());
        assert!(Spectrum::new(vec![0.1, 0.1], vec![0.5, 0.5]).is_err());
        assert!(Spectrum::new(vec![0.1, 0.2], vec![0.5, 0.6]).is_err());
        assert!(Spectrum::new(vec![0.1, 0.2], vec![1.5, -0.5]).is_err());
        assert!(Spectrum::new(vec![-PI, 0.2], vec![0.5, 0.5]).is_err());
        assert!(Spectrum::new(vec![PI, 0.2], vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn json_round_trip() {
        let s = Spectrum::geometric(PhaseFamily::TailDense, 6, 0.3).unwrap();
        let back = Spectrum::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert!(Spectrum::from_json("{\"phases\": [0.1]}").is_err());
    }

    proptest! {
        #[test]
        fn overlaps_normalized_and_decreasing(modes in 1usize..60, alpha in 0.001f64..0.999) {
            let c = geometric_overlaps(modes, alpha).unwrap();
            let sum: f64 = c.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(c.iter().all(|&x| x >= 0.0));
            prop_assert!(c.windows(2).all(|w| w[0] > w[1]));
        }

        #[test]
        fn families_stay_in_unit_interval(modes in 2usize..200) {
            for fam in [PhaseFamily::Uniform, PhaseFamily::HeadDense, PhaseFamily::TailDense] {
                let p = fam.phases(modes).unwrap();
                prop_assert!(p.iter().all(|&x| (-1.0..=1.0).contains(&x)));
            }
        }

        #[test]
        fn gap_is_permutation_invariant(mut phases in proptest::collection::vec(-3.0f64..3.0, 2..12), seed in any::<u64>()) {
            let g = spectral_gap(&phases);
            let n = phases.len();
            let mut s = seed;
            for k in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (s >> 33) as usize % (k + 1);
                phases.swap(k, j);
            }
            prop_assert_eq!(g, spectral_gap(&phases));
        }
    }
}

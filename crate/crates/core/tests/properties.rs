mod common;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;

use qpe_bounds::bounds;
use qpe_bounds::dirichlet::{dirichlet, squared_derivative_sum, squared_kernel_sum};
use qpe_bounds::estimators::{self, phase_error};
use qpe_bounds::fim::{self, BlockFim};
use qpe_bounds::schedules;
use qpe_bounds::simulate;
use qpe_bounds::spectrum::{spectral_gap, PhaseFamily};
use qpe_bounds::{ProtocolKind, Spectrum};

fn family() -> impl Strategy<Value = PhaseFamily> {
    prop_oneof![
        Just(PhaseFamily::Uniform),
        Just(PhaseFamily::HeadDense),
        Just(PhaseFamily::TailDense)
    ]
}

fn ht_kind() -> impl Strategy<Value = ProtocolKind> {
    prop_oneof![
        Just(ProtocolKind::Qmegs),
        Just(ProtocolKind::Qcels),
        Just(ProtocolKind::Csqpe)
    ]
}

/// Spectrum with up to `max_modes` modes and gaps of at least 0.05.
fn spectrum(max_modes: usize) -> impl Strategy<Value = Spectrum> {
    (1..=max_modes, any::<u64>()).prop_map(|(l, seed)| {
        let (p, c) = common::random_spectrum(&mut common::rng(seed), l, 0.05);
        Spectrum::new(p, c).unwrap()
    })
}

fn min_eigenvalue(m: &[f64], n: usize) -> (f64, f64) {
    let eig = DMatrix::from_row_slice(n, n, m).symmetric_eigen().eigenvalues;
    (eig.min(), eig.max())
}

fn assert_psd(f: &BlockFim) {
    let n = f.dim();
    let full = f.full();
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (full[i * n + j], full[j * n + i]);
            assert!((a - b).abs() <= 1e-12 * (full[i * n + i] * full[j * n + j]).sqrt().max(1e-300));
        }
    }
    let (lo, hi) = min_eigenvalue(&full, n);
    assert!(lo >= -1e-9 * hi.max(1.0), "min eigenvalue {lo}, max {hi}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn geometric_overlaps_are_normalized_and_decreasing(f in family(), l in 2usize..60, alpha in 0.01f64..0.99) {
        let s = Spectrum::geometric(f, l, alpha).unwrap();
        let (phases, c) = s.by_label();
        prop_assert!((c.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(c.iter().all(|&x| x >= 0.0));
        prop_assert!(c.windows(2).all(|w| w[1] < w[0]));
        prop_assert!(phases.iter().all(|p| (-1.0..=1.0).contains(p)));
    }

    #[test]
    fn gap_is_permutation_invariant(s in spectrum(6), seed in any::<u64>()) {
        let mut p = s.phases().to_vec();
        let mut r = common::rng(seed);
        use rand::seq::SliceRandom;
        p.shuffle(&mut r);
        prop_assert_eq!(spectral_gap(&p), s.spectral_gap());
    }

    #[test]
    fn dirichlet_even_and_bounded(k in 0u32..11, x in -20.0f64..20.0) {
        let m = 1u64 << k;
        let d = dirichlet(m, x);
        prop_assert_eq!(d, dirichlet(m, -x));
        prop_assert!(d.abs() <= m as f64 * (1.0 + 1e-12));
        let s = (x / 2.0).sin();
        if s.abs() > 1e-3 {
            prop_assert!(d * d <= (1.0 + 1e-9) / (s * s));
        }
    }

    #[test]
    fn dirichlet_sum_identities(k in 0u32..11, theta in -PI..PI) {
        let m = (1u64 << k) as f64;
        let d1 = squared_derivative_sum(1 << k, theta);
        let want = m * m * (m * m - 1.0) / 12.0;
        prop_assert!((d1 - want).abs() <= 1e-9 * want.max(1.0));
        prop_assert!((squared_kernel_sum(1 << k, theta) - m * m).abs() <= 1e-10 * m * m);
    }

    #[test]
    fn single_fims_are_symmetric_psd(s in spectrum(5), t in 0.0f64..100.0, n in 1u32..8) {
        assert_psd(&fim::ht_fim_single(&s, t));
        assert_psd(&fim::qft_fim(&s, n).unwrap());
    }

    #[test]
    fn fisher_matches_finite_differences(s in spectrum(3), t in 0.3f64..15.0, n in 1u32..6) {
        let l = s.len();
        let params: Vec<f64> = s.phases().iter().chain(s.overlaps()).cloned().collect();
        let ht = common::fd_fisher(|p| common::ht_probs(p, l, t), &params);
        prop_assert!(common::scaled_gap(&fim::ht_fim_single(&s, t).full(), &ht, 2 * l) <= 1e-5);
        let q = common::fd_fisher(|p| common::qft_probs(p, l, n), &params);
        prop_assert!(common::scaled_gap(&fim::qft_fim(&s, n).unwrap().full(), &q, 2 * l) <= 1e-5);
    }

    #[test]
    fn total_fim_is_additive_in_shots(s in spectrum(4), kind in ht_kind(), a in 1usize..5, b in 1usize..5) {
        let t = 40.0;
        let fa = fim::total_fim(&s, kind, t, 12, a).unwrap();
        let fb = fim::total_fim(&s, kind, t, 12, b).unwrap();
        let fab = fim::total_fim(&s, kind, t, 12, a + b).unwrap();
        let sum = fa.add(&fb).unwrap().full();
        for (x, y) in fab.full().iter().zip(&sum) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn crlb_chain(s in spectrum(4), kind in ht_kind(), t in 20u32..80) {
        let f = fim::total_fim(&s, kind, t as f64, 30, 1).unwrap();
        for &label in s.labels() {
            let (Ok(full), Ok(diag)) = (bounds::crlb_full(&f, label), bounds::crlb_diag(&f, label)) else {
                continue;
            };
            prop_assert!(full >= diag - 1e-12);
            prop_assert!(bounds::diag_ratio(&f, label).unwrap() >= 1.0 - 1e-9);
        }
    }

    #[test]
    fn cost_product_forms_agree(s in spectrum(4), kind in prop_oneof![ht_kind(), Just(ProtocolKind::QftQpe)], k in 5u32..9) {
        let t = if kind == ProtocolKind::QftQpe { (1u32 << k) as f64 - 1.0 } else { (1u32 << k) as f64 };
        let a = bounds::cost_product_bound(&s, kind, t, 20, 3, 0).unwrap();
        let b = bounds::cost_product_direct(&s, kind, t, 20, 3, 0).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn schedule_constants_bounded(kind in ht_kind(), t in 1u32..5000, nt in 1usize..500) {
        let g = schedules::gamma(kind, t as f64, nt).unwrap();
        let c = schedules::chi(kind, t as f64, nt).unwrap();
        prop_assert!(g <= 2.0 && c <= 1.0 && g > 0.0 && c > 0.0);
    }

    #[test]
    fn deterministic_schedules_ignore_seed(t in 1u32..2000, nt in 1usize..100, s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = schedules::realize(ProtocolKind::Qcels, t as f64, nt, s1).unwrap();
        let b = schedules::realize(ProtocolKind::Qcels, t as f64, nt, s2).unwrap();
        prop_assert_eq!(a.times, b.times);
        let r = schedules::realize(ProtocolKind::Rpe, 64.0, 1, s1).unwrap();
        prop_assert_eq!(r.times, schedules::realize(ProtocolKind::Rpe, 64.0, 1, s2).unwrap().times);
    }

    #[test]
    fn samples_are_reproducible_and_in_range(s in spectrum(4), n in 1u32..12, seed in any::<u64>()) {
        let a = simulate::sample_qft(&s, n, 200, seed).unwrap();
        prop_assert_eq!(&a, &simulate::sample_qft(&s, n, 200, seed).unwrap());
        prop_assert!(a.outcomes.iter().all(|&y| y < 1u64 << n));
        let p = simulate::qft_probabilities(&s, n).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);

        let sched = schedules::realize(ProtocolKind::Csqpe, 50.0, 20, seed).unwrap();
        let h = simulate::sample_ht(&s, &sched, 7, seed).unwrap();
        prop_assert_eq!(&h, &simulate::sample_ht(&s, &sched, 7, seed).unwrap());
        for (r, z) in h.records.iter().zip(&h.z_hat) {
            prop_assert_eq!(r.n_re0 + r.n_re1, 7);
            prop_assert_eq!(r.n_im0 + r.n_im1, 7);
            prop_assert!(z.re.abs() <= 1.0 && z.im.abs() <= 1.0);
        }
    }

    #[test]
    fn estimates_lie_in_principal_range(s in spectrum(3), seed in any::<u64>()) {
        let sched = schedules::realize(ProtocolKind::Qmegs, 100.0, 200, seed).unwrap();
        let data = simulate::sample_ht(&s, &sched, 1, seed).unwrap();
        let e = estimators::estimate_qmegs(&data, 100.0, 1.0, true).unwrap();
        prop_assert!(e.theta_hat > -PI && e.theta_hat <= PI);
        let q = simulate::sample_qft(&s, 8, 300, seed).unwrap();
        if let Ok(e) = estimators::estimate_curvefit_qft(&q) {
            prop_assert!(e.theta_hat > -PI && e.theta_hat <= PI);
        }
    }

    #[test]
    fn estimates_are_translation_covariant(theta in -3.0f64..3.0, delta in -1.0f64..1.0) {
        let t = 128.0;
        let base = Spectrum::eigenstate(theta).unwrap();
        let moved = base.shifted(delta).unwrap();
        let exact = |s: &Spectrum, kind, nt| {
            let sched = schedules::realize(kind, t, nt, 5).unwrap();
            simulate::sample_ht_exact(s, &sched.times)
        };
        let run = |s: &Spectrum| -> Vec<f64> {
            vec![
                estimators::estimate_qmegs(&exact(s, ProtocolKind::Qmegs, 300), t, 1.0, true).unwrap().theta_hat,
                estimators::estimate_qcels(&exact(s, ProtocolKind::Qcels, 128)).unwrap().theta_hat,
                estimators::estimate_csqpe(&exact(s, ProtocolKind::Csqpe, 40), 1).unwrap().theta_hat,
                estimators::estimate_curvefit_histogram(&simulate::qft_probabilities(s, 7).unwrap(), 7, None).unwrap().theta_hat,
            ]
        };
        for (a, b) in run(&base).iter().zip(run(&moved)) {
            prop_assert!(phase_error(b, a + delta).abs() <= 1e-6, "{a} {b}");
        }
    }
}

#[test]
fn fim_inverse_matches_dense_inverse() {
    let mut r = common::rng(31);
    for k in 0..20 {
        let (p, c) = common::random_spectrum(&mut r, 1 + k % 4, 0.1);
        let s = Spectrum::new(p, c).unwrap();
        let f = fim::total_fim(&s, ProtocolKind::Qcels, 60.0, 40, 2).unwrap();
        assert!(!f.sum_pinned);
        let n = f.dim();
        let (inv, _) = bounds::fim_inverse(&f).unwrap();
        let dense = DMatrix::from_row_slice(n, n, &f.full()).try_inverse().unwrap();
        for i in 0..n {
            for j in 0..n {
                let scale = (dense[(i, i)] * dense[(j, j)]).sqrt();
                assert!((inv[i * n + j] - dense[(i, j)]).abs() <= 1e-7 * scale);
            }
        }
    }
}

#[test]
fn pinned_inverse_is_a_pseudo_inverse_on_the_constraint() {
    let s = Spectrum::geometric(PhaseFamily::Uniform, 4, 0.5).unwrap();
    let f = fim::total_fim(&s, ProtocolKind::Qmegs, 60.0, 10, 1).unwrap();
    assert!(f.sum_pinned);
    let n = f.dim();
    let (inv, _) = bounds::fim_inverse(&f).unwrap();
    let a = DMatrix::from_row_slice(n, n, &f.full());
    let b = DMatrix::from_row_slice(n, n, &inv);
    // P = I - u u^T / |u|^2 with u the all-ones overlap direction
    let mut proj = DMatrix::<f64>::identity(n, n);
    for i in 4..8 {
        for j in 4..8 {
            proj[(i, j)] -= 0.25;
        }
    }
    let prod = &a * &b;
    assert!((prod - &proj).abs().max() < 1e-8);
}

#[test]
fn qft_diagonal_obeys_leakage_bounds() {
    let mut r = common::rng(41);
    let (mut checked, mut off_grid) = (0, 0);
    for k in 0..300 {
        let (p, c) = common::random_spectrum(&mut r, 1 + k % 4, 0.2);
        let s = Spectrum::new(p, c).unwrap();
        let gap = s.spectral_gap();
        for n in 4..=11u32 {
            let m = (1u64 << n) as f64;
            let diag = fim::qft_theta_diagonal(&s, n).unwrap();
            for (i, &c) in s.overlaps().iter().enumerate() {
                if PI / m > gap / 2.0 || c < 2.0 * PI.powi(4) / (m * m * gap * gap) {
                    continue;
                }
                checked += 1;
                let (lo, hi) = (16.0 / (3.0 * PI.powi(4)) * c * m * m, c * m * m / 3.0);
                assert!(diag[i] <= hi * (1.0 + 1e-12), "n={n} mode {i}");
                // the lower bound fails within a few hundredths of a bin of the
                // outcome grid, where the target's own derivative terms vanish
                let bins = s.phases()[i] * m / (2.0 * PI);
                if (bins - bins.round()).abs() >= 0.05 {
                    assert!(diag[i] >= lo, "n={n} mode {i}: {} < {lo}", diag[i]);
                    off_grid += 1;
                }
            }
        }
    }
    assert!(checked > 100 && off_grid > 100);
}

#[test]
fn grid_aligned_mode_loses_its_information() {
    // theta = 0 sits on the outcome grid: every D_M(theta - 2 pi y / M) D_M' vanishes
    let s = Spectrum::new(vec![-1.0, 0.0, 1.0], vec![0.5, 0.3, 0.2]).unwrap();
    let diag = fim::qft_theta_diagonal(&s, 8).unwrap();
    assert!(diag[1] < 1e-12 * diag[0]);
    let alone = fim::qft_theta_diagonal(&Spectrum::eigenstate(0.0).unwrap(), 8).unwrap();
    assert!((alone[0] - (4f64.powi(8) - 1.0) / 3.0).abs() < 1e-6);
}

#[test]
fn g0_is_flat_in_t_for_hadamard_tests() {
    let s = Spectrum::geometric(PhaseFamily::Uniform, 20, 0.4).unwrap();
    for kind in [ProtocolKind::Qmegs, ProtocolKind::Qcels, ProtocolKind::Csqpe] {
        let g: Vec<f64> = (3..=6)
            .map(|k| fim::g_i(&s, kind, 100.0 * 2f64.powi(k), 100, 1, 0).unwrap())
            .collect();
        let (lo, hi) = g.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        assert!(hi / lo <= 1.15, "{kind}: {g:?}");
    }
}

#[test]
fn qmegs_g0_within_sandwich_for_uniform() {
    let s = Spectrum::geometric(PhaseFamily::Uniform, 20, 0.4).unwrap();
    let g = fim::g_i(&s, ProtocolKind::Qmegs, 12800.0, 1, 1, 0).unwrap();
    let chi = schedules::chi(ProtocolKind::Qmegs, 1.0, 1).unwrap();
    let c = s.overlap_of(0).unwrap();
    let fmax = fim::f_i_max(&s, 0).unwrap();
    assert!(g >= chi * c * c && g <= fmax * chi * c * c);
}

#[test]
fn rpe_diagonal_has_cost_form() {
    let s = Spectrum::geometric(PhaseFamily::Uniform, 20, 0.4).unwrap();
    let t = 64.0;
    let diag = fim::total_theta_diagonal(&s, ProtocolKind::Rpe, t, 1, 3).unwrap();
    let t_total = schedules::t_total(ProtocolKind::Rpe, t, 1, 3).unwrap();
    let c = s.overlap_of(0).unwrap();
    let fbar = diag[s.position(0).unwrap()] / (c * c * (2.0 * t + 1.0) / 2.0 * t_total / 3.0);
    assert!(fbar >= 1.0 && fbar <= fim::f_i_max(&s, 0).unwrap(), "{fbar}");
}

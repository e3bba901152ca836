mod common;

use clinistruct::eval::{
    bootstrap_ci, cohens_d, mann_whitney_u, welch_t_test, EffectBand, EvalError, TestMethod, EXACT_U_LIMIT,
};
use proptest::prelude::*;

#[test]
fn cohens_d_matches_hand_computation() {
    let (a, b) = ([70.0, 80.0], [85.0, 95.0]);
    let r = cohens_d(&a, &b).unwrap();
    assert!((r.d - common::cohens_d_oracle(&a, &b)).abs() < 1e-12);
    assert!((r.d - (-2.1213)).abs() < 1e-4);
    assert!((r.pooled_sd - 7.0711).abs() < 1e-4);
    assert_eq!(r.band, EffectBand::Large);
}

#[test]
fn cohens_d_of_identical_groups_is_zero() {
    let a = [1.0, 2.0, 4.0];
    assert_eq!(cohens_d(&a, &a).unwrap().d, 0.0);
}

#[test]
fn cohens_d_rejects_zero_variance_and_tiny_groups() {
    assert!(matches!(cohens_d(&[3.0, 3.0], &[3.0, 3.0]), Err(EvalError::ZeroVariance)));
    assert!(matches!(cohens_d(&[1.0], &[1.0, 2.0]), Err(EvalError::GroupTooSmall { need: 2 })));
}

#[test]
fn effect_bands_at_edges() {
    let table = [
        (0.0, EffectBand::Small),
        (0.26, EffectBand::Small),
        (-0.26, EffectBand::Small),
        (0.2999, EffectBand::Small),
        (0.3, EffectBand::Intermediate),
        (0.4999, EffectBand::Intermediate),
        (0.5, EffectBand::Medium),
        (-0.5, EffectBand::Medium),
        (0.7999, EffectBand::Medium),
        (0.8, EffectBand::Large),
        (-2.1213, EffectBand::Large),
    ];
    for (d, band) in table {
        assert_eq!(EffectBand::classify(d), band, "d = {d}");
    }
}

#[test]
fn welch_on_identical_samples() {
    let a = [90.0, 95.5, 99.0, 100.0];
    let r = welch_t_test(&a, &a).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert!((r.p_value - 1.0).abs() < 1e-9);
}

#[test]
fn welch_matches_direct_formula() {
    let (a, b) = ([70.0, 80.0, 77.0, 68.5], [85.0, 95.0, 90.0]);
    let r = welch_t_test(&a, &b).unwrap();
    let (va, vb) = (common::var_of(&a) / 4.0, common::var_of(&b) / 3.0);
    let t = (common::mean_of(&a) - common::mean_of(&b)) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / 3.0 + vb * vb / 2.0);
    assert!((r.statistic - t).abs() < 1e-12);
    assert!((r.df.unwrap() - df).abs() < 1e-9);
    assert!(r.p_value > 0.0 && r.p_value < 0.05);
}

#[test]
fn u_of_separated_groups_is_zero() {
    let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert_eq!(r.method, TestMethod::MannWhitneyExact);
    assert!((r.p_value - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn u_with_full_ties_is_centered() {
    let r = mann_whitney_u(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
    assert_eq!(r.statistic, 2.0);
    assert!((r.p_value - 1.0).abs() < 1e-12);
}

#[test]
fn exact_u_equals_enumeration_for_small_groups() {
    for (a, b) in common::u_test_cases(16, 12, 3) {
        let r = mann_whitney_u(&a, &b).unwrap();
        let (u, p) = common::enumerated_u_p(&a, &b);
        assert_eq!(r.statistic, u, "{a:?} vs {b:?}");
        assert!((r.p_value - p).abs() < 1e-9, "{a:?} vs {b:?}: {} != {p}", r.p_value);
    }
}

#[test]
fn exact_u_holds_up_to_the_enumeration_limit() {
    for (a, b) in [(8usize, 8usize), (4, 16), (1, 64)] {
        let xs: Vec<f64> = (0..a).map(|i| (i * 7 % 5) as f64).collect();
        let ys: Vec<f64> = (0..b).map(|i| (i * 3 % 4) as f64 + 0.5).collect();
        assert!(a * b <= EXACT_U_LIMIT);
        let r = mann_whitney_u(&xs, &ys).unwrap();
        assert_eq!(r.method, TestMethod::MannWhitneyExact);
        assert_eq!(r.statistic, common::pairwise_u(&xs, &ys));
    }
}

#[test]
fn large_groups_use_normal_approximation() {
    let a: Vec<f64> = (0..40).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..40).map(|i| i as f64 + 20.0).collect();
    let r = mann_whitney_u(&a, &b).unwrap();
    assert_eq!(r.method, TestMethod::MannWhitneyNormal);
    assert_eq!(r.statistic, common::pairwise_u(&a, &b));
    assert!(r.p_value < 0.001);
}

#[test]
fn bootstrap_of_constant_is_degenerate() {
    let ci = bootstrap_ci(&[0.9; 30], 0.95, 1000, 5).unwrap();
    assert_eq!((ci.lo, ci.hi, ci.mean), (0.9, 0.9, 0.9));
}

#[test]
fn bootstrap_is_deterministic_per_seed() {
    let xs: Vec<f64> = (0..50).map(|i| (i % 7) as f64).collect();
    let a = bootstrap_ci(&xs, 0.95, 2000, 17).unwrap();
    let b = bootstrap_ci(&xs, 0.95, 2000, 17).unwrap();
    let c = bootstrap_ci(&xs, 0.95, 2000, 18).unwrap();
    assert_eq!(a, b);
    assert_ne!((a.lo, a.hi), (c.lo, c.hi));
    assert!(a.lo <= a.mean && a.mean <= a.hi);
}

#[test]
fn bootstrap_rejects_bad_parameters() {
    assert!(bootstrap_ci(&[], 0.95, 10, 1).is_err());
    assert!(bootstrap_ci(&[1.0, 2.0], 1.0, 10, 1).is_err());
    assert!(bootstrap_ci(&[1.0, 2.0], 0.95, 0, 1).is_err());
}

proptest! {
    #[test]
    fn exact_u_matches_enumeration(
        a in prop::collection::vec(0u8..6, 1..5),
        b in prop::collection::vec(0u8..6, 1..5),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        let (u, p) = common::enumerated_u_p(&a, &b);
        prop_assert_eq!(r.statistic, u);
        prop_assert!((r.p_value - p).abs() < 1e-9);
    }

    #[test]
    fn u_statistics_of_both_groups_sum_to_n1n2(
        a in prop::collection::vec(-50i32..50, 1..30),
        b in prop::collection::vec(-50i32..50, 1..30),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ua = mann_whitney_u(&a, &b).unwrap();
        let ub = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(ua.statistic + ub.statistic, (a.len() * b.len()) as f64);
        prop_assert!((ua.p_value - ub.p_value).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&ua.p_value));
    }

    #[test]
    fn cohens_d_is_antisymmetric_and_matches_oracle(
        a in prop::collection::vec(0.0f64..100.0, 2..20),
        b in prop::collection::vec(0.0f64..100.0, 2..20),
    ) {
        if let Ok(r) = cohens_d(&a, &b) {
            let back = cohens_d(&b, &a).unwrap();
            prop_assert!((r.d + back.d).abs() < 1e-9);
            prop_assert!((r.d - common::cohens_d_oracle(&a, &b)).abs() < 1e-9);
            prop_assert_eq!(r.band, EffectBand::classify(r.d));
        }
    }

    #[test]
    fn bootstrap_bounds_lie_within_sample_range(
        xs in prop::collection::vec(0.0f64..1.0, 1..40),
        seed in any::<u64>(),
    ) {
        let ci = bootstrap_ci(&xs, 0.9, 200, seed).unwrap();
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= ci.lo && ci.lo <= ci.hi && ci.hi <= hi + 1e-12);
    }
}

use bfsplit_core::metrics::{ceil_log2, gamma, rel_frobenius_error_matrix};
use bfsplit_core::{
    check_bound, dot_oracle, dot_split, elementwise_error_ratio, gemm_f32_reference,
    gemm_f64_reference, gen_matrix, gen_vector, rel_frobenius_error, BoundKind, ErrorStats,
    GenKind, GenSpec, MetricsError, ProductScheme, Scheme, SplitCount, SplitVector, EPS_B, EPS_F,
};
use proptest::prelude::*;

#[test]
fn frobenius_examples() {
    let oracle = vec![1.5, -2.0, 0.25, 8.0];
    assert_eq!(rel_frobenius_error(&oracle, &oracle).unwrap(), 0.0);
    let scaled: Vec<f64> = oracle.iter().map(|v| v * (1.0 + 2f64.powi(-20))).collect();
    let e = rel_frobenius_error(&scaled, &oracle).unwrap();
    assert!((e / 2f64.powi(-20) - 1.0).abs() < 1e-9);
    assert_eq!(rel_frobenius_error(&[1.0], &[0.0]), Err(MetricsError::ZeroOracle));
}

#[test]
fn fp32_gemm_error_is_order_of_fp32_unit() {
    let a = gen_matrix(&GenSpec::square(GenKind::UNIFORM_UNIT, 1, 256)).unwrap();
    let b = gen_matrix(&GenSpec::square(GenKind::UNIFORM_UNIT, 2, 256)).unwrap();
    let c32 = gemm_f32_reference(&a, &b).unwrap().to_f64();
    let c64 = gemm_f64_reference(&a.to_f64(), &b.to_f64()).unwrap();
    let e = rel_frobenius_error_matrix(&c32, &c64).unwrap();
    assert!(e > 1e-8 && e < 1e-6, "{e:e}");
}

#[test]
fn ratio_examples() {
    let b = [1e-7, 3e-8, 0.0, 2e-9];
    let same = elementwise_error_ratio(&b, &b).unwrap();
    assert_eq!((same.mean, same.used, same.excluded), (1.0, 3, 1));
    let twice: Vec<f64> = b.iter().map(|v| 2.0 * v).collect();
    assert_eq!(elementwise_error_ratio(&twice, &b).unwrap().mean, 2.0);
    assert!(elementwise_error_ratio(&[1.0], &[0.0]).is_err());
}

#[test]
fn empty_dot_passes_every_bound() {
    for kind in BoundKind::ALL {
        let c = check_bound(kind, &[], &[], 0.0).unwrap();
        assert_eq!(c.error, 0.0);
        assert!(c.pass);
    }
}

#[test]
fn z2_bound_holds_on_long_uniform_dot() {
    let scheme = ProductScheme::fp32(Scheme::B3x6);
    for seed in 0..20 {
        let x = gen_vector(&GenSpec::new(GenKind::UNIFORM_UNIT, seed, 1024, 1), 1024).unwrap();
        let y = gen_vector(&GenSpec::new(GenKind::UNIFORM_UNIT, !seed, 1024, 1), 1024).unwrap();
        let sx = SplitVector::new(&x, SplitCount::THREE).unwrap();
        let sy = SplitVector::new(&y, SplitCount::THREE).unwrap();
        let z2 = dot_split(&sx, &sy, scheme).unwrap().value;
        let c = check_bound(BoundKind::Bf16Z2, &x, &y, z2).unwrap();
        assert!(c.pass && c.slack >= 0.0, "{c:?}");
    }
}

#[test]
fn exact_case_requires_the_condition() {
    let x = [1.0f32, 1e-10];
    let y = [1.0f32, 1.0];
    assert_eq!(
        check_bound(BoundKind::Bf16Z2ExactCase, &x, &y, 1.0),
        Err(MetricsError::NotExactCase)
    );
}

#[test]
fn bound_coefficients() {
    assert_eq!(BoundKind::Fp32Dot.coefficient(5), gamma(5, EPS_F));
    let z2 = BoundKind::Bf16Z2.coefficient(10);
    assert_eq!(z2, 1.01 * (gamma(12, EPS_F) + EPS_B.powi(3)));
    assert!(BoundKind::Bf16Z2ExactCase.coefficient(4096) < z2);
}

#[test]
fn gamma_is_subadditive_up_to_a_million() {
    let mut k = 1usize;
    while k <= 1_000_000 {
        for m in [1, k / 3, k / 2, k - 1] {
            if m == 0 || m >= k {
                continue;
            }
            assert!(gamma(m, EPS_F) + gamma(k - m, EPS_F) <= gamma(k, EPS_F), "{m} {k}");
        }
        k = k * 3 / 2 + 1;
    }
}

/// Integer-valued inputs give products and sums exact in i64, an oracle
/// independent of the compensated summation.
fn exact_int_dot(x: &[f32], y: &[f32]) -> (i64, i64) {
    x.iter().zip(y).fold((0, 0), |(s, a), (&p, &q)| {
        let v = p as i64 * q as i64;
        (s + v, a + v.abs())
    })
}

proptest! {
    #[test]
    fn gamma_subadditive(m in 1usize..500_000, n in 1usize..500_000) {
        prop_assert!(gamma(m, EPS_F) + gamma(n, EPS_F) <= gamma(m + n, EPS_F));
        prop_assert!(gamma(m, EPS_B / 4096.0) + gamma(n, EPS_B / 4096.0) <= gamma(m + n, EPS_B / 4096.0));
    }

    #[test]
    fn oracle_is_exact_on_integers(
        v in prop::collection::vec((-(1i32 << 20)..(1 << 20), -(1i32 << 20)..(1 << 20)), 0..64)
    ) {
        let x: Vec<f32> = v.iter().map(|p| p.0 as f32).collect();
        let y: Vec<f32> = v.iter().map(|p| p.1 as f32).collect();
        let (z, zt) = dot_oracle(&x, &y);
        let (s, a) = exact_int_dot(&x, &y);
        prop_assert_eq!(z, s as f64);
        prop_assert_eq!(zt, a as f64);
    }

    #[test]
    fn stats_keep_max_above_mean(samples in prop::collection::vec(0.0f64..1.0, 1..50)) {
        let s = ErrorStats::from_samples(&samples);
        prop_assert!(s.max_rel >= s.mean_rel && s.mean_rel >= 0.0);
        prop_assert_eq!(s.sample_count, samples.len());
        let (l, r) = samples.split_at(samples.len() / 2);
        let merged = ErrorStats::from_samples(l).merge(&ErrorStats::from_samples(r));
        prop_assert!((merged.mean_rel - s.mean_rel).abs() <= 1e-15);
        prop_assert_eq!(merged.max_rel, s.max_rel);
    }

    #[test]
    fn ceil_log2_brackets(v in 1e-300f64..1e300) {
        let c = ceil_log2(v);
        prop_assert!(2f64.powi(c) >= v && 2f64.powi(c - 1) < v);
    }
}

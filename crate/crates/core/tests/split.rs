use bfsplit_core::split::{in_safe_range, SAFE_MIN_EXPONENT};
use bfsplit_core::{gen_matrix, split_matrix, split_scalar, GenKind, GenSpec, SplitCount, SplitVector};
use proptest::prelude::*;

/// FP32 values whose exponent lies in the exact-split range.
fn safe_f32() -> impl Strategy<Value = f32> {
    let min_field = (SAFE_MIN_EXPONENT + 127) as u32;
    (any::<bool>(), min_field..=254u32, 0u32..(1 << 23)).prop_map(|(s, e, m)| {
        f32::from_bits((u32::from(s) << 31) | (e << 23) | m)
    })
}

#[test]
fn residual_of_one_plus_tiny() {
    let a = 1.0 + 2f32.powi(-20);
    let s = split_scalar(a, SplitCount::THREE).unwrap();
    let parts: Vec<f64> = s.components().iter().map(|b| b.to_f64()).collect();
    assert_eq!(parts, vec![1.0, 2f64.powi(-20), 0.0]);
    assert!(s.component(2).to_bits() == 0);
}

#[test]
fn lossy_small_exponent_value() {
    let a = f32::from_bits(0x0081_7FFF);
    let s = split_scalar(a, SplitCount::THREE).unwrap();
    assert_eq!(s.component(1).to_bits() & 0x7FFF, 0);
    assert_eq!(s.component(2).to_bits() & 0x7FFF, 0);
    let rel = (s.recombine() - f64::from(a)).abs() / f64::from(a);
    assert!(rel > 2f64.powi(-9) && rel < 2f64.powi(-7), "{rel:e}");
    assert!(!in_safe_range(a));
}

#[test]
fn values_near_fp32_max_split_exactly() {
    for bits in [0x7F7F_FFFFu32, 0x7F7F_8000, 0x7F7F_7FFF, 0xFF7F_C001] {
        let a = f32::from_bits(bits);
        let s = split_scalar(a, SplitCount::THREE).unwrap();
        assert!(s.components().iter().all(|b| b.is_finite()));
        assert_eq!(s.recombine(), f64::from(a), "{bits:#010x}");
    }
}

#[test]
fn uniform_matrix_recombines_bit_exactly() {
    let spec = GenSpec::square(GenKind::UNIFORM_UNIT, 11, 64);
    let a = gen_matrix(&spec).unwrap();
    let s = split_matrix(a.as_slice(), 64, 64, SplitCount::THREE).unwrap();
    let back = s.recombine();
    for (&x, &r) in a.as_slice().iter().zip(&back) {
        assert_eq!(f64::from(x).to_bits(), r.to_bits());
    }
}

#[test]
fn identity_components() {
    let n = 9;
    let data: Vec<f32> = (0..n * n).map(|i| if i % (n + 1) == 0 { 1.0 } else { 0.0 }).collect();
    let s = split_matrix(&data, n, n, SplitCount::THREE).unwrap();
    assert_eq!(s.component_f32(0), data);
    assert!(s.component_f32(1).iter().all(|&v| v == 0.0));
    assert!(s.component_f32(2).iter().all(|&v| v == 0.0));
}

proptest! {
    #[test]
    fn three_way_split_is_exact(a in safe_f32()) {
        let s = split_scalar(a, SplitCount::THREE).unwrap();
        prop_assert_eq!(s.recombine(), f64::from(a));
    }

    #[test]
    fn components_decay_by_bf16_unit(a in safe_f32()) {
        let s = split_scalar(a, SplitCount::THREE).unwrap();
        let p: Vec<f64> = s.components().iter().map(|b| b.to_f64().abs()).collect();
        prop_assert!(p[1] <= p[0] / 256.0);
        prop_assert!(p[2] <= p[1] / 256.0);
    }

    #[test]
    fn truncated_splits_bound_the_error(a in safe_f32()) {
        let x = f64::from(a);
        for (k, bits) in [(1usize, 8), (2, 16)] {
            let s = split_scalar(a, SplitCount::new(k).unwrap()).unwrap();
            prop_assert!((s.recombine() - x).abs() <= x.abs() * 2f64.powi(-bits));
        }
    }

    #[test]
    fn vector_split_matches_scalar_split(v in prop::collection::vec(safe_f32(), 0..40), k in 1usize..=3) {
        let k = SplitCount::new(k).unwrap();
        let sv = SplitVector::new(&v, k).unwrap();
        prop_assert_eq!(sv.len(), v.len());
        for (i, &a) in v.iter().enumerate() {
            prop_assert_eq!(sv.element(i), split_scalar(a, k).unwrap());
        }
    }

    #[test]
    fn split_preserves_sign(a in safe_f32()) {
        let s = split_scalar(a, SplitCount::THREE).unwrap();
        prop_assert_eq!(s.component(0).to_f64().is_sign_negative(), a.is_sign_negative());
    }
}

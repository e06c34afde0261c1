use bfsplit_core::linalg::{inverse_norm1_estimate, residual};
use bfsplit_core::{
    cond_estimate, derive_seed, gen_matrix, gen_vector, getrf, getrs, gmres_preconditioned,
    iterative_refinement, GenKind, GenSpec, LinalgError, LuFactors, Matrix, SolveOptions,
    SolvePrecision, WorkingPrecision,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn to_na(a: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.rows(), a.cols(), |r, c| a[(r, c)])
}

fn uniform_matrix(seed: u64, n: usize) -> Matrix<f32> {
    gen_matrix(&GenSpec::square(GenKind::UNIFORM_UNIT, seed, n)).unwrap()
}

fn rhs(seed: u64, n: usize) -> Vec<f64> {
    gen_vector(&GenSpec::new(GenKind::UNIFORM_UNIT, seed, n, 1), n)
        .unwrap()
        .into_iter()
        .map(f64::from)
        .collect()
}

fn unit_roundoff(p: WorkingPrecision) -> f64 {
    match p {
        WorkingPrecision::Fp64 => 2f64.powi(-53),
        WorkingPrecision::Fp32 | WorkingPrecision::Split(_) => 2f64.powi(-24),
        WorkingPrecision::Rounded(h) => h.unit_roundoff(),
    }
}

/// `‖P·A − L·U‖_F` against `n·u·‖ |L|·|U| ‖_F`, the classical backward
/// error bound for Gaussian elimination.
#[test]
fn factorization_backward_error() {
    let n = 70; // crosses two panel boundaries
    let a = uniform_matrix(21, n);
    for p in [
        WorkingPrecision::Fp64,
        WorkingPrecision::Fp32,
        WorkingPrecision::BF16,
        WorkingPrecision::FP16,
        "b3x6".parse().unwrap(),
        "b2x3".parse().unwrap(),
    ] {
        let f = getrf(&a, p).unwrap();
        let (l, u) = (to_na(&f.lower()), to_na(&f.upper()));
        let pa = to_na(&f.permute_rows(&a.to_f64()));
        let err = (&pa - &l * &u).norm();
        let scale = (l.abs() * u.abs()).norm();
        let mut u_eff = unit_roundoff(p);
        if let WorkingPrecision::Split(s) = p {
            // Two-way splits drop the 2⁻¹⁶ tail of every product.
            if s.splits().0.get() < 3 {
                u_eff = 2f64.powi(-16);
            }
        }
        assert!(err <= 3.0 * n as f64 * u_eff * scale, "{p}: {err:e} vs {scale:e}");
        assert!(l.iter().all(|v| v.abs() <= 1.0), "{p}: partial pivoting bound");
    }
}

#[test]
fn fp64_factors_match_textbook_lu() {
    let n = 45;
    let a = uniform_matrix(22, n);
    let f = getrf(&a, WorkingPrecision::Fp64).unwrap();
    let lu = to_na(&a.to_f64()).lu();
    let mut p_ref = DMatrix::<f64>::identity(n, n);
    lu.p().permute_rows(&mut p_ref);
    let p_ours = DMatrix::from_fn(n, n, |r, c| if f.permutation()[r] == c { 1.0 } else { 0.0 });
    assert_eq!(p_ours, p_ref);
    let diff = (to_na(&f.lower()) - lu.l()).abs().max() + (to_na(&f.upper()) - lu.u()).abs().max();
    assert!(diff < 1e-12, "{diff:e}");
}

#[test]
fn diag_dominant_fp64_solve() {
    let a = gen_matrix(&GenSpec::square(GenKind::DiagDominant { n: 50 }, 23, 50)).unwrap();
    let b = rhs(24, 50);
    let f = getrf(&a, WorkingPrecision::Fp64).unwrap();
    let x = getrs(&f, &b, SolvePrecision::Fp64).unwrap();
    let r = residual(&a.to_f64(), &x, &b);
    let rel = DVector::from_vec(r).norm() / DVector::from_vec(b).norm();
    assert!(rel < 1e-12, "{rel:e}");
}

#[test]
fn cond_estimate_brackets_exact_one_norm_cond() {
    for (i, cond) in [10.0, 1e3, 1e5].into_iter().enumerate() {
        let a = gen_matrix(&GenSpec::square(GenKind::Conditioned { n: 30, cond }, 30 + i as u64, 30))
            .unwrap();
        let m = to_na(&a.to_f64());
        let inv = m.clone().try_inverse().unwrap();
        let norm1 = |x: &DMatrix<f64>| x.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max);
        let exact = norm1(&m) * norm1(&inv);
        let est = cond_estimate(&a).unwrap();
        assert!(est <= exact * (1.0 + 1e-8) && est >= exact / 3.0, "{est} vs {exact}");
        let f = getrf(&a, WorkingPrecision::Fp64).unwrap();
        assert!(inverse_norm1_estimate(&f) <= norm1(&inv) * (1.0 + 1e-8));
    }
}

/// Residual norm of the best approximation from the `k`-dimensional Krylov
/// space of `A` and `b`, via orthonormal basis and least squares in nalgebra.
fn krylov_min_residual(a: &DMatrix<f64>, b: &DVector<f64>, k: usize) -> f64 {
    let n = b.len();
    let mut basis = DMatrix::<f64>::zeros(n, k);
    let mut v = b.clone();
    for j in 0..k {
        basis.set_column(j, &v);
        v = a * &v;
    }
    let q = basis.qr().q();
    let aq = a * &q;
    let y = aq.clone().svd(true, true).solve(b, 1e-300).unwrap();
    (b - aq * y).norm()
}

#[test]
fn gmres_residuals_match_krylov_minimum() {
    let n = 10;
    let a = gen_matrix(&GenSpec::square(GenKind::Conditioned { n, cond: 10.0 }, 40, n)).unwrap();
    let b = rhs(41, n);
    let id = LuFactors::identity(n, WorkingPrecision::Fp64);
    let opts = SolveOptions::default().with_cond(10.0);
    let (_, rep) = gmres_preconditioned(&a, &b, Some(&id), &opts).unwrap();
    assert!(rep.converged);
    assert_eq!(rep.residual_history.len(), rep.iterations + 1);

    let a_na = to_na(&a.to_f64());
    let b_na = DVector::from_vec(b.clone());
    for k in 1..=rep.iterations.min(6) {
        let oracle = krylov_min_residual(&a_na, &b_na, k) / b_na.norm();
        let got = rep.residual_history[k];
        assert!((got / oracle - 1.0).abs() < 1e-6, "k={k}: {got:e} vs {oracle:e}");
    }
    let (_, plain) = gmres_preconditioned(&a, &b, None, &opts).unwrap();
    assert_eq!(plain.residual_history, rep.residual_history);
}

#[test]
fn preconditioning_cuts_gmres_iterations() {
    let n = 50;
    for t in 0..5 {
        let a = gen_matrix(&GenSpec::square(GenKind::DiagDominant { n }, derive_seed(50, t), n))
            .unwrap();
        let b = rhs(derive_seed(51, t), n);
        let opts = SolveOptions::default();
        let m = getrf(&a, WorkingPrecision::BF16).unwrap();
        let (_, pre) = gmres_preconditioned(&a, &b, Some(&m), &opts).unwrap();
        let (_, plain) = gmres_preconditioned(&a, &b, None, &opts).unwrap();
        assert!(pre.converged);
        assert!(
            !plain.converged || plain.iterations > pre.iterations,
            "{} vs {}",
            plain.iterations,
            pre.iterations
        );
    }
}

#[test]
fn solver_argument_errors() {
    let a = uniform_matrix(60, 4);
    assert!(matches!(
        iterative_refinement(&a, &[1.0; 3], WorkingPrecision::Fp32, &SolveOptions::default()),
        Err(LinalgError::DimensionMismatch { .. })
    ));
    let wide = Matrix::<f32>::zeros(2, 3);
    assert!(matches!(
        getrf(&wide, WorkingPrecision::Fp32),
        Err(LinalgError::NotSquare { .. })
    ));
    let sing = Matrix::<f32>::zeros(3, 3);
    assert!(matches!(
        getrf(&sing, WorkingPrecision::Fp64),
        Err(LinalgError::Singular { column: 0 })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Converged runs end at or below the tolerance with every earlier
    /// iterate above it; other runs used the whole budget or diverged.
    #[test]
    fn refinement_stopping_contract(
        seed in any::<u64>(),
        n in 2usize..24,
        cond in prop::sample::select(vec![10.0, 1e3, 1e5]),
        low in prop::sample::select(vec![WorkingPrecision::Fp32, WorkingPrecision::BF16, WorkingPrecision::FP16]),
        max_iters in 1usize..30,
    ) {
        let a = gen_matrix(&GenSpec::square(GenKind::Conditioned { n, cond }, seed, n)).unwrap();
        let b = rhs(seed ^ 0xABCD, n);
        let opts = SolveOptions { max_iters, ..SolveOptions::default().with_cond(cond) };
        match iterative_refinement(&a, &b, low, &opts) {
            Ok((x, rep)) => {
                prop_assert_eq!(x.len(), n);
                prop_assert_eq!(rep.residual_history.len(), rep.iterations + 1);
                prop_assert_eq!(rep.residual_history[0], 1.0);
                prop_assert!(rep.iterations <= max_iters);
                let tol = rep.tolerance_used;
                prop_assert_eq!(tol, cond * 2f64.powi(-53));
                let (last, earlier) = rep.residual_history.split_last().unwrap();
                prop_assert!(earlier.iter().all(|&r| r > tol));
                if rep.converged {
                    prop_assert!(*last <= tol);
                } else {
                    prop_assert!(rep.iterations == max_iters || !last.is_finite());
                }
            }
            // Low-precision rounding can make a badly conditioned matrix
            // numerically singular.
            Err(e) => prop_assert!(matches!(e, LinalgError::Singular { .. }), "{e}"),
        }
    }

    #[test]
    fn gmres_stopping_contract(seed in any::<u64>(), n in 2usize..20, restart in 1usize..8) {
        let a = gen_matrix(&GenSpec::square(GenKind::DiagDominant { n }, seed, n)).unwrap();
        let b = rhs(!seed, n);
        let opts = SolveOptions { restart: Some(restart), max_iters: 60, ..SolveOptions::default() };
        let m = getrf(&a, WorkingPrecision::FP16).unwrap();
        let (_, rep) = gmres_preconditioned(&a, &b, Some(&m), &opts).unwrap();
        prop_assert_eq!(rep.residual_history.len(), rep.iterations + 1);
        let (last, earlier) = rep.residual_history.split_last().unwrap();
        prop_assert!(earlier.iter().all(|&r| r > rep.tolerance_used));
        prop_assert_eq!(rep.converged, *last <= rep.tolerance_used);
    }
}

//! Dense LU with a selectable update precision, and the solvers built on it.
//!
//! `getrf` is a right-looking blocked factorization with partial pivoting.
//! Only the trailing-submatrix update (the cubic GEMM term) changes with the
//! working precision; the panel and the triangular solve for the block row
//! use FP32 arithmetic. For the 16-bit precisions the input is rounded to
//! the format, panel results are stored in it, and every operation of the
//! trailing update is rounded to it.
//!
//! Refinement and GMRES compute residuals in FP64 with a compensated dot
//! product and stop on `‖b − Ax‖₂ / ‖b‖₂ ≤ cond · 2⁻⁵³ · tol_factor`.

use crate::kernels::{gemm_f32_reference, gemm_split_f32, KernelError, ProductScheme};
use crate::matrix::Matrix;
use crate::precision::HalfFormat;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Panel width of the blocked factorization.
pub const PANEL_WIDTH: usize = 32;

/// FP64 unit roundoff used by the stopping rule.
pub const EPS64: f64 = 1.0 / 9_007_199_254_740_992.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is {rows}x{cols}, expected square")]
    NotSquare { rows: usize, cols: usize },
    #[error("zero pivot in column {column}")]
    Singular { column: usize },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("unknown working precision {0:?}")]
    UnknownPrecision(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Precision of the trailing-submatrix update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WorkingPrecision {
    /// FP32 GEMM with fused multiply-add.
    Fp32,
    /// FP64 throughout, used as the oracle.
    Fp64,
    /// Split BF16 GEMM under a product scheme.
    Split(ProductScheme),
    /// Input rounded to a 16-bit format and every arithmetic result rounded
    /// to it.
    Rounded(HalfFormat),
}

impl WorkingPrecision {
    pub const BF16: WorkingPrecision = WorkingPrecision::Rounded(HalfFormat::Bf16);
    pub const FP16: WorkingPrecision = WorkingPrecision::Rounded(HalfFormat::Fp16);

    fn arith(self) -> Arith {
        match self {
            WorkingPrecision::Fp32 | WorkingPrecision::Split(_) => Arith::F32,
            WorkingPrecision::Fp64 => Arith::F64,
            WorkingPrecision::Rounded(f) => Arith::Round(f),
        }
    }
}

impl fmt::Display for WorkingPrecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkingPrecision::Fp32 => f.write_str("fp32"),
            WorkingPrecision::Fp64 => f.write_str("fp64"),
            WorkingPrecision::Split(s) => write!(f, "{s}"),
            WorkingPrecision::Rounded(h) => f.write_str(h.name()),
        }
    }
}

impl FromStr for WorkingPrecision {
    type Err = LinalgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fp32" | "sgemm" => Ok(WorkingPrecision::Fp32),
            "fp64" | "dgemm" => Ok(WorkingPrecision::Fp64),
            "bf16" => Ok(WorkingPrecision::BF16),
            "fp16" => Ok(WorkingPrecision::FP16),
            other => other
                .parse::<ProductScheme>()
                .map(WorkingPrecision::Split)
                .map_err(|_| LinalgError::UnknownPrecision(s.to_string())),
        }
    }
}

/// Scalar arithmetic for the panel and block-row solves.
#[derive(Debug, Clone, Copy)]
enum Arith {
    F64,
    F32,
    Round(HalfFormat),
}

impl Arith {
    #[inline]
    fn load(self, a: f64) -> f64 {
        match self {
            Arith::F64 => a,
            Arith::F32 => a as f32 as f64,
            Arith::Round(h) => h.quantize(a),
        }
    }

    // FP32 results are formed in FP64 and rounded once; for a single
    // operation on FP32 operands this equals the FP32 result. The 16-bit
    // variants compute in FP32 and store the result in the 16-bit format.
    #[inline]
    fn store(self, exact: f64) -> f64 {
        match self {
            Arith::F64 => exact,
            Arith::F32 => exact as f32 as f64,
            Arith::Round(h) => h.quantize(exact as f32 as f64),
        }
    }

    #[inline]
    fn mul(self, a: f64, b: f64) -> f64 {
        self.store(a * b)
    }

    #[inline]
    fn sub(self, a: f64, b: f64) -> f64 {
        self.store(a - b)
    }

    #[inline]
    fn div(self, a: f64, b: f64) -> f64 {
        self.store(a / b)
    }
}

/// Packed `L\U` factors with the row permutation: row `i` of `P·A` is row
/// `perm[i]` of `A`, `L` is unit lower triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    lu: Matrix<f64>,
    perm: Vec<usize>,
    precision: WorkingPrecision,
}

impl LuFactors {
    /// Factors of the identity, usable as a "no preconditioner".
    pub fn identity(n: usize, precision: WorkingPrecision) -> Self {
        LuFactors {
            lu: Matrix::identity(n),
            perm: (0..n).collect(),
            precision,
        }
    }

    pub fn n(&self) -> usize {
        self.perm.len()
    }

    pub fn precision(&self) -> WorkingPrecision {
        self.precision
    }

    pub fn packed(&self) -> &Matrix<f64> {
        &self.lu
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn lower(&self) -> Matrix<f64> {
        let n = self.n();
        Matrix::from_fn(n, n, |r, c| match r.cmp(&c) {
            std::cmp::Ordering::Greater => self.lu[(r, c)],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        })
    }

    pub fn upper(&self) -> Matrix<f64> {
        let n = self.n();
        Matrix::from_fn(n, n, |r, c| if r <= c { self.lu[(r, c)] } else { 0.0 })
    }

    /// `P·A` for a matrix with the factored shape.
    pub fn permute_rows(&self, a: &Matrix<f64>) -> Matrix<f64> {
        Matrix::from_fn(a.rows(), a.cols(), |r, c| a[(self.perm[r], c)])
    }
}

fn check_square<T: Copy + Default>(a: &Matrix<T>) -> Result<usize, LinalgError> {
    if a.is_square() {
        Ok(a.rows())
    } else {
        Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        })
    }
}

/// LU factorization with partial pivoting.
pub fn getrf(a: &Matrix<f32>, precision: WorkingPrecision) -> Result<LuFactors, LinalgError> {
    let n = check_square(a)?;
    if let Some(idx) = a.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(LinalgError::NonFinite {
            row: idx / n,
            col: idx % n,
        });
    }
    let arith = precision.arith();
    let mut lu = a.map(|v| arith.load(f64::from(v)));
    let mut perm: Vec<usize> = (0..n).collect();

    for j0 in (0..n).step_by(PANEL_WIDTH) {
        let j1 = (j0 + PANEL_WIDTH).min(n);
        factor_panel(&mut lu, &mut perm, j0, j1, arith)?;
        if j1 < n {
            solve_block_row(&mut lu, j0, j1, arith);
            update_trailing(&mut lu, j0, j1, precision)?;
        }
    }
    Ok(LuFactors {
        lu,
        perm,
        precision,
    })
}

fn swap_rows(m: &mut Matrix<f64>, r1: usize, r2: usize) {
    if r1 == r2 {
        return;
    }
    let cols = m.cols();
    let data = m.as_mut_slice();
    let (lo, hi) = (r1.min(r2), r1.max(r2));
    let (head, tail) = data.split_at_mut(hi * cols);
    head[lo * cols..(lo + 1) * cols].swap_with_slice(&mut tail[..cols]);
}

/// Unblocked elimination of columns `j0..j1` over rows `j0..n`.
fn factor_panel(
    lu: &mut Matrix<f64>,
    perm: &mut [usize],
    j0: usize,
    j1: usize,
    arith: Arith,
) -> Result<(), LinalgError> {
    let n = lu.rows();
    for j in j0..j1 {
        let mut p = j;
        for i in j + 1..n {
            if lu[(i, j)].abs() > lu[(p, j)].abs() {
                p = i;
            }
        }
        if lu[(p, j)] == 0.0 {
            return Err(LinalgError::Singular { column: j });
        }
        swap_rows(lu, j, p);
        perm.swap(j, p);
        let pivot = lu[(j, j)];
        for i in j + 1..n {
            let l = arith.div(lu[(i, j)], pivot);
            lu[(i, j)] = l;
            for c in j + 1..j1 {
                lu[(i, c)] = arith.sub(lu[(i, c)], arith.mul(l, lu[(j, c)]));
            }
        }
    }
    Ok(())
}

/// `U12 = L11⁻¹ · A12` for the block row right of the panel.
fn solve_block_row(lu: &mut Matrix<f64>, j0: usize, j1: usize, arith: Arith) {
    let n = lu.cols();
    for r in j0 + 1..j1 {
        for k in j0..r {
            let l = lu[(r, k)];
            for c in j1..n {
                lu[(r, c)] = arith.sub(lu[(r, c)], arith.mul(l, lu[(k, c)]));
            }
        }
    }
}

/// `A22 -= L21 · U12` in the working precision.
fn update_trailing(
    lu: &mut Matrix<f64>,
    j0: usize,
    j1: usize,
    precision: WorkingPrecision,
) -> Result<(), LinalgError> {
    let n = lu.rows();
    let (m, kb) = (n - j1, j1 - j0);
    match precision {
        WorkingPrecision::Fp64 => {
            for r in j1..n {
                for k in j0..j1 {
                    let l = lu[(r, k)];
                    for c in j1..n {
                        lu[(r, c)] -= l * lu[(k, c)];
                    }
                }
            }
        }
        WorkingPrecision::Rounded(h) => {
            for r in j1..n {
                for k in j0..j1 {
                    let l = lu[(r, k)];
                    for c in j1..n {
                        lu[(r, c)] = h.quantize(lu[(r, c)] - h.quantize(l * lu[(k, c)]));
                    }
                }
            }
        }
        WorkingPrecision::Fp32 | WorkingPrecision::Split(_) => {
            let l21 = Matrix::from_fn(m, kb, |r, c| lu[(j1 + r, j0 + c)] as f32);
            let u12 = Matrix::from_fn(kb, m, |r, c| lu[(j0 + r, j1 + c)] as f32);
            let p: Matrix<f64> = match precision {
                WorkingPrecision::Split(s) => gemm_split_f32(&l21, &u12, s)?,
                _ => gemm_f32_reference(&l21, &u12)?.to_f64(),
            };
            for r in 0..m {
                for c in 0..m {
                    let v = &mut lu[(j1 + r, j1 + c)];
                    *v = (*v - p[(r, c)]) as f32 as f64;
                }
            }
        }
    }
    Ok(())
}

/// Arithmetic of the triangular solves in [`getrs`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolvePrecision {
    Fp32,
    Fp64,
}

/// Solves `A·x = b` with the factors of `A`.
pub fn getrs(f: &LuFactors, b: &[f64], precision: SolvePrecision) -> Result<Vec<f64>, LinalgError> {
    let n = f.n();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let arith = match precision {
        SolvePrecision::Fp32 => Arith::F32,
        SolvePrecision::Fp64 => Arith::F64,
    };
    let mut x: Vec<f64> = f.perm.iter().map(|&p| arith.load(b[p])).collect();
    for i in 0..n {
        for k in 0..i {
            x[i] = arith.sub(x[i], arith.mul(f.lu[(i, k)], x[k]));
        }
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            x[i] = arith.sub(x[i], arith.mul(f.lu[(i, k)], x[k]));
        }
        x[i] = arith.div(x[i], f.lu[(i, i)]);
    }
    Ok(x)
}

/// Solves `Aᵀ·x = b` in FP64 with the factors of `A`.
fn getrs_transpose(f: &LuFactors, b: &[f64]) -> Vec<f64> {
    let n = f.n();
    let mut w = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            w[i] -= f.lu[(k, i)] * w[k];
        }
        w[i] /= f.lu[(i, i)];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            w[i] -= f.lu[(k, i)] * w[k];
        }
    }
    let mut x = vec![0.0; n];
    for (i, &p) in f.perm.iter().enumerate() {
        x[p] = w[i];
    }
    x
}

fn norm1(a: &Matrix<f64>) -> f64 {
    (0..a.cols())
        .map(|c| (0..a.rows()).map(|r| a[(r, c)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Estimate of `‖A⁻¹‖₁` from the factors (Hager's method with Higham's
/// alternating-sign safeguard).
pub fn inverse_norm1_estimate(f: &LuFactors) -> f64 {
    let n = f.n();
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0f64;
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let y = getrs(f, &x, SolvePrecision::Fp64).expect("dimensions match");
        est = est.max(y.iter().map(|v| v.abs()).sum());
        let xi: Vec<f64> = y.iter().map(|&v| if v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let z = getrs_transpose(f, &xi);
        let j = (0..n)
            .max_by(|&a, &b| z[a].abs().total_cmp(&z[b].abs()))
            .unwrap_or(0);
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if z[j].abs() <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = vec![0.0; n];
        x[j] = 1.0;
    }
    let alt: Vec<f64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * (1.0 + i as f64 / (n.max(2) - 1) as f64)
        })
        .collect();
    let y = getrs(f, &alt, SolvePrecision::Fp64).expect("dimensions match");
    let alt_est = 2.0 * y.iter().map(|v| v.abs()).sum::<f64>() / (3.0 * n as f64);
    est.max(alt_est)
}

/// 1-norm condition number estimate from an FP64 factorization.
pub fn cond_estimate(a: &Matrix<f32>) -> Result<f64, LinalgError> {
    let f = getrf(a, WorkingPrecision::Fp64)?;
    Ok(norm1(&a.to_f64()) * inverse_norm1_estimate(&f))
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// `b − A·x` with each entry accumulated in doubled FP64.
pub fn residual(a: &Matrix<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|i| {
            let (mut s, mut c) = (b[i], 0.0);
            for (&aij, &xj) in a.row(i).iter().zip(x) {
                let p = -aij * xj;
                let ep = (-aij).mul_add(xj, -p);
                let (t, et) = two_sum(s, p);
                s = t;
                c += ep + et;
            }
            s + c
        })
        .collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_residual(a: &Matrix<f64>, x: &[f64], b: &[f64], b_norm: f64) -> f64 {
    norm2(&residual(a, x, b)) / b_norm
}

fn matvec(a: &Matrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|i| a.row(i).iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

/// Stopping and sizing options shared by the iterative solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Multiplies `cond · 2⁻⁵³` to form the residual tolerance.
    pub tol_factor: f64,
    pub max_iters: usize,
    /// Known condition number; estimated from FP64 factors when absent.
    pub cond: Option<f64>,
    /// GMRES restart length; the system size when absent.
    pub restart: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_factor: 1.0,
            max_iters: 100,
            cond: None,
            restart: None,
        }
    }
}

impl SolveOptions {
    pub fn with_cond(self, cond: f64) -> Self {
        SolveOptions {
            cond: Some(cond),
            ..self
        }
    }
}

/// Outcome of an iterative solve. `residual_history[0]` is the relative
/// residual of the zero initial guess, one more entry per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub tolerance_used: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::NAN)
    }
}

fn prepare(
    a: &Matrix<f32>,
    b: &[f64],
    opts: &SolveOptions,
) -> Result<(Matrix<f64>, f64), LinalgError> {
    let n = check_square(a)?;
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    if opts.max_iters == 0 {
        return Err(LinalgError::InvalidOption("max_iters must be at least 1".into()));
    }
    if !(opts.tol_factor.is_finite() && opts.tol_factor > 0.0) {
        return Err(LinalgError::InvalidOption(format!(
            "tol_factor {}",
            opts.tol_factor
        )));
    }
    let cond = match opts.cond {
        Some(c) if c.is_finite() && c >= 1.0 => c,
        Some(c) => return Err(LinalgError::InvalidOption(format!("cond {c}"))),
        None => cond_estimate(a)?,
    };
    Ok((a.to_f64(), cond * EPS64 * opts.tol_factor))
}

/// Mixed-precision iterative refinement: factor once in `low`, then repeat
/// FP64 residual, FP64 solve with the low-precision factors, FP64 update.
pub fn iterative_refinement(
    a: &Matrix<f32>,
    b: &[f64],
    low: WorkingPrecision,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    let (a64, tol) = prepare(a, b, opts)?;
    let f = getrf(a, low)?;
    let n = b.len();
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, zero_rhs_report(tol)));
    }
    let mut history = vec![1.0];
    for it in 1..=opts.max_iters {
        let r = residual(&a64, &x, b);
        let y = getrs(&f, &r, SolvePrecision::Fp64)?;
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi += yi;
        }
        let res = rel_residual(&a64, &x, b, b_norm);
        history.push(res);
        if res <= tol {
            return Ok((x, report(true, it, history, tol)));
        }
        if !res.is_finite() {
            return Ok((x, report(false, it, history, tol)));
        }
    }
    Ok((x, report(false, opts.max_iters, history, tol)))
}

fn report(converged: bool, iterations: usize, history: Vec<f64>, tol: f64) -> SolveReport {
    SolveReport {
        converged,
        iterations,
        residual_history: history,
        tolerance_used: tol,
    }
}

fn zero_rhs_report(tol: f64) -> SolveReport {
    report(true, 0, vec![0.0], tol)
}

/// Left-preconditioned restarted GMRES in FP64. The preconditioner is
/// applied through FP64 solves with `precond`; `None` runs unpreconditioned.
/// Each iteration is one Arnoldi step, after which the true residual of the
/// current iterate is checked against the tolerance. A cycle also ends early
/// once its Krylov residual estimate falls below `n·2⁻⁵³` of its starting
/// value, since further steps in that cycle only add rounding error.
pub fn gmres_preconditioned(
    a: &Matrix<f32>,
    b: &[f64],
    precond: Option<&LuFactors>,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, SolveReport), LinalgError> {
    let (a64, tol) = prepare(a, b, opts)?;
    let n = b.len();
    if let Some(m) = precond {
        if m.n() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: m.n(),
            });
        }
    }
    let restart = opts.restart.unwrap_or(n).max(1);
    let apply = |v: &[f64]| -> Result<Vec<f64>, LinalgError> {
        match precond {
            Some(m) => getrs(m, v, SolvePrecision::Fp64),
            None => Ok(v.to_vec()),
        }
    };

    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok((x, zero_rhs_report(tol)));
    }
    let mut history = vec![1.0];
    let mut total = 0;

    while total < opts.max_iters {
        let z = apply(&residual(&a64, &x, b))?;
        let beta = norm2(&z);
        if beta == 0.0 || !beta.is_finite() {
            break;
        }
        let mut basis = vec![z.iter().map(|v| v / beta).collect::<Vec<f64>>()];
        // Column j of the rotated Hessenberg matrix is h[j][0..=j].
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut rot: Vec<(f64, f64)> = Vec::new();
        let mut g = vec![beta];
        let x0 = x.clone();

        for j in 0..restart {
            if total == opts.max_iters {
                break;
            }
            total += 1;
            let mut w = apply(&matvec(&a64, &basis[j]))?;
            let mut col = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij: f64 = w.iter().zip(v).map(|(p, q)| p * q).sum();
                for (wi, vi) in w.iter_mut().zip(v) {
                    *wi -= hij * vi;
                }
                col.push(hij);
            }
            let h_next = norm2(&w);
            col.push(h_next);
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (p, q) = (col[i], col[i + 1]);
                col[i] = c * p + s * q;
                col[i + 1] = -s * p + c * q;
            }
            let (p, q) = (col[j], col[j + 1]);
            let d = p.hypot(q);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (p / d, q / d) };
            col[j] = d;
            col.truncate(j + 1);
            rot.push((c, s));
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            h.push(col);

            let y = back_substitute(&h, &g[..=j]);
            let mut xj = x0.clone();
            for (v, yi) in basis.iter().zip(&y) {
                for (xk, vk) in xj.iter_mut().zip(v) {
                    *xk += yi * vk;
                }
            }
            let res = rel_residual(&a64, &xj, b, b_norm);
            history.push(res);
            if res <= tol {
                return Ok((xj, report(true, total, history, tol)));
            }
            if h_next == 0.0 || !res.is_finite() {
                return Ok((xj, report(false, total, history, tol)));
            }
            x = xj;
            // Past this point the cycle is limited by its own rounding;
            // restart from the compensated true residual instead.
            if g[j + 1].abs() <= n as f64 * EPS64 * beta {
                break;
            }
            basis.push(w.iter().map(|v| v / h_next).collect());
        }
    }
    Ok((x, report(false, total, history, tol)))
}

/// Solves the upper triangular system stored column-wise in `h`.
fn back_substitute(h: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let k = g.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (j, yj) in y.iter().enumerate().skip(i + 1) {
            s -= h[j][i] * yj;
        }
        y[i] = s / h[i][i];
    }
    y
}

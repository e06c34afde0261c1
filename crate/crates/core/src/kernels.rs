//! Dot products and GEMM over split operands, plus FP32/FP64 references.
//!
//! Every partial product `Z(i,j) = x(i)·y(j)` is accumulated sequentially in
//! FP32 the way a BF16 FMA unit does it: the BF16×BF16 product is exact in
//! FP32 and each accumulation step rounds once. Partial products are grouped
//! into bins by `i + j` and the bins are added smallest first.
//!
//! GEMM is defined by the dot kernel. The loops run in `i-k-j` order, which
//! keeps the accumulation order of each output element identical to
//! [`dot_split`] on the corresponding row and column.

use crate::matrix::Matrix;
use crate::precision::Bf16;
use crate::split::{SplitCount, SplitError, SplitMatrix, SplitVector};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("dimension mismatch: ({m}x{k}) times ({k2}x{n})")]
    DimensionMismatch {
        m: usize,
        k: usize,
        k2: usize,
        n: usize,
    },
    #[error("scheme {scheme} needs {need_x}x{need_y} splits, operands have {have_x}x{have_y}")]
    SchemeMismatch {
        scheme: String,
        need_x: usize,
        need_y: usize,
        have_x: usize,
        have_y: usize,
    },
    #[error("unknown product scheme {0:?}")]
    UnknownScheme(String),
    #[error(transparent)]
    Split(#[from] SplitError),
}

/// `a * b + c` rounded once to FP32.
///
/// The product of two FP32 values is exact in FP64. The FP64 sum is rounded
/// to odd (sticky last bit) so that the final narrowing to FP32 cannot suffer
/// a double rounding.
#[inline]
pub fn fma_f32(a: f32, b: f32, c: f32) -> f32 {
    let p = f64::from(a) * f64::from(b);
    let c = f64::from(c);
    let s = p + c;
    if !s.is_finite() {
        return s as f32;
    }
    // TwoSum error term.
    let bp = s - c;
    let err = (p - bp) + (c - (s - bp));
    let bits = s.to_bits();
    if err != 0.0 && bits & 1 == 0 {
        let away = (err > 0.0) == (s > 0.0);
        let adjusted = if away { bits + 1 } else { bits - 1 };
        return f64::from_bits(adjusted) as f32;
    }
    s as f32
}

/// The nine possible partial products `(i, j)`, `i` indexing the left
/// operand's components and `j` the right's.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ProductSet(u16);

impl ProductSet {
    pub const EMPTY: ProductSet = ProductSet(0);

    const fn bit(i: usize, j: usize) -> u16 {
        1 << (i * 3 + j)
    }

    pub const fn from_pairs(pairs: &[(usize, usize)]) -> ProductSet {
        let mut mask = 0;
        let mut idx = 0;
        while idx < pairs.len() {
            mask |= Self::bit(pairs[idx].0, pairs[idx].1);
            idx += 1;
        }
        ProductSet(mask)
    }

    pub fn contains(self, i: usize, j: usize) -> bool {
        i < 3 && j < 3 && self.0 & Self::bit(i, j) != 0
    }

    #[must_use]
    pub fn with(self, i: usize, j: usize) -> ProductSet {
        assert!(i < 3 && j < 3, "product index out of range");
        ProductSet(self.0 | Self::bit(i, j))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Pairs in row-major `(i, j)` order.
    pub fn pairs(self) -> impl Iterator<Item = (usize, usize)> {
        (0..9)
            .filter(move |b| self.0 & (1 << b) != 0)
            .map(|b| (b / 3, b % 3))
    }

    /// Components needed from each operand.
    pub fn required_splits(self) -> (usize, usize) {
        self.pairs()
            .fold((0, 0), |(x, y), (i, j)| (x.max(i + 1), y.max(j + 1)))
    }
}

impl fmt::Debug for ProductSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.pairs()).finish()
    }
}

/// Named product selections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// One split, one product.
    B1x1,
    /// Two splits, the three products of bins 0 and 1.
    B2x3,
    /// Three splits, the six products of bins 0 to 2.
    B3x6,
    /// Three splits, all nine products.
    B3x9,
    /// Left operand split twice, right operand three times; products
    /// (0,0), (0,1), (1,0), (1,1), (0,2). Experimental: only reaches FP32-like
    /// accuracy when the left operand's second component is negligible.
    B2x3x5,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::B1x1,
        Scheme::B2x3,
        Scheme::B3x6,
        Scheme::B3x9,
        Scheme::B2x3x5,
    ];

    pub fn products(self) -> ProductSet {
        match self {
            Scheme::B1x1 => ProductSet::from_pairs(&[(0, 0)]),
            Scheme::B2x3 => ProductSet::from_pairs(&[(0, 0), (0, 1), (1, 0)]),
            Scheme::B3x6 => {
                ProductSet::from_pairs(&[(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)])
            }
            Scheme::B3x9 => ProductSet::from_pairs(&[
                (0, 0),
                (0, 1),
                (0, 2),
                (1, 0),
                (1, 1),
                (1, 2),
                (2, 0),
                (2, 1),
                (2, 2),
            ]),
            Scheme::B2x3x5 => {
                ProductSet::from_pairs(&[(0, 0), (0, 1), (1, 0), (1, 1), (0, 2)])
            }
        }
    }

    pub fn product_count(self) -> usize {
        self.products().len()
    }

    /// Split counts `(left, right)` the operands must carry.
    pub fn splits(self) -> (SplitCount, SplitCount) {
        match self {
            Scheme::B1x1 => (SplitCount::ONE, SplitCount::ONE),
            Scheme::B2x3 => (SplitCount::TWO, SplitCount::TWO),
            Scheme::B3x6 | Scheme::B3x9 => (SplitCount::THREE, SplitCount::THREE),
            Scheme::B2x3x5 => (SplitCount::TWO, SplitCount::THREE),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::B1x1 => "b1x1",
            Scheme::B2x3 => "b2x3",
            Scheme::B3x6 => "b3x6",
            Scheme::B3x9 => "b3x9",
            Scheme::B2x3x5 => "b2x3x5",
        }
    }
}

/// Precision of the bin grouping and final combination. Partial products are
/// always accumulated in FP32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum CombinePrecision {
    #[default]
    Fp32,
    Fp64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProductScheme {
    pub scheme: Scheme,
    pub combine: CombinePrecision,
}

impl ProductScheme {
    pub const fn new(scheme: Scheme, combine: CombinePrecision) -> Self {
        ProductScheme { scheme, combine }
    }

    pub const fn fp32(scheme: Scheme) -> Self {
        Self::new(scheme, CombinePrecision::Fp32)
    }

    pub const fn fp64(scheme: Scheme) -> Self {
        Self::new(scheme, CombinePrecision::Fp64)
    }

    pub fn products(self) -> ProductSet {
        self.scheme.products()
    }

    pub fn splits(self) -> (SplitCount, SplitCount) {
        self.scheme.splits()
    }
}

impl fmt::Display for ProductScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.scheme.name())?;
        if self.combine == CombinePrecision::Fp64 {
            f.write_str("d")?;
        }
        Ok(())
    }
}

impl FromStr for ProductScheme {
    type Err = KernelError;

    /// Parses `b3x6`, `b3x6d` (FP64 combine) and the other scheme names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let (base, combine) = match lower.strip_suffix('d') {
            Some(base) => (base, CombinePrecision::Fp64),
            None => (lower.as_str(), CombinePrecision::Fp32),
        };
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.name() == base)
            .map(|scheme| ProductScheme { scheme, combine })
            .ok_or_else(|| KernelError::UnknownScheme(s.to_string()))
    }
}

/// Every intermediate of a split dot product, kept for bound auditing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialProducts {
    /// `z[i][j]` is the FP32 partial product `Z(i,j)` when it was computed.
    pub z: [[Option<f32>; 3]; 3],
    /// Bin sums `Z(0)..Z(4)`. FP32 values when combining in FP32.
    pub bins: [Option<f64>; 5],
}

impl PartialProducts {
    pub fn get(&self, i: usize, j: usize) -> Option<f32> {
        self.z[i][j]
    }
}

/// Result of [`dot_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitDot {
    /// Final value; exactly an FP32 number when combining in FP32.
    pub value: f64,
    pub partials: PartialProducts,
}

#[inline]
fn add_opt32(a: Option<f32>, b: Option<f32>) -> Option<f32> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a + b),
        (a, None) => a,
        (None, b) => b,
    }
}

#[inline]
fn add_opt64(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a + b),
        (a, None) => a,
        (None, b) => b,
    }
}

/// Groups partial products into bins and adds the bins smallest first:
/// `Z(0) + (Z(1) + (Z(2) + (Z(3) + Z(4))))`, with
/// `Z(1) = Z(0,1) + Z(1,0)`, `Z(2) = Z(0,2) + (Z(1,1) + Z(2,0))`,
/// `Z(3) = Z(1,2) + Z(2,1)`.
#[inline]
fn combine_bins(z: &[[Option<f32>; 3]; 3], combine: CombinePrecision) -> ([Option<f64>; 5], f64) {
    match combine {
        CombinePrecision::Fp32 => {
            let bins = [
                z[0][0],
                add_opt32(z[0][1], z[1][0]),
                add_opt32(z[0][2], add_opt32(z[1][1], z[2][0])),
                add_opt32(z[1][2], z[2][1]),
                z[2][2],
            ];
            let total = bins
                .iter()
                .rev()
                .fold(None, |acc, &b| add_opt32(b, acc))
                .unwrap_or(0.0);
            (bins.map(|b| b.map(f64::from)), f64::from(total))
        }
        CombinePrecision::Fp64 => {
            let w = |i: usize, j: usize| z[i][j].map(f64::from);
            let bins = [
                w(0, 0),
                add_opt64(w(0, 1), w(1, 0)),
                add_opt64(w(0, 2), add_opt64(w(1, 1), w(2, 0))),
                add_opt64(w(1, 2), w(2, 1)),
                w(2, 2),
            ];
            let total = bins
                .iter()
                .rev()
                .fold(None, |acc, &b| add_opt64(b, acc))
                .unwrap_or(0.0);
            (bins, total)
        }
    }
}

/// Sequential FP32 accumulation of `x·y` for bfloat16-valued inputs.
#[inline]
fn accumulate_bf16_values(x: &[f32], y: &[f32]) -> f32 {
    let mut acc = 0.0f32;
    for (&a, &b) in x.iter().zip(y) {
        // Exact product, one rounding in the add.
        acc += a * b;
    }
    acc
}

/// One partial product `Z(i,j)`: a BF16 FMA chain accumulating in FP32.
pub fn partial_dot(x: &[Bf16], y: &[Bf16]) -> Result<f32, KernelError> {
    if x.len() != y.len() {
        return Err(KernelError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let mut acc = 0.0f32;
    for (a, b) in x.iter().zip(y) {
        acc += a.to_f32() * b.to_f32();
    }
    Ok(acc)
}

fn check_splits(
    label: impl fmt::Display,
    products: ProductSet,
    have: (SplitCount, SplitCount),
    exact: Option<(SplitCount, SplitCount)>,
) -> Result<(), KernelError> {
    let (need_x, need_y) = match exact {
        Some((x, y)) => (x.get(), y.get()),
        None => products.required_splits(),
    };
    let ok = match exact {
        Some(_) => have.0.get() == need_x && have.1.get() == need_y,
        None => have.0.get() >= need_x && have.1.get() >= need_y,
    };
    if ok {
        Ok(())
    } else {
        Err(KernelError::SchemeMismatch {
            scheme: label.to_string(),
            need_x,
            need_y,
            have_x: have.0.get(),
            have_y: have.1.get(),
        })
    }
}

/// Split dot product under a named scheme. Operand split counts must match
/// the scheme exactly.
pub fn dot_split(
    x: &SplitVector,
    y: &SplitVector,
    scheme: ProductScheme,
) -> Result<SplitDot, KernelError> {
    check_splits(
        scheme,
        scheme.products(),
        (x.count(), y.count()),
        Some(scheme.splits()),
    )?;
    dot_split_products(x, y, scheme.products(), scheme.combine)
}

/// Split dot product over an arbitrary product selection.
pub fn dot_split_products(
    x: &SplitVector,
    y: &SplitVector,
    products: ProductSet,
    combine: CombinePrecision,
) -> Result<SplitDot, KernelError> {
    if x.len() != y.len() {
        return Err(KernelError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    check_splits(
        format_args!("{products:?}"),
        products,
        (x.count(), y.count()),
        None,
    )?;
    let xs: Vec<Vec<f32>> = (0..x.count().get()).map(|i| x.component_f32(i)).collect();
    let ys: Vec<Vec<f32>> = (0..y.count().get()).map(|j| y.component_f32(j)).collect();
    let mut z = [[None; 3]; 3];
    for (i, j) in products.pairs() {
        z[i][j] = Some(accumulate_bf16_values(&xs[i], &ys[j]));
    }
    let (bins, value) = combine_bins(&z, combine);
    Ok(SplitDot {
        value,
        partials: PartialProducts { z, bins },
    })
}

/// Reference FP32 dot product: one correctly rounded FMA per element.
pub fn dot_f32_reference(x: &[f32], y: &[f32]) -> Result<f32, KernelError> {
    if x.len() != y.len() {
        return Err(KernelError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    Ok(x.iter().zip(y).fold(0.0f32, |acc, (&a, &b)| fma_f32(a, b, acc)))
}

fn check_gemm_dims(m: usize, k: usize, k2: usize, n: usize) -> Result<(), KernelError> {
    if k == k2 {
        Ok(())
    } else {
        Err(KernelError::DimensionMismatch { m, k, k2, n })
    }
}

/// `C = A·B` for bfloat16-valued row-major operands, accumulating each
/// element sequentially over `k` in FP32.
fn gemm_bf16_values(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut c = vec![0.0f32; m * n];
    for (a_row, c_row) in a.chunks_exact(k.max(1)).zip(c.chunks_exact_mut(n.max(1))) {
        for (&av, b_row) in a_row.iter().zip(b.chunks_exact(n.max(1))) {
            for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                *cv += av * bv;
            }
        }
    }
    c
}

/// Split GEMM under a named scheme.
pub fn gemm_split(
    a: &SplitMatrix,
    b: &SplitMatrix,
    scheme: ProductScheme,
) -> Result<Matrix<f64>, KernelError> {
    check_splits(
        scheme,
        scheme.products(),
        (a.count(), b.count()),
        Some(scheme.splits()),
    )?;
    gemm_split_products(a, b, scheme.products(), scheme.combine)
}

/// Split GEMM over an arbitrary product selection.
pub fn gemm_split_products(
    a: &SplitMatrix,
    b: &SplitMatrix,
    products: ProductSet,
    combine: CombinePrecision,
) -> Result<Matrix<f64>, KernelError> {
    let (m, k, k2, n) = (a.rows(), a.cols(), b.rows(), b.cols());
    check_gemm_dims(m, k, k2, n)?;
    check_splits(
        format_args!("{products:?}"),
        products,
        (a.count(), b.count()),
        None,
    )?;
    let mut partials: [[Option<Vec<f32>>; 3]; 3] = Default::default();
    for (i, j) in products.pairs() {
        partials[i][j] = Some(gemm_bf16_values(
            &a.component_f32(i),
            &b.component_f32(j),
            m,
            k,
            n,
        ));
    }
    let mut out = Vec::with_capacity(m * n);
    for idx in 0..m * n {
        let mut z = [[None; 3]; 3];
        for (i, j) in products.pairs() {
            z[i][j] = partials[i][j].as_ref().map(|p| p[idx]);
        }
        out.push(combine_bins(&z, combine).1);
    }
    Ok(Matrix::from_vec(m, n, out))
}

/// Splits two FP32 matrices as the scheme requires and multiplies them.
pub fn gemm_split_f32(
    a: &Matrix<f32>,
    b: &Matrix<f32>,
    scheme: ProductScheme,
) -> Result<Matrix<f64>, KernelError> {
    check_gemm_dims(a.rows(), a.cols(), b.rows(), b.cols())?;
    let (ka, kb) = scheme.splits();
    let sa = crate::split::split_matrix(a.as_slice(), a.rows(), a.cols(), ka)?;
    let sb = crate::split::split_matrix(b.as_slice(), b.rows(), b.cols(), kb)?;
    gemm_split(&sa, &sb, scheme)
}

/// Reference FP32 GEMM: each element follows [`dot_f32_reference`].
pub fn gemm_f32_reference(a: &Matrix<f32>, b: &Matrix<f32>) -> Result<Matrix<f32>, KernelError> {
    let (m, k, k2, n) = (a.rows(), a.cols(), b.rows(), b.cols());
    check_gemm_dims(m, k, k2, n)?;
    let mut c = vec![0.0f32; m * n];
    if k > 0 && n > 0 {
        for (a_row, c_row) in a.as_slice().chunks_exact(k).zip(c.chunks_exact_mut(n)) {
            for (&av, b_row) in a_row.iter().zip(b.as_slice().chunks_exact(n)) {
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv = fma_f32(av, bv, *cv);
                }
            }
        }
    }
    Ok(Matrix::from_vec(m, n, c))
}

/// FP64 GEMM, the oracle baseline.
pub fn gemm_f64_reference(a: &Matrix<f64>, b: &Matrix<f64>) -> Result<Matrix<f64>, KernelError> {
    let (m, k, k2, n) = (a.rows(), a.cols(), b.rows(), b.cols());
    check_gemm_dims(m, k, k2, n)?;
    let mut c = vec![0.0f64; m * n];
    if k > 0 && n > 0 {
        for (a_row, c_row) in a.as_slice().chunks_exact(k).zip(c.chunks_exact_mut(n)) {
            for (&av, b_row) in a_row.iter().zip(b.as_slice().chunks_exact(n)) {
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv += av * bv;
                }
            }
        }
    }
    Ok(Matrix::from_vec(m, n, c))
}

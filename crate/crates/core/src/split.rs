//! Decomposition of FP32 values into one to three bfloat16 components.
//!
//! Component `i` is the bfloat16 rounding of what remains after subtracting
//! components `0..i` from the source, with each subtraction done in FP32.
//! For sources whose exponent is at least [`SAFE_MIN_EXPONENT`], three
//! components carry all 24 significant bits and the split is exact. A first
//! component that would round to infinity saturates at the largest finite
//! bfloat16 instead.

use crate::precision::{bf16_to_f32, round_f32_to_bf16, Bf16, RoundingConfig};
use thiserror::Error;

/// Smallest source exponent for which a three-way split is exact: the third
/// component sits 16 binades below the first and must stay above the
/// bfloat16 subnormal floor.
pub const SAFE_MIN_EXPONENT: i32 = -110;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SplitError {
    #[error("split count must be 1, 2 or 3, got {0}")]
    InvalidCount(usize),
    #[error("cannot split non-finite value {0}")]
    NonFinite(f32),
    #[error("cannot split non-finite value {value} at ({row}, {col})")]
    NonFiniteAt { row: usize, col: usize, value: f32 },
    #[error("dimension mismatch: {rows}x{cols} needs {expected} elements, got {actual}")]
    Shape {
        rows: usize,
        cols: usize,
        expected: usize,
        actual: usize,
    },
}

/// Number of bfloat16 components, 1 to 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SplitCount(u8);

impl SplitCount {
    pub const ONE: SplitCount = SplitCount(1);
    pub const TWO: SplitCount = SplitCount(2);
    pub const THREE: SplitCount = SplitCount(3);

    pub fn new(k: usize) -> Result<SplitCount, SplitError> {
        match k {
            1..=3 => Ok(SplitCount(k as u8)),
            _ => Err(SplitError::InvalidCount(k)),
        }
    }

    #[inline]
    pub fn get(self) -> usize {
        usize::from(self.0)
    }
}

impl TryFrom<usize> for SplitCount {
    type Error = SplitError;

    fn try_from(k: usize) -> Result<Self, Self::Error> {
        SplitCount::new(k)
    }
}

/// An FP32 value held as `k` bfloat16 components of decreasing magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitScalar {
    parts: [Bf16; 3],
    count: SplitCount,
}

impl SplitScalar {
    pub fn count(&self) -> SplitCount {
        self.count
    }

    pub fn components(&self) -> &[Bf16] {
        &self.parts[..self.count.get()]
    }

    pub fn component(&self, i: usize) -> Bf16 {
        self.components()[i]
    }

    /// Exact FP64 sum of the widened components.
    pub fn recombine(&self) -> f64 {
        recombine(self)
    }
}

/// Splits `a` into `k` components with IEEE conversions.
pub fn split_scalar(a: f32, k: SplitCount) -> Result<SplitScalar, SplitError> {
    split_scalar_with(a, k, RoundingConfig::IEEE)
}

/// Splits `a` into `k` components using the given conversion options.
pub fn split_scalar_with(
    a: f32,
    k: SplitCount,
    cfg: RoundingConfig,
) -> Result<SplitScalar, SplitError> {
    if !a.is_finite() {
        return Err(SplitError::NonFinite(a));
    }
    Ok(split_finite(a, k, cfg))
}

#[inline]
fn split_finite(a: f32, k: SplitCount, cfg: RoundingConfig) -> SplitScalar {
    let mut parts = [Bf16::ZERO; 3];
    let mut rest = a;
    for part in parts.iter_mut().take(k.get()) {
        let mut b = round_f32_to_bf16(rest, cfg);
        if !b.is_finite() {
            // Within half a BF16 ulp of FP32's max the rounding overflows;
            // saturate so the residual stays finite and exact.
            b = Bf16::from_bits(Bf16::MAX.to_bits() | (b.to_bits() & 0x8000));
        }
        *part = b;
        rest -= bf16_to_f32(*part);
    }
    SplitScalar { parts, count: k }
}

/// Exact FP64 sum of the widened components of `s`.
///
/// Three components span at most 24 significant bits plus alignment gaps well
/// inside FP64's 53, so no rounding occurs.
pub fn recombine(s: &SplitScalar) -> f64 {
    s.components()
        .iter()
        .rev()
        .map(|p| p.to_f64())
        .sum::<f64>()
}

/// Unbiased binary exponent of a nonzero finite FP32 value (subnormals report
/// the exponent of their leading bit).
pub fn exponent_of(a: f32) -> Option<i32> {
    if a == 0.0 || !a.is_finite() {
        return None;
    }
    let field = ((a.to_bits() >> 23) & 0xFF) as i32;
    if field != 0 {
        Some(field - 127)
    } else {
        let man = a.to_bits() & 0x007F_FFFF;
        Some(-127 - (man.leading_zeros() as i32 - 9))
    }
}

/// Whether `a` is zero or has an exponent inside the exact-split range.
pub fn in_safe_range(a: f32) -> bool {
    exponent_of(a).is_none_or(|e| e >= SAFE_MIN_EXPONENT)
}

/// Where a split operand came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Matrix,
    Vector,
}

/// A dense row-major FP32 matrix split elementwise into `k` bfloat16 matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitMatrix {
    rows: usize,
    cols: usize,
    components: Vec<Vec<Bf16>>,
    source_kind: SourceKind,
    unsafe_exponents: usize,
}

impl SplitMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn count(&self) -> SplitCount {
        SplitCount(self.components.len() as u8)
    }

    pub fn source_kind(&self) -> SourceKind {
        self.source_kind
    }

    /// Number of nonzero source elements whose exponent is below
    /// [`SAFE_MIN_EXPONENT`] (their split may drop low-order bits).
    pub fn unsafe_exponent_count(&self) -> usize {
        self.unsafe_exponents
    }

    pub fn component(&self, i: usize) -> &[Bf16] {
        &self.components[i]
    }

    /// Component `i` widened to FP32, row-major.
    pub fn component_f32(&self, i: usize) -> Vec<f32> {
        self.components[i].iter().map(|p| p.to_f32()).collect()
    }

    /// The split of element `(r, c)`.
    pub fn element(&self, r: usize, c: usize) -> SplitScalar {
        let idx = r * self.cols + c;
        let mut parts = [Bf16::ZERO; 3];
        for (i, comp) in self.components.iter().enumerate() {
            parts[i] = comp[idx];
        }
        SplitScalar {
            parts,
            count: self.count(),
        }
    }

    /// Exact FP64 recombination of every element, row-major.
    pub fn recombine(&self) -> Vec<f64> {
        (0..self.rows * self.cols)
            .map(|idx| {
                self.components
                    .iter()
                    .rev()
                    .map(|c| c[idx].to_f64())
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Splits a row-major `rows x cols` FP32 matrix.
pub fn split_matrix(
    data: &[f32],
    rows: usize,
    cols: usize,
    k: SplitCount,
) -> Result<SplitMatrix, SplitError> {
    split_dense(data, rows, cols, k, SourceKind::Matrix)
}

fn split_dense(
    data: &[f32],
    rows: usize,
    cols: usize,
    k: SplitCount,
    source_kind: SourceKind,
) -> Result<SplitMatrix, SplitError> {
    if data.len() != rows * cols {
        return Err(SplitError::Shape {
            rows,
            cols,
            expected: rows * cols,
            actual: data.len(),
        });
    }
    let mut components = vec![Vec::with_capacity(data.len()); k.get()];
    let mut unsafe_exponents = 0;
    for (idx, &a) in data.iter().enumerate() {
        if !a.is_finite() {
            return Err(SplitError::NonFiniteAt {
                row: idx / cols.max(1),
                col: idx % cols.max(1),
                value: a,
            });
        }
        if !in_safe_range(a) {
            unsafe_exponents += 1;
        }
        let s = split_finite(a, k, RoundingConfig::IEEE);
        for (comp, &p) in components.iter_mut().zip(s.components()) {
            comp.push(p);
        }
    }
    Ok(SplitMatrix {
        rows,
        cols,
        components,
        source_kind,
        unsafe_exponents,
    })
}

/// An FP32 vector split elementwise into `k` bfloat16 vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitVector(SplitMatrix);

impl SplitVector {
    pub fn new(data: &[f32], k: SplitCount) -> Result<SplitVector, SplitError> {
        split_dense(data, data.len(), 1, k, SourceKind::Vector).map(SplitVector)
    }

    pub fn len(&self) -> usize {
        self.0.rows
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows == 0
    }

    pub fn count(&self) -> SplitCount {
        self.0.count()
    }

    pub fn component(&self, i: usize) -> &[Bf16] {
        self.0.component(i)
    }

    pub fn component_f32(&self, i: usize) -> Vec<f32> {
        self.0.component_f32(i)
    }

    pub fn element(&self, i: usize) -> SplitScalar {
        self.0.element(i, 0)
    }

    pub fn recombine(&self) -> Vec<f64> {
        self.0.recombine()
    }

    pub fn as_matrix(&self) -> &SplitMatrix {
        &self.0
    }
}

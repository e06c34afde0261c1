//! Rounding-error models, FP64 oracles and error aggregation.

use crate::kernels::PartialProducts;
use crate::matrix::Matrix;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// FP32 unit roundoff.
pub const EPS_F: f64 = 1.0 / 16_777_216.0; // 2^-24
/// bfloat16 unit roundoff.
pub const EPS_B: f64 = 1.0 / 256.0; // 2^-8
/// FP64 unit roundoff.
pub const EPS_D: f64 = f64::EPSILON / 2.0; // 2^-53

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("shape mismatch: {0} vs {1} elements")]
    ShapeMismatch(usize, usize),
    #[error("oracle has zero norm")]
    ZeroOracle,
    #[error("every denominator is zero or non-finite ({0} elements)")]
    AllDenominatorsZero(usize),
    #[error("unknown bound kind {0:?}")]
    UnknownBound(String),
    #[error("inputs do not satisfy the exact-accumulation condition")]
    NotExactCase,
}

/// `k·eps / (1 - k·eps)`, infinite once `k·eps >= 1`.
pub fn gamma(k: usize, eps: f64) -> f64 {
    let ke = k as f64 * eps;
    if ke >= 1.0 {
        f64::INFINITY
    } else {
        ke / (1.0 - ke)
    }
}

/// The unit roundoffs entering the dot-product bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub eps_f: f64,
    pub eps_b: f64,
}

impl Default for ErrorModel {
    fn default() -> Self {
        ErrorModel {
            eps_f: EPS_F,
            eps_b: EPS_B,
        }
    }
}

impl ErrorModel {
    pub fn gamma_f(&self, k: usize) -> f64 {
        gamma(k, self.eps_f)
    }

    pub fn gamma_b(&self, k: usize) -> f64 {
        gamma(k, self.eps_b)
    }
}

/// Relative error aggregate against an FP64 oracle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub mean_rel: f64,
    pub max_rel: f64,
    /// This method's mean divided by a reference method's mean, if attached.
    pub ratio_vs_reference: Option<f64>,
    pub sample_count: usize,
    sum_rel: f64,
}

impl ErrorStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        samples.iter().fold(ErrorStats::default(), |s, &e| s.push(e))
    }

    #[must_use]
    pub fn push(self, rel: f64) -> Self {
        self.merge(&ErrorStats {
            mean_rel: rel,
            max_rel: rel,
            ratio_vs_reference: None,
            sample_count: 1,
            sum_rel: rel,
        })
    }

    #[must_use]
    pub fn merge(self, other: &ErrorStats) -> Self {
        let sum_rel = self.sum_rel + other.sum_rel;
        let sample_count = self.sample_count + other.sample_count;
        ErrorStats {
            mean_rel: if sample_count == 0 {
                0.0
            } else {
                sum_rel / sample_count as f64
            },
            max_rel: self.max_rel.max(other.max_rel),
            ratio_vs_reference: None,
            sample_count,
            sum_rel,
        }
    }

    #[must_use]
    pub fn with_reference(mut self, reference: &ErrorStats) -> Self {
        self.ratio_vs_reference = Some(self.mean_rel / reference.mean_rel);
        self
    }
}

/// `‖computed − oracle‖_F / ‖oracle‖_F`, accumulated in FP64.
pub fn rel_frobenius_error(computed: &[f64], oracle: &[f64]) -> Result<f64, MetricsError> {
    if computed.len() != oracle.len() {
        return Err(MetricsError::ShapeMismatch(computed.len(), oracle.len()));
    }
    let (diff, norm) = computed
        .iter()
        .zip(oracle)
        .fold((0.0f64, 0.0f64), |(d, o), (&c, &r)| {
            (d + (c - r) * (c - r), o + r * r)
        });
    if norm == 0.0 {
        return Err(MetricsError::ZeroOracle);
    }
    Ok((diff / norm).sqrt())
}

/// [`rel_frobenius_error`] for matrices.
pub fn rel_frobenius_error_matrix(
    computed: &Matrix<f64>,
    oracle: &Matrix<f64>,
) -> Result<f64, MetricsError> {
    if computed.shape() != oracle.shape() {
        return Err(MetricsError::ShapeMismatch(
            computed.as_slice().len(),
            oracle.as_slice().len(),
        ));
    }
    rel_frobenius_error(computed.as_slice(), oracle.as_slice())
}

/// Mean elementwise ratio of two error fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioSummary {
    pub mean: f64,
    /// Elements that contributed to the mean.
    pub used: usize,
    /// Elements skipped for a zero denominator or a non-finite ratio.
    pub excluded: usize,
}

/// Mean over elements of `a_err / b_err`. Elements with a zero denominator
/// (or a non-finite ratio) are left out and counted.
pub fn elementwise_error_ratio(a_err: &[f64], b_err: &[f64]) -> Result<RatioSummary, MetricsError> {
    if a_err.len() != b_err.len() {
        return Err(MetricsError::ShapeMismatch(a_err.len(), b_err.len()));
    }
    let mut sum = 0.0;
    let mut used = 0;
    for (&a, &b) in a_err.iter().zip(b_err) {
        let r = a / b;
        if b != 0.0 && r.is_finite() {
            sum += r;
            used += 1;
        }
    }
    if used == 0 {
        return Err(MetricsError::AllDenominatorsZero(a_err.len()));
    }
    Ok(RatioSummary {
        mean: sum / used as f64,
        used,
        excluded: a_err.len() - used,
    })
}

/// `a + b` with its rounding error.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bp = s - a;
    (s, (a - (s - bp)) + (b - bp))
}

/// Oracle values for an FP32 dot product: `z = xᵀy` and `z̃ = |x|ᵀ|y|`.
///
/// Each FP32 product is exact in FP64; `z` is summed with a cascaded
/// compensated sum, so its error is far below any FP32-level bound.
pub fn dot_oracle(x: &[f32], y: &[f32]) -> (f64, f64) {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    let mut abs = 0.0f64;
    for (&a, &b) in x.iter().zip(y) {
        let p = f64::from(a) * f64::from(b);
        let (t, e) = two_sum(s, p);
        s = t;
        c += e;
        abs += p.abs();
    }
    (s + c, abs)
}

/// Exact `⌈log₂ v⌉` for positive finite `v`.
pub fn ceil_log2(v: f64) -> i32 {
    assert!(v > 0.0 && v.is_finite(), "ceil_log2 of {v}");
    let bits = v.to_bits();
    let field = ((bits >> 52) & 0x7FF) as i32;
    let man = bits & ((1u64 << 52) - 1);
    if field == 0 {
        // Subnormal: value = man * 2^-1074.
        let top = 63 - man.leading_zeros() as i32;
        let pow = man.is_power_of_two();
        return top - 1074 + i32::from(!pow);
    }
    field - 1023 + i32::from(man != 0)
}

fn product_extremes(x: &[f32], y: &[f32]) -> Option<(f64, f64)> {
    x.iter()
        .zip(y)
        .map(|(&a, &b)| (f64::from(a) * f64::from(b)).abs())
        .filter(|&p| p > 0.0)
        .fold(None, |acc, p| match acc {
            None => Some((p, p)),
            Some((lo, hi)) => Some((lo.min(p), hi.max(p))),
        })
}

/// The exact-accumulation condition as usually stated:
/// `⌈log₂(1.01·max|x y|)⌉ − 23 ≤ ⌈log₂(0.99·min|x y|)⌉ − 15`, over the
/// nonzero products. It ignores the growth of partial sums with `n`.
pub fn exact_accumulation_condition(x: &[f32], y: &[f32]) -> bool {
    match product_extremes(x, y) {
        None => true,
        Some((lo, hi)) => ceil_log2(1.01 * hi) - 23 <= ceil_log2(0.99 * lo) - 15,
    }
}

/// A sufficient version of the condition. Partial sums may grow to
/// `n·max|x y|`, and a level-0 product whose significands multiply past 2
/// has its lowest bit 16 (not 15) places below its leading binade. When it
/// holds, the level-0 partial product `Z(0,0)` is computed exactly.
pub fn exact_accumulation_guaranteed(x: &[f32], y: &[f32]) -> bool {
    let n = x.len().min(y.len());
    match product_extremes(x, y) {
        None => true,
        Some((lo, hi)) => {
            let growth = if n <= 1 { 0 } else { ceil_log2(n as f64) };
            ceil_log2(1.01 * hi) + growth - 23 <= ceil_log2(0.99 * lo) - 16
        }
    }
}

/// Whether every computed `|Z(i,j)|` stays within `1.01·ε_b^(i+j)·z̃`.
pub fn partials_within_bins(partials: &PartialProducts, z_tilde: f64) -> bool {
    (0..3).all(|i| {
        (0..3).all(|j| match partials.z[i][j] {
            None => true,
            Some(z) => f64::from(z).abs() <= 1.01 * EPS_B.powi((i + j) as i32) * z_tilde,
        })
    })
}

/// Named dot-product error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// `|Z − z| ≤ γ_n z̃` for the FP32 FMA reference.
    Fp32Dot,
    /// `|Z₂ − z| ≤ 1.01 (γ_{n+2} + ε_b³) z̃` for the six-product split sum.
    Bf16Z2,
    /// `|Z₂ − z| ≤ 1.01 γ_3 z̃` when the level-0 accumulation is exact.
    Bf16Z2ExactCase,
}

impl BoundKind {
    pub const ALL: [BoundKind; 3] = [BoundKind::Fp32Dot, BoundKind::Bf16Z2, BoundKind::Bf16Z2ExactCase];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Fp32Dot => "fp32_dot",
            BoundKind::Bf16Z2 => "bf16_z2",
            BoundKind::Bf16Z2ExactCase => "bf16_z2_exact_case",
        }
    }

    /// The bound's coefficient of `z̃` for length `n`.
    pub fn coefficient(self, n: usize) -> f64 {
        match self {
            BoundKind::Fp32Dot => gamma(n, EPS_F),
            BoundKind::Bf16Z2 => 1.01 * (gamma(n + 2, EPS_F) + EPS_B.powi(3)),
            BoundKind::Bf16Z2ExactCase => 1.01 * gamma(3, EPS_F),
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| MetricsError::UnknownBound(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub kind: BoundKind,
    pub error: f64,
    pub bound: f64,
    /// `bound − error`; negative means a violation.
    pub slack: f64,
    pub pass: bool,
}

/// Evaluates a named bound for `computed ≈ xᵀy` against the FP64 oracle.
pub fn check_bound(
    kind: BoundKind,
    x: &[f32],
    y: &[f32],
    computed: f64,
) -> Result<BoundCheck, MetricsError> {
    if x.len() != y.len() {
        return Err(MetricsError::ShapeMismatch(x.len(), y.len()));
    }
    if kind == BoundKind::Bf16Z2ExactCase && !exact_accumulation_guaranteed(x, y) {
        return Err(MetricsError::NotExactCase);
    }
    let (z, z_tilde) = dot_oracle(x, y);
    let error = (computed - z).abs();
    let bound = kind.coefficient(x.len()) * z_tilde;
    Ok(BoundCheck {
        kind,
        error,
        bound,
        slack: bound - error,
        pass: error <= bound,
    })
}

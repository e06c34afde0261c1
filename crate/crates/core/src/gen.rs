//! Seeded input generators.
//!
//! Every generator draws from a ChaCha8 stream (`rand_chacha::ChaCha8Rng`)
//! seeded with `seed_from_u64(spec.seed)`, so a spec and seed always produce
//! the same bits. Normal deviates use the Box–Muller transform.

use crate::matrix::Matrix;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use thiserror::Error;

/// Exponent field 1, mantissa bit 16 set, bits 0..15 all set
/// (about 1.1939e-38).
pub const SMALL_EXPONENT_PATTERN: u32 = 0x0081_FFFF;

/// Like [`SMALL_EXPONENT_PATTERN`] with bit 15 clear: under round-to-nearest
/// the low 16 bits then fall below the tie, so a three-way split keeps only
/// the top 8 significant bits and drops the rest.
pub const SMALL_EXPONENT_LOSSY_PATTERN: u32 = 0x0081_7FFF;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
}

/// Input distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GenKind {
    /// FP64 uniform in `[lo, hi]`, rounded to FP32.
    UniformRange { lo: f64, hi: f64 },
    /// Uniform sign, uniform unbiased exponent in `[min_exp, max_exp]`,
    /// uniform 23 mantissa bits. Never subnormal, infinite or NaN.
    WideExponent { min_exp: i32, max_exp: i32 },
    /// Unbiased exponent `round(mean + sigma·N(0,1))` clamped to the normal
    /// FP32 range; uniform sign and mantissa.
    GaussianExponent { mean: f64, sigma: f64 },
    /// `Q1·diag(σ)·Q2ᵀ` with `σ` geometric from 1 down to `1/cond` and
    /// `Q1`, `Q2` the orthogonal factors of Gaussian matrices.
    Conditioned { n: usize, cond: f64 },
    /// Uniform `[-1, 1]` off-diagonal entries; each diagonal entry is one
    /// more than the larger of its row and column off-diagonal absolute sums.
    DiagDominant { n: usize },
    /// Random sign, exponent field 1, mantissa bit 16 set, bits 15..22 clear
    /// and random low bits: values just above 1.18e-38 whose three-way split
    /// loses their low mantissa bits.
    AdversarialSmallExponent,
}

impl GenKind {
    pub const UNIFORM_UNIT: GenKind = GenKind::UniformRange { lo: -1.0, hi: 1.0 };

    /// Full normal FP32 exponent range (fields 1..=254).
    pub const fn wide() -> GenKind {
        GenKind::WideExponent {
            min_exp: -126,
            max_exp: 127,
        }
    }

    pub const fn gaussian() -> GenKind {
        GenKind::GaussianExponent {
            mean: 0.0,
            sigma: 8.0,
        }
    }

    fn validate(&self) -> Result<(), GenError> {
        let bad = |msg: String| Err(GenError::InvalidSpec(msg));
        match *self {
            GenKind::UniformRange { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                    return bad(format!("uniform range [{lo}, {hi}]"));
                }
            }
            GenKind::WideExponent { min_exp, max_exp } => {
                if !(-126..=127).contains(&min_exp)
                    || !(-126..=127).contains(&max_exp)
                    || min_exp > max_exp
                {
                    return bad(format!("exponent range [{min_exp}, {max_exp}]"));
                }
            }
            GenKind::GaussianExponent { mean, sigma } => {
                if !(mean.is_finite() && sigma.is_finite() && sigma >= 0.0) {
                    return bad(format!("gaussian exponent mean {mean} sigma {sigma}"));
                }
            }
            GenKind::Conditioned { n, cond } => {
                if n == 0 || !(cond.is_finite() && cond >= 1.0) {
                    return bad(format!("conditioned n={n} cond={cond}"));
                }
            }
            GenKind::DiagDominant { n } => {
                if n == 0 {
                    return bad("diagonally dominant n=0".into());
                }
            }
            GenKind::AdversarialSmallExponent => {}
        }
        Ok(())
    }
}

/// A generator kind with its seed and output shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub kind: GenKind,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
}

impl GenSpec {
    pub fn new(kind: GenKind, seed: u64, rows: usize, cols: usize) -> Self {
        GenSpec {
            kind,
            seed,
            rows,
            cols,
        }
    }

    /// Square spec; the shape comes from the kind when it carries one.
    pub fn square(kind: GenKind, seed: u64, n: usize) -> Self {
        let n = match kind {
            GenKind::Conditioned { n, .. } | GenKind::DiagDominant { n } => n,
            _ => n,
        };
        GenSpec::new(kind, seed, n, n)
    }
}

/// Box–Muller normal deviates, both values of each pair used.
struct BoxMuller {
    spare: Option<f64>,
}

impl BoxMuller {
    fn new() -> Self {
        BoxMuller { spare: None }
    }

    fn sample(&mut self, rng: &mut impl Rng) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }
}

fn compose(negative: bool, exp: i32, mantissa: u32) -> f32 {
    let sign = u32::from(negative) << 31;
    let field = (exp + 127) as u32;
    f32::from_bits(sign | (field << 23) | (mantissa & 0x007F_FFFF))
}

fn scalar_stream(kind: GenKind, rng: &mut ChaCha8Rng, count: usize) -> Vec<f32> {
    let mut bm = BoxMuller::new();
    (0..count)
        .map(|_| match kind {
            GenKind::UniformRange { lo, hi } => (lo + (hi - lo) * rng.random::<f64>()) as f32,
            GenKind::WideExponent { min_exp, max_exp } => {
                let negative = rng.random::<bool>();
                let exp = rng.random_range(min_exp..=max_exp);
                compose(negative, exp, rng.random::<u32>())
            }
            GenKind::GaussianExponent { mean, sigma } => {
                let negative = rng.random::<bool>();
                let exp = (mean + sigma * bm.sample(rng)).round().clamp(-126.0, 127.0) as i32;
                compose(negative, exp, rng.random::<u32>())
            }
            GenKind::AdversarialSmallExponent => {
                let negative = rng.random::<bool>();
                let low = rng.random::<u32>() & 0x7FFF;
                compose(negative, -126, 0x0001_0000 | low)
            }
            GenKind::Conditioned { .. } | GenKind::DiagDominant { .. } => {
                unreachable!("matrix-only kinds are handled by gen_matrix")
            }
        })
        .collect()
}

fn conditioned(n: usize, cond: f64, rng: &mut ChaCha8Rng) -> Matrix<f32> {
    let mut bm = BoxMuller::new();
    let mut gaussian = || DMatrix::<f64>::from_fn(n, n, |_, _| bm.sample(rng));
    let q1 = gaussian().qr().q();
    let q2 = gaussian().qr().q();
    let sigma: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                1.0
            } else {
                cond.powf(-(i as f64) / (n - 1) as f64)
            }
        })
        .collect();
    let scaled = DMatrix::from_fn(n, n, |r, c| q1[(r, c)] * sigma[c]);
    let a = scaled * q2.transpose();
    Matrix::from_fn(n, n, |r, c| a[(r, c)] as f32)
}

fn diag_dominant(n: usize, rng: &mut ChaCha8Rng) -> Matrix<f32> {
    let mut m = Matrix::from_fn(n, n, |r, c| {
        if r == c {
            0.0
        } else {
            (-1.0 + 2.0 * rng.random::<f64>()) as f32
        }
    });
    for i in 0..n {
        let row: f64 = (0..n).map(|j| f64::from(m[(i, j)]).abs()).sum();
        let col: f64 = (0..n).map(|j| f64::from(m[(j, i)]).abs()).sum();
        // Rounded up so the FP32 diagonal still strictly dominates.
        let d = row.max(col) + 1.0;
        let mut df = d as f32;
        if f64::from(df) < d {
            df = f32::from_bits(df.to_bits() + 1);
        }
        m[(i, i)] = df;
    }
    m
}

/// Draws a matrix for `spec`.
pub fn gen_matrix(spec: &GenSpec) -> Result<Matrix<f32>, GenError> {
    spec.kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        GenKind::Conditioned { n, cond } => {
            check_square(spec, n)?;
            Ok(conditioned(n, cond, &mut rng))
        }
        GenKind::DiagDominant { n } => {
            check_square(spec, n)?;
            Ok(diag_dominant(n, &mut rng))
        }
        kind => Ok(Matrix::from_vec(
            spec.rows,
            spec.cols,
            scalar_stream(kind, &mut rng, spec.rows * spec.cols),
        )),
    }
}

fn check_square(spec: &GenSpec, n: usize) -> Result<(), GenError> {
    if spec.rows == n && spec.cols == n {
        Ok(())
    } else {
        Err(GenError::InvalidSpec(format!(
            "{:?} needs a {n}x{n} shape, got {}x{}",
            spec.kind, spec.rows, spec.cols
        )))
    }
}

/// Draws a length-`n` vector with `spec`'s distribution and seed.
pub fn gen_vector(spec: &GenSpec, n: usize) -> Result<Vec<f32>, GenError> {
    spec.kind.validate()?;
    match spec.kind {
        GenKind::Conditioned { .. } | GenKind::DiagDominant { .. } => Err(GenError::InvalidSpec(
            format!("{:?} only generates matrices", spec.kind),
        )),
        kind => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            Ok(scalar_stream(kind, &mut rng, n))
        }
    }
}

/// Derives an independent seed from a master seed and a stream label, so
/// trials can be generated in any order. SplitMix64 finalizer.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_stays_in_range() {
        let m = gen_matrix(&GenSpec::new(GenKind::UNIFORM_UNIT, 7, 4, 4)).unwrap();
        assert!(m.as_slice().iter().all(|v| (-1.0..=1.0).contains(v)));
    }

    #[test]
    fn empty_vector() {
        let v = gen_vector(&GenSpec::new(GenKind::UNIFORM_UNIT, 1, 0, 0), 0).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        for kind in [
            GenKind::UNIFORM_UNIT,
            GenKind::wide(),
            GenKind::gaussian(),
            GenKind::AdversarialSmallExponent,
        ] {
            let spec = GenSpec::new(kind, 99, 1, 1);
            assert_eq!(gen_vector(&spec, 257).unwrap(), gen_vector(&spec, 257).unwrap());
            let other = GenSpec { seed: 100, ..spec };
            assert_ne!(gen_vector(&spec, 257).unwrap(), gen_vector(&other, 257).unwrap());
        }
        let spec = GenSpec::square(GenKind::Conditioned { n: 8, cond: 100.0 }, 3, 8);
        assert_eq!(gen_matrix(&spec).unwrap(), gen_matrix(&spec).unwrap());
    }

    #[test]
    fn wide_never_emits_specials() {
        let v = gen_vector(&GenSpec::new(GenKind::wide(), 5, 1, 1), 100_000).unwrap();
        assert!(v.iter().all(|x| x.is_normal()));
    }

    #[test]
    fn restricted_wide_range() {
        let kind = GenKind::WideExponent {
            min_exp: -3,
            max_exp: 2,
        };
        let v = gen_vector(&GenSpec::new(kind, 5, 1, 1), 10_000).unwrap();
        assert!(v.iter().all(|x| x.abs() >= 0.125 && x.abs() < 8.0));
    }

    #[test]
    fn adversarial_values() {
        let v = gen_vector(&GenSpec::new(GenKind::AdversarialSmallExponent, 5, 1, 1), 1000).unwrap();
        for x in v {
            let bits = x.to_bits() & 0x7FFF_FFFF;
            assert_eq!(bits >> 16, 0x0081);
            assert_eq!(bits & 0x8000, 0);
            assert!((x.abs() - 1.19e-38).abs() < 0.01e-38);
        }
        assert!((f32::from_bits(SMALL_EXPONENT_PATTERN) - 1.1939e-38).abs() < 1e-42);
    }

    #[test]
    fn diag_dominant_rows_and_columns() {
        let n = 20;
        let m = gen_matrix(&GenSpec::square(GenKind::DiagDominant { n }, 11, n)).unwrap();
        for i in 0..n {
            let row: f32 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            let col: f32 = (0..n).filter(|&j| j != i).map(|j| m[(j, i)].abs()).sum();
            assert!(m[(i, i)] > row && m[(i, i)] > col);
        }
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            GenSpec::new(GenKind::UniformRange { lo: 1.0, hi: -1.0 }, 0, 2, 2),
            GenSpec::new(GenKind::WideExponent { min_exp: -127, max_exp: 3 }, 0, 2, 2),
            GenSpec::square(GenKind::Conditioned { n: 4, cond: 0.5 }, 0, 4),
            GenSpec::new(GenKind::Conditioned { n: 4, cond: 10.0 }, 0, 3, 4),
            GenSpec::square(GenKind::DiagDominant { n: 0 }, 0, 0),
        ];
        for spec in bad {
            assert!(gen_matrix(&spec).is_err(), "{spec:?}");
        }
        let spec = GenSpec::square(GenKind::DiagDominant { n: 3 }, 0, 3);
        assert!(gen_vector(&spec, 3).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), a.len());
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}

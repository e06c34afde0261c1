//! Software emulation of the two 16-bit floating point formats.
//!
//! `Bf16` keeps the FP32 exponent (8 bits, bias 127) and 7 stored mantissa
//! bits; `Fp16` is IEEE binary16 (5 exponent bits, 10 stored mantissa bits).
//! Only conversions are emulated. All arithmetic happens in FP32 or FP64 on
//! widened values, with [`HalfFormat::quantize`] used where a computation must
//! round every intermediate result to a 16-bit format.

use std::fmt;

/// Rounding direction used by every narrowing conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RoundingMode {
    /// Round to nearest, ties to even mantissa.
    #[default]
    NearestEven,
}

/// Conversion options.
///
/// `flush_subnormals` applies to conversion outputs only: a result that would
/// land in the subnormal range of the target format becomes a signed zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundingConfig {
    pub mode: RoundingMode,
    pub flush_subnormals: bool,
}

impl RoundingConfig {
    pub const IEEE: RoundingConfig = RoundingConfig {
        mode: RoundingMode::NearestEven,
        flush_subnormals: false,
    };

    pub const FTZ: RoundingConfig = RoundingConfig {
        mode: RoundingMode::NearestEven,
        flush_subnormals: true,
    };
}

/// A bfloat16 bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Bf16(u16);

/// An IEEE binary16 bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fp16(u16);

impl Bf16 {
    pub const ZERO: Bf16 = Bf16(0x0000);
    pub const NEG_ZERO: Bf16 = Bf16(0x8000);
    pub const ONE: Bf16 = Bf16(0x3F80);
    pub const INFINITY: Bf16 = Bf16(0x7F80);
    pub const NEG_INFINITY: Bf16 = Bf16(0xFF80);
    pub const NAN: Bf16 = Bf16(0x7FC0);
    /// Largest finite value, `(2 - 2^-7) * 2^127`.
    pub const MAX: Bf16 = Bf16(0x7F7F);

    #[inline]
    pub const fn from_bits(bits: u16) -> Bf16 {
        Bf16(bits)
    }

    #[inline]
    pub const fn to_bits(self) -> u16 {
        self.0
    }

    /// Nearest bfloat16 to `x` under IEEE semantics (no flushing).
    #[inline]
    pub fn from_f32(x: f32) -> Bf16 {
        round_f32_to_bf16(x, RoundingConfig::IEEE)
    }

    #[inline]
    pub fn to_f32(self) -> f32 {
        bf16_to_f32(self)
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        f64::from(bf16_to_f32(self))
    }

    pub fn is_nan(self) -> bool {
        self.0 & 0x7F80 == 0x7F80 && self.0 & 0x007F != 0
    }

    pub fn is_finite(self) -> bool {
        self.0 & 0x7F80 != 0x7F80
    }

    pub fn is_zero(self) -> bool {
        self.0 & 0x7FFF == 0
    }

    pub fn is_subnormal(self) -> bool {
        self.0 & 0x7F80 == 0 && self.0 & 0x007F != 0
    }

    /// Biased exponent field (bits 14..7).
    pub fn exponent_field(self) -> u16 {
        (self.0 >> 7) & 0xFF
    }

    /// Stored mantissa field (bits 6..0).
    pub fn mantissa_field(self) -> u16 {
        self.0 & 0x7F
    }
}

impl Fp16 {
    pub const ZERO: Fp16 = Fp16(0x0000);
    pub const ONE: Fp16 = Fp16(0x3C00);
    pub const INFINITY: Fp16 = Fp16(0x7C00);
    pub const NEG_INFINITY: Fp16 = Fp16(0xFC00);
    pub const NAN: Fp16 = Fp16(0x7E00);
    /// Largest finite value, 65504.
    pub const MAX: Fp16 = Fp16(0x7BFF);

    #[inline]
    pub const fn from_bits(bits: u16) -> Fp16 {
        Fp16(bits)
    }

    #[inline]
    pub const fn to_bits(self) -> u16 {
        self.0
    }

    #[inline]
    pub fn from_f32(x: f32) -> Fp16 {
        round_f32_to_fp16(x, RoundingConfig::IEEE)
    }

    #[inline]
    pub fn to_f32(self) -> f32 {
        fp16_to_f32(self)
    }

    pub fn is_nan(self) -> bool {
        self.0 & 0x7C00 == 0x7C00 && self.0 & 0x03FF != 0
    }

    pub fn is_finite(self) -> bool {
        self.0 & 0x7C00 != 0x7C00
    }

    pub fn is_subnormal(self) -> bool {
        self.0 & 0x7C00 == 0 && self.0 & 0x03FF != 0
    }
}

impl fmt::Debug for Bf16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bf16({:#06x} = {:e})", self.0, self.to_f32())
    }
}

impl fmt::Display for Bf16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f32(), f)
    }
}

impl fmt::Debug for Fp16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fp16({:#06x} = {:e})", self.0, self.to_f32())
    }
}

impl fmt::Display for Fp16 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f32(), f)
    }
}

/// Narrows an FP32 value to bfloat16.
///
/// BF16 shares the FP32 layout, so rounding is an integer add on the raw
/// bits: the carry out of the discarded half propagates into the exponent,
/// which handles subnormals, the subnormal/normal boundary and overflow to
/// infinity uniformly.
pub fn round_f32_to_bf16(x: f32, cfg: RoundingConfig) -> Bf16 {
    let bits = x.to_bits();
    if x.is_nan() {
        return Bf16(((bits >> 16) as u16 & 0x8000) | Bf16::NAN.0);
    }
    let lsb = (bits >> 16) & 1;
    let rounded = bits.wrapping_add(0x7FFF + lsb);
    let out = Bf16((rounded >> 16) as u16);
    if cfg.flush_subnormals && out.is_subnormal() {
        Bf16(out.0 & 0x8000)
    } else {
        out
    }
}

/// Widens bfloat16 to FP32. Exact for every pattern.
#[inline]
pub fn bf16_to_f32(p: Bf16) -> f32 {
    f32::from_bits(u32::from(p.0) << 16)
}

/// Narrows an FP32 value to IEEE binary16.
pub fn round_f32_to_fp16(x: f32, cfg: RoundingConfig) -> Fp16 {
    let bits = x.to_bits();
    let sign = ((bits >> 16) & 0x8000) as u16;
    let exp_field = (bits >> 23) & 0xFF;
    let man = bits & 0x007F_FFFF;

    if exp_field == 0xFF {
        return if man != 0 {
            Fp16(sign | Fp16::NAN.0)
        } else {
            Fp16(sign | Fp16::INFINITY.0)
        };
    }
    // FP32 subnormals are far below half of the smallest FP16 subnormal.
    if exp_field == 0 {
        return Fp16(sign);
    }

    let exp = exp_field as i32 - 127;
    if exp > 15 {
        return Fp16(sign | Fp16::INFINITY.0);
    }

    let out = if exp >= -14 {
        let mut m = man >> 13;
        let rem = man & 0x1FFF;
        if rem > 0x1000 || (rem == 0x1000 && m & 1 == 1) {
            m += 1;
        }
        // A mantissa carry bumps the exponent, reaching 0x7C00 (infinity)
        // above 65504 + 16.
        sign | ((((exp + 15) as u32) << 10) + m) as u16
    } else {
        // value = sig * 2^(exp - 23); FP16 subnormal unit is 2^-24.
        let sig = man | 0x0080_0000;
        let shift = (-exp - 1) as u32;
        if shift > 24 {
            sign
        } else {
            let mut m = sig >> shift;
            let rem = sig & ((1u32 << shift) - 1);
            let half = 1u32 << (shift - 1);
            if rem > half || (rem == half && m & 1 == 1) {
                m += 1;
            }
            sign | m as u16
        }
    };

    let out = Fp16(out);
    if cfg.flush_subnormals && out.is_subnormal() {
        Fp16(sign)
    } else {
        out
    }
}

/// Widens IEEE binary16 to FP32. Exact for every pattern.
pub fn fp16_to_f32(p: Fp16) -> f32 {
    let bits = u32::from(p.0);
    let sign = (bits & 0x8000) << 16;
    let exp = (bits >> 10) & 0x1F;
    let man = bits & 0x03FF;
    match exp {
        0 => {
            // m * 2^-24, exact in FP32.
            let v = man as f32 * f32::from_bits(0x3380_0000);
            f32::from_bits(v.to_bits() | sign)
        }
        0x1F => f32::from_bits(sign | 0x7F80_0000 | (man << 13)),
        _ => f32::from_bits(sign | ((exp + 112) << 23) | (man << 13)),
    }
}

/// A 16-bit format used as a working precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HalfFormat {
    Bf16,
    Fp16,
}

impl HalfFormat {
    /// Significant bits, including the implicit one.
    pub const fn precision(self) -> i32 {
        match self {
            HalfFormat::Bf16 => 8,
            HalfFormat::Fp16 => 11,
        }
    }

    /// Exponent of the smallest normal number.
    pub const fn min_exponent(self) -> i32 {
        match self {
            HalfFormat::Bf16 => -126,
            HalfFormat::Fp16 => -14,
        }
    }

    pub fn max_finite(self) -> f64 {
        match self {
            HalfFormat::Bf16 => Bf16::MAX.to_f64(),
            HalfFormat::Fp16 => 65504.0,
        }
    }

    /// Unit roundoff, `2^-precision`.
    pub fn unit_roundoff(self) -> f64 {
        pow2(-self.precision())
    }

    pub fn name(self) -> &'static str {
        match self {
            HalfFormat::Bf16 => "bf16",
            HalfFormat::Fp16 => "fp16",
        }
    }

    /// Rounds an FP32 value through the bit-level converter.
    pub fn round_f32(self, x: f32, cfg: RoundingConfig) -> f32 {
        match self {
            HalfFormat::Bf16 => bf16_to_f32(round_f32_to_bf16(x, cfg)),
            HalfFormat::Fp16 => fp16_to_f32(round_f32_to_fp16(x, cfg)),
        }
    }

    /// Rounds an FP64 value directly to this format (no intermediate FP32
    /// rounding), nearest-even, with IEEE gradual underflow.
    pub fn quantize(self, x: f64) -> f64 {
        if !x.is_finite() || x == 0.0 {
            return x;
        }
        let biased = ((x.to_bits() >> 52) & 0x7FF) as i32;
        if biased == 0 {
            // FP64 subnormal: far below any 16-bit subnormal.
            return 0.0f64.copysign(x);
        }
        let exp = (biased - 1023).max(self.min_exponent());
        let ulp = pow2(exp - self.precision() + 1);
        let r = (x / ulp).round_ties_even() * ulp;
        if r.abs() > self.max_finite() {
            f64::INFINITY.copysign(x)
        } else if r == 0.0 {
            0.0f64.copysign(x)
        } else {
            r
        }
    }
}

impl fmt::Display for HalfFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `2^e` for `e` in the FP64 normal range.
#[inline]
pub(crate) fn pow2(e: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&e));
    f64::from_bits(((e + 1023) as u64) << 52)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bf16_basic_patterns() {
        assert_eq!(Bf16::from_f32(1.0).to_bits(), 0x3F80);
        assert_eq!(bf16_to_f32(Bf16::from_bits(0x3F80)), 1.0);
        assert_eq!(bf16_to_f32(Bf16::from_bits(0xC000)), -2.0);
    }

    #[test]
    fn bf16_tie_rounds_to_even() {
        // 1 + 2^-8 sits exactly between 1.0 (even) and 1 + 2^-7 (odd).
        let x = f32::from_bits(0x3F80_8000);
        assert_eq!(round_f32_to_bf16(x, RoundingConfig::IEEE).to_bits(), 0x3F80);
        // The next tie up, between an odd and an even mantissa, rounds up.
        let y = f32::from_bits(0x3F81_8000);
        assert_eq!(round_f32_to_bf16(y, RoundingConfig::IEEE).to_bits(), 0x3F82);
    }

    #[test]
    fn bf16_small_exponent_value() {
        // Exponent field 1, mantissa bit 16 set, bits 0..15 all set.
        let x = f32::from_bits(0x0081_FFFF);
        assert!((x - 1.1939e-38).abs() < 1e-42);
        let b = Bf16::from_f32(x);
        assert_eq!(b.exponent_field(), 0x01);
        // The discarded low half exceeds the tie, so the kept mantissa rounds up.
        assert_eq!(b.to_bits(), 0x0082);
        // Below the tie the top 7 mantissa bits are kept unchanged.
        assert_eq!(Bf16::from_f32(f32::from_bits(0x0081_7FFF)).to_bits(), 0x0081);
    }

    #[test]
    fn bf16_overflow_and_specials() {
        assert_eq!(Bf16::from_f32(f32::MAX), Bf16::INFINITY);
        assert_eq!(Bf16::from_f32(-f32::MAX), Bf16::NEG_INFINITY);
        assert_eq!(Bf16::from_f32(f32::INFINITY), Bf16::INFINITY);
        assert!(Bf16::from_f32(f32::NAN).is_nan());
        assert!(Bf16::from_f32(f32::from_bits(0x7F80_0001)).is_nan());
        assert_eq!(Bf16::from_f32(-0.0).to_bits(), 0x8000);
    }

    #[test]
    fn bf16_flush_to_zero() {
        let tiny = f32::from_bits(0x0001_0000); // BF16 subnormal 0x0001
        assert_eq!(Bf16::from_f32(tiny).to_bits(), 0x0001);
        assert_eq!(round_f32_to_bf16(tiny, RoundingConfig::FTZ).to_bits(), 0x0000);
        assert_eq!(round_f32_to_bf16(-tiny, RoundingConfig::FTZ).to_bits(), 0x8000);
        // Normal outputs are untouched by the flag.
        assert_eq!(round_f32_to_bf16(1.0, RoundingConfig::FTZ).to_bits(), 0x3F80);
    }

    #[test]
    fn fp16_basic_patterns() {
        assert_eq!(Fp16::from_f32(1.0).to_bits(), 0x3C00);
        assert_eq!(Fp16::from_f32(65504.0).to_bits(), 0x7BFF);
        assert_eq!(Fp16::from_f32(2f32.powi(-25)).to_bits(), 0x0000);
        assert_eq!(Fp16::from_f32(-(2f32.powi(-25))).to_bits(), 0x8000);
        // Just above half the smallest subnormal rounds up to it.
        let above = f32::from_bits(2f32.powi(-25).to_bits() + 1);
        assert_eq!(Fp16::from_f32(above).to_bits(), 0x0001);
        assert_eq!(Fp16::from_f32(2f32.powi(-24)).to_bits(), 0x0001);
        assert_eq!(Fp16::from_f32(2f32.powi(-14)).to_bits(), 0x0400);
    }

    #[test]
    fn fp16_overflow() {
        // 65520 is the tie between 65504 and 2^16; ties-to-even goes up.
        assert_eq!(Fp16::from_f32(65519.0).to_bits(), 0x7BFF);
        assert_eq!(Fp16::from_f32(65520.0), Fp16::INFINITY);
        assert_eq!(Fp16::from_f32(1e6), Fp16::INFINITY);
        assert_eq!(Fp16::from_f32(-1e6), Fp16::NEG_INFINITY);
        assert!(Fp16::from_f32(f32::NAN).is_nan());
    }

    #[test]
    fn fp16_subnormal_flush() {
        let x = 3.0 * 2f32.powi(-24);
        assert_eq!(Fp16::from_f32(x).to_bits(), 0x0003);
        assert_eq!(round_f32_to_fp16(x, RoundingConfig::FTZ).to_bits(), 0x0000);
    }

    #[test]
    fn quantize_agrees_with_bit_converters() {
        let samples = [
            1.0f32, -1.5, 3.14159, 1e-3, 6.1e-5, 2.9e-7, 65504.0, 65519.0, 7e4, 1e-38, 3.3e38,
        ];
        for &x in &samples {
            for fmt in [HalfFormat::Bf16, HalfFormat::Fp16] {
                let via_bits = fmt.round_f32(x, RoundingConfig::IEEE);
                let via_quantize = fmt.quantize(f64::from(x));
                assert_eq!(f64::from(via_bits), via_quantize, "{fmt} {x:e}");
            }
        }
    }

    #[test]
    fn quantize_passes_specials_through() {
        assert!(HalfFormat::Bf16.quantize(f64::NAN).is_nan());
        assert_eq!(HalfFormat::Fp16.quantize(f64::INFINITY), f64::INFINITY);
        assert_eq!(HalfFormat::Fp16.quantize(-0.0).to_bits(), (-0.0f64).to_bits());
        assert_eq!(HalfFormat::Bf16.quantize(1e-300), 0.0);
    }
}

//! Working-precision scalar abstraction.
//!
//! Everything that is generic over the emulated precision goes through
//! [`WorkingFloat`], implemented for `f32` and `f64` only. The trait exposes
//! the IEEE-754 layout so rounding can be done in software, without touching
//! the hardware rounding mode.

use std::fmt::{Debug, Display};

/// Which GEMM is being emulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Precision {
    Fp32,
    Fp64,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::Fp32 => "fp32",
            Precision::Fp64 => "fp64",
        }
    }

    /// Significand width including the hidden bit.
    pub fn digits(self) -> u32 {
        match self {
            Precision::Fp32 => 24,
            Precision::Fp64 => 53,
        }
    }

    /// Unit roundoff exponent: `u = 2^-digits`.
    pub fn unit_roundoff_log2(self) -> i64 {
        -(self.digits() as i64)
    }
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Precision {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "fp32" => Ok(Precision::Fp32),
            "fp64" => Ok(Precision::Fp64),
            other => Err(crate::Error::Parse(format!("unknown precision {other:?}"))),
        }
    }
}

/// Binary floating-point format used as the emulation's working precision.
pub trait WorkingFloat: num_traits::Float + Copy + Debug + Display + Default + Send + Sync + 'static {
    const PRECISION: Precision;
    /// Significand bits including the hidden bit.
    const DIGITS: u32;
    /// Exponent of the smallest positive normal number.
    const MIN_EXP: i32;
    /// Exponent of the largest finite number.
    const MAX_EXP: i32;
    const TOTAL_BITS: u32;

    fn to_bits_u64(self) -> u64;
    fn from_bits_u64(bits: u64) -> Self;
    /// Exact widening.
    fn to_f64(self) -> f64;
    /// Round-to-nearest-even narrowing.
    fn from_f64_nearest(x: f64) -> Self;

    /// Split a finite value into `(negative, s, e)` with `|x| = s * 2^e`.
    /// `s` carries the hidden bit for normals; zero yields `s = 0`.
    fn decompose(self) -> (bool, u64, i32) {
        let bits = self.to_bits_u64();
        let frac_bits = Self::DIGITS - 1;
        let exp_bits = Self::TOTAL_BITS - 1 - frac_bits;
        let neg = (bits >> (Self::TOTAL_BITS - 1)) & 1 == 1;
        let biased = ((bits >> frac_bits) & ((1u64 << exp_bits) - 1)) as i32;
        let frac = bits & ((1u64 << frac_bits) - 1);
        let bias = Self::MAX_EXP;
        if biased == 0 {
            (neg, frac, Self::MIN_EXP - frac_bits as i32)
        } else {
            (neg, frac | (1u64 << frac_bits), biased - bias - frac_bits as i32)
        }
    }

    /// Assemble `(-1)^neg * s * 2^e`; the caller guarantees representability
    /// (`s < 2^DIGITS`, and `s >= 2^(DIGITS-1)` unless `e` is the subnormal
    /// exponent).
    fn from_parts(neg: bool, s: u64, e: i32) -> Self {
        let frac_bits = Self::DIGITS - 1;
        let sign = (neg as u64) << (Self::TOTAL_BITS - 1);
        if s == 0 {
            return Self::from_bits_u64(sign);
        }
        debug_assert!(s < (1u64 << Self::DIGITS));
        if s >= (1u64 << frac_bits) {
            let biased = (e + frac_bits as i32 + Self::MAX_EXP) as u64;
            debug_assert!(biased >= 1 && biased < (2 * Self::MAX_EXP + 1) as u64);
            Self::from_bits_u64(sign | (biased << frac_bits) | (s - (1u64 << frac_bits)))
        } else {
            debug_assert_eq!(e, Self::MIN_EXP - frac_bits as i32);
            Self::from_bits_u64(sign | s)
        }
    }

    /// `floor(log2|x|)` for finite nonzero `x`, exact.
    fn ilogb(self) -> i32 {
        let (_, s, e) = self.decompose();
        debug_assert!(s != 0);
        e + 63 - s.leading_zeros() as i32
    }
}

macro_rules! impl_working_float {
    ($t:ty, $prec:expr, $digits:expr, $min:expr, $max:expr, $total:expr, $bits:ty) => {
        impl WorkingFloat for $t {
            const PRECISION: Precision = $prec;
            const DIGITS: u32 = $digits;
            const MIN_EXP: i32 = $min;
            const MAX_EXP: i32 = $max;
            const TOTAL_BITS: u32 = $total;

            #[inline]
            fn to_bits_u64(self) -> u64 {
                self.to_bits() as u64
            }
            #[inline]
            fn from_bits_u64(bits: u64) -> Self {
                <$t>::from_bits(bits as $bits)
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn from_f64_nearest(x: f64) -> Self {
                x as $t
            }
        }
    };
}

impl_working_float!(f32, Precision::Fp32, 24, -126, 127, 32, u32);
impl_working_float!(f64, Precision::Fp64, 53, -1022, 1023, 64, u64);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decompose_roundtrips_through_parts() {
        for &x in &[1.0f64, -0.75, 5e-324, f64::MAX, 2.2250738585072014e-308, 3.0, -1e-310] {
            let (n, s, e) = x.decompose();
            let y = if s >= 1 << 52 || s == 0 {
                f64::from_parts(n, s, e)
            } else {
                f64::from_parts(n, s, <f64 as WorkingFloat>::MIN_EXP - 52)
            };
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for &x in &[1.0f32, -0.3, 1e-45, f32::MAX, f32::MIN_POSITIVE] {
            let (n, s, e) = x.decompose();
            assert_eq!(x.to_bits(), f32::from_parts(n, s, e).to_bits());
        }
    }

    #[test]
    fn ilogb_matches_definition() {
        assert_eq!(1.0f64.ilogb(), 0);
        assert_eq!(0.3f64.ilogb(), -2);
        assert_eq!(1024.0f32.ilogb(), 10);
        assert_eq!(5e-324f64.ilogb(), -1074);
        assert_eq!(1e-45f32.ilogb(), -149);
        assert_eq!((-7.5f64).ilogb(), 2);
    }
}

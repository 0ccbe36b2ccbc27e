//! Scalar primitives with an explicit rounding direction.
//!
//! Directed rounding is done in software from exact [`ExReal`] values; the
//! hardware rounding mode is never touched. Nearest-even fused multiply-add
//! uses the platform's correctly rounded `mul_add`, which the tests check
//! against the exact path.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exreal::ExReal;
use crate::scalar::WorkingFloat;

/// `u32 = 2^-24`.
pub const U32: f64 = 1.0 / 16_777_216.0;
/// `u64 = 2^-53`.
pub const U64: f64 = 1.1102230246251565e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RoundDir {
    NearestEven,
    /// Toward negative infinity.
    Down,
    /// Toward positive infinity.
    Up,
}

/// Nearest integer, ties to even.
pub fn round_nearest_int<F: WorkingFloat>(x: F) -> F {
    F::from_f64_nearest(x.to_f64().round_ties_even())
}

/// Integer part, toward zero.
pub fn trunc<F: WorkingFloat>(x: F) -> F {
    x.trunc()
}

/// `x - p * round(x / p)` with ties to even; lies in `[-floor(p/2), floor(p/2)]`.
pub fn signed_mod(x: i64, p: u64) -> i64 {
    debug_assert!(p >= 2);
    let p = p as i64;
    let r2 = x.rem_euclid(2 * p);
    let quotient_odd = r2 >= p;
    let r = r2 % p;
    match (2 * r).cmp(&p) {
        std::cmp::Ordering::Less => r,
        std::cmp::Ordering::Greater => r - p,
        // x / p = n + 1/2 exactly; round to the even neighbour of n
        std::cmp::Ordering::Equal => {
            if quotient_odd {
                r - p
            } else {
                r
            }
        }
    }
}

/// Big-integer counterpart of [`signed_mod`].
pub fn signed_mod_big(x: &BigInt, p: &BigUint) -> BigInt {
    let p = BigInt::from(p.clone());
    let two_p: BigInt = &p << 1u32;
    let r2 = x.mod_floor(&two_p);
    let quotient_odd = r2 >= p;
    let r = &r2 % &p;
    let twice: BigInt = &r << 1u32;
    match twice.cmp(&p) {
        std::cmp::Ordering::Less => r,
        std::cmp::Ordering::Greater => r - p,
        std::cmp::Ordering::Equal => {
            if quotient_odd {
                r - p
            } else {
                r
            }
        }
    }
}

/// Unit in the first place: the largest power of two not exceeding `|x|`.
pub fn ufp<F: WorkingFloat>(x: F) -> F {
    if x.is_zero() {
        return F::zero();
    }
    let k = x.ilogb();
    let frac = F::DIGITS as i32 - 1;
    if k >= F::MIN_EXP {
        F::from_parts(false, 1u64 << frac, k - frac)
    } else {
        let sub = F::MIN_EXP - frac;
        F::from_parts(false, 1u64 << (k - sub), sub)
    }
}

/// Round `mant * 2^exp` (plus a sticky fraction strictly below the last
/// bit of `mant` when `sticky` is set) to `F`.
fn round_parts<F: WorkingFloat>(neg: bool, mant: &BigUint, exp: i64, sticky: bool, dir: RoundDir) -> Result<F> {
    if mant.is_zero() && !sticky {
        return Ok(F::zero());
    }
    let p = F::DIGITS as i64;
    let min_lsb = F::MIN_EXP as i64 - (p - 1);
    let top = exp + mant.bits() as i64 - 1;
    let mut lsb = (top - (p - 1)).max(min_lsb);
    let shift = lsb - exp;
    let mut s: u64;
    if shift <= 0 {
        debug_assert!(!sticky, "sticky bits require a positive shift");
        s = (mant << (-shift) as u64).to_u64().expect("significand fits");
    } else {
        let sh = shift as u64;
        s = (mant >> sh).to_u64().expect("significand fits");
        let half = mant.bit(sh - 1);
        let rest = sticky || mant.trailing_zeros().is_some_and(|tz| tz < sh - 1);
        let inexact = half || rest;
        let bump = match dir {
            RoundDir::NearestEven => half && (rest || s & 1 == 1),
            RoundDir::Down => inexact && neg,
            RoundDir::Up => inexact && !neg,
        };
        if bump {
            s += 1;
            if s == 1u64 << p {
                s >>= 1;
                lsb += 1;
            }
        }
    }
    if s != 0 && lsb + (64 - s.leading_zeros() as i64) - 1 > F::MAX_EXP as i64 {
        return Err(Error::Overflow {
            format: F::PRECISION.name(),
            context: format!("{}{}*2^{}", if neg { "-" } else { "" }, mant, exp),
        });
    }
    Ok(F::from_parts(neg, s, lsb as i32))
}

/// Correctly round an exact value to `F` in direction `dir`.
pub fn round_exreal<F: WorkingFloat>(x: &ExReal, dir: RoundDir) -> Result<F> {
    round_parts(x.is_negative(), x.mantissa(), x.exponent(), false, dir)
}

/// Correctly round `(-1)^neg * num / den` to `F`.
pub fn round_ratio<F: WorkingFloat>(neg: bool, num: &BigUint, den: &BigUint, dir: RoundDir) -> Result<F> {
    if den.is_zero() {
        return Err(Error::Domain("division by zero".into()));
    }
    if num.is_zero() {
        return Ok(F::zero());
    }
    let need = F::DIGITS as i64 + 3;
    let sh = need - (num.bits() as i64 - den.bits() as i64);
    let (n, d) = if sh >= 0 { (num << sh as u64, den.clone()) } else { (num.clone(), den << (-sh) as u64) };
    let (q, r) = n.div_rem(&d);
    round_parts(neg, &q, -sh, !r.is_zero(), dir)
}

pub fn round_fp32(x: &ExReal, dir: RoundDir) -> Result<f32> {
    round_exreal::<f32>(x, dir)
}

pub fn round_fp64(x: &ExReal, dir: RoundDir) -> Result<f64> {
    round_exreal::<f64>(x, dir)
}

/// `a * b + c` with a single rounding in direction `dir`.
///
/// An exactly zero result is returned as `+0` in every direction.
pub fn fma<F: WorkingFloat>(a: F, b: F, c: F, dir: RoundDir) -> Result<F> {
    if !(a.is_finite() && b.is_finite() && c.is_finite()) {
        return Err(Error::Domain("fma on non-finite input".into()));
    }
    match dir {
        RoundDir::NearestEven => {
            let r = a.mul_add(b, c);
            if r.is_finite() {
                Ok(r)
            } else {
                Err(Error::Overflow { format: F::PRECISION.name(), context: "fma".into() })
            }
        }
        _ => {
            let exact = &(&ExReal::from_float(a) * &ExReal::from_float(b)) + &ExReal::from_float(c);
            round_exreal(&exact, dir)
        }
    }
}

pub fn fma_fp32(a: f32, b: f32, c: f32, dir: RoundDir) -> Result<f32> {
    fma(a, b, c, dir)
}

pub fn fma_fp64(a: f64, b: f64, c: f64, dir: RoundDir) -> Result<f64> {
    fma(a, b, c, dir)
}

/// `x * 2^k` rounded to nearest-even; exact unless the result is subnormal.
pub fn scale_pow2<F: WorkingFloat>(x: F, k: i64) -> Result<F> {
    let (neg, s, e) = x.decompose();
    if s == 0 {
        return Ok(x);
    }
    let top = x.ilogb() as i64 + k;
    if top >= F::MIN_EXP as i64 && top <= F::MAX_EXP as i64 {
        let lz = s.leading_zeros() as i64 - (64 - F::DIGITS as i64);
        Ok(F::from_parts(neg, s << lz, (e as i64 - lz + k) as i32))
    } else {
        round_parts(neg, &BigUint::from(s), e as i64 + k, false, RoundDir::NearestEven)
    }
}

/// `x * 2^k` rounded once to nearest in `F`.
pub fn scale_into<F: WorkingFloat>(x: f64, k: i64) -> Result<F> {
    let (neg, s, e) = x.decompose();
    if s == 0 {
        return Ok(if neg { -F::zero() } else { F::zero() });
    }
    let tz = s.trailing_zeros();
    let (s, e) = (s >> tz, e as i64 + tz as i64 + k);
    let bits = 64 - s.leading_zeros() as i64;
    let top = e + bits - 1;
    let p = F::DIGITS as i64;
    if bits <= p && top >= F::MIN_EXP as i64 && top <= F::MAX_EXP as i64 {
        Ok(F::from_parts(neg, s << (p - bits), (e - (p - bits)) as i32))
    } else {
        round_parts(neg, &BigUint::from(s), e, false, RoundDir::NearestEven)
    }
}

/// Round a finite `f64` to `digits` significant bits, nearest-even, with no
/// exponent limit beyond that of `f64`.
pub fn round_to_bits(x: f64, digits: u32) -> Result<f64> {
    let (neg, s, e) = x.decompose();
    let bits = 64 - s.leading_zeros();
    if s == 0 || bits <= digits {
        return Ok(x);
    }
    let sh = bits - digits;
    let mut q = s >> sh;
    let rem = s & ((1u64 << sh) - 1);
    let half = 1u64 << (sh - 1);
    if rem > half || (rem == half && q & 1 == 1) {
        q += 1;
    }
    let mag = scale_pow2(q as f64, e as i64 + sh as i64)?;
    Ok(if neg { -mag } else { mag })
}

/// FP32 `log2`: extended-precision logarithm followed by one nearest rounding.
pub fn log2f(x: f32) -> Result<f32> {
    if x.is_nan() || x <= 0.0 || !x.is_finite() {
        return Err(Error::Domain(format!("log2f({x})")));
    }
    Ok(x.to_f64().log2() as f32)
}

/// Rigorous enclosure `[lo, hi]` of `log2(x)` for an integer `x >= 1`, with
/// `hi - lo <= 2^-frac_bits`. Exact (`lo == hi`) when `x` is a power of two.
pub fn log2_enclosure(x: &BigUint, frac_bits: u32) -> (ExReal, ExReal) {
    assert!(!x.is_zero(), "log2 of zero");
    let k = x.bits() - 1;
    let int_part = BigUint::from(k) << frac_bits;
    let scale = -(frac_bits as i64);
    if x.trailing_zeros() == Some(k) {
        let v = ExReal::new(false, int_part, scale);
        return (v.clone(), v);
    }
    let w = 2 * frac_bits as u64 + 64;
    let two = BigUint::from(2u32) << w;
    let mut lo = (x << w) >> k;
    let mut hi = lo.clone() + 1u32;
    let mut prefix = BigUint::zero();
    for i in 0..frac_bits {
        lo = (&lo * &lo) >> w;
        hi = ceil_shr(&(&hi * &hi), w);
        let bit = if lo >= two {
            lo >>= 1u32;
            hi = ceil_shr(&hi, 1);
            true
        } else if hi < two {
            false
        } else {
            // undecided: the remaining bits are unknown
            let rem = frac_bits - i;
            let base = (&int_part) + (&prefix << rem);
            let lo_v = ExReal::new(false, base.clone(), scale);
            let hi_v = ExReal::new(false, base + (BigUint::one() << rem), scale);
            return (lo_v, hi_v);
        };
        prefix = (prefix << 1u32) + BigUint::from(bit as u32);
    }
    let base = int_part + prefix;
    (ExReal::new(false, base.clone(), scale), ExReal::new(false, base + 1u32, scale))
}

fn ceil_shr(x: &BigUint, sh: u64) -> BigUint {
    let q = x >> sh;
    if x.trailing_zeros().is_some_and(|tz| tz < sh) {
        q + 1u32
    } else {
        q
    }
}

/// The next `f32` toward positive infinity (finite inputs only).
pub fn next_up_f32(x: f32) -> f32 {
    if x == 0.0 {
        return f32::from_bits(1);
    }
    let b = x.to_bits();
    if x > 0.0 {
        f32::from_bits(b + 1)
    } else {
        f32::from_bits(b - 1)
    }
}

//! Exact dyadic rationals `(-1)^neg * mant * 2^exp`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, Zero};

use crate::scalar::WorkingFloat;

/// An exact dyadic rational. Canonical form: `mant` odd, or the value is zero
/// with `exp == 0` and `neg == false`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct ExReal {
    neg: bool,
    mant: BigUint,
    exp: i64,
}

impl ExReal {
    pub fn new(neg: bool, mant: BigUint, exp: i64) -> Self {
        let mut x = ExReal { neg, mant, exp };
        x.normalize();
        x
    }

    fn normalize(&mut self) {
        if self.mant.is_zero() {
            self.neg = false;
            self.exp = 0;
            return;
        }
        let tz = self.mant.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.mant >>= tz;
            self.exp += tz as i64;
        }
    }

    pub fn zero() -> Self {
        ExReal::default()
    }

    pub fn from_int(x: &BigInt) -> Self {
        ExReal::new(x.is_negative(), x.magnitude().clone(), 0)
    }

    pub fn from_i64(x: i64) -> Self {
        ExReal::new(x < 0, BigUint::from(x.unsigned_abs()), 0)
    }

    /// `2^k`.
    pub fn pow2(k: i64) -> Self {
        ExReal::new(false, BigUint::one(), k)
    }

    /// Lossless conversion of a finite float.
    pub fn from_float<F: WorkingFloat>(x: F) -> Self {
        assert!(x.is_finite(), "ExReal::from_float on non-finite value");
        let (neg, s, e) = x.decompose();
        ExReal::new(neg, BigUint::from(s), e as i64)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.neg
    }

    pub fn mantissa(&self) -> &BigUint {
        &self.mant
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn abs(&self) -> Self {
        ExReal { neg: false, mant: self.mant.clone(), exp: self.exp }
    }

    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        ExReal { neg: self.neg, mant: self.mant.clone(), exp: self.exp + k }
    }

    /// Exponent of the leading bit, i.e. `floor(log2|x|)`; `None` for zero.
    pub fn top_exponent(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.exp + self.mant.bits() as i64 - 1)
        }
    }

    pub fn is_integer(&self) -> bool {
        self.exp >= 0
    }

    pub fn to_bigint(&self) -> Option<BigInt> {
        if !self.is_integer() {
            return None;
        }
        let m = &self.mant << (self.exp as u64);
        let sign = if self.is_zero() {
            Sign::NoSign
        } else if self.neg {
            Sign::Minus
        } else {
            Sign::Plus
        };
        Some(BigInt::from_biguint(sign, m))
    }

    /// `floor(x)` as a big integer.
    pub fn floor(&self) -> BigInt {
        if self.exp >= 0 {
            return self.to_bigint().unwrap();
        }
        let sh = (-self.exp) as u64;
        let q = &self.mant >> sh;
        if self.neg {
            // -(mant / 2^sh) rounded toward -inf; the value is not an integer
            -BigInt::from(q + 1u32)
        } else {
            BigInt::from(q)
        }
    }

    /// The value as `(numerator, log2 denominator)` with a nonnegative
    /// denominator exponent, for exact comparison against other dyadics.
    fn aligned(&self, other: &ExReal) -> (BigInt, BigInt) {
        let e = self.exp.min(other.exp);
        let a = BigInt::from_biguint(sign_of(self), &self.mant << (self.exp - e) as u64);
        let b = BigInt::from_biguint(sign_of(other), &other.mant << (other.exp - e) as u64);
        (a, b)
    }

    /// Nearest `f64` (ties to even), saturating to infinity on overflow.
    pub fn to_f64_lossy(&self) -> f64 {
        crate::fpkernel::round_exreal::<f64>(self, crate::fpkernel::RoundDir::NearestEven).unwrap_or(if self.neg {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        })
    }
}

fn sign_of(x: &ExReal) -> Sign {
    if x.is_zero() {
        Sign::NoSign
    } else if x.neg {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

fn from_signed(v: BigInt, exp: i64) -> ExReal {
    let (sign, mag) = v.into_parts();
    ExReal::new(sign == Sign::Minus, mag, exp)
}

impl Ord for ExReal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.neg, other.neg) {
            (false, true) => return Ordering::Greater,
            (true, false) => return Ordering::Less,
            _ => {}
        }
        let mag = match (self.top_exponent(), other.top_exponent()) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(a), Some(b)) if a != b => a.cmp(&b),
            _ => {
                let e = self.exp.min(other.exp);
                let a = &self.mant << (self.exp - e) as u64;
                let b = &other.mant << (other.exp - e) as u64;
                a.cmp(&b)
            }
        };
        if self.neg {
            mag.reverse()
        } else {
            mag
        }
    }
}

impl PartialOrd for ExReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<'a> Add<&'a ExReal> for &'a ExReal {
    type Output = ExReal;
    fn add(self, rhs: &ExReal) -> ExReal {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(rhs.exp);
        let (a, b) = self.aligned(rhs);
        from_signed(a + b, e)
    }
}

impl<'a> Sub<&'a ExReal> for &'a ExReal {
    type Output = ExReal;
    fn sub(self, rhs: &ExReal) -> ExReal {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a ExReal> for &'a ExReal {
    type Output = ExReal;
    fn mul(self, rhs: &ExReal) -> ExReal {
        if self.is_zero() || rhs.is_zero() {
            return ExReal::zero();
        }
        ExReal { neg: self.neg != rhs.neg, mant: &self.mant * &rhs.mant, exp: self.exp + rhs.exp }
    }
}

impl Neg for &ExReal {
    type Output = ExReal;
    fn neg(self) -> ExReal {
        if self.is_zero() {
            return self.clone();
        }
        ExReal { neg: !self.neg, mant: self.mant.clone(), exp: self.exp }
    }
}

impl Neg for ExReal {
    type Output = ExReal;
    fn neg(self) -> ExReal {
        -&self
    }
}

impl Add for ExReal {
    type Output = ExReal;
    fn add(self, rhs: ExReal) -> ExReal {
        &self + &rhs
    }
}

impl Sub for ExReal {
    type Output = ExReal;
    fn sub(self, rhs: ExReal) -> ExReal {
        &self - &rhs
    }
}

impl Mul for ExReal {
    type Output = ExReal;
    fn mul(self, rhs: ExReal) -> ExReal {
        &self * &rhs
    }
}

impl Zero for ExReal {
    fn zero() -> Self {
        ExReal::default()
    }
    fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }
}

impl One for ExReal {
    fn one() -> Self {
        ExReal::pow2(0)
    }
}

impl From<i64> for ExReal {
    fn from(x: i64) -> Self {
        ExReal::from_i64(x)
    }
}

impl fmt::Debug for ExReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}*2^{}", if self.neg { "-" } else { "" }, self.mant, self.exp)
    }
}

impl fmt::Display for ExReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

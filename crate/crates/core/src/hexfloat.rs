//! C99-style hexadecimal float text (`-0x1.8p+3`), exact in both directions.

use num_bigint::BigUint;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::exreal::ExReal;
use crate::fpkernel::{round_exreal, RoundDir};
use crate::scalar::WorkingFloat;

/// Normalized form `[-]0x1.<frac>p<exp>`; zero prints as `0x0p+0`.
pub fn format_hex<F: WorkingFloat>(x: F) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x < F::zero() { "-inf".into() } else { "inf".into() };
    }
    let (neg, mut s, mut e) = x.decompose();
    let sign = if neg { "-" } else { "" };
    if s == 0 {
        return format!("{sign}0x0p+0");
    }
    let frac_bits = F::DIGITS - 1;
    let lz = s.leading_zeros() as i32 - (63 - frac_bits as i32);
    s <<= lz;
    e -= lz;
    let exp = e + frac_bits as i32;
    let digits = frac_bits.div_ceil(4);
    let frac = (s - (1u64 << frac_bits)) << (4 * digits - frac_bits);
    let mut hex = format!("{:0width$x}", frac, width = digits as usize);
    while hex.ends_with('0') {
        hex.pop();
    }
    let dot = if hex.is_empty() { String::new() } else { format!(".{hex}") };
    format!("{sign}0x1{dot}p{exp:+}")
}

/// Parse a hex float; the value must be exactly representable in `F`.
pub fn parse_hex<F: WorkingFloat>(text: &str) -> Result<F> {
    let v = parse_hex_exact(text)?;
    let r: F = round_exreal(&v, RoundDir::NearestEven)
        .map_err(|_| Error::Parse(format!("{text:?} overflows {}", F::PRECISION)))?;
    if ExReal::from_float(r) != v {
        return Err(Error::Parse(format!("{text:?} is not exactly representable in {}", F::PRECISION)));
    }
    let negative_zero = v.is_zero() && text.trim_start().starts_with('-');
    Ok(if negative_zero { -r } else { r })
}

/// Parse a hex float into its exact dyadic value.
pub fn parse_hex_exact(text: &str) -> Result<ExReal> {
    let bad = || Error::Parse(format!("invalid hex float {text:?}"));
    let t = text.trim();
    let (neg, rest) = match t.as_bytes().first() {
        Some(b'-') => (true, &t[1..]),
        Some(b'+') => (false, &t[1..]),
        _ => (false, t),
    };
    let rest = rest.strip_prefix("0x").or_else(|| rest.strip_prefix("0X")).ok_or_else(bad)?;
    let (body, pexp) = match rest.find(['p', 'P']) {
        Some(k) => (&rest[..k], rest[k + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (rest, 0),
    };
    let (int_part, frac_part) = match body.find('.') {
        Some(k) => (&body[..k], &body[k + 1..]),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let mut mant = BigUint::zero();
    for c in int_part.chars().chain(frac_part.chars()) {
        let d = c.to_digit(16).ok_or_else(bad)?;
        mant = (mant << 4u32) + BigUint::from(d);
    }
    let exp = pexp - 4 * frac_part.len() as i64;
    Ok(ExReal::new(neg, mant, exp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_strings() {
        assert_eq!(format_hex(1.0f64), "0x1p+0");
        assert_eq!(format_hex(-1.5f64), "-0x1.8p+0");
        assert_eq!(format_hex(0.0f64), "0x0p+0");
        assert_eq!(format_hex(5e-324f64), "0x1p-1074");
        assert_eq!(format_hex(0.1f32), "0x1.99999ap-4");
        assert_eq!(format_hex(65280.0f64), "0x1.fep+15");
        assert_eq!(parse_hex::<f64>("0x1.fep+15").unwrap(), 65280.0);
        assert_eq!(parse_hex::<f32>("0x1.99999ap-4").unwrap(), 0.1f32);
        assert_eq!(parse_hex::<f64>("0x.8").unwrap(), 0.5);
    }

    #[test]
    fn rejects_inexact_and_garbage() {
        assert!(parse_hex::<f32>("0x1.000001p+0").is_err());
        assert!(parse_hex::<f64>("1.5").is_err());
        assert!(parse_hex::<f64>("0x1.gp+0").is_err());
        assert!(parse_hex::<f32>("0x1p+200").is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_f64(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            let y: f64 = parse_hex(&format_hex(x)).unwrap();
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }

        #[test]
        fn roundtrip_f32(bits in any::<u32>()) {
            let x = f32::from_bits(bits);
            prop_assume!(x.is_finite());
            let y: f32 = parse_hex(&format_hex(x)).unwrap();
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

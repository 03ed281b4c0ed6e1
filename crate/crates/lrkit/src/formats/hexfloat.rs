//! C99-style hexadecimal float literals for bit-exact `f64` round trips.

use crate::error::{Error, Result};

/// Format a finite `f64` as a hex-float literal (`0x1.8p+1` style).
pub fn format_hex(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0x0p+0".to_string() } else { "0x0p+0".to_string() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & 0x000f_ffff_ffff_ffff;
    let (lead, exp, mant) = if exp_bits == 0 {
        // subnormal: 0.mantissa * 2^-1022
        (0u64, -1022i64, mantissa)
    } else {
        (1u64, exp_bits - 1023, mantissa)
    };
    let mut hex = format!("{mant:013x}");
    while hex.len() > 1 && hex.ends_with('0') {
        hex.pop();
    }
    if mant == 0 {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{hex}p{exp:+}")
    }
}

/// Parse a hex-float literal back to `f64` (exact).
pub fn parse_hex(s: &str) -> Result<f64> {
    let err = || Error::invalid(format!("malformed hex float {s:?}"));
    let t = s.trim();
    let (sign, t) = match t.strip_prefix('-') {
        Some(rest) => (-1.0f64, rest),
        None => (1.0, t.strip_prefix('+').unwrap_or(t)),
    };
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).ok_or_else(err)?;
    let (mant_str, exp_str) = t
        .split_once(['p', 'P'])
        .ok_or_else(err)?;
    let exp: i64 = exp_str.parse().map_err(|_| err())?;
    let (int_part, frac_part) = match mant_str.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mant_str, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if frac_part.len() > 32 {
        return Err(err());
    }
    let mut mantissa: u128 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        let digit = c.to_digit(16).ok_or_else(err)? as u128;
        mantissa = mantissa.checked_mul(16).ok_or_else(err)?;
        mantissa = mantissa.checked_add(digit).ok_or_else(err)?;
    }
    // value = mantissa * 2^(exp - 4*frac_digits)
    let scale = exp - 4 * frac_part.len() as i64;
    let mut value = mantissa as f64;
    // apply the exponent in safe chunks
    let mut remaining = scale;
    while remaining > 0 {
        let step = remaining.min(512);
        value *= 2f64.powi(step as i32);
        remaining -= step;
        if value.is_infinite() {
            return Err(err());
        }
    }
    while remaining < 0 {
        let step = (-remaining).min(512);
        value *= 2f64.powi(-(step as i32));
        remaining += step;
    }
    Ok(sign * value)
}

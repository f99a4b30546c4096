//! Exact text encoding of `f64` as C99-style hexadecimal floats
//! (`0x1.8p+1` == 3.0). Model files store coefficients this way so a
//! round trip through text never perturbs a bit.

pub fn format(value: f64) -> String {
    if value.is_nan() {
        return "nan".to_string();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let bits = value.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    if exp_bits == 0 && frac == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 {
        (0, -1022)
    } else {
        (1, exp_bits - 1023)
    };
    let mut digits = format!("{frac:013x}");
    while digits.ends_with('0') {
        digits.pop();
    }
    let exp_sign = if exp < 0 { '-' } else { '+' };
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp_sign}{}", exp.abs())
    } else {
        format!("{sign}0x{lead}.{digits}p{exp_sign}{}", exp.abs())
    }
}

/// Parses the output of [`format`] (and any finite hex float whose
/// significand fits in 64 bits). Returns `None` on malformed input.
pub fn parse(text: &str) -> Option<f64> {
    let (negative, rest) = match text.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, text.strip_prefix('+').unwrap_or(text)),
    };
    let rest = rest
        .strip_prefix("0x")
        .or_else(|| rest.strip_prefix("0X"))?;
    let (mantissa, exponent) = rest.split_once(['p', 'P'])?;
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let mut significand: u64 = 0;
    for c in int_part.chars().chain(frac_part.chars()) {
        let d = c.to_digit(16)? as u64;
        significand = significand.checked_mul(16)?.checked_add(d)?;
    }
    let exp: i64 = exponent.parse().ok()?;
    let shift = exp.checked_sub(4 * frac_part.len() as i64)?;
    if significand > (1u64 << 53) {
        // Not produced by `format`; would need rounding.
        return None;
    }
    let value = scale_by_pow2(significand as f64, shift);
    if !value.is_finite() {
        return None;
    }
    Some(if negative { -value } else { value })
}

/// Multiplies by 2^shift in exact steps. Only the final step can round, and
/// for values written by `format` the result is representable.
fn scale_by_pow2(mut value: f64, mut shift: i64) -> f64 {
    const STEP: i64 = 600;
    while shift > STEP {
        value *= 2f64.powi(STEP as i32);
        shift -= STEP;
    }
    while shift < -STEP {
        // Stop stepping down early so the last multiply does the rounding.
        if value.abs() < 2f64.powi(-400) {
            break;
        }
        value *= 2f64.powi(-STEP as i32);
        shift += STEP;
    }
    while shift < -1000 {
        value *= 2f64.powi(-500);
        shift += 500;
    }
    value * 2f64.powi(shift as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(format(3.0), "0x1.8p+1");
        assert_eq!(format(1.0), "0x1p+0");
        assert_eq!(format(-0.5), "-0x1p-1");
        assert_eq!(format(0.0), "0x0p+0");
        assert_eq!(parse("0x1.8p+1"), Some(3.0));
        assert_eq!(parse("-0x1p-1"), Some(-0.5));
        assert_eq!(parse("0x0p+0"), Some(0.0));
    }

    #[test]
    fn malformed_is_rejected() {
        for bad in ["", "0x", "1.5", "0x1.8", "0xzp+1", "0x1p", "nan"] {
            assert_eq!(parse(bad), None, "{bad}");
        }
    }

    #[test]
    fn extremes() {
        for v in [f64::MAX, f64::MIN_POSITIVE, 5e-324, -2.2250738585072e-308] {
            assert_eq!(parse(&format(v)).unwrap().to_bits(), v.to_bits());
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let back = parse(&format(v)).unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}

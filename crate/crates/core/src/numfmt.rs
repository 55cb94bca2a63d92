//! Printf-style `%g` formatting for `f64`.
//!
//! All numeric text the crate emits (Matrix Market files, CSV traces) goes
//! through [`format_g17`] so that identical runs produce identical bytes and
//! every written value parses back to the exact same bits.

/// Formats `x` like C's `printf("%.17g", x)`: 17 significant digits, fixed
/// notation for moderate exponents, scientific otherwise, trailing zeros
/// trimmed.  17 significant digits are enough to round-trip any `f64`.
pub fn format_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x < 0.0 { "-inf" } else { "inf" }.to_string();
    }
    // 16 fractional digits in scientific notation = 17 significant digits.
    let sci = format!("{:.16e}", x);
    let epos = sci.find('e').expect("exponent marker");
    let exp: i32 = sci[epos + 1..].parse().expect("exponent digits");
    if exp < -4 || exp >= 17 {
        let mantissa = trim_trailing_zeros(&sci[..epos]);
        let (sign, digits) = if exp < 0 { ('-', -exp) } else { ('+', exp) };
        format!("{mantissa}e{sign}{digits:02}")
    } else {
        let prec = (16 - exp) as usize;
        let fixed = format!("{x:.prec$}");
        trim_trailing_zeros(&fixed).to_string()
    }
}

fn trim_trailing_zeros(s: &str) -> &str {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.')
}

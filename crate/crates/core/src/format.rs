//! Fixed-precision number formatting for emitted CSV and JSON files.

/// Significant digits used for every number written to a report or trace.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Formats `x` like C's `%.9g`: nine significant digits, trailing zeros
/// trimmed, scientific notation only for very small or very large values.
pub fn sig9(x: f64) -> String {
    format_significant(x, SIGNIFICANT_DIGITS)
}

pub fn format_significant(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x.is_nan() {
        return "NaN".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_owned() } else { "-inf".to_owned() };
    }
    if x == 0.0 {
        return "0".to_owned();
    }

    // Let the scientific formatter do the rounding, then read the exponent
    // back so that carries such as 9.9999999996 -> 1.00000000e1 are honoured.
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");

    if exp < -5 || exp >= digits as i32 {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_fraction(&format!("{:.*}", decimals, x)).to_owned()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig9(0.0), "0");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(-2.5), "-2.5");
        assert_eq!(sig9(0.525), "0.525");
        assert_eq!(sig9(3.737), "3.737");
        assert_eq!(sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(sig9(123456789.0), "123456789");
        assert_eq!(sig9(1234567890.0), "1.23456789e+09");
        assert_eq!(sig9(1e-3), "0.001");
        assert_eq!(sig9(1.5e-7), "1.5e-07");
        assert_eq!(sig9(9.9999999996), "10");
        assert_eq!(sig9(1e6), "1000000");
    }

    #[test]
    fn output_parses_back_within_precision() {
        for &x in &[std::f64::consts::PI, -1.0e-12, 6.02214076e23, 0.1 + 0.2] {
            let y: f64 = sig9(x).parse().unwrap();
            assert!(((x - y) / x).abs() < 1e-8, "{x} -> {y}");
        }
    }
}

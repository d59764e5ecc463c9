//! Six-significant-digit number formatting shared by every text output.
//!
//! Rounding is half-to-even on the exact binary value, which is what
//! `{:.5e}` already does; this module only re-renders the result in `%g`
//! style (plain decimal for exponents in -4..6, trailing zeros trimmed).

const SIG_DIGITS: i32 = 6;

pub fn format_sig6(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    if value == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, value);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if !(-4..SIG_DIGITS).contains(&exp) {
        let (head, tail) = digits.split_at(1);
        out.push_str(head);
        let tail = tail.trim_end_matches('0');
        if !tail.is_empty() {
            out.push('.');
            out.push_str(tail);
        }
        out.push('e');
        if exp < 0 {
            out.push('-');
        } else {
            out.push('+');
        }
        out.push_str(&format!("{:02}", exp.abs()));
        return out;
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(digits.trim_end_matches('0'));
    } else {
        let split = (exp + 1) as usize;
        let (int_part, frac_part) = digits.split_at(split);
        out.push_str(int_part);
        let frac_part = frac_part.trim_end_matches('0');
        if !frac_part.is_empty() {
            out.push('.');
            out.push_str(frac_part);
        }
    }
    out
}

/// The value a reader recovers from [`format_sig6`].
pub fn round_sig6(value: f64) -> f64 {
    if !value.is_finite() {
        return value;
    }
    format_sig6(value).parse().expect("formatted value parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plain_values() {
        assert_eq!(format_sig6(100.0), "100");
        assert_eq!(format_sig6(0.01), "0.01");
        assert_eq!(format_sig6(20.0), "20");
        assert_eq!(format_sig6(1.0 / 3.0), "0.333333");
        assert_eq!(format_sig6(-2.5), "-2.5");
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(-0.0), "0");
        assert_eq!(format_sig6(123456.0), "123456");
        assert_eq!(format_sig6(0.0001), "0.0001");
    }

    #[test]
    fn exponent_form() {
        assert_eq!(format_sig6(1234567.0), "1.23457e+06");
        assert_eq!(format_sig6(0.00001), "1e-05");
        assert_eq!(format_sig6(-3.5e-7), "-3.5e-07");
    }

    #[test]
    fn ties_round_to_even() {
        // Exactly representable ties.
        assert_eq!(format_sig6(1234565.0), "1.23456e+06");
        assert_eq!(format_sig6(1234575.0), "1.23458e+06");
        assert_eq!(format_sig6(0.1234565_f64), format!("{:.6}", 0.1234565_f64));
    }

    proptest! {
        #[test]
        fn canonical_values_are_fixed_points(v in -1.0e9f64..1.0e9) {
            let once = round_sig6(v);
            prop_assert_eq!(round_sig6(once), once);
            prop_assert_eq!(format_sig6(once), format_sig6(v));
        }
    }
}

//! Numeric formatting shared by every CSV emitter: 9 significant digits,
//! `.` as decimal separator, `NA` for missing or non-finite values.

/// Formats `x` like C's `%.9g`.
pub fn g9(x: f64) -> String {
    if x.is_nan() {
        return "NA".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".to_string();
    }
    // Round first so the exponent reflects the printed mantissa.
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

pub fn opt_g9(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), g9)
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

/// Joins already formatted fields into one LF-terminated CSV line.
pub fn line<I, S>(fields: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out = String::new();
    for (i, f) in fields.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(f.as_ref());
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(g9(0.0), "0");
        assert_eq!(g9(1.0), "1");
        assert_eq!(g9(11.0 / 6.0), "1.83333333");
        assert_eq!(g9(60.0 / 17.0), "3.52941176");
        assert_eq!(g9(-0.25), "-0.25");
        assert_eq!(g9(123456789.4), "123456789");
        assert_eq!(g9(1234567894.0), "1.23456789e+09");
        assert_eq!(g9(1.5e-7), "1.5e-07");
        assert_eq!(g9(9.9999999996), "10");
        assert_eq!(g9(f64::NAN), "NA");
        assert_eq!(opt_g9(None), "NA");
    }

    #[test]
    fn lines_are_lf_terminated() {
        assert_eq!(line(["a", "b"]), "a,b\n");
    }
}

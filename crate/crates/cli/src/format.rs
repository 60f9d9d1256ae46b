/// `%.6g`-style rendering used for every CSV number.
pub fn sig6(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    // exponent after rounding to six digits
    let sci = format!("{v:.5e}");
    let (mantissa, e) = sci.split_once('e').unwrap();
    let exp: i32 = e.parse().unwrap();
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(&format!("{v:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa), e)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn csv_row(values: &[f64]) -> String {
    values.iter().map(|v| sig6(*v)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.230654321), "0.230654");
        assert_eq!(sig6(1.5), "1.5");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e6");
        assert_eq!(sig6(-2.5e-7), "-2.5e-7");
        assert_eq!(sig6(9.9999999), "10");
        assert_eq!(sig6(0.0), "0");
    }
}

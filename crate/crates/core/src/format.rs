//! Fixed-precision text output shared by the CSV and JSON writers.

use num_complex::Complex64;

/// Fifteen significant digits in scientific notation.
pub fn num(x: f64) -> String {
    // -0.0 would otherwise print with a sign and break byte-identical output.
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.14e}")
}

/// Rounds to fifteen significant digits so JSON output is stable.
pub fn round15(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    num(x).parse().unwrap_or(x)
}

/// Complex entry as `a+bj`; purely real entries print without the imaginary part.
pub fn complex(z: Complex64) -> String {
    if z.im == 0.0 {
        num(z.re)
    } else {
        let im = num(z.im);
        if im.starts_with('-') {
            format!("{}{}j", num(z.re), im)
        } else {
            format!("{}+{}j", num(z.re), im)
        }
    }
}

/// Parses a real or `a+bj` complex entry.
pub fn parse_complex(s: &str) -> Option<Complex64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(re) = s.parse::<f64>() {
        return Some(Complex64::new(re, 0.0));
    }
    let body = s.strip_suffix('j').or_else(|| s.strip_suffix('i'))?;
    // Split at the last sign that is not part of an exponent or the leading sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&i| {
        (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
    });
    match split {
        Some(i) => {
            let re = body[..i].trim().parse().ok()?;
            let im_str = body[i..].trim();
            let im = match im_str {
                "+" => 1.0,
                "-" => -1.0,
                _ => im_str.parse().ok()?,
            };
            Some(Complex64::new(re, im))
        }
        None => {
            let im = match body {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => body.parse().ok()?,
            };
            Some(Complex64::new(0.0, im))
        }
    }
}

//! Stable text formatting for the emitted tables.
//!
//! Every number in a CSV cell goes through [`sig12`]: twelve significant
//! digits, plain decimal. Rust's float-to-string conversion is exact and
//! platform-independent, so files produced from the same inputs are
//! byte-identical everywhere -- which is what the golden-file tests pin.

use std::fmt::Write as _;

/// Twelve significant digits in plain decimal notation.
///
/// Falls back to the scientific form for magnitudes beyond 1e±27, which no
/// quantity in this domain reaches; non-finite values become `nan` / `inf`.
pub fn sig12(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_owned();
    }
    if x == 0.0 {
        return "0".to_owned(); // folds -0.0 into 0
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("{:e} always carries an exponent");
    let exp: i32 = exp.parse().expect("float exponent is an integer");
    if !(-27..=27).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    debug_assert_eq!(digits.len(), 12);
    // place the decimal point `exp + 1` digits in from the left
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat(-point as usize), digits)
    } else if (point as usize) < digits.len() {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    } else {
        format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
    };
    format!("{sign}{body}")
}

/// CSV cell for an optional quantity; absent values print as empty cells.
pub fn opt12(x: Option<f64>) -> String {
    x.map(sig12).unwrap_or_default()
}

/// Assemble a CSV file: a title comment, the resolved configuration echoed
/// on a comment line, optional extra comments, then header and rows.
pub fn csv_file(
    title: &str,
    config_json: &str,
    comments: &[String],
    header: &str,
    rows: &[String],
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# repremia {title}");
    let _ = writeln!(s, "# config: {config_json}");
    for c in comments {
        let _ = writeln!(s, "# {c}");
    }
    let _ = writeln!(s, "{header}");
    for r in rows {
        let _ = writeln!(s, "{r}");
    }
    s
}

/// Minimal XML escaping for JUnit attribute values.
fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One verification case for the JUnit summary.
pub struct JunitCase {
    pub check: String,
    pub name: String,
    /// `None` means pass; `Some` carries the failure message.
    pub failure: Option<String>,
}

/// JUnit-style XML so CI dashboards can ingest the verification run.
pub fn junit_file(cases: &[JunitCase]) -> String {
    let failures = cases.iter().filter(|c| c.failure.is_some()).count();
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<testsuites tests="{}" failures="{failures}">"#,
        cases.len()
    );
    let _ = writeln!(
        s,
        r#"  <testsuite name="repremia-verify" tests="{}" failures="{failures}">"#,
        cases.len()
    );
    for c in cases {
        let open = format!(
            r#"    <testcase classname="{}" name="{}""#,
            xml_escape(&c.check),
            xml_escape(&c.name)
        );
        match &c.failure {
            None => {
                let _ = writeln!(s, "{open}/>");
            }
            Some(msg) => {
                let _ = writeln!(s, "{open}>");
                let _ = writeln!(s, r#"      <failure message="{}"/>"#, xml_escape(msg));
                let _ = writeln!(s, "    </testcase>");
            }
        }
    }
    let _ = writeln!(s, "  </testsuite>");
    let _ = writeln!(s, "</testsuites>");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_decimals_carry_twelve_significant_digits() {
        assert_eq!(sig12(2.0), "2.00000000000");
        assert_eq!(sig12(0.5), "0.500000000000");
        assert_eq!(sig12(-0.5), "-0.500000000000");
        assert_eq!(sig12(1234.5678), "1234.56780000");
        assert_eq!(sig12(0.001), "0.00100000000000");
        assert_eq!(sig12(1e11), "100000000000");
        assert_eq!(sig12(4.923798137002451), "4.92379813700");
    }

    #[test]
    fn zeros_and_non_finite_values_have_fixed_spellings() {
        assert_eq!(sig12(0.0), "0");
        assert_eq!(sig12(-0.0), "0");
        assert_eq!(sig12(f64::NAN), "nan");
        assert_eq!(sig12(f64::INFINITY), "inf");
        assert_eq!(sig12(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn extreme_magnitudes_fall_back_to_scientific() {
        assert_eq!(sig12(1e40), "1.00000000000e40");
        assert_eq!(sig12(1e-40), "1.00000000000e-40");
    }

    #[test]
    fn rounding_happens_at_the_twelfth_digit() {
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(2.0 / 3.0), "0.666666666667");
    }

    #[test]
    fn csv_assembly_orders_comments_before_the_header() {
        let s = csv_file(
            "demo",
            "{}",
            &["warning: w".to_owned()],
            "a,b",
            &["1,2".to_owned()],
        );
        assert_eq!(s, "# repremia demo\n# config: {}\n# warning: w\na,b\n1,2\n");
    }

    #[test]
    fn junit_counts_failures_and_escapes_messages() {
        let xml = junit_file(&[
            JunitCase {
                check: "c".into(),
                name: "ok".into(),
                failure: None,
            },
            JunitCase {
                check: "c".into(),
                name: "bad".into(),
                failure: Some("margin > \"tol\"".into()),
            },
        ]);
        assert!(xml.contains(r#"tests="2" failures="1""#), "{xml}");
        assert!(xml.contains("margin &gt; &quot;tol&quot;"), "{xml}");
    }
}

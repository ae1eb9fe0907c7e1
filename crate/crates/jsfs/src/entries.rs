//! Entry lists and spectrum output as TSV.

use jsfs_core::{DemographyTree, SfsEntry};

use crate::error::{Error, Result};

/// Parses one `x` vector per line, counts separated by tabs or spaces.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_entries(text: &str, tree: &DemographyTree) -> Result<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let path = format!("entries line {}", i + 1);
        let x = line
            .split_whitespace()
            .map(|c| {
                c.parse::<usize>()
                    .map_err(|_| Error::validation(&path, format!("{c:?} is not a count")))
            })
            .collect::<Result<Vec<_>>>()?;
        tree.validate_entry(&x).map_err(|e| match e {
            jsfs_core::Error::Validation { reason, .. } => Error::validation(&path, reason),
            other => other.into(),
        })?;
        out.push(x);
    }
    Ok(out)
}

pub fn read_entries(path: &std::path::Path, tree: &DemographyTree) -> Result<Vec<Vec<usize>>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_entries(&text, tree)
}

/// `x` with 17 significant digits, as short as that allows; integral values
/// keep a trailing `.0`.
pub fn format_value(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0".into() } else { "0.0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if negative { "-" } else { "" };
    if (-4..17).contains(&exp) {
        let (int, frac) = if exp >= 0 {
            let split = exp as usize + 1;
            if digits.len() > split {
                (digits[..split].to_string(), digits[split..].to_string())
            } else {
                (format!("{digits:0<split$}"), String::new())
            }
        } else {
            ("0".to_string(), format!("{}{digits}", "0".repeat((-exp - 1) as usize)))
        };
        let frac = if frac.is_empty() { "0".to_string() } else { frac };
        format!("{sign}{int}.{frac}")
    } else {
        let frac = if digits.len() > 1 { &digits[1..] } else { "0" };
        format!("{sign}{}.{frac}e{exp}", &digits[..1])
    }
}

/// One line per entry: the counts, then `f(x)·scale`.
pub fn write_spectrum(entries: &[SfsEntry], scale: f64) -> String {
    let mut out = String::new();
    for e in entries {
        for c in &e.x {
            out.push_str(&c.to_string());
            out.push('\t');
        }
        out.push_str(&format_value(e.value * scale));
        out.push('\n');
    }
    out
}

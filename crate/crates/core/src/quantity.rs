//! Numeric surface forms: `12.5%`, `8.3B`, `1.57E+12`, `1,024`, `−0.4`.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericValue {
    pub magnitude: f64,
    /// Fractional digits written in the mantissa (`8.30E+09` has 2).
    pub display_precision: u32,
    pub is_percent: bool,
    /// Multiplier contributed by a K/M/B/T suffix and/or an exponent.
    pub scale_applied: f64,
    /// True when the surface form carried a suffix or exponent.
    pub scaled: bool,
    /// True when the surface form started with an explicit `+` or minus sign.
    pub signed: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum QuantityError {
    #[error("not a number: {0:?}")]
    NotNumeric(String),
    #[error("number out of range: {0:?}")]
    OutOfRange(String),
}

// Mantissa with optional sign, thousands groups, fraction and exponent.
// Suffixes and percent signs are handled after the match so that "16GB" and
// "8.3B" can be told apart without lookahead.
static MANTISSA: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?x)
        (?P<sign>[+\-\u{2212}\u{2013}])?
        (?:
            (?P<int>\d{1,3}(?:,\d{3})+|\d+)(?:\.(?P<frac>\d+))?
          | \.(?P<frac_only>\d+)
        )
        (?:[eE](?P<exp>[+\-\u{2212}]?\d{1,3}))?",
    )
    .expect("static regex")
});

/// A number found inside running text.
#[derive(Debug, Clone, PartialEq)]
pub struct NumberToken {
    /// Byte range in the scanned text, covering sign, suffix and `%`.
    pub range: Range<usize>,
    pub value: NumericValue,
}

fn suffix_exponent(c: char) -> Option<i32> {
    match c.to_ascii_uppercase() {
        'K' => Some(3),
        'M' => Some(6),
        'B' => Some(9),
        'T' => Some(12),
        _ => None,
    }
}

/// Extends a mantissa match at `end` with an optional scale suffix and `%`.
/// A suffix letter only counts when no further letter or digit follows it.
fn extend_match(text: &str, end: usize) -> (usize, Option<i32>, bool) {
    let rest = &text[end..];
    let mut chars = rest.char_indices();
    let mut pos = end;
    let mut suffix = None;
    if let Some((_, c)) = chars.next() {
        if let Some(e) = suffix_exponent(c) {
            let after = rest[c.len_utf8()..].chars().next();
            if !after.is_some_and(|a| a.is_alphanumeric()) {
                suffix = Some(e);
                pos += c.len_utf8();
            }
        }
    }
    let tail = &text[pos..];
    let pct_len = if tail.starts_with('%') {
        1
    } else if tail.starts_with(" %") {
        2
    } else {
        0
    };
    (pos + pct_len, suffix, pct_len > 0)
}

fn build_value(caps: &regex::Captures<'_>, suffix: Option<i32>, pct: bool, raw: &str) -> Result<NumericValue, QuantityError> {
    let sign = caps.name("sign").map(|m| m.as_str());
    let negative = matches!(sign, Some("-") | Some("\u{2212}") | Some("\u{2013}"));
    let int = caps.name("int").map_or("0", |m| m.as_str()).replace(',', "");
    let frac = caps.name("frac").or_else(|| caps.name("frac_only")).map_or("", |m| m.as_str());
    let exp: i32 = match caps.name("exp") {
        Some(m) => m.as_str().replace('\u{2212}', "-").parse().map_err(|_| QuantityError::NotNumeric(raw.into()))?,
        None => 0,
    };
    let total_exp = exp + suffix.unwrap_or(0);
    // Parsing the assembled decimal string keeps the magnitude correctly rounded.
    let literal = format!("{}{}.{}e{}", if negative { "-" } else { "" }, int, if frac.is_empty() { "0" } else { frac }, total_exp);
    let magnitude: f64 = literal.parse().map_err(|_| QuantityError::NotNumeric(raw.into()))?;
    if !magnitude.is_finite() {
        return Err(QuantityError::OutOfRange(raw.into()));
    }
    Ok(NumericValue {
        magnitude,
        display_precision: frac.len() as u32,
        is_percent: pct,
        scale_applied: 10f64.powi(total_exp),
        scaled: caps.name("exp").is_some() || suffix.is_some(),
        signed: sign.is_some(),
    })
}

/// Parses a single numeric token. Surrounding whitespace is ignored.
pub fn parse_quantity(text: &str) -> Result<NumericValue, QuantityError> {
    let t = text.trim();
    let caps = MANTISSA.captures(t).ok_or_else(|| QuantityError::NotNumeric(text.into()))?;
    let m = caps.get(0).expect("group 0");
    if m.start() != 0 {
        return Err(QuantityError::NotNumeric(text.into()));
    }
    let (end, suffix, pct) = extend_match(t, m.end());
    if end != t.len() {
        return Err(QuantityError::NotNumeric(text.into()));
    }
    build_value(&caps, suffix, pct, text)
}

/// All numbers in running text, left to right, non-overlapping.
pub fn scan_numbers(text: &str) -> Vec<NumberToken> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(caps) = MANTISSA.captures_at(text, from) {
        let m = caps.get(0).expect("group 0");
        let (end, suffix, pct) = extend_match(text, m.end());
        if let Ok(value) = build_value(&caps, suffix, pct, &text[m.start()..end]) {
            out.push(NumberToken { range: m.start()..end, value });
        }
        from = end.max(m.start() + 1);
        while !text.is_char_boundary(from) {
            from += 1;
        }
    }
    out
}

static CELL_DECORATION: LazyLock<Regex> = LazyLock::new(|| {
    // what may surround the value in a numeric cell: a ± spread, a short unit,
    // brackets, significance markers and arrows
    Regex::new(r"^(?:\s*(?:±\s*[\d.,]+%?|[A-Za-z]{1,3}|[()\[\]*†‡§↑↓]))*\s*$").expect("static regex")
});

/// Numeric reading of a table cell, if the cell is essentially one number.
///
/// `"85.1"`, `"(0.42)"`, `"174GB"`, `"71.3 ± 0.4"` and `"12.5%*"` all parse;
/// `"BERT-base"`, `"3 / 4"` and `"–"` do not.
pub fn parse_cell_quantity(text: &str) -> Option<NumericValue> {
    let tokens = scan_numbers(text);
    let first = tokens.first()?;
    let prefix = &text[..first.range.start];
    let suffix = &text[first.range.end..];
    if !prefix.chars().all(|c| c.is_whitespace() || matches!(c, '(' | '[')) {
        return None;
    }
    if !CELL_DECORATION.is_match(suffix) {
        return None;
    }
    Some(first.value.clone())
}

/// Rounds half away from zero to `precision` fractional digits.
///
/// The scaled value is nudged by a relative 1e-12 first so that binary
/// representations such as 0.125 -> 0.12499999… still round up.
pub fn round_half_up(x: f64, precision: u32) -> f64 {
    let p = 10f64.powi(precision as i32);
    let scaled = (x.abs() * p * (1.0 + 1e-12) + 0.5).floor();
    (scaled / p).copysign(x)
}

/// Equality up to float noise from decimal conversion.
pub fn same_magnitude(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// True when `x`, rounded to the display precision of `target`, equals it.
pub fn rounds_to(x: f64, target: &NumericValue) -> bool {
    same_magnitude(round_half_up(x, target.display_precision), target.magnitude)
}

/// Relative difference `|a - b| / max(|a|, |b|)`; 0 when both are 0.
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let d = a.abs().max(b.abs());
    if d == 0.0 {
        0.0
    } else {
        (a - b).abs() / d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_notation() {
        let v = parse_quantity("1.57E+12").unwrap();
        assert_eq!(v.magnitude, 1.57e12);
        assert_eq!(v.display_precision, 2);
        assert!(v.scaled && !v.is_percent);
    }

    #[test]
    fn percent() {
        let v = parse_quantity("12.5%").unwrap();
        assert_eq!((v.magnitude, v.is_percent, v.display_precision), (12.5, true, 1));
    }

    #[test]
    fn suffixes_and_separators() {
        assert_eq!(parse_quantity("8.3B").unwrap().magnitude, 8.3e9);
        assert_eq!(parse_quantity("1.6t").unwrap().magnitude, 1.6e12);
        assert_eq!(parse_quantity("175B").unwrap().magnitude, 175e9);
        assert_eq!(parse_quantity("2K").unwrap().magnitude, 2000.0);
        assert_eq!(parse_quantity("1,024").unwrap().magnitude, 1024.0);
        assert_eq!(parse_quantity("\u{2212}0.4").unwrap().magnitude, -0.4);
        assert_eq!(parse_quantity("+4.5").unwrap().magnitude, 4.5);
        assert!(parse_quantity("+4.5").unwrap().signed);
        assert_eq!(parse_quantity(".5").unwrap().magnitude, 0.5);
    }

    #[test]
    fn rejects_non_numbers() {
        for bad in ["abc", "", "GPT-3", "12.5.1", "3x", "1e", "8.3Bn"] {
            assert!(parse_quantity(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn scan_keeps_units_outside_the_token() {
        let toks = scan_numbers("trained on 174GB with 8.3B params, +4.2% gain");
        let found: Vec<f64> = toks.iter().map(|t| t.value.magnitude).collect();
        assert_eq!(found, vec![174.0, 8.3e9, 4.2]);
        assert_eq!(&"trained on 174GB with 8.3B params, +4.2% gain"[toks[2].range.clone()], "+4.2%");
    }

    #[test]
    fn cell_parsing() {
        assert_eq!(parse_cell_quantity("85.1").unwrap().magnitude, 85.1);
        assert_eq!(parse_cell_quantity("(0.42)").unwrap().magnitude, 0.42);
        assert_eq!(parse_cell_quantity("174GB").unwrap().magnitude, 174.0);
        assert_eq!(parse_cell_quantity("71.3 ± 0.4").unwrap().magnitude, 71.3);
        assert_eq!(parse_cell_quantity("8.30E+09").unwrap().magnitude, 8.3e9);
        assert!(parse_cell_quantity("BERT-base").is_none());
        assert!(parse_cell_quantity("3 / 4").is_none());
        assert!(parse_cell_quantity("\u{2013}").is_none());
        assert!(parse_cell_quantity("GPT-3 CoT").is_none());
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(27.20, 1), 27.2);
        assert_eq!(round_half_up(0.125, 2), 0.13);
        assert_eq!(round_half_up(-0.125, 2), -0.13);
        assert_eq!(round_half_up(85.14, 1), 85.1);
        let target = parse_quantity("1.6T").unwrap();
        assert!(!rounds_to(1.57e12, &target));
        assert!(rounds_to(8.30e9, &parse_quantity("8.3B").unwrap()));
    }
}

//! Decimal helpers. Scores and evidence values are exact decimals internally
//! and plain JSON numbers on the wire.

use std::str::FromStr;

use rust_decimal::prelude::ToPrimitive;
use rust_decimal::{Decimal, RoundingStrategy};
use serde::{Deserialize, Deserializer, Serializer};

/// Fractional digits kept for evidence values and scores.
pub const FRACTION_DIGITS: u32 = 6;

/// Convert a JSON-sourced `f64` to the decimal it was written as.
///
/// Rust prints the shortest string that round-trips, so `5.962_f64` becomes
/// exactly `5.962` rather than its binary expansion.
pub fn from_f64(value: f64) -> Option<Decimal> {
    if !value.is_finite() {
        return None;
    }
    Decimal::from_str(&value.to_string())
        .or_else(|_| Decimal::from_scientific(&format!("{value:e}")))
        .ok()
}

/// Parse a plain decimal literal: optional sign, digits, optional fraction.
/// Exponents, thousands separators and surrounding text are rejected.
pub fn parse_literal(text: &str) -> Option<Decimal> {
    let body = text.strip_prefix(['+', '-']).unwrap_or(text);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if int.is_empty() || !int.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if let Some(f) = frac {
        if f.is_empty() || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    Decimal::from_str(text.strip_prefix('+').unwrap_or(text)).ok()
}

/// Round to the crate-wide precision and strip trailing zeros so that
/// `2.50` and `2.5` compare and print identically.
pub fn canonical(value: Decimal) -> Decimal {
    value.round_dp(FRACTION_DIGITS).normalize()
}

/// Fractional digits shown when a score is reported to a user.
pub const REPORT_DIGITS: u32 = 3;

/// Round half away from zero to [`REPORT_DIGITS`], the way scores are printed.
pub fn reported(value: Decimal) -> Decimal {
    value.round_dp_with_strategy(REPORT_DIGITS, RoundingStrategy::MidpointAwayFromZero)
}

/// Render with an explicit sign and a fixed number of fractional digits.
pub fn format_signed(value: Decimal, digits: u32) -> String {
    let rounded = value.round_dp_with_strategy(digits, RoundingStrategy::MidpointAwayFromZero);
    if rounded.is_sign_negative() && !rounded.is_zero() {
        format!("{:.*}", digits as usize, rounded)
    } else {
        format!("+{:.*}", digits as usize, rounded.abs())
    }
}

pub fn serialize<S: Serializer>(value: &Decimal, s: S) -> Result<S::Ok, S::Error> {
    let f = value
        .to_f64()
        .ok_or_else(|| serde::ser::Error::custom("decimal out of f64 range"))?;
    s.serialize_f64(f)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Decimal, D::Error> {
    let f = f64::deserialize(d)?;
    from_f64(f).ok_or_else(|| serde::de::Error::custom("expected a finite number"))
}

/// `#[serde(with = "crate::decimal::vec")]` for lists of numbers.
pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(values: &[Decimal], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            let f = v
                .to_f64()
                .ok_or_else(|| serde::ser::Error::custom("decimal out of f64 range"))?;
            seq.serialize_element(&f)?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Decimal>, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        raw.into_iter()
            .map(|f| from_f64(f).ok_or_else(|| serde::de::Error::custom("expected a finite number")))
            .collect()
    }
}

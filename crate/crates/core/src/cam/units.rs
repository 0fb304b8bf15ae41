//! Unit-bearing manifest values: bandwidth and delay.
//!
//! Magnitudes are unsigned decimals. A fractional magnitude is accepted only
//! when it lands on a whole number of base units.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UnitError {
    #[error("empty value")]
    Empty,
    #[error("malformed number `{0}`")]
    MalformedNumber(String),
    #[error("unknown unit suffix `{0}`")]
    UnknownSuffix(String),
    #[error("value must be positive")]
    ZeroOrNegative,
    #[error("`{0}` is not a whole number of base units")]
    NotExact(String),
    #[error("`{0}` is out of range")]
    Overflow(String),
}

const BANDWIDTH_UNITS: &[(&str, u64)] = &[("G", 1_000_000_000), ("M", 1_000_000), ("K", 1_000)];
const DELAY_UNITS: &[(&str, u64)] = &[
    ("s", 1_000_000_000),
    ("ms", 1_000_000),
    ("us", 1_000),
    ("ns", 1),
];

/// Splits `text` into its numeric prefix and suffix, then scales exactly.
fn scaled(text: &str, suffix_multiplier: impl Fn(&str) -> Option<u64>) -> Result<u64, UnitError> {
    if text.is_empty() {
        return Err(UnitError::Empty);
    }
    let negative = text.starts_with('-');
    let body = if negative { &text[1..] } else { text };
    let split = body
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(body.len());
    let (number, suffix) = body.split_at(split);
    let multiplier =
        suffix_multiplier(suffix).ok_or_else(|| UnitError::UnknownSuffix(suffix.to_string()))?;
    let (int_part, frac_part) = match number.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (number, None),
    };
    let well_formed =
        !int_part.is_empty() && frac_part.is_none_or(|f| !f.is_empty() && !f.contains('.'));
    if !well_formed {
        return Err(UnitError::MalformedNumber(text.to_string()));
    }
    let frac = frac_part.unwrap_or("").trim_end_matches('0');
    let int_digits = int_part.trim_start_matches('0');
    if int_digits.len() > 30 {
        return Err(UnitError::Overflow(text.to_string()));
    }
    let int_value: u128 = if int_digits.is_empty() {
        0
    } else {
        int_digits
            .parse()
            .map_err(|_| UnitError::MalformedNumber(text.to_string()))?
    };
    let frac_value: u128 = if frac.is_empty() {
        0
    } else if frac.len() > 18 {
        return Err(UnitError::NotExact(text.to_string()));
    } else {
        frac.parse()
            .map_err(|_| UnitError::MalformedNumber(text.to_string()))?
    };
    let frac_scale = 10u128.pow(frac.len() as u32);
    let frac_scaled = frac_value * u128::from(multiplier);
    if !frac_scaled.is_multiple_of(frac_scale) {
        return Err(UnitError::NotExact(text.to_string()));
    }
    let total = int_value
        .checked_mul(u128::from(multiplier))
        .and_then(|v| v.checked_add(frac_scaled / frac_scale))
        .ok_or_else(|| UnitError::Overflow(text.to_string()))?;
    if negative || total == 0 {
        return Err(UnitError::ZeroOrNegative);
    }
    u64::try_from(total).map_err(|_| UnitError::Overflow(text.to_string()))
}

/// Parses a bandwidth such as `5M` into bits per second. Suffixes K, M and
/// G are decimal (1e3, 1e6, 1e9) and case-insensitive; no suffix means
/// plain bits per second.
pub fn parse_bandwidth(text: &str) -> Result<u64, UnitError> {
    scaled(text, |suffix| {
        if suffix.is_empty() {
            return Some(1);
        }
        BANDWIDTH_UNITS
            .iter()
            .find(|(s, _)| s.eq_ignore_ascii_case(suffix))
            .map(|(_, m)| *m)
    })
}

/// Parses a delay such as `10ms` into nanoseconds. The unit (ns, us, ms, s)
/// is required.
pub fn parse_delay(text: &str) -> Result<u64, UnitError> {
    scaled(text, |suffix| {
        DELAY_UNITS
            .iter()
            .find(|(s, _)| *s == suffix)
            .map(|(_, m)| *m)
    })
}

fn largest_exact(value: u64, units: &[(&str, u64)]) -> String {
    units
        .iter()
        .find(|(_, m)| value.is_multiple_of(*m))
        .map(|(s, m)| format!("{}{}", value / m, s))
        .unwrap_or_else(|| value.to_string())
}

/// Canonical bandwidth text: the largest suffix with an integer magnitude.
pub fn format_bandwidth(bps: u64) -> String {
    largest_exact(bps, BANDWIDTH_UNITS)
}

/// Canonical delay text: the largest suffix with an integer magnitude.
pub fn format_delay(ns: u64) -> String {
    largest_exact(ns, DELAY_UNITS)
}

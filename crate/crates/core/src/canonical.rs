//! Canonical text serialization shared by ledger, extraction and scoring.

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

pub const MISSING: &str = "None";

/// Shortest decimal that round-trips the value; never exponent notation
/// for the magnitudes used in clinical values.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    format!("{v}")
}

pub fn render_quantity(value: f64, unit: Option<&str>) -> String {
    match unit {
        Some(u) if !u.is_empty() => format!("{} {}", format_number(value), u),
        _ => format_number(value),
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if s.len() == 10 && s.as_bytes()[4] == b'-' {
        return NaiveDate::parse_from_str(s, "%Y-%m-%d").ok();
    }
    if s.len() == 10 && s.as_bytes()[2] == b'.' {
        return NaiveDate::parse_from_str(s, "%d.%m.%Y").ok();
    }
    if s.len() == 8 && s.bytes().all(|b| b.is_ascii_digit()) {
        return NaiveDate::parse_from_str(s, "%Y%m%d").ok();
    }
    None
}

pub fn parse_time(s: &str) -> Option<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .ok()
}

/// Accepts ISO (`T` or space separated, with or without seconds), dotted
/// `DD.MM.YYYY HH:MM`, HL7 `YYYYMMDDHHMM[SS]` and bare dates (midnight).
pub fn parse_datetime(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    if s.bytes().all(|b| b.is_ascii_digit()) {
        return match s.len() {
            8 => parse_date(s).map(|d| d.and_time(NaiveTime::MIN)),
            12 => NaiveDateTime::parse_from_str(s, "%Y%m%d%H%M").ok(),
            14 => NaiveDateTime::parse_from_str(s, "%Y%m%d%H%M%S").ok(),
            _ => None,
        };
    }
    let s = s.trim_end_matches('Z');
    if let Some((d, t)) = s.split_once(['T', ' ']) {
        return Some(parse_date(d)?.and_time(parse_time(t)?));
    }
    parse_date(s).map(|d| d.and_time(NaiveTime::MIN))
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format("%Y-%m-%dT%H:%M").to_string()
}

pub fn format_date(d: &NaiveDate) -> String {
    d.format("%Y-%m-%d").to_string()
}

pub fn format_dotted_date(d: &NaiveDate) -> String {
    d.format("%d.%m.%Y").to_string()
}

fn parse_number(s: &str) -> Option<f64> {
    let body = s.strip_prefix('-').unwrap_or(s);
    let mut parts = body.splitn(2, '.');
    let int = parts.next()?;
    let frac = parts.next();
    let ok = !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()));
    if ok {
        s.parse().ok()
    } else {
        None
    }
}

/// Normalization applied to both sides of an exact-match comparison:
/// trim, collapse whitespace, ISO dates, shortest numeric form, case-fold.
pub fn canonical_value(s: &str) -> String {
    let collapsed = s.split_whitespace().collect::<Vec<_>>().join(" ");
    if let Some(d) = parse_date(&collapsed) {
        return format_date(&d);
    }
    let (head, rest) = match collapsed.split_once(' ') {
        Some((h, r)) => (h, Some(r)),
        None => (collapsed.as_str(), None),
    };
    let out = match parse_number(head) {
        Some(n) => match rest {
            Some(r) => format!("{} {}", format_number(n), r),
            None => format_number(n),
        },
        None => collapsed.clone(),
    };
    out.to_lowercase()
}

pub fn values_match(a: &str, b: &str) -> bool {
    canonical_value(a) == canonical_value(b)
}

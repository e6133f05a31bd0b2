//! Time module: instants at one-second resolution rendered as DER GeneralizedTime.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, Timelike, Utc};

/// A UTC instant with whole-second precision.
///
/// Always renders as `YYYYMMDDHHMMSSZ`; years outside 0000..=9999 are not
/// representable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GeneralizedTime(i64);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid GeneralizedTime: {0}")]
pub struct TimeError(pub String);

const MIN_SECS: i64 = -62_167_219_200; // 0000-01-01T00:00:00Z
const MAX_SECS: i64 = 253_402_300_799; // 9999-12-31T23:59:59Z

pub const SECS_PER_DAY: i64 = 86_400;

impl GeneralizedTime {
    pub fn from_unix(secs: i64) -> Result<Self, TimeError> {
        if (MIN_SECS..=MAX_SECS).contains(&secs) {
            Ok(Self(secs))
        } else {
            Err(TimeError(format!("{secs} out of range")))
        }
    }

    pub fn unix(self) -> i64 {
        self.0
    }

    pub fn now() -> Self {
        Self(Utc::now().timestamp())
    }

    pub fn from_ymd_hms(
        y: i32,
        mo: u32,
        d: u32,
        h: u32,
        mi: u32,
        s: u32,
    ) -> Result<Self, TimeError> {
        let dt = NaiveDate::from_ymd_opt(y, mo, d)
            .and_then(|date| date.and_hms_opt(h, mi, s))
            .ok_or_else(|| TimeError(format!("{y:04}-{mo:02}-{d:02} {h:02}:{mi:02}:{s:02}")))?;
        Self::from_unix(dt.and_utc().timestamp())
    }

    pub fn plus_secs(self, secs: i64) -> Self {
        Self((self.0 + secs).clamp(MIN_SECS, MAX_SECS))
    }

    pub fn plus_days(self, days: i64) -> Self {
        self.plus_secs(days * SECS_PER_DAY)
    }

    /// Calendar addition (Feb 29 clamps to Feb 28).
    pub fn plus_years(self, years: u32) -> Self {
        self.datetime()
            .checked_add_months(chrono::Months::new(12 * years))
            .and_then(|d| Self::from_unix(d.timestamp()).ok())
            .unwrap_or(Self(MAX_SECS))
    }

    fn datetime(self) -> DateTime<Utc> {
        DateTime::from_timestamp(self.0, 0).expect("range checked at construction")
    }

    /// The 15-byte DER content octets.
    pub fn to_der_string(self) -> String {
        let dt = self.datetime();
        format!(
            "{:04}{:02}{:02}{:02}{:02}{:02}Z",
            dt.year(),
            dt.month(),
            dt.day(),
            dt.hour(),
            dt.minute(),
            dt.second()
        )
    }

    /// Strict parse of `YYYYMMDDHHMMSSZ`. Offsets and fractional seconds are rejected.
    pub fn parse_der_string(s: &str) -> Result<Self, TimeError> {
        let b = s.as_bytes();
        if b.len() != 15 || b[14] != b'Z' || !b[..14].iter().all(u8::is_ascii_digit) {
            return Err(TimeError(s.to_string()));
        }
        let num = |r: std::ops::Range<usize>| -> u32 { s[r].parse().expect("digits checked") };
        Self::from_ymd_hms(
            num(0..4) as i32,
            num(4..6),
            num(6..8),
            num(8..10),
            num(10..12),
            num(12..14),
        )
        .map_err(|_| TimeError(s.to_string()))
    }
}

impl fmt::Display for GeneralizedTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_der_string())
    }
}

impl FromStr for GeneralizedTime {
    type Err = TimeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse_der_string(s.trim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_zulu() {
        let t = GeneralizedTime::from_ymd_hms(2025, 1, 1, 0, 0, 0).unwrap();
        assert_eq!(t.to_string(), "20250101000000Z");
        assert_eq!(t.unix(), 1_735_689_600);
        assert_eq!("20250101000000Z".parse::<GeneralizedTime>().unwrap(), t);
    }

    #[test]
    fn rejects_offsets_and_fractions() {
        for bad in [
            "20250101000000+0100",
            "20250101000000.5Z",
            "2025010100000Z",
            "20251301000000Z",
            "20250230000000Z",
        ] {
            assert!(GeneralizedTime::parse_der_string(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn extreme_years() {
        assert_eq!(
            GeneralizedTime::from_unix(MIN_SECS).unwrap().to_string(),
            "00000101000000Z"
        );
        assert_eq!(
            GeneralizedTime::from_unix(MAX_SECS).unwrap().to_string(),
            "99991231235959Z"
        );
        assert!(GeneralizedTime::from_unix(MAX_SECS + 1).is_err());
    }
}

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc, Weekday};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// ISO-8601 week (Monday to Sunday). Ordering is chronological.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeekKey {
    pub iso_year: i32,
    pub iso_week: u32,
}

impl WeekKey {
    pub fn new(iso_year: i32, iso_week: u32) -> Result<Self> {
        NaiveDate::from_isoywd_opt(iso_year, iso_week, Weekday::Mon)
            .map(|_| WeekKey { iso_year, iso_week })
            .ok_or_else(|| Error::domain(format!("no ISO week {iso_year}-W{iso_week:02}")))
    }

    pub fn of_date(date: NaiveDate) -> Self {
        let w = date.iso_week();
        WeekKey {
            iso_year: w.year(),
            iso_week: w.week(),
        }
    }

    /// Week containing `ts`, evaluated in UTC.
    pub fn of_timestamp(ts: DateTime<Utc>) -> Self {
        Self::of_date(ts.date_naive())
    }

    pub fn monday(self) -> NaiveDate {
        NaiveDate::from_isoywd_opt(self.iso_year, self.iso_week, Weekday::Mon)
            .expect("WeekKey is always a valid ISO week")
    }

    pub fn sunday(self) -> NaiveDate {
        self.monday() + Duration::days(6)
    }

    /// Last instant belonging to the week.
    pub fn end(self) -> DateTime<Utc> {
        self.sunday()
            .and_hms_opt(23, 59, 59)
            .expect("valid time")
            .and_utc()
    }

    pub fn next(self) -> Self {
        Self::of_date(self.monday() + Duration::days(7))
    }

    pub fn prev(self) -> Self {
        Self::of_date(self.monday() - Duration::days(7))
    }

    /// Every week from `self` through `last`, inclusive.
    pub fn range_inclusive(self, last: WeekKey) -> Vec<WeekKey> {
        let mut out = Vec::new();
        let mut w = self;
        while w <= last {
            out.push(w);
            w = w.next();
        }
        out
    }
}

/// Week of the article timestamp; the grouping key for weekly aggregation.
pub fn assign_week(published_at: DateTime<Utc>) -> WeekKey {
    WeekKey::of_timestamp(published_at)
}

impl fmt::Display for WeekKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-W{:02}", self.iso_year, self.iso_week)
    }
}

impl FromStr for WeekKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (y, w) = s
            .split_once("-W")
            .ok_or_else(|| Error::domain(format!("bad week key {s:?}")))?;
        let y: i32 = y.parse().map_err(|_| Error::domain(format!("bad week key {s:?}")))?;
        let w: u32 = w.parse().map_err(|_| Error::domain(format!("bad week key {s:?}")))?;
        WeekKey::new(y, w)
    }
}

impl Serialize for WeekKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for WeekKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trip() {
        let w = WeekKey::new(2021, 7).unwrap();
        assert_eq!(w.to_string(), "2021-W07");
        assert_eq!("2021-W07".parse::<WeekKey>().unwrap(), w);
        assert!("2021-W54".parse::<WeekKey>().is_err());
        assert!("2021/07".parse::<WeekKey>().is_err());
    }

    #[test]
    fn consecutive_weeks_cross_years() {
        // 2020 has 53 ISO weeks.
        let w = WeekKey::new(2020, 53).unwrap();
        assert_eq!(w.next(), WeekKey::new(2021, 1).unwrap());
        assert_eq!(w.next().prev(), w);
        assert_eq!((w.next().monday() - w.monday()).num_days(), 7);
    }

    #[test]
    fn ordering_is_chronological() {
        let a = WeekKey::new(2019, 52).unwrap();
        let b = WeekKey::new(2020, 1).unwrap();
        assert!(a < b);
        assert_eq!(a.range_inclusive(b).len(), 2);
    }

    #[test]
    fn sunday_late_night_stays_in_week() {
        let ts = "2020-01-05T23:59:59Z".parse::<DateTime<Utc>>().unwrap();
        assert_eq!(assign_week(ts), WeekKey::new(2020, 1).unwrap());
        let ts = "2020-01-06T00:00:00Z".parse::<DateTime<Utc>>().unwrap();
        assert_eq!(assign_week(ts), WeekKey::new(2020, 2).unwrap());
    }
}

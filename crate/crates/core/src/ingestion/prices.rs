use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::week::WeekKey;
use crate::{Error, Result};

/// Daily settlement of the front-month contract, USD per barrel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    #[serde(rename = "date")]
    pub trade_date: NaiveDate,
    pub close: f64,
}

/// Weekly log returns indexed by the later week of each pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReturnSeries {
    pub entries: Vec<(WeekKey, f64)>,
}

/// `label(t) = 1[r(t+1) > 0]`; the final return week carries no label.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabelSeries {
    pub entries: Vec<(WeekKey, bool)>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, week: WeekKey) -> Option<f64> {
        self.entries
            .binary_search_by_key(&week, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }
}

impl LabelSeries {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weeks(&self) -> Vec<WeekKey> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.entries.iter().map(|e| e.1).collect()
    }

    /// Share of positive labels; the denominator is labeled weeks only.
    pub fn positive_rate(&self) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        let pos = self.entries.iter().filter(|e| e.1).count();
        Some(pos as f64 / self.entries.len() as f64)
    }
}

/// Reads a `date,close` CSV with ISO dates.
pub fn read_prices_csv(path: &Path) -> Result<Vec<PriceBar>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| match e.kind() {
        csv::ErrorKind::Io(_) => Error::MissingInput(vec![path.to_path_buf()]),
        _ => Error::Csv(e),
    })?;
    let mut bars = Vec::new();
    for rec in rdr.deserialize() {
        let bar: PriceBar = rec?;
        bars.push(bar);
    }
    Ok(bars)
}

pub fn write_prices_csv(path: &Path, bars: &[PriceBar]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for b in bars {
        w.serialize(b)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// One close per ISO week: the close of the latest trading day in the week.
pub fn weekly_close_series(bars: &[PriceBar]) -> Result<Vec<(WeekKey, f64)>> {
    if bars.is_empty() {
        return Err(Error::domain("weekly closes: no price bars"));
    }
    for pair in bars.windows(2) {
        if pair[1].trade_date <= pair[0].trade_date {
            return Err(Error::domain(format!(
                "weekly closes: dates not strictly increasing at {}",
                pair[1].trade_date
            )));
        }
    }
    let mut out: Vec<(WeekKey, f64)> = Vec::new();
    for bar in bars {
        let week = WeekKey::of_date(bar.trade_date);
        match out.last_mut() {
            Some(last) if last.0 == week => last.1 = bar.close,
            _ => out.push((week, bar.close)),
        }
    }
    Ok(out)
}

/// `r_t = ln(P_t / P_{t-1})` over consecutive weekly closes.
pub fn weekly_log_returns(closes: &[(WeekKey, f64)]) -> Result<ReturnSeries> {
    if closes.len() < 2 {
        return Err(Error::domain("weekly returns: need at least two weekly closes"));
    }
    if let Some((w, p)) = closes.iter().find(|(_, p)| !(*p > 0.0) || !p.is_finite()) {
        return Err(Error::domain(format!("weekly returns: nonpositive close {p} in {w}")));
    }
    let entries = closes
        .windows(2)
        .map(|pair| (pair[1].0, (pair[1].1 / pair[0].1).ln()))
        .collect();
    Ok(ReturnSeries { entries })
}

pub fn make_labels(returns: &ReturnSeries) -> LabelSeries {
    let entries = returns
        .entries
        .windows(2)
        .map(|pair| (pair[0].0, pair[1].1 > 0.0))
        .collect();
    LabelSeries { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar(d: &str, close: f64) -> PriceBar {
        PriceBar {
            trade_date: d.parse().unwrap(),
            close,
        }
    }

    #[test]
    fn full_week_takes_friday_close() {
        let bars: Vec<_> = (6..=10)
            .zip([10.0, 11.0, 12.0, 13.0, 14.0])
            .map(|(d, c)| bar(&format!("2020-01-{d:02}"), c))
            .collect();
        let w = weekly_close_series(&bars).unwrap();
        assert_eq!(w, vec![(WeekKey::new(2020, 2).unwrap(), 14.0)]);
    }

    #[test]
    fn holiday_week_ends_thursday() {
        let bars = vec![bar("2020-07-01", 40.0), bar("2020-07-02", 50.0)];
        let w = weekly_close_series(&bars).unwrap();
        assert_eq!(w, vec![(WeekKey::new(2020, 27).unwrap(), 50.0)]);
    }

    #[test]
    fn year_boundary_weeks() {
        // 2019-12-30 (Mon) belongs to ISO 2020-W01; 2019-12-27 (Fri) to 2019-W52.
        let bars = vec![bar("2019-12-27", 61.0), bar("2019-12-30", 61.5), bar("2020-01-03", 63.0)];
        let w = weekly_close_series(&bars).unwrap();
        assert_eq!(
            w,
            vec![
                (WeekKey::new(2019, 52).unwrap(), 61.0),
                (WeekKey::new(2020, 1).unwrap(), 63.0)
            ]
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(weekly_close_series(&[]).is_err());
        assert!(weekly_close_series(&[bar("2020-01-02", 1.0), bar("2020-01-02", 2.0)]).is_err());
        let w1 = WeekKey::new(2020, 1).unwrap();
        assert!(weekly_log_returns(&[(w1, 1.0)]).is_err());
        assert!(weekly_log_returns(&[(w1, 1.0), (w1.next(), 0.0)]).is_err());
    }

    #[test]
    fn return_examples() {
        let w1 = WeekKey::new(2020, 1).unwrap();
        let r = weekly_log_returns(&[(w1, 100.0), (w1.next(), 110.0)]).unwrap();
        assert_eq!(r.entries, vec![(w1.next(), 1.1f64.ln())]);
        assert!((r.entries[0].1 - 0.095_310_179_804_324_87).abs() < 1e-15);
        let flat = weekly_log_returns(&[(w1, 5.0), (w1.next(), 5.0), (w1.next().next(), 5.0)]).unwrap();
        assert!(flat.entries.iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn label_examples() {
        let w: Vec<_> = WeekKey::new(2020, 1).unwrap().range_inclusive(WeekKey::new(2020, 3).unwrap());
        let r = ReturnSeries {
            entries: vec![(w[0], 0.02), (w[1], -0.01), (w[2], 0.03)],
        };
        assert_eq!(make_labels(&r).entries, vec![(w[0], false), (w[1], true)]);
        let single = ReturnSeries { entries: vec![(w[0], 0.5)] };
        assert!(make_labels(&single).is_empty());
        let zero_next = ReturnSeries {
            entries: vec![(w[0], 0.5), (w[1], 0.0)],
        };
        assert_eq!(make_labels(&zero_next).entries, vec![(w[0], false)]);
    }
}

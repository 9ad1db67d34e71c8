//! CSV ingestion, log-returns and date alignment.
//!
//! Input files carry one header row and at least a date column (ISO-8601)
//! and a value column. Levels must be strictly positive.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Observed levels on a calendar grid, sorted by date.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl RawSeries {
    /// Builds a series from unsorted rows. Rows are sorted by date; duplicate
    /// dates and non-positive values are rejected. Row numbers in errors are
    /// 1-based positions in the input order.
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        for (row, &value) in values.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositive {
                    row: row + 1,
                    value,
                });
            }
        }
        let mut rows: Vec<(usize, NaiveDate, f64)> = dates
            .into_iter()
            .zip(values)
            .enumerate()
            .map(|(i, (d, v))| (i + 1, d, v))
            .collect();
        rows.sort_by_key(|&(_, d, _)| d);
        for pair in rows.windows(2) {
            if pair[0].1 == pair[1].1 {
                return Err(Error::DuplicateDate {
                    row: pair[0].0.max(pair[1].0),
                    date: pair[1].1.to_string(),
                });
            }
        }
        let series = RawSeries {
            dates: rows.iter().map(|r| r.1).collect(),
            values: rows.iter().map(|r| r.2).collect(),
        };
        let gaps = series.gaps();
        if !gaps.is_empty() {
            log::warn!(
                "series has {} gap(s) in its daily grid (first after {})",
                gaps.len(),
                series.dates[gaps[0]]
            );
        }
        Ok(series)
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Positions `i` where the step from `dates[i]` to `dates[i + 1]` is longer
    /// than one day.
    pub fn gaps(&self) -> Vec<usize> {
        self.dates
            .windows(2)
            .enumerate()
            .filter(|(_, w)| (w[1] - w[0]).num_days() != 1)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Equidistant log-increments `D_k` with grid step `delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    delta: f64,
    returns: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dates: Option<Vec<NaiveDate>>,
}

impl ReturnSeries {
    pub fn new(delta: f64, returns: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("delta must be positive, got {delta}")));
        }
        if let Some(k) = returns.iter().position(|r| !r.is_finite()) {
            return Err(Error::invalid(format!("return {} is not finite", k + 1)));
        }
        Ok(ReturnSeries {
            delta,
            returns,
            dates: None,
        })
    }

    /// Attaches the end-of-interval date of every increment.
    pub fn with_dates(mut self, dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.len() != self.returns.len() {
            return Err(Error::GridMismatch(format!(
                "{} dates for {} returns",
                dates.len(),
                self.returns.len()
            )));
        }
        self.dates = Some(dates);
        Ok(self)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn dates(&self) -> Option<&[NaiveDate]> {
        self.dates.as_deref()
    }

    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    /// Sub-series at the given positions, in the order given.
    pub fn select(&self, indices: &[usize]) -> Result<ReturnSeries> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::invalid(format!(
                "index {bad} out of range for {} returns",
                self.len()
            )));
        }
        Ok(ReturnSeries {
            delta: self.delta,
            returns: indices.iter().map(|&i| self.returns[i]).collect(),
            dates: self
                .dates
                .as_ref()
                .map(|d| indices.iter().map(|&i| d[i]).collect()),
        })
    }
}

/// Reads `path` and extracts `date_column` / `value_column`.
pub fn load_csv(path: impl AsRef<Path>, date_column: &str, value_column: &str) -> Result<RawSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, date_column, value_column)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, date_column: &str, value_column: &str) -> Result<RawSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let date_idx = find(date_column)?;
    let value_idx = find(value_column)?;

    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            reason: e.to_string(),
        })?;
        let field = |idx: usize, what: &str| {
            record.get(idx).ok_or_else(|| Error::Parse {
                row,
                reason: format!("missing {what} field"),
            })
        };
        let raw_date = field(date_idx, "date")?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| Error::Parse {
            row,
            reason: format!("bad date `{raw_date}`: {e}"),
        })?;
        let raw_value = field(value_idx, "value")?;
        let value: f64 = raw_value.parse().map_err(|_| Error::Parse {
            row,
            reason: format!("bad value `{raw_value}`"),
        })?;
        dates.push(date);
        values.push(value);
    }
    RawSeries::new(dates, values)
}

/// `D_k = log v_k − log v_{k−1}`; no demeaning. Increment `k` is dated at
/// the end of its interval.
pub fn log_returns(series: &RawSeries, delta: f64) -> Result<ReturnSeries> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            need: 2,
            got: series.len(),
        });
    }
    let returns = series
        .values
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect();
    ReturnSeries::new(delta, returns)?.with_dates(series.dates[1..].to_vec())
}

/// Attention and price increments on a shared date grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub attention: ReturnSeries,
    pub price: ReturnSeries,
    /// End-of-interval dates shared by both series.
    pub dates: Vec<NaiveDate>,
}

/// Restricts both series to their common dates and differences them.
///
/// A return is kept only when both of its endpoint dates are present in both
/// series and one day apart; increments spanning a gap are dropped with a
/// warning so the grid stays equidistant.
pub fn align(attention: &RawSeries, price: &RawSeries, delta: f64) -> Result<AlignedPair> {
    let a: BTreeMap<NaiveDate, f64> = attention.dates.iter().copied().zip(attention.values.iter().copied()).collect();
    let b: BTreeMap<NaiveDate, f64> = price.dates.iter().copied().zip(price.values.iter().copied()).collect();
    let common: BTreeSet<NaiveDate> = a.keys().filter(|d| b.contains_key(d)).copied().collect();
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    let common: Vec<NaiveDate> = common.into_iter().collect();

    let mut dates = Vec::new();
    let mut ra = Vec::new();
    let mut rb = Vec::new();
    let mut dropped = 0usize;
    for w in common.windows(2) {
        if (w[1] - w[0]).num_days() != 1 {
            dropped += 1;
            continue;
        }
        dates.push(w[1]);
        ra.push(a[&w[1]].ln() - a[&w[0]].ln());
        rb.push(b[&w[1]].ln() - b[&w[0]].ln());
    }
    if dropped > 0 {
        log::warn!("alignment dropped {dropped} increment(s) spanning calendar gaps");
    }
    if dates.is_empty() {
        return Err(Error::TooShort { need: 2, got: 1 });
    }
    Ok(AlignedPair {
        attention: ReturnSeries::new(delta, ra)?.with_dates(dates.clone())?,
        price: ReturnSeries::new(delta, rb)?.with_dates(dates.clone())?,
        dates,
    })
}

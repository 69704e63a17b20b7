//! Price ingestion, percentage log-returns, calendar alignment and summary
//! statistics.

use std::collections::BTreeSet;
use std::fs::File;
use std::path::Path;

use chrono::NaiveDate;
use log::info;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

pub const DEFAULT_DATE_FORMAT: &str = "%Y-%m-%d";

/// Dated daily closing prices for one index. Dates strictly increase and every
/// close is finite and positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    ticker: String,
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    /// Build from unsorted observations. Sorts by date; rejects duplicates and
    /// non-positive or non-finite closes.
    pub fn new(ticker: impl Into<String>, mut obs: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let ticker = ticker.into();
        if obs.is_empty() {
            return Err(Error::NoValidRows(ticker));
        }
        obs.sort_by_key(|(d, _)| *d);
        for w in obs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateDate { date: w[0].0, source_name: ticker });
            }
        }
        if let Some((d, p)) = obs.iter().find(|(_, p)| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidParameter(format!("close {p} on {d} is not a positive finite price")));
        }
        let (dates, closes) = obs.into_iter().unzip();
        Ok(Self { ticker, dates, closes })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }

    /// Multiply every close by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let obs = self.dates.iter().copied().zip(self.closes.iter().map(|p| p * c)).collect();
        Self::new(self.ticker.clone(), obs)
    }
}

/// Dated percentage log-returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    ticker: String,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl ReturnSeries {
    pub fn new(ticker: impl Into<String>, dates: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidParameter(format!(
                "{} dates but {} returns",
                dates.len(),
                values.len()
            )));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("return dates must be strictly increasing".into()));
        }
        if let Some(i) = values.iter().position(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite return on {}", dates[i])));
        }
        Ok(Self { ticker: ticker.into(), dates, values })
    }

    /// Returns on consecutive weekdays starting at `start`, for synthetic data.
    pub fn from_values(ticker: impl Into<String>, start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        let dates = business_days(start, values.len());
        Self::new(ticker, dates, values)
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
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

    /// Keep observations with `start <= date <= end`.
    pub fn window(&self, start: Option<NaiveDate>, end: Option<NaiveDate>) -> Self {
        let keep = |d: &NaiveDate| start.is_none_or(|s| *d >= s) && end.is_none_or(|e| *d <= e);
        let (dates, values) = self
            .dates
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| keep(d))
            .map(|(d, v)| (*d, *v))
            .unzip();
        Self { ticker: self.ticker.clone(), dates, values }
    }

    /// Restrict to the dates in `keep`.
    fn restrict(&self, keep: &BTreeSet<NaiveDate>) -> Self {
        let (dates, values) = self
            .dates
            .iter()
            .zip(&self.values)
            .filter(|(d, _)| keep.contains(d))
            .map(|(d, v)| (*d, *v))
            .unzip();
        Self { ticker: self.ticker.clone(), dates, values }
    }

    /// Same dates, every value shifted by `c`.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            ticker: self.ticker.clone(),
            dates: self.dates.clone(),
            values: self.values.iter().map(|r| r + c).collect(),
        }
    }

    /// Same dates, every value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            ticker: self.ticker.clone(),
            dates: self.dates.clone(),
            values: self.values.iter().map(|r| r * c).collect(),
        }
    }

    /// Write as canonical `date,return` CSV. Values use shortest round-trip
    /// formatting, so reading back is lossless.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["date", "return"]).map_err(|e| csv_err(path, e))?;
        for (d, r) in self.dates.iter().zip(&self.values) {
            w.write_record([d.format(DEFAULT_DATE_FORMAT).to_string(), format!("{r}")])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read the canonical `date,return` CSV written by [`ReturnSeries::write_csv`].
    pub fn read_csv(path: &Path, ticker: impl Into<String>) -> Result<Self> {
        let rows = read_two_column(path, "return")?;
        let (dates, values): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let ticker = ticker.into();
        if dates.is_empty() {
            return Err(Error::NoValidRows(path.display().to_string()));
        }
        Self::new(ticker, dates, values).map_err(|e| Error::MalformedCsv {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }
}

/// A dated 0/1 regime indicator (1 = turmoil).
#[derive(Debug, Clone, PartialEq)]
pub struct DummySeries {
    dates: Vec<NaiveDate>,
    values: Vec<u8>,
}

impl DummySeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<u8>) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::InvalidParameter("dummy dates and values differ in length".into()));
        }
        if values.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("dummy values must be 0 or 1".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("dummy dates must be strictly increasing".into()));
        }
        Ok(Self { dates, values })
    }

    /// All-zero dummy on the dates of `returns`.
    pub fn zeros_like(returns: &ReturnSeries) -> Self {
        Self { dates: returns.dates.clone(), values: vec![0; returns.len()] }
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Fraction of ones.
    pub fn proportion(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    /// Restrict to the dates of `returns`. Every return date must be present.
    pub fn aligned_to(&self, returns: &ReturnSeries) -> Result<Self> {
        let mut values = Vec::with_capacity(returns.len());
        let mut j = 0;
        for d in returns.dates() {
            while j < self.dates.len() && self.dates[j] < *d {
                j += 1;
            }
            if j == self.dates.len() || self.dates[j] != *d {
                return Err(Error::MisalignedDummy(format!("no dummy value for {d}")));
            }
            values.push(self.values[j]);
        }
        Ok(Self { dates: returns.dates.clone(), values })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        w.write_record(["date", "turmoil"]).map_err(|e| csv_err(path, e))?;
        for (d, v) in self.dates.iter().zip(&self.values) {
            w.write_record([d.format(DEFAULT_DATE_FORMAT).to_string(), v.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let rows = read_two_column(path, "turmoil")?;
        let mut dates = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        for (d, v) in rows {
            if v != 0.0 && v != 1.0 {
                return Err(Error::MalformedCsv {
                    path: path.display().to_string(),
                    reason: format!("dummy value {v} on {d} is not 0/1"),
                });
            }
            dates.push(d);
            values.push(v as u8);
        }
        Self::new(dates, values)
    }
}

fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    use chrono::Datelike;
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if d.weekday().number_from_monday() <= 5 {
            out.push(d);
        }
        d = d.succ_opt().expect("date overflow");
    }
    out
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::MalformedCsv { path: path.display().to_string(), reason: e.to_string() }
}

fn read_two_column(path: &Path, value_col: &str) -> Result<Vec<(NaiveDate, f64)>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let di = column_index(&headers, "date", path)?;
    let vi = column_index(&headers, value_col, path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let bad = |reason: String| Error::MalformedCsv { path: path.display().to_string(), reason };
        let d = NaiveDate::parse_from_str(rec.get(di).unwrap_or("").trim(), DEFAULT_DATE_FORMAT)
            .map_err(|e| bad(format!("bad date: {e}")))?;
        let v: f64 = rec
            .get(vi)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad value on {d}: {e}")))?;
        out.push((d, v));
    }
    Ok(out)
}

fn column_index(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::MalformedCsv {
        path: path.display().to_string(),
        reason: format!("missing column '{name}'"),
    })
}

/// Column names and date format of a price CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvLayout {
    pub date_column: String,
    pub price_column: String,
    pub date_format: String,
}

impl Default for CsvLayout {
    fn default() -> Self {
        Self {
            date_column: "Date".into(),
            price_column: "Close".into(),
            date_format: DEFAULT_DATE_FORMAT.into(),
        }
    }
}

/// Outcome counts from [`load_prices`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped: usize,
    pub dropped_dates: Vec<String>,
}

/// Load daily closes from a CSV with a header row.
///
/// Rows whose price is missing, non-numeric, non-finite or non-positive are
/// dropped and counted; an unparseable date or a repeated date is an error.
pub fn load_prices(path: &Path, ticker: &str, layout: &CsvLayout) -> Result<(PriceSeries, LoadReport)> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.display().to_string()));
    }
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let di = column_index(&headers, &layout.date_column, path)?;
    let pi = column_index(&headers, &layout.price_column, path)?;

    let mut report = LoadReport::default();
    let mut obs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        report.rows_read += 1;
        let raw_date = rec.get(di).unwrap_or("").trim();
        let date = NaiveDate::parse_from_str(raw_date, &layout.date_format).map_err(|e| Error::MalformedCsv {
            path: path.display().to_string(),
            reason: format!("row {}: bad date '{raw_date}': {e}", report.rows_read),
        })?;
        match rec.get(pi).unwrap_or("").trim().parse::<f64>() {
            Ok(p) if p.is_finite() && p > 0.0 => obs.push((date, p)),
            _ => {
                report.rows_dropped += 1;
                report.dropped_dates.push(date.format(DEFAULT_DATE_FORMAT).to_string());
            }
        }
    }
    report.rows_kept = obs.len();
    if obs.is_empty() {
        return Err(Error::NoValidRows(path.display().to_string()));
    }
    let series = PriceSeries::new(ticker, obs).map_err(|e| match e {
        Error::DuplicateDate { date, .. } => Error::DuplicateDate { date, source_name: path.display().to_string() },
        other => other,
    })?;
    info!(
        target: "load_report",
        "ticker={ticker} path={} rows_read={} rows_kept={} rows_dropped={}",
        path.display(),
        report.rows_read,
        report.rows_kept,
        report.rows_dropped
    );
    Ok((series, report))
}

/// Percentage log-returns `100 (ln P_t - ln P_{t-1})`, dated by the later day.
pub fn log_returns(prices: &PriceSeries) -> Result<ReturnSeries> {
    if prices.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: prices.len() });
    }
    let values = prices.closes.windows(2).map(|w| 100.0 * (w[1].ln() - w[0].ln())).collect();
    Ok(ReturnSeries {
        ticker: prices.ticker.clone(),
        dates: prices.dates[1..].to_vec(),
        values,
    })
}

/// Restrict every series to the common dates.
pub fn align(series: &[ReturnSeries]) -> Result<Vec<ReturnSeries>> {
    if series.len() < 2 {
        return Err(Error::InvalidParameter("align needs at least two series".into()));
    }
    let mut common: BTreeSet<NaiveDate> = series[0].dates.iter().copied().collect();
    for s in &series[1..] {
        let other: BTreeSet<NaiveDate> = s.dates.iter().copied().collect();
        common = common.intersection(&other).copied().collect();
    }
    if common.is_empty() {
        return Err(Error::EmptyIntersection);
    }
    Ok(series
        .iter()
        .map(|s| {
            let out = s.restrict(&common);
            let dropped = s.len() - out.len();
            if dropped > 0 {
                info!(target: "align", "ticker={} dropped_dates={dropped}", s.ticker);
            }
            out
        })
        .collect())
}

/// Descriptive statistics. Skewness and kurtosis are `None` when the series has
/// zero dispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub stdev: f64,
    pub skewness: Option<f64>,
    /// m4/m2^2 - 3 (normal = 0).
    pub excess_kurtosis: Option<f64>,
    /// m4/m2^2 (normal = 3).
    pub raw_kurtosis: Option<f64>,
    pub n: usize,
}

/// Sample mean, (n-1) standard deviation and moment-ratio skewness/kurtosis
/// (n-denominator central moments).
pub fn summary_stats(returns: &ReturnSeries) -> Result<SummaryStats> {
    summary_of(returns.values())
}

pub(crate) fn summary_of(xs: &[f64]) -> Result<SummaryStats> {
    if xs.len() < 4 {
        return Err(Error::TooShort { needed: 4, got: xs.len() });
    }
    let mean = stats::mean(xs);
    let (m2, m3, m4) = stats::central_moments(xs);
    let stdev = stats::sample_variance(xs).max(0.0).sqrt();
    let degenerate = m2.sqrt() <= 1e-12 * mean.abs().max(1.0);
    let (skewness, raw) = if degenerate {
        (None, None)
    } else {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2)))
    };
    Ok(SummaryStats {
        mean,
        stdev,
        skewness,
        excess_kurtosis: raw.map(|k| k - 3.0),
        raw_kurtosis: raw,
        n: xs.len(),
    })
}

//! Weekly bucketing, normalization and correlation against a gold series.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Days, NaiveDate, Utc, Weekday};
use log::warn;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use thiserror::Error;

/// A 36-week gold curve shaped like a CDC ILI season, in percent.
pub const SHAPED_GOLD: &str = include_str!("../data/gold_cdc_shaped.csv");

/// Two-sided p-values below this print as `< 2.2e-16`.
pub const P_DISPLAY_FLOOR: f64 = 2.2e-16;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("season must start on a Sunday, got {0} ({1})")]
    NotSunday(NaiveDate, Weekday),
    #[error("season must have at least one week")]
    NoWeeks,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} points, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("series is constant; correlation undefined")]
    ZeroVariance,
    #[error("series contains a non-finite value")]
    NonFinite,
    #[error("correlation {0} outside the open interval (-1, 1)")]
    InvalidCorrelation(f64),
    #[error("normalization constant must be positive, got {0}")]
    InvalidK(f64),
    #[error("gold series is missing week {0}")]
    MissingWeek(u32),
    #[error("gold series lists week {0} more than once")]
    DuplicateWeek(u32),
    #[error("row {row}: week {week} outside 1..={weeks}")]
    WeekOutOfRange { row: usize, week: u32, weeks: u32 },
    #[error("row {row}: {reason}")]
    Parse { row: usize, reason: String },
    #[error("row {row}: negative value {value}")]
    NegativeValue { row: usize, value: f64 },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl StatsError {
    /// Errors caused by degenerate data rather than bad input.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            StatsError::ZeroVariance
                | StatsError::TooShort { .. }
                | StatsError::InvalidCorrelation(_)
                | StatsError::NonFinite
        )
    }
}

/// A Sunday-to-Saturday reporting week.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EpiWeek {
    pub index: u32,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Season {
    start: NaiveDate,
    weeks: u32,
}

impl Season {
    pub fn new(start: NaiveDate, weeks: u32) -> Result<Self, StatsError> {
        if start.weekday() != Weekday::Sun {
            return Err(StatsError::NotSunday(start, start.weekday()));
        }
        if weeks == 0 {
            return Err(StatsError::NoWeeks);
        }
        Ok(Season { start, weeks })
    }

    /// 2009-08-30 through 2010-05-08.
    pub fn flu_2009() -> Self {
        Season::new(NaiveDate::from_ymd_opt(2009, 8, 30).unwrap(), 36).unwrap()
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn weeks(&self) -> u32 {
        self.weeks
    }

    pub fn end(&self) -> NaiveDate {
        self.start + Days::new(7 * self.weeks as u64 - 1)
    }

    pub fn week_of_date(&self, date: NaiveDate) -> Option<u32> {
        let days = (date - self.start).num_days();
        if days < 0 {
            return None;
        }
        let index = days / 7 + 1;
        (index <= self.weeks as i64).then_some(index as u32)
    }

    pub fn week_of(&self, ts: &DateTime<Utc>) -> Option<u32> {
        self.week_of_date(ts.date_naive())
    }

    pub fn epi_week(&self, index: u32) -> Option<EpiWeek> {
        if index == 0 || index > self.weeks {
            return None;
        }
        let start = self.start + Days::new(7 * (index as u64 - 1));
        Some(EpiWeek {
            index,
            start,
            end: start + Days::new(6),
        })
    }

    pub fn epi_weeks(&self) -> impl Iterator<Item = EpiWeek> + '_ {
        (1..=self.weeks).filter_map(|i| self.epi_week(i))
    }
}

/// 1-based week index of `ts`, or `None` outside the season.
pub fn assign_epi_week(ts: &DateTime<Utc>, season_start: NaiveDate, weeks: u32) -> Result<Option<u32>, StatsError> {
    Ok(Season::new(season_start, weeks)?.week_of(ts))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeekRow {
    pub week: u32,
    pub filtered: u64,
    pub total: u64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySeries {
    pub rows: Vec<WeekRow>,
}

impl WeeklySeries {
    pub fn from_counts(filtered: &[u64], total: &[u64]) -> Result<Self, StatsError> {
        if filtered.len() != total.len() {
            return Err(StatsError::LengthMismatch(filtered.len(), total.len()));
        }
        let rows = filtered
            .iter()
            .zip(total)
            .enumerate()
            .map(|(i, (&f, &t))| {
                assert!(f <= t, "week {}: filtered {f} exceeds total {t}", i + 1);
                WeekRow {
                    week: i as u32 + 1,
                    filtered: f,
                    total: t,
                    normalized: 0.0,
                }
            })
            .collect();
        let mut s = WeeklySeries { rows };
        s.fill_normalized(1.0);
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn filtered_total(&self) -> u64 {
        self.rows.iter().map(|r| r.filtered).sum()
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.normalized).collect()
    }

    /// Sets `normalized = k * filtered / total`; weeks without tweets get 0
    /// and a warning. Returns the indices of those weeks.
    pub fn normalize(&mut self, k: f64) -> Result<Vec<u32>, StatsError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(StatsError::InvalidK(k));
        }
        let empty = self.fill_normalized(k);
        if !empty.is_empty() {
            warn!("weeks with no tweets normalized to 0: {empty:?}");
        }
        Ok(empty)
    }

    fn fill_normalized(&mut self, k: f64) -> Vec<u32> {
        let mut empty = Vec::new();
        for row in &mut self.rows {
            if row.total == 0 {
                row.normalized = 0.0;
                empty.push(row.week);
            } else {
                row.normalized = k * row.filtered as f64 / row.total as f64;
            }
        }
        empty
    }

    /// Number of leading weeks usable for correlation: trailing weeks with
    /// no tweets at all are treated as incomplete.
    pub fn complete_weeks(&self) -> usize {
        self.rows.iter().rposition(|r| r.total > 0).map_or(0, |i| i + 1)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), StatsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["week", "filtered", "total", "normalized"])?;
        for r in &self.rows {
            w.write_record([
                r.week.to_string(),
                r.filtered.to_string(),
                r.total.to_string(),
                r.normalized.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self, StatsError> {
        let mut rd = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for (i, rec) in rd.deserialize::<WeekRow>().enumerate() {
            let row = rec.map_err(|e| StatsError::Parse {
                row: i + 2,
                reason: e.to_string(),
            })?;
            if row.week as usize != i + 1 {
                return Err(StatsError::MissingWeek(i as u32 + 1));
            }
            if row.filtered > row.total {
                return Err(StatsError::Parse {
                    row: i + 2,
                    reason: format!("filtered {} exceeds total {}", row.filtered, row.total),
                });
            }
            rows.push(row);
        }
        Ok(WeeklySeries { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StatsError> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|source| StatsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_csv(f)
    }
}

/// Per-week counts accumulated from pipeline decisions. Partial
/// aggregators built on separate shards merge by addition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Aggregator {
    season: Season,
    filtered: Vec<u64>,
    total: Vec<u64>,
    out_of_season: u64,
}

impl Aggregator {
    pub fn new(season: Season) -> Self {
        let n = season.weeks() as usize;
        Aggregator {
            season,
            filtered: vec![0; n],
            total: vec![0; n],
            out_of_season: 0,
        }
    }

    pub fn season(&self) -> &Season {
        &self.season
    }

    /// Records one tweet; returns its week, or `None` if out of season.
    pub fn record(&mut self, ts: &DateTime<Utc>, kept: bool) -> Option<u32> {
        let Some(week) = self.season.week_of(ts) else {
            self.out_of_season += 1;
            return None;
        };
        let i = week as usize - 1;
        self.total[i] += 1;
        if kept {
            self.filtered[i] += 1;
        }
        Some(week)
    }

    pub fn merge(&mut self, other: &Aggregator) {
        assert_eq!(self.season, other.season, "cannot merge different seasons");
        for (a, b) in self.filtered.iter_mut().zip(&other.filtered) {
            *a += b;
        }
        for (a, b) in self.total.iter_mut().zip(&other.total) {
            *a += b;
        }
        self.out_of_season += other.out_of_season;
    }

    pub fn out_of_season(&self) -> u64 {
        self.out_of_season
    }

    pub fn series(&self) -> WeeklySeries {
        WeeklySeries::from_counts(&self.filtered, &self.total).expect("equal lengths")
    }
}

/// Buckets `(timestamp, kept)` decisions by week. Returns the series and
/// the number of out-of-season tweets.
pub fn aggregate<I>(decisions: I, season: Season) -> (WeeklySeries, u64)
where
    I: IntoIterator<Item = (DateTime<Utc>, bool)>,
{
    let mut agg = Aggregator::new(season);
    for (ts, kept) in decisions {
        agg.record(&ts, kept);
    }
    (agg.series(), agg.out_of_season())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort { need: 2, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if negligible(sxx, x) || negligible(syy, y) {
        return Err(StatsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// True when a sum of squared deviations is indistinguishable from
/// rounding noise, as for a constant series whose mean is inexact.
fn negligible(ss: f64, v: &[f64]) -> bool {
    if v.iter().all(|a| *a == v[0]) {
        return true;
    }
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    ss <= (v.len() as f64 * f64::EPSILON * scale).powi(2)
}

/// Two-sided p-value of the t test for zero correlation, `n - 2` degrees
/// of freedom. `|r| = 1` gives 0.
pub fn pearson_pvalue(r: f64, n: usize) -> Result<f64, StatsError> {
    if n < 3 {
        return Err(StatsError::TooShort { need: 3, got: n });
    }
    if !r.is_finite() || r.abs() > 1.0 {
        return Err(StatsError::InvalidCorrelation(r));
    }
    if r.abs() == 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    // P(|T| > t) = I_{df/(df+t^2)}(df/2, 1/2) and df/(df+t^2) = 1 - r^2.
    let x = (1.0 - r) * (1.0 + r);
    Ok(beta_reg(df / 2.0, 0.5, x).clamp(0.0, 1.0))
}

pub fn format_pvalue(p: f64) -> String {
    if p < P_DISPLAY_FLOOR {
        "< 2.2e-16".into()
    } else if p >= 1e-3 {
        format!("{p:.4}")
    } else {
        format!("{p:.3e}")
    }
}

/// `r` as a percentage with two decimals: 0.948513 becomes "94.85".
pub fn format_r_percent(r: f64) -> String {
    format!("{:.2}", r * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub method_a: String,
    pub method_b: String,
    pub z: f64,
    pub p_value: f64,
}

/// Fisher z test for the difference of two independent correlations.
/// Returns the statistic and its two-sided normal p-value.
pub fn compare_correlations(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<(f64, f64), StatsError> {
    for n in [n1, n2] {
        if n < 4 {
            return Err(StatsError::TooShort { need: 4, got: n });
        }
    }
    for r in [r1, r2] {
        if !r.is_finite() || r.abs() >= 1.0 {
            return Err(StatsError::InvalidCorrelation(r));
        }
    }
    let se = (1.0 / (n1 as f64 - 3.0) + 1.0 / (n2 as f64 - 3.0)).sqrt();
    let z = (r1.atanh() - r2.atanh()) / se;
    Ok((z, erfc(z.abs() / std::f64::consts::SQRT_2)))
}

/// Weekly reference values, in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldSeries {
    values: Vec<f64>,
}

impl GoldSeries {
    pub fn new(values: Vec<f64>) -> Result<Self, StatsError> {
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(StatsError::NonFinite);
            }
            if v < 0.0 {
                return Err(StatsError::NegativeValue { row: i + 2, value: v });
            }
        }
        Ok(GoldSeries { values })
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

    /// Parses `week,value` rows; weeks must cover exactly `1..=weeks`, in
    /// any order.
    pub fn from_csv<R: Read>(input: R, weeks: u32) -> Result<Self, StatsError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rd.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "week" || &headers[1] != "value" {
            return Err(StatsError::Parse {
                row: 1,
                reason: format!("expected header week,value, got {}", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut values: Vec<Option<f64>> = vec![None; weeks as usize];
        for (i, rec) in rd.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            let field = |k: usize| rec.get(k).unwrap_or("");
            let week: u32 = field(0).parse().map_err(|_| StatsError::Parse {
                row,
                reason: format!("bad week {:?}", field(0)),
            })?;
            let value: f64 = field(1).parse().map_err(|_| StatsError::Parse {
                row,
                reason: format!("bad value {:?}", field(1)),
            })?;
            if !value.is_finite() {
                return Err(StatsError::Parse {
                    row,
                    reason: format!("bad value {:?}", field(1)),
                });
            }
            if value < 0.0 {
                return Err(StatsError::NegativeValue { row, value });
            }
            if week == 0 || week > weeks {
                return Err(StatsError::WeekOutOfRange { row, week, weeks });
            }
            let slot = &mut values[week as usize - 1];
            if slot.is_some() {
                return Err(StatsError::DuplicateWeek(week));
            }
            *slot = Some(value);
        }
        let values = values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or(StatsError::MissingWeek(i as u32 + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GoldSeries { values })
    }
}

pub fn load_gold(path: impl AsRef<Path>, weeks: u32) -> Result<GoldSeries, StatsError> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|source| StatsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    GoldSeries::from_csv(f, weeks)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodCorrelation {
    pub method: String,
    /// Surviving tweets over the correlated weeks.
    pub tweets: u64,
    pub n: usize,
    pub r: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct CorrelationReport {
    pub methods: Vec<MethodCorrelation>,
    pub comparisons: Vec<Comparison>,
}

/// Correlates a method's normalized series with the gold series, leaving
/// out trailing weeks that have no tweets.
pub fn correlate_series(method: &str, series: &WeeklySeries, gold: &GoldSeries) -> Result<MethodCorrelation, StatsError> {
    if series.len() != gold.len() {
        return Err(StatsError::LengthMismatch(series.len(), gold.len()));
    }
    let n = series.complete_weeks();
    if n < series.len() {
        warn!(
            "{method}: excluding {} trailing week(s) without tweets from correlation",
            series.len() - n
        );
    }
    let x = &series.normalized()[..n];
    let y = &gold.values()[..n];
    let r = pearson(x, y)?;
    let p_value = pearson_pvalue(r, n)?;
    Ok(MethodCorrelation {
        method: method.to_string(),
        tweets: series.rows[..n].iter().map(|r| r.filtered).sum(),
        n,
        r,
        p_value,
    })
}

impl CorrelationReport {
    /// Correlates every `(name, series)` against `gold` and compares each
    /// pair of methods.
    pub fn build(series: &[(String, WeeklySeries)], gold: &GoldSeries) -> Result<Self, StatsError> {
        let methods = series
            .iter()
            .map(|(name, s)| correlate_series(name, s, gold))
            .collect::<Result<Vec<_>, _>>()?;
        let mut comparisons = Vec::new();
        for (i, a) in methods.iter().enumerate() {
            for b in &methods[i + 1..] {
                let (z, p_value) = compare_correlations(a.r, a.n, b.r, b.n)?;
                comparisons.push(Comparison {
                    method_a: a.method.clone(),
                    method_b: b.method.clone(),
                    z,
                    p_value,
                });
            }
        }
        Ok(CorrelationReport { methods, comparisons })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), StatsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "tweets", "n", "r", "r_percent", "p_value", "p_display"])?;
        for m in &self.methods {
            w.write_record([
                m.method.clone(),
                m.tweets.to_string(),
                m.n.to_string(),
                m.r.to_string(),
                format_r_percent(m.r),
                format!("{:e}", m.p_value),
                format_pvalue(m.p_value),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_comparisons_csv<W: Write>(&self, out: W) -> Result<(), StatsError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method_a", "method_b", "z", "p_value"])?;
        for c in &self.comparisons {
            w.write_record([c.method_a.clone(), c.method_b.clone(), c.z.to_string(), format!("{:e}", c.p_value)])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

impl fmt::Display for CorrelationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.methods.iter().map(|m| m.method.len()).max().unwrap_or(6).max(6);
        writeln!(f, "{:<width$}  {:>10}  {:>4}  {:>7}  p-value", "method", "#tweets", "n", "r(%)")?;
        for m in &self.methods {
            writeln!(
                f,
                "{:<width$}  {:>10}  {:>4}  {:>7}  {}",
                m.method,
                m.tweets,
                m.n,
                format_r_percent(m.r),
                format_pvalue(m.p_value)
            )?;
        }
        for c in &self.comparisons {
            writeln!(f, "{} vs {}: z = {:.4}, p = {}", c.method_a, c.method_b, c.z, format_pvalue(c.p_value))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;
    use proptest::prelude::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn at(y: i32, m: u32, d: u32, h: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(y, m, d, h, 0, 0).unwrap()
    }

    #[test]
    fn season_calendar() {
        let s = Season::flu_2009();
        assert_eq!(s.week_of(&at(2009, 8, 30, 0)), Some(1));
        assert_eq!(s.week_of(&at(2009, 9, 5, 23)), Some(1));
        assert_eq!(s.week_of(&at(2009, 9, 6, 0)), Some(2));
        assert_eq!(s.week_of(&at(2010, 5, 8, 12)), Some(36));
        assert_eq!(s.week_of(&at(2009, 8, 29, 23)), None);
        assert_eq!(s.week_of(&at(2010, 5, 9, 0)), None);
        assert_eq!(s.end(), date(2010, 5, 8));
        let w1 = s.epi_week(1).unwrap();
        assert_eq!((w1.start, w1.end), (date(2009, 8, 30), date(2009, 9, 5)));
        assert_eq!(s.epi_week(36).unwrap().end, date(2010, 5, 8));
        assert!(s.epi_week(0).is_none() && s.epi_week(37).is_none());
        assert!(matches!(Season::new(date(2009, 8, 31), 36), Err(StatsError::NotSunday(..))));
        assert!(matches!(
            assign_epi_week(&at(2009, 9, 1, 0), date(2009, 9, 1), 4),
            Err(StatsError::NotSunday(..))
        ));
    }

    #[test]
    fn aggregation() {
        let season = Season::flu_2009();
        let mut d: Vec<_> = (0..10).map(|i| (at(2009, 9, 7, i), i < 3)).collect();
        d.push((at(2011, 1, 1, 0), true));
        let (series, ignored) = aggregate(d, season);
        assert_eq!(series.len(), 36);
        assert_eq!((series.rows[1].filtered, series.rows[1].total), (3, 10));
        assert_eq!(ignored, 1);

        let (empty, ignored) = aggregate(Vec::new(), season);
        assert!(empty.rows.iter().all(|r| r.filtered == 0 && r.total == 0));
        assert_eq!(ignored, 0);
    }

    #[test]
    fn aggregator_merge_adds() {
        let season = Season::flu_2009();
        let mut a = Aggregator::new(season);
        let mut b = Aggregator::new(season);
        a.record(&at(2009, 9, 1, 0), true);
        b.record(&at(2009, 9, 2, 0), false);
        b.record(&at(2008, 1, 1, 0), false);
        a.merge(&b);
        assert_eq!(a.series().rows[0].total, 2);
        assert_eq!(a.series().rows[0].filtered, 1);
        assert_eq!(a.out_of_season(), 1);
    }

    #[test]
    fn normalization() {
        let mut s = WeeklySeries::from_counts(&[3, 0, 0], &[10, 5, 0]).unwrap();
        let empty = s.normalize(1e4).unwrap();
        assert_eq!(s.normalized(), vec![3000.0, 0.0, 0.0]);
        assert_eq!(empty, vec![3]);
        assert_eq!(s.complete_weeks(), 2);
        assert!(s.normalize(0.0).is_err());
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(pearson(&x, &[1.0; 4]), Err(StatsError::ZeroVariance)));
        assert!(matches!(pearson(&[0.1; 36], &x.repeat(9)), Err(StatsError::ZeroVariance)));
        let almost = [0.1, 0.1, 0.1 + 1e-17, 0.1];
        assert!(matches!(pearson(&almost, &x), Err(StatsError::ZeroVariance)));
        assert!(matches!(pearson(&x, &[1.0; 3]), Err(StatsError::LengthMismatch(4, 3))));
        assert!(matches!(pearson(&[1.0], &[2.0]), Err(StatsError::TooShort { .. })));
    }

    #[test]
    fn pvalue_examples() {
        assert!(pearson_pvalue(0.9485, 36).unwrap() < 2.2e-16);
        assert_eq!(pearson_pvalue(0.0, 10).unwrap(), 1.0);
        assert_eq!(pearson_pvalue(1.0, 10).unwrap(), 0.0);
        assert_eq!(format_pvalue(pearson_pvalue(0.9485, 36).unwrap()), "< 2.2e-16");
        assert!(pearson_pvalue(0.5, 2).is_err());
        assert!(pearson_pvalue(1.5, 10).is_err());
        // t = 0.5 * sqrt(8) / sqrt(0.75) = 1.63299; two-sided p for 8 df
        assert!((pearson_pvalue(0.5, 10).unwrap() - 0.141_113_28).abs() < 1e-6);
    }

    #[test]
    fn comparison_examples() {
        let (z, p) = compare_correlations(0.5, 36, 0.5, 36).unwrap();
        assert_eq!((z, p), (0.0, 1.0));
        let (_, p) = compare_correlations(0.99, 1000, 0.10, 1000).unwrap();
        assert!(p < 1e-6);
        let (z, _) = compare_correlations(0.9713, 36, 0.9485, 36).unwrap();
        let expect = (0.9713f64.atanh() - 0.9485f64.atanh()) / (2.0f64 / 33.0).sqrt();
        assert!((z - expect).abs() < 1e-12);
        assert!(compare_correlations(1.0, 36, 0.5, 36).is_err());
        assert!(compare_correlations(0.5, 3, 0.5, 36).is_err());
    }

    #[test]
    fn percent_format() {
        assert_eq!(format_r_percent(0.948513), "94.85");
        assert_eq!(format_r_percent(0.9846), "98.46");
    }

    #[test]
    fn gold_loading() {
        let rows: String = (1..=36).map(|w| format!("{w},{}.5\n", w % 7)).collect();
        let g = GoldSeries::from_csv(format!("week,value\n{rows}").as_bytes(), 36).unwrap();
        assert_eq!(g.len(), 36);
        assert_eq!(g.values()[0], 1.5);

        let short: String = (1..=35).map(|w| format!("{w},1\n")).collect();
        let err = GoldSeries::from_csv(format!("week,value\n{short}").as_bytes(), 36).unwrap_err();
        assert!(matches!(err, StatsError::MissingWeek(36)));

        let err = GoldSeries::from_csv("week,value\n1,1\n2,abc\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, StatsError::Parse { row: 3, .. }), "{err}");

        let err = GoldSeries::from_csv("week,value\n1,1\n1,2\n".as_bytes(), 2).unwrap_err();
        assert!(matches!(err, StatsError::DuplicateWeek(1)));

        let err = GoldSeries::from_csv("week,value\n1,-1\n".as_bytes(), 1).unwrap_err();
        assert!(matches!(err, StatsError::NegativeValue { row: 2, .. }));

        let shipped = GoldSeries::from_csv(crate::stats::SHAPED_GOLD.as_bytes(), 36).unwrap();
        assert_eq!(shipped.len(), 36);
    }

    #[test]
    fn series_csv_round_trip() {
        let mut s = WeeklySeries::from_counts(&[1, 2, 0], &[4, 8, 0]).unwrap();
        s.normalize(1e4).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("week,filtered,total,normalized\n1,1,4,2500\n"));
        assert_eq!(WeeklySeries::read_csv(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn report_trims_incomplete_tail() {
        let gold = GoldSeries::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let s = WeeklySeries::from_counts(&[1, 2, 3, 4, 0], &[10, 10, 10, 10, 0]).unwrap();
        let m = correlate_series("m", &s, &gold).unwrap();
        assert_eq!(m.n, 4);
        assert!((m.r - 1.0).abs() < 1e-12);
        let short = GoldSeries::new(vec![1.0; 4]).unwrap();
        assert!(matches!(correlate_series("m", &s, &short), Err(StatsError::LengthMismatch(5, 4))));
    }

    #[test]
    fn identical_methods_compare_to_one() {
        let gold = GoldSeries::new(vec![1.0, 3.0, 2.0, 5.0, 4.0]).unwrap();
        let s = WeeklySeries::from_counts(&[1, 2, 2, 4, 5], &[10; 5]).unwrap();
        let report = CorrelationReport::build(&[("a".into(), s.clone()), ("b".into(), s)], &gold).unwrap();
        assert_eq!(report.comparisons[0].p_value, 1.0);
        let text = report.to_string();
        assert!(text.contains("a vs b"));
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(v in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..40)) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            if let Ok(r) = pearson(&x, &y) {
                prop_assert_eq!(r.to_bits(), pearson(&y, &x).unwrap().to_bits());
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }

        #[test]
        fn scale_invariant(
            v in prop::collection::vec((-100f64..100.0, -100f64..100.0), 3..40),
            a in 0.01f64..100.0,
            b in -100f64..100.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = v.into_iter().unzip();
            let Ok(r) = pearson(&x, &y) else { return Ok(()) };
            let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let flipped: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
            prop_assert!((pearson(&scaled, &y).unwrap() - r).abs() < 1e-12);
            prop_assert!((pearson(&flipped, &y).unwrap() + r).abs() < 1e-12);
        }

        #[test]
        fn pvalue_monotone(r1 in 0.0f64..0.99, dr in 0.0f64..0.009, n in 3usize..200) {
            let r2 = r1 + dr;
            prop_assert!(pearson_pvalue(r2, n).unwrap() <= pearson_pvalue(r1, n).unwrap());
            prop_assert!(pearson_pvalue(r1, n + 1).unwrap() <= pearson_pvalue(r1, n).unwrap() + 1e-15);
            prop_assert_eq!(pearson_pvalue(r1, n).unwrap(), pearson_pvalue(-r1, n).unwrap());
        }

        #[test]
        fn week_tiling(offset in 0i64..400) {
            let s = Season::flu_2009();
            let d = s.start() + chrono::Duration::days(offset);
            match s.week_of_date(d) {
                Some(w) => {
                    let ew = s.epi_week(w).unwrap();
                    prop_assert!(ew.start <= d && d <= ew.end);
                    prop_assert_eq!(ew.start.weekday(), Weekday::Sun);
                    prop_assert_eq!(ew.end.weekday(), Weekday::Sat);
                }
                None => prop_assert!(d > s.end()),
            }
        }
    }
}

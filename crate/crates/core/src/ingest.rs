//! Weather, case and configuration inputs.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};
use ini::Ini;
use thiserror::Error;

use crate::carrycap::KMethod;
use crate::epimodel::{InitialPopulations, ModelParams, Rate, DEFAULT_STEPS_PER_DAY};
use crate::onset::FeatureTransform;
use crate::severity::{PriorChoice, WeatherFeature};

/// Longest run of missing days that is filled by interpolation.
pub const MAX_INTERPOLATED_GAP: i64 = 3;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: u64, msg: String },
    #[error("gap of {days} missing days between {from} and {to}")]
    GapTooLong {
        from: NaiveDate,
        to: NaiveDate,
        days: i64,
    },
    #[error("{field} out of range at line {line}")]
    RangeViolation { field: &'static str, line: u64 },
    #[error("dates not strictly increasing at line {line}")]
    DateOrder { line: u64 },
    #[error("week starts not a multiple of 7 days apart at line {line}")]
    NonWeeklySpacing { line: u64 },
    #[error("negative case count at line {line}")]
    NegativeCount { line: u64 },
    #[error("unknown config key `{key}` in section [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("invalid value for config key `{key}`: {reason}")]
    InvariantViolation { key: String, reason: String },
    #[error("series is empty")]
    Empty,
}

fn read_file(path: &Path) -> Result<String, IngestError> {
    if !path.exists() {
        return Err(IngestError::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_date(s: &str, line: u64) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| IngestError::ParseError {
        line,
        msg: format!("bad date `{s}`: {e}"),
    })
}

fn parse_f64(s: &str, field: &str, line: u64) -> Result<f64, IngestError> {
    let v: f64 = s.trim().parse().map_err(|_| IngestError::ParseError {
        line,
        msg: format!("bad {field} `{s}`"),
    })?;
    if !v.is_finite() {
        return Err(IngestError::ParseError {
            line,
            msg: format!("non-finite {field}"),
        });
    }
    Ok(v)
}

/// Where a weather value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    Observed,
    Interpolated,
    Forecast,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Observed => "observed",
            Origin::Interpolated => "interpolated",
            Origin::Forecast => "forecast",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherRecord {
    pub date: NaiveDate,
    /// Mean daily temperature, degrees C.
    pub temp_mean: f64,
    /// Relative humidity, percent.
    pub humidity: f64,
    /// Precipitation, mm/day.
    pub precip: f64,
}

impl WeatherRecord {
    fn check_ranges(&self, line: u64) -> Result<(), IngestError> {
        if !(0.0..=100.0).contains(&self.humidity) {
            return Err(IngestError::RangeViolation {
                field: "humidity",
                line,
            });
        }
        if self.precip < 0.0 {
            return Err(IngestError::RangeViolation {
                field: "precip",
                line,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeatherVariable {
    Temperature,
    Humidity,
    Precipitation,
}

/// A gap-free daily weather series.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    records: Vec<WeatherRecord>,
    origins: Vec<Origin>,
}

impl WeatherSeries {
    /// Builds a series from consecutive daily records.
    pub fn new(records: Vec<WeatherRecord>, origins: Vec<Origin>) -> Result<Self, IngestError> {
        assert_eq!(records.len(), origins.len(), "one origin per record");
        for (i, r) in records.iter().enumerate() {
            let line = i as u64 + 1;
            if !(r.temp_mean.is_finite() && r.humidity.is_finite() && r.precip.is_finite()) {
                return Err(IngestError::ParseError {
                    line,
                    msg: "non-finite value".into(),
                });
            }
            r.check_ranges(line)?;
            if i > 0 {
                let step = (r.date - records[i - 1].date).num_days();
                if step <= 0 {
                    return Err(IngestError::DateOrder { line });
                }
                if step > 1 {
                    return Err(IngestError::GapTooLong {
                        from: records[i - 1].date,
                        to: r.date,
                        days: step - 1,
                    });
                }
            }
        }
        Ok(WeatherSeries { records, origins })
    }

    pub fn observed(records: Vec<WeatherRecord>) -> Result<Self, IngestError> {
        let n = records.len();
        Self::new(records, vec![Origin::Observed; n])
    }

    /// Temperature-only series (60 % humidity, no rain), mostly for tests.
    pub fn from_temperatures(start: NaiveDate, temps: &[f64]) -> Self {
        let records = temps
            .iter()
            .zip(start.iter_days())
            .map(|(&t, date)| WeatherRecord {
                date,
                temp_mean: t,
                humidity: 60.0,
                precip: 0.0,
            })
            .collect();
        Self::observed(records).expect("valid temperature series")
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[WeatherRecord] {
        &self.records
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.records.first().map(|r| r.date)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.records.last().map(|r| r.date)
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.records.iter().map(|r| r.date).collect()
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.column(WeatherVariable::Temperature)
    }

    pub fn column(&self, var: WeatherVariable) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| match var {
                WeatherVariable::Temperature => r.temp_mean,
                WeatherVariable::Humidity => r.humidity,
                WeatherVariable::Precipitation => r.precip,
            })
            .collect()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let first = self.first_date()?;
        let idx = (date - first).num_days();
        (idx >= 0 && (idx as usize) < self.len()).then_some(idx as usize)
    }

    /// Sub-series on `[from, to)` (clipped to the series span).
    pub fn between(&self, from: NaiveDate, to: NaiveDate) -> WeatherSeries {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.records[i].date >= from && self.records[i].date < to)
            .collect();
        WeatherSeries {
            records: keep.iter().map(|&i| self.records[i]).collect(),
            origins: keep.iter().map(|&i| self.origins[i]).collect(),
        }
    }

    pub fn before(&self, date: NaiveDate) -> WeatherSeries {
        self.between(NaiveDate::MIN, date)
    }

    pub fn year(&self, year: i32) -> WeatherSeries {
        self.between(
            NaiveDate::from_ymd_opt(year, 1, 1).unwrap(),
            NaiveDate::from_ymd_opt(year + 1, 1, 1).unwrap(),
        )
    }

    /// Calendar years present in the series.
    pub fn years(&self) -> Vec<i32> {
        self.records
            .iter()
            .map(|r| r.date.year())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Calendar years fully covered (Jan 1 through Dec 31).
    pub fn full_years(&self) -> Vec<i32> {
        self.years()
            .into_iter()
            .filter(|&y| {
                let days = if NaiveDate::from_ymd_opt(y, 2, 29).is_some() {
                    366
                } else {
                    365
                };
                self.year(y).len() == days
            })
            .collect()
    }

    /// Appends `other`, which must start the day after this series ends.
    pub fn concat(&self, other: &WeatherSeries) -> Result<WeatherSeries, IngestError> {
        let mut records = self.records.clone();
        records.extend_from_slice(&other.records);
        let mut origins = self.origins.clone();
        origins.extend_from_slice(&other.origins);
        WeatherSeries::new(records, origins)
    }

    /// Writes `date,temp_mean,humidity,precip`, plus a `source` column when
    /// requested. Values use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, mut w: W, with_source: bool) -> std::io::Result<()> {
        write!(w, "date,temp_mean,humidity,precip")?;
        if with_source {
            write!(w, ",source")?;
        }
        writeln!(w)?;
        for (r, o) in self.records.iter().zip(&self.origins) {
            write!(w, "{},{},{},{}", r.date, r.temp_mean, r.humidity, r.precip)?;
            if with_source {
                let src = match o {
                    Origin::Forecast => "forecast",
                    _ => "observed",
                };
                write!(w, ",{src}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn check_header(
    reader: &mut csv::Reader<&[u8]>,
    expected: &[&str],
    optional: &[&str],
) -> Result<(), IngestError> {
    let headers = reader.headers().map_err(|e| IngestError::ParseError {
        line: 1,
        msg: e.to_string(),
    })?;
    let got: Vec<&str> = headers.iter().collect();
    let ok = got.len() >= expected.len()
        && got[..expected.len()] == *expected
        && got[expected.len()..]
            .iter()
            .zip(optional)
            .all(|(a, b)| a == b)
        && got.len() <= expected.len() + optional.len();
    if !ok {
        return Err(IngestError::ParseError {
            line: 1,
            msg: format!("expected header `{}`", expected.join(",")),
        });
    }
    Ok(())
}

/// Parses weather CSV text. Gaps of up to three days are filled by linear
/// interpolation between the flanking records and marked `Interpolated`.
pub fn parse_weather(text: &str) -> Result<WeatherSeries, IngestError> {
    let mut reader = csv_reader(text);
    check_header(
        &mut reader,
        &["date", "temp_mean", "humidity", "precip"],
        &["source"],
    )?;
    let mut records: Vec<WeatherRecord> = Vec::new();
    let mut origins = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::ParseError {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() < 4 {
            return Err(IngestError::ParseError {
                line,
                msg: "expected 4 fields".into(),
            });
        }
        let rec = WeatherRecord {
            date: parse_date(&row[0], line)?,
            temp_mean: parse_f64(&row[1], "temp_mean", line)?,
            humidity: parse_f64(&row[2], "humidity", line)?,
            precip: parse_f64(&row[3], "precip", line)?,
        };
        rec.check_ranges(line)?;
        if let Some(prev) = records.last().copied() {
            let step = (rec.date - prev.date).num_days();
            if step <= 0 {
                return Err(IngestError::DateOrder { line });
            }
            let missing = step - 1;
            if missing > MAX_INTERPOLATED_GAP {
                return Err(IngestError::GapTooLong {
                    from: prev.date,
                    to: rec.date,
                    days: missing,
                });
            }
            for k in 1..step {
                let f = k as f64 / step as f64;
                let lerp = |a: f64, b: f64| a + (b - a) * f;
                records.push(WeatherRecord {
                    date: prev.date + chrono::Duration::days(k),
                    temp_mean: lerp(prev.temp_mean, rec.temp_mean),
                    humidity: lerp(prev.humidity, rec.humidity),
                    precip: lerp(prev.precip, rec.precip),
                });
                origins.push(Origin::Interpolated);
            }
        }
        records.push(rec);
        origins.push(Origin::Observed);
    }
    if records.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(WeatherSeries { records, origins })
}

pub fn load_weather(path: impl AsRef<Path>) -> Result<WeatherSeries, IngestError> {
    parse_weather(&read_file(path.as_ref())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseRecord {
    pub week_start: NaiveDate,
    pub count: u32,
}

/// Weekly reported human cases. Weeks missing from the input are present
/// with count 0 and flagged as filled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseSeries {
    records: Vec<CaseRecord>,
    filled: Vec<bool>,
}

impl CaseSeries {
    /// Builds a series from records spaced exactly one week apart.
    pub fn new(records: Vec<CaseRecord>) -> Result<Self, IngestError> {
        for (i, w) in records.windows(2).enumerate() {
            if (w[1].week_start - w[0].week_start).num_days() != 7 {
                return Err(IngestError::NonWeeklySpacing { line: i as u64 + 2 });
            }
        }
        let n = records.len();
        Ok(CaseSeries {
            records,
            filled: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[CaseRecord] {
        &self.records
    }

    pub fn filled(&self) -> &[bool] {
        &self.filled
    }

    pub fn counts(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.count).collect()
    }

    pub fn week_starts(&self) -> Vec<NaiveDate> {
        self.records.iter().map(|r| r.week_start).collect()
    }

    /// Weeks whose start falls in `year`.
    pub fn year(&self, year: i32) -> Vec<CaseRecord> {
        self.records
            .iter()
            .filter(|r| r.week_start.year() == year)
            .copied()
            .collect()
    }

    pub fn years(&self) -> Vec<i32> {
        self.records
            .iter()
            .map(|r| r.week_start.year())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "week_start,count")?;
        for r in &self.records {
            writeln!(w, "{},{}", r.week_start, r.count)?;
        }
        Ok(())
    }
}

pub fn parse_cases(text: &str) -> Result<CaseSeries, IngestError> {
    let mut reader = csv_reader(text);
    check_header(&mut reader, &["week_start", "count"], &[])?;
    let mut records: Vec<CaseRecord> = Vec::new();
    let mut filled = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| IngestError::ParseError {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 2 {
            return Err(IngestError::ParseError {
                line,
                msg: "expected 2 fields".into(),
            });
        }
        let week_start = parse_date(&row[0], line)?;
        let count: i64 = row[1].trim().parse().map_err(|_| IngestError::ParseError {
            line,
            msg: format!("bad count `{}`", &row[1]),
        })?;
        if count < 0 {
            return Err(IngestError::NegativeCount { line });
        }
        let count = u32::try_from(count).map_err(|_| IngestError::ParseError {
            line,
            msg: "count too large".into(),
        })?;
        if let Some(prev) = records.last() {
            let step = (week_start - prev.week_start).num_days();
            if step <= 0 {
                return Err(IngestError::DateOrder { line });
            }
            if step % 7 != 0 {
                return Err(IngestError::NonWeeklySpacing { line });
            }
            let prev_start = prev.week_start;
            for k in 1..step / 7 {
                records.push(CaseRecord {
                    week_start: prev_start + chrono::Duration::days(7 * k),
                    count: 0,
                });
                filled.push(true);
            }
        }
        records.push(CaseRecord { week_start, count });
        filled.push(false);
    }
    Ok(CaseSeries { records, filled })
}

pub fn load_cases(path: impl AsRef<Path>) -> Result<CaseSeries, IngestError> {
    parse_cases(&read_file(path.as_ref())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeConfig {
    /// Fixed onset bandwidth `(h_m, h_r0)`; `None` selects the weighted
    /// Silverman rule.
    pub onset_bandwidth: Option<(f64, f64)>,
    pub severity_bandwidth: Option<(f64, f64)>,
    pub contour_levels: Vec<f64>,
    pub onset_resolution: usize,
    pub severity_resolution: usize,
    pub transform: FeatureTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    /// Largest candidate severity.
    pub x_max: u32,
    pub long_ar_order: usize,
    pub long_lead: usize,
    pub short_lead: usize,
    pub k_ar_order: usize,
    pub k_method: KMethod,
    pub precip_bins: usize,
    pub prior: PriorChoice,
    /// Gaussian-ridge prior spread, in grid-normalised units.
    pub prior_sigma: f64,
    /// Uniform-band prior half width, in grid-normalised units.
    pub prior_halfwidth: f64,
    /// Report zero severity on days the onset model classifies as green.
    pub onset_gate: bool,
    pub weather_feature: WeatherFeature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreConfig {
    pub floor: f64,
    pub sigma: f64,
    pub x_cap: usize,
    pub min_history: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub params: ModelParams,
    pub init: InitialPopulations,
    pub steps_per_day: usize,
    /// Candidate carrying capacities for calibration, ascending.
    pub k_grid: Vec<f64>,
    pub kde: KdeConfig,
    pub forecast: ForecastConfig,
    pub score: ScoreConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            params: ModelParams::default(),
            init: InitialPopulations::default(),
            steps_per_day: DEFAULT_STEPS_PER_DAY,
            k_grid: (1..=20).map(|i| 1000.0 * i as f64).collect(),
            kde: KdeConfig {
                onset_bandwidth: None,
                severity_bandwidth: None,
                contour_levels: vec![0.88, 0.90, 0.95],
                onset_resolution: 128,
                severity_resolution: 64,
                transform: FeatureTransform::Identity,
            },
            forecast: ForecastConfig {
                x_max: 30,
                long_ar_order: 365,
                long_lead: 365,
                short_lead: 14,
                k_ar_order: 7,
                k_method: KMethod::Plane,
                precip_bins: 4,
                prior: PriorChoice::Uniform,
                prior_sigma: 0.05,
                prior_halfwidth: 0.05,
                onset_gate: false,
                weather_feature: WeatherFeature::default(),
            },
            score: ScoreConfig {
                floor: -10.0,
                sigma: 1.5,
                x_cap: 100,
                min_history: 8,
            },
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> IngestError {
    IngestError::InvariantViolation {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn num(key: &str, v: &str) -> Result<f64, IngestError> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| invalid(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(invalid(key, "must be finite"));
    }
    Ok(x)
}

fn nonneg(key: &str, v: &str) -> Result<f64, IngestError> {
    let x = num(key, v)?;
    if x < 0.0 {
        return Err(invalid(key, "must be >= 0"));
    }
    Ok(x)
}

fn count(key: &str, v: &str) -> Result<usize, IngestError> {
    v.trim()
        .parse()
        .map_err(|_| invalid(key, format!("`{v}` is not a non-negative integer")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>, IngestError> {
    v.split(',').map(|x| num(key, x)).collect()
}

fn pair(key: &str, v: &str) -> Result<Option<(f64, f64)>, IngestError> {
    if v.trim().eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    let xs = list(key, v)?;
    match xs[..] {
        [a, b] if a > 0.0 && b > 0.0 => Ok(Some((a, b))),
        [_, _] => Err(invalid(key, "bandwidths must be positive")),
        _ => Err(invalid(
            key,
            "expected `auto` or two comma-separated values",
        )),
    }
}

fn boolean(key: &str, v: &str) -> Result<bool, IngestError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, format!("`{v}` is not a boolean"))),
    }
}

fn apply(cfg: &mut Config, section: &str, key: &str, value: &str) -> Result<(), IngestError> {
    let unknown = || IngestError::UnknownKey {
        section: section.to_string(),
        key: key.to_string(),
    };
    match section {
        "thermal" | "model" if cfg.params.rate_mut(key).is_some() => {
            let rate: Rate = value.parse().map_err(|e| invalid(key, format!("{e}")))?;
            if !rate.is_valid() {
                return Err(invalid(key, "rates must be finite and non-negative"));
            }
            *cfg.params.rate_mut(key).unwrap() = rate;
        }
        "model" => match key {
            "reporting_fraction" => {
                let r = num(key, value)?;
                if !(r > 0.0 && r <= 1.0) {
                    return Err(invalid(key, "must lie in (0, 1]"));
                }
                cfg.params.reporting_fraction = r;
            }
            "human_population" => cfg.init.humans = nonneg(key, value)?,
            "bird_population" => cfg.init.birds = nonneg(key, value)?,
            "initial_eggs" => cfg.init.mosquito_eggs = nonneg(key, value)?,
            "initial_aquatic" => cfg.init.aquatic = nonneg(key, value)?,
            "initial_adults" => cfg.init.adult_mosquitoes = nonneg(key, value)?,
            "initial_infected_birds" => cfg.init.infected_birds = nonneg(key, value)?,
            "steps_per_day" => {
                cfg.steps_per_day = count(key, value)?;
                if cfg.steps_per_day == 0 {
                    return Err(invalid(key, "must be positive"));
                }
            }
            "k_grid" => {
                let mut g = list(key, value)?;
                if g.is_empty() || g.iter().any(|&k| k <= 0.0) {
                    return Err(invalid(key, "capacities must be positive"));
                }
                g.sort_by(f64::total_cmp);
                g.dedup();
                cfg.k_grid = g;
            }
            "severity_w" => {
                let w = list(key, value)?;
                if w.len() != 3 {
                    return Err(invalid(key, "expected weights for temp,humidity,precip"));
                }
                cfg.forecast.weather_feature = WeatherFeature {
                    temperature: w[0],
                    humidity: w[1],
                    precipitation: w[2],
                };
            }
            _ => return Err(unknown()),
        },
        "kde" => match key {
            "onset_bandwidth" => cfg.kde.onset_bandwidth = pair(key, value)?,
            "severity_bandwidth" => cfg.kde.severity_bandwidth = pair(key, value)?,
            "contour_levels" => cfg.kde.contour_levels = list(key, value)?,
            "grid_resolution" => cfg.kde.onset_resolution = count(key, value)?,
            "severity_grid_resolution" => cfg.kde.severity_resolution = count(key, value)?,
            "transform" => {
                cfg.kde.transform = value.trim().parse().map_err(|e: String| invalid(key, e))?
            }
            _ => return Err(unknown()),
        },
        "forecast" => match key {
            "x_max" => {
                let x = count(key, value)?;
                cfg.forecast.x_max = u32::try_from(x).map_err(|_| invalid(key, "too large"))?;
            }
            "long_ar_order" => cfg.forecast.long_ar_order = count(key, value)?,
            "long_lead" => cfg.forecast.long_lead = count(key, value)?,
            "short_lead" => cfg.forecast.short_lead = count(key, value)?,
            "k_ar_order" => cfg.forecast.k_ar_order = count(key, value)?,
            "k_method" => {
                cfg.forecast.k_method = value.trim().parse().map_err(|e: String| invalid(key, e))?
            }
            "precip_bins" => cfg.forecast.precip_bins = count(key, value)?,
            "prior" => {
                cfg.forecast.prior = value.trim().parse().map_err(|e: String| invalid(key, e))?
            }
            "prior_sigma" => cfg.forecast.prior_sigma = nonneg(key, value)?,
            "prior_halfwidth" => cfg.forecast.prior_halfwidth = nonneg(key, value)?,
            "onset_gate" => cfg.forecast.onset_gate = boolean(key, value)?,
            _ => return Err(unknown()),
        },
        "score" => match key {
            "floor" => cfg.score.floor = num(key, value)?,
            "sigma" => cfg.score.sigma = nonneg(key, value)?,
            "x_cap" => cfg.score.x_cap = count(key, value)?,
            "min_history" => cfg.score.min_history = count(key, value)?,
            _ => return Err(unknown()),
        },
        _ => return Err(unknown()),
    }
    Ok(())
}

impl Config {
    /// Checks every cross-field invariant.
    pub fn validate(&self) -> Result<(), IngestError> {
        for (name, rate) in self.params.rates() {
            if !rate.is_valid() {
                return Err(invalid(name, "rates must be finite and non-negative"));
            }
        }
        let levels = &self.kde.contour_levels;
        if levels.len() != 3
            || levels.iter().any(|&l| !(l > 0.0 && l < 1.0))
            || levels.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid(
                "contour_levels",
                "expected three levels strictly increasing in (0, 1)",
            ));
        }
        if self.forecast.x_max < 1 {
            return Err(invalid("x_max", "must be at least 1"));
        }
        if self.kde.onset_resolution < 16 {
            return Err(invalid("grid_resolution", "must be at least 16"));
        }
        if self.kde.severity_resolution < 16 {
            return Err(invalid("severity_grid_resolution", "must be at least 16"));
        }
        for (key, order) in [
            ("long_ar_order", self.forecast.long_ar_order),
            ("k_ar_order", self.forecast.k_ar_order),
            ("precip_bins", self.forecast.precip_bins),
        ] {
            if order < 1 {
                return Err(invalid(key, "must be at least 1"));
            }
        }
        if self.score.floor > 0.0 {
            return Err(invalid("floor", "score floor must be <= 0"));
        }
        if self.score.x_cap < self.forecast.x_max as usize {
            return Err(invalid("x_cap", "must be at least x_max"));
        }
        Ok(())
    }
}

/// Parses INI-style config text; an empty document yields the defaults.
pub fn parse_config(text: &str) -> Result<Config, IngestError> {
    let ini = Ini::load_from_str(text).map_err(|e| IngestError::ParseError {
        line: e.line as u64,
        msg: e.msg.to_string(),
    })?;
    let mut cfg = Config::default();
    for (section, props) in ini.iter() {
        let section = section.unwrap_or("");
        for (key, value) in props.iter() {
            apply(&mut cfg, section, key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<Config, IngestError> {
    parse_config(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn single_weather_row() {
        let s = parse_weather("date,temp_mean,humidity,precip\n2020-01-01,12.5,60,0.0\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.records()[0].temp_mean, 12.5);
        assert_eq!(s.origins()[0], Origin::Observed);
    }

    #[test]
    fn short_gap_is_interpolated() {
        let s = parse_weather(
            "date,temp_mean,humidity,precip\n2020-01-01,10,50,1\n2020-01-03,14,70,3\n",
        )
        .unwrap();
        assert_eq!(s.len(), 3);
        let mid = s.records()[1];
        assert_eq!(mid.date, d(2020, 1, 2));
        assert_eq!((mid.temp_mean, mid.humidity, mid.precip), (12.0, 60.0, 2.0));
        assert_eq!(s.origins()[1], Origin::Interpolated);
    }

    #[test]
    fn three_day_gap_is_affine() {
        let s = parse_weather(
            "date,temp_mean,humidity,precip\n2020-01-01,10,50,0\n2020-01-05,18,50,0\n",
        )
        .unwrap();
        let t = s.temperatures();
        assert_eq!(t, vec![10.0, 12.0, 14.0, 16.0, 18.0]);
    }

    #[test]
    fn long_gap_is_an_error() {
        let err = parse_weather(
            "date,temp_mean,humidity,precip\n2020-01-01,10,50,0\n2020-01-06,18,50,0\n",
        )
        .unwrap_err();
        assert!(matches!(err, IngestError::GapTooLong { days: 4, .. }));
    }

    #[test]
    fn humidity_out_of_range() {
        let err =
            parse_weather("date,temp_mean,humidity,precip\n2020-01-01,12.5,150,0\n").unwrap_err();
        assert!(matches!(
            err,
            IngestError::RangeViolation {
                field: "humidity",
                line: 2
            }
        ));
        let err =
            parse_weather("date,temp_mean,humidity,precip\n2020-01-01,12.5,50,-1\n").unwrap_err();
        assert!(matches!(
            err,
            IngestError::RangeViolation {
                field: "precip",
                ..
            }
        ));
    }

    #[test]
    fn weather_parse_errors() {
        assert!(matches!(
            parse_weather("date,temp,humidity,precip\n2020-01-01,1,1,1\n"),
            Err(IngestError::ParseError { line: 1, .. })
        ));
        assert!(matches!(
            parse_weather("date,temp_mean,humidity,precip\n2020-01-01,abc,1,1\n"),
            Err(IngestError::ParseError { line: 2, .. })
        ));
        assert!(matches!(
            parse_weather("date,temp_mean,humidity,precip\n2020-01-02,1,1,1\n2020-01-01,1,1,1\n"),
            Err(IngestError::DateOrder { line: 3 })
        ));
        assert!(matches!(
            load_weather("/definitely/not/here.csv"),
            Err(IngestError::MissingFile(_))
        ));
    }

    #[test]
    fn weather_with_source_column_reloads() {
        let s = WeatherSeries::from_temperatures(d(2021, 3, 1), &[1.5, 2.25, 3.0]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf, true).unwrap();
        let back = parse_weather(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.records(), s.records());
    }

    #[test]
    fn single_case_row() {
        let c = parse_cases("week_start,count\n2020-06-01,3\n").unwrap();
        assert_eq!(
            c.records(),
            &[CaseRecord {
                week_start: d(2020, 6, 1),
                count: 3
            }]
        );
    }

    #[test]
    fn case_spacing_and_filling() {
        assert!(matches!(
            parse_cases("week_start,count\n2020-06-01,3\n2020-06-06,1\n"),
            Err(IngestError::NonWeeklySpacing { line: 3 })
        ));
        let c = parse_cases("week_start,count\n2020-06-01,3\n2020-06-15,2\n").unwrap();
        assert_eq!(c.counts(), vec![3, 0, 2]);
        assert_eq!(c.filled(), &[false, true, false]);
        assert_eq!(c.week_starts()[1], d(2020, 6, 8));
        assert!(matches!(
            parse_cases("week_start,count\n2020-06-01,-2\n"),
            Err(IngestError::NegativeCount { line: 2 })
        ));
    }

    #[test]
    fn empty_config_is_default() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, Config::default());
        Config::default().validate().unwrap();
    }

    #[test]
    fn config_values() {
        let cfg = parse_config(
            "# comment\n[kde]\ncontour_levels = 0.88,0.90,0.95\n[forecast]\nx_max = 30\n\
             [thermal]\npdr = briere 7e-5 11 45\n[model]\nreporting_fraction = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.kde.contour_levels, vec![0.88, 0.90, 0.95]);
        assert_eq!(cfg.forecast.x_max, 30);
        assert_eq!(cfg.params.reporting_fraction, 0.5);
        assert_eq!(
            cfg.params.pdr,
            "briere 7e-5 11 45"
                .parse::<crate::epimodel::Rate>()
                .unwrap()
        );
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            parse_config("[kde]\nbogus = 1\n"),
            Err(IngestError::UnknownKey { .. })
        ));
        assert!(matches!(
            parse_config("[nowhere]\nx_max = 1\n"),
            Err(IngestError::UnknownKey { .. })
        ));
        assert!(matches!(
            parse_config("[kde]\ncontour_levels = 0.9,0.8\n"),
            Err(IngestError::InvariantViolation { .. })
        ));
        assert!(matches!(
            parse_config("[forecast]\nx_max = 0\n"),
            Err(IngestError::InvariantViolation { .. })
        ));
        assert!(matches!(
            parse_config("[kde]\ngrid_resolution = 8\n"),
            Err(IngestError::InvariantViolation { .. })
        ));
        assert!(matches!(
            parse_config("[thermal]\npdr = constant -1\n"),
            Err(IngestError::InvariantViolation { .. })
        ));
    }
}

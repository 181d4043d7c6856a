//! Aquatic carrying capacity: calibration against case data and the three
//! predictors (historical mean, autoregression, weather plane).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::epimodel::{simulate_with_steps, CompartmentState, ModelError, ModelParams};
use crate::ingest::{CaseSeries, WeatherSeries};
use crate::weathercast::{self, ArError};

#[derive(Debug, Error)]
pub enum CarryCapError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("empty carrying-capacity history")]
    EmptyHistory,
    #[error("precipitation bin {0} is degenerate (collinear samples)")]
    DegenerateBin(usize),
    #[error("no precipitation bin has enough samples")]
    NoUsableBin,
    #[error("no carrying capacity for {0}")]
    MissingDate(NaiveDate),
    #[error("carrying capacity CSV: {0}")]
    Parse(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ar(#[from] ArError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMethod {
    /// Read a `date,K` file.
    Csv,
    Mean,
    Ar,
    Plane,
}

impl FromStr for KMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(KMethod::Csv),
            "mean" => Ok(KMethod::Mean),
            "ar" => Ok(KMethod::Ar),
            "plane" => Ok(KMethod::Plane),
            other => Err(format!("unknown K method `{other}` (csv|mean|ar|plane)")),
        }
    }
}

impl fmt::Display for KMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KMethod::Csv => "csv",
            KMethod::Mean => "mean",
            KMethod::Ar => "ar",
            KMethod::Plane => "plane",
        })
    }
}

/// Daily carrying capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct KSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
    /// Days whose value was clamped or produced by a fallback rule.
    pub flagged: Vec<bool>,
}

impl KSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<f64>) -> Self {
        let n = values.len();
        assert_eq!(dates.len(), n);
        KSeries {
            dates,
            values,
            flagged: vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values for exactly the given dates.
    pub fn for_dates(&self, dates: &[NaiveDate]) -> Result<Vec<f64>, CarryCapError> {
        let lookup: BTreeMap<NaiveDate, f64> = self
            .dates
            .iter()
            .copied()
            .zip(self.values.iter().copied())
            .collect();
        dates
            .iter()
            .map(|d| lookup.get(d).copied().ok_or(CarryCapError::MissingDate(*d)))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,K")?;
        for (d, k) in self.dates.iter().zip(&self.values) {
            writeln!(w, "{d},{k}")?;
        }
        Ok(())
    }

    pub fn parse_csv(text: &str) -> Result<Self, CarryCapError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = reader
            .headers()
            .map_err(|e| CarryCapError::Parse(e.to_string()))?;
        if header.iter().collect::<Vec<_>>() != ["date", "K"] {
            return Err(CarryCapError::Parse("expected header `date,K`".into()));
        }
        let (mut dates, mut values) = (Vec::new(), Vec::new());
        for row in reader.records() {
            let row = row.map_err(|e| CarryCapError::Parse(e.to_string()))?;
            let line = row.position().map(|p| p.line()).unwrap_or(0);
            let bad = |what: &str| CarryCapError::Parse(format!("bad {what} at line {line}"));
            let d = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d").map_err(|_| bad("date"))?;
            let k: f64 = row[1].parse().map_err(|_| bad("K"))?;
            if !k.is_finite() || k < 0.0 {
                return Err(bad("K"));
            }
            if dates.last().is_some_and(|&p| d <= p) {
                return Err(bad("date order"));
            }
            dates.push(d);
            values.push(k);
        }
        Ok(KSeries::new(dates, values))
    }
}

/// Sum of squared differences between simulated weekly reported cases and
/// observed counts for one year simulated at constant `k`.
pub fn calibration_loss(
    params: &ModelParams,
    weather: &WeatherSeries,
    cases: &[crate::ingest::CaseRecord],
    init: &CompartmentState,
    steps_per_day: usize,
    k: f64,
) -> Result<f64, CarryCapError> {
    let traj = simulate_with_steps(
        params,
        weather,
        &vec![k; weather.len()],
        init,
        steps_per_day,
    )?;
    let weeks: Vec<NaiveDate> = cases.iter().map(|c| c.week_start).collect();
    let sim = traj.weekly_reported(&weeks);
    Ok(sim
        .iter()
        .zip(cases)
        .map(|(s, c)| (s - c.count as f64).powi(2))
        .sum())
}

/// Grid search for one `K` per calendar year. Each year is simulated from
/// `init` on Jan 1; ties resolve to the smaller `K`. Only years fully
/// covered by the weather and having at least one case row are used.
pub fn calibrate_k(
    weather: &WeatherSeries,
    cases: &CaseSeries,
    params: &ModelParams,
    init: &CompartmentState,
    steps_per_day: usize,
    grid: &[f64],
) -> Result<KSeries, CarryCapError> {
    if grid.is_empty() {
        return Err(CarryCapError::InsufficientData("empty K grid".into()));
    }
    let mut levels = grid.to_vec();
    levels.sort_by(f64::total_cmp);
    let years: Vec<i32> = weather
        .full_years()
        .into_iter()
        .filter(|&y| !cases.year(y).is_empty())
        .collect();
    if years.is_empty() {
        return Err(CarryCapError::InsufficientData(
            "no full calendar year with both weather and case data".into(),
        ));
    }
    let (mut dates, mut values) = (Vec::new(), Vec::new());
    for year in years {
        let wy = weather.year(year);
        let cy = cases.year(year);
        let mut best = (f64::INFINITY, levels[0]);
        for &k in &levels {
            let loss = calibration_loss(params, &wy, &cy, init, steps_per_day, k)?;
            if loss < best.0 {
                best = (loss, k);
            }
        }
        dates.extend(wy.dates());
        values.extend(std::iter::repeat_n(best.1, wy.len()));
    }
    Ok(KSeries::new(dates, values))
}

/// Day-of-year mean across the history. Feb 29 averages the leap years
/// available and falls back to Feb 28 otherwise.
pub fn predict_k_mean(history: &KSeries, dates: &[NaiveDate]) -> Result<KSeries, CarryCapError> {
    if history.is_empty() {
        return Err(CarryCapError::EmptyHistory);
    }
    let mut by_day: BTreeMap<(u32, u32), (f64, usize)> = BTreeMap::new();
    for (d, k) in history.dates.iter().zip(&history.values) {
        let e = by_day.entry((d.month(), d.day())).or_default();
        e.0 += k;
        e.1 += 1;
    }
    let mean_of = |key: (u32, u32)| by_day.get(&key).map(|(s, n)| s / *n as f64);
    let mut values = Vec::with_capacity(dates.len());
    for d in dates {
        let key = (d.month(), d.day());
        let v = match mean_of(key) {
            Some(v) => v,
            None if key == (2, 29) => mean_of((2, 28)).ok_or(CarryCapError::EmptyHistory)?,
            None => {
                // History does not cover this calendar day; use the
                // nearest covered one.
                let doy = |m: u32, day: u32| {
                    NaiveDate::from_ymd_opt(2001, m, day.min(28))
                        .unwrap()
                        .ordinal() as i64
                };
                let target = doy(key.0, key.1);
                let nearest = by_day
                    .keys()
                    .min_by_key(|k| {
                        let diff = (doy(k.0, k.1) - target).abs();
                        diff.min(365 - diff)
                    })
                    .copied()
                    .unwrap();
                mean_of(nearest).unwrap()
            }
        };
        values.push(v);
    }
    Ok(KSeries::new(dates.to_vec(), values))
}

/// Autoregressive continuation of the K history, clamped at 0.
pub fn predict_k_ar(history: &[f64], order: usize, lead: usize) -> Result<Vec<f64>, CarryCapError> {
    if lead == 0 {
        return Ok(Vec::new());
    }
    let model = weathercast::fit_ar(history, order)?;
    Ok(weathercast::forecast(&model, history, lead)?
        .into_iter()
        .map(|k| k.max(0.0))
        .collect())
}

/// One `(temperature, humidity, precipitation, K)` observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneSample {
    pub temp: f64,
    pub humidity: f64,
    pub precip: f64,
    pub k: f64,
}

/// Least-squares plane `K = a*T + b*H + c` for one precipitation bin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneBin {
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub samples: usize,
    pub usable: bool,
}

impl PlaneBin {
    pub fn eval(&self, temp: f64, humidity: f64) -> f64 {
        self.a * temp + self.b * humidity + self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneModel {
    pub bins: Vec<PlaneBin>,
}

/// Minimum number of samples for a bin to be used.
pub const MIN_BIN_SAMPLES: usize = 3;

/// Quantile bin edges for `n_bins` bins, with duplicate edges removed.
/// The first and last edges are the sample minimum and maximum.
pub fn quantile_edges(values: &[f64], n_bins: usize) -> Vec<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|i| {
            let pos = i as f64 / n_bins as f64 * (v.len() - 1) as f64;
            let (lo, frac) = (pos.floor() as usize, pos.fract());
            if lo + 1 < v.len() {
                v[lo] + frac * (v[lo + 1] - v[lo])
            } else {
                v[lo]
            }
        })
        .collect();
    edges.dedup();
    if edges.len() == 1 {
        edges.push(edges[0]);
    }
    edges
}

/// Bin index for `p`: bins are `[e_i, e_{i+1})` with the last bin closed.
/// Returns `None` outside `[e_0, e_n]`.
fn bin_of(edges: &[(f64, f64)], p: f64) -> Option<usize> {
    let last = edges.len() - 1;
    edges
        .iter()
        .enumerate()
        .position(|(i, &(lo, hi))| p >= lo && (p < hi || (i == last && p <= hi)))
}

/// Fits a plane per precipitation bin. Bins with fewer than three samples
/// are kept but marked unusable.
pub fn fit_plane(samples: &[PlaneSample], edges: &[f64]) -> Result<PlaneModel, CarryCapError> {
    if edges.len() < 2 {
        return Err(CarryCapError::NoUsableBin);
    }
    let ranges: Vec<(f64, f64)> = edges.windows(2).map(|w| (w[0], w[1])).collect();
    let mut members: Vec<Vec<PlaneSample>> = vec![Vec::new(); ranges.len()];
    for s in samples {
        if let Some(i) = bin_of(&ranges, s.precip) {
            members[i].push(*s);
        }
    }
    let mut bins = Vec::with_capacity(ranges.len());
    for (i, ((lo, hi), pts)) in ranges.iter().zip(&members).enumerate() {
        let mut bin = PlaneBin {
            lo: *lo,
            hi: *hi,
            a: 0.0,
            b: 0.0,
            c: 0.0,
            samples: pts.len(),
            usable: false,
        };
        if pts.len() >= MIN_BIN_SAMPLES {
            let (a, b, c) = solve_plane(pts).ok_or(CarryCapError::DegenerateBin(i))?;
            bin.a = a;
            bin.b = b;
            bin.c = c;
            bin.usable = true;
        }
        bins.push(bin);
    }
    if !bins.iter().any(|b| b.usable) {
        return Err(CarryCapError::NoUsableBin);
    }
    Ok(PlaneModel { bins })
}

/// Least squares for `(a, b, c)`; `None` if `[T, H, 1]` is rank deficient.
fn solve_plane(pts: &[PlaneSample]) -> Option<(f64, f64, f64)> {
    // Centre the regressors so the rank test is scale-aware.
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.temp).sum::<f64>() / n;
    let mh = pts.iter().map(|p| p.humidity).sum::<f64>() / n;
    let x = DMatrix::from_fn(pts.len(), 3, |r, c| match c {
        0 => pts[r].temp - mt,
        1 => pts[r].humidity - mh,
        _ => 1.0,
    });
    let y = DVector::from_fn(pts.len(), |r, _| pts[r].k);
    let svd = x.svd(true, true);
    let smax = svd.singular_values.max();
    if smax <= 0.0 || svd.singular_values.min() <= 1e-10 * smax {
        return None;
    }
    let beta = svd.solve(&y, 0.0).ok()?;
    let (a, b) = (beta[0], beta[1]);
    Some((a, b, beta[2] - a * mt - b * mh))
}

impl PlaneModel {
    /// Index of the bin used for `precip`, and whether a fallback was needed.
    pub fn select_bin(&self, precip: f64) -> Option<(usize, bool)> {
        let ranges: Vec<(f64, f64)> = self.bins.iter().map(|b| (b.lo, b.hi)).collect();
        if let Some(i) = bin_of(&ranges, precip) {
            if self.bins[i].usable {
                return Some((i, false));
            }
        }
        let dist = |b: &PlaneBin| {
            if precip < b.lo {
                b.lo - precip
            } else if precip > b.hi {
                precip - b.hi
            } else {
                0.0
            }
        };
        self.bins
            .iter()
            .enumerate()
            .filter(|(_, b)| b.usable)
            .min_by(|x, y| dist(x.1).total_cmp(&dist(y.1)))
            .map(|(i, _)| (i, true))
    }

    /// Daily K from forecast weather, clamped at 0. Clamped days and days
    /// routed to a fallback bin are flagged.
    pub fn predict(&self, weather: &WeatherSeries) -> Result<KSeries, CarryCapError> {
        let (mut values, mut flagged) = (Vec::new(), Vec::new());
        for r in weather.records() {
            let (bin, fallback) = self
                .select_bin(r.precip)
                .ok_or(CarryCapError::NoUsableBin)?;
            let raw = self.bins[bin].eval(r.temp_mean, r.humidity);
            values.push(raw.max(0.0));
            flagged.push(fallback || raw < 0.0);
        }
        let mut out = KSeries::new(weather.dates(), values);
        out.flagged = flagged;
        Ok(out)
    }
}

/// Plane samples pairing each day's weather with its K.
pub fn plane_samples(
    weather: &WeatherSeries,
    k: &KSeries,
) -> Result<Vec<PlaneSample>, CarryCapError> {
    let ks = k.for_dates(&weather.dates())?;
    Ok(weather
        .records()
        .iter()
        .zip(ks)
        .map(|(r, k)| PlaneSample {
            temp: r.temp_mean,
            humidity: r.humidity,
            precip: r.precip,
            k,
        })
        .collect())
}

/// Fits the plane predictor on a calibrated history.
pub fn fit_plane_from_history(
    weather: &WeatherSeries,
    k: &KSeries,
    n_bins: usize,
) -> Result<PlaneModel, CarryCapError> {
    let hist = weather.between(
        *k.dates.first().ok_or(CarryCapError::EmptyHistory)?,
        *k.dates.last().unwrap() + Duration::days(1),
    );
    let samples = plane_samples(&hist, k)?;
    let precip: Vec<f64> = samples.iter().map(|s| s.precip).collect();
    fit_plane(&samples, &quantile_edges(&precip, n_bins))
}

/// A way of producing K for arbitrary days.
#[derive(Debug, Clone, PartialEq)]
pub enum KPredictor {
    /// Explicit daily values.
    Series(KSeries),
    /// Day-of-year mean of a calibrated history.
    Mean(KSeries),
    /// Calibrated history, continued by an AR model past its end.
    Ar {
        history: KSeries,
        order: usize,
    },
    Plane(PlaneModel),
}

impl KPredictor {
    pub fn method(&self) -> KMethod {
        match self {
            KPredictor::Series(_) => KMethod::Csv,
            KPredictor::Mean(_) => KMethod::Mean,
            KPredictor::Ar { .. } => KMethod::Ar,
            KPredictor::Plane(_) => KMethod::Plane,
        }
    }

    /// Builds a predictor of the requested kind from a calibrated history.
    pub fn from_history(
        method: KMethod,
        weather: &WeatherSeries,
        history: &KSeries,
        ar_order: usize,
        precip_bins: usize,
    ) -> Result<Self, CarryCapError> {
        Ok(match method {
            KMethod::Csv => KPredictor::Series(history.clone()),
            KMethod::Mean => KPredictor::Mean(history.clone()),
            KMethod::Ar => KPredictor::Ar {
                history: history.clone(),
                order: ar_order,
            },
            KMethod::Plane => {
                KPredictor::Plane(fit_plane_from_history(weather, history, precip_bins)?)
            }
        })
    }

    /// K for every day of `weather`.
    pub fn predict(&self, weather: &WeatherSeries) -> Result<Vec<f64>, CarryCapError> {
        let dates = weather.dates();
        match self {
            KPredictor::Series(ks) => ks.for_dates(&dates),
            KPredictor::Mean(hist) => Ok(predict_k_mean(hist, &dates)?.values),
            KPredictor::Plane(model) => Ok(model.predict(weather)?.values),
            KPredictor::Ar { history, order } => {
                let Some(&end) = history.dates.last() else {
                    return Err(CarryCapError::EmptyHistory);
                };
                let beyond = dates
                    .last()
                    .map(|&d| (d - end).num_days().max(0) as usize)
                    .unwrap_or(0);
                let tail = predict_k_ar(&history.values, *order, beyond)?;
                let lookup: BTreeMap<NaiveDate, f64> = history
                    .dates
                    .iter()
                    .copied()
                    .zip(history.values.iter().copied())
                    .collect();
                dates
                    .iter()
                    .map(|d| {
                        if let Some(&k) = lookup.get(d) {
                            Ok(k)
                        } else if *d > end {
                            Ok(tail[(*d - end).num_days() as usize - 1])
                        } else {
                            Err(CarryCapError::MissingDate(*d))
                        }
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    fn days_in_year(year: i32) -> usize {
        if NaiveDate::from_ymd_opt(year, 2, 29).is_some() {
            366
        } else {
            365
        }
    }

    fn year_dates(year: i32) -> Vec<NaiveDate> {
        NaiveDate::from_ymd_opt(year, 1, 1)
            .unwrap()
            .iter_days()
            .take(days_in_year(year))
            .collect()
    }

    fn constant_years(values: &[(i32, f64)]) -> KSeries {
        let mut dates = Vec::new();
        let mut ks = Vec::new();
        for &(y, k) in values {
            let yd = year_dates(y);
            ks.extend(std::iter::repeat_n(k, yd.len()));
            dates.extend(yd);
        }
        KSeries::new(dates, ks)
    }

    #[test]
    fn mean_of_two_constant_years() {
        let hist = constant_years(&[(2018, 2.0), (2019, 4.0)]);
        let out = predict_k_mean(&hist, &year_dates(2021)).unwrap();
        assert!(out.values.iter().all(|&k| k == 3.0));
    }

    #[test]
    fn mean_single_year_and_leap_day() {
        let hist = constant_years(&[(2019, 7.0)]);
        let out = predict_k_mean(&hist, &year_dates(2020)).unwrap();
        assert_eq!(out.len(), 366);
        assert!(out.values.iter().all(|&k| k == 7.0));
        let leap = constant_years(&[(2019, 1.0), (2020, 5.0)]);
        let feb29 = predict_k_mean(&leap, &[d(2024, 2, 29)]).unwrap();
        assert_eq!(feb29.values, vec![5.0]);
        assert!(matches!(
            predict_k_mean(&KSeries::new(vec![], vec![]), &[d(2020, 1, 1)]),
            Err(CarryCapError::EmptyHistory)
        ));
    }

    #[test]
    fn ar_examples() {
        assert_eq!(predict_k_ar(&[5.0; 30], 2, 4).unwrap().len(), 4);
        for v in predict_k_ar(&[5.0; 30], 2, 4).unwrap() {
            assert!((v - 5.0).abs() < 1e-6);
        }
        let ramp: Vec<f64> = (0..20).map(|t| 100.0 + 10.0 * t as f64).collect();
        let f = predict_k_ar(&ramp, 2, 5).unwrap();
        for (i, v) in f.iter().enumerate() {
            assert!((v - (100.0 + 10.0 * (20 + i) as f64)).abs() < 1e-6);
        }
        assert!(predict_k_ar(&ramp, 2, 0).unwrap().is_empty());
    }

    fn planar(n: usize) -> Vec<PlaneSample> {
        (0..n)
            .map(|i| {
                let t = (i % 7) as f64 * 1.3;
                let h = (i % 5) as f64 * 2.1 + (i / 7) as f64 * 0.4;
                PlaneSample {
                    temp: t,
                    humidity: h,
                    precip: 1.0,
                    k: 2.0 * t + 3.0 * h + 1.0,
                }
            })
            .collect()
    }

    #[test]
    fn exact_plane() {
        let m = fit_plane(&planar(20), &[0.0, 10.0]).unwrap();
        let b = m.bins[0];
        assert!((b.a - 2.0).abs() < 1e-9);
        assert!((b.b - 3.0).abs() < 1e-9);
        assert!((b.c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn identical_regressors_are_degenerate() {
        let pts: Vec<PlaneSample> = (0..5)
            .map(|i| PlaneSample {
                temp: 1.0,
                humidity: 2.0,
                precip: 0.5,
                k: i as f64,
            })
            .collect();
        assert!(matches!(
            fit_plane(&pts, &[0.0, 1.0]),
            Err(CarryCapError::DegenerateBin(0))
        ));
    }

    #[test]
    fn plane_prediction_clamp_and_fallback() {
        let model = PlaneModel {
            bins: vec![
                PlaneBin {
                    lo: 0.0,
                    hi: 1.0,
                    a: 2.0,
                    b: 3.0,
                    c: 1.0,
                    samples: 10,
                    usable: true,
                },
                PlaneBin {
                    lo: 1.0,
                    hi: 2.0,
                    a: 0.0,
                    b: 0.0,
                    c: 0.0,
                    samples: 1,
                    usable: false,
                },
            ],
        };
        let w = |t: f64, h: f64, p: f64| {
            WeatherSeries::observed(vec![crate::ingest::WeatherRecord {
                date: d(2020, 1, 1),
                temp_mean: t,
                humidity: h,
                precip: p,
            }])
            .unwrap()
        };
        let k = model.predict(&w(1.0, 1.0, 0.5)).unwrap();
        assert_eq!((k.values[0], k.flagged[0]), (6.0, false));
        let k = model.predict(&w(-4.0, 0.0, 0.5)).unwrap();
        assert_eq!((k.values[0], k.flagged[0]), (0.0, true));
        let k = model.predict(&w(1.0, 1.0, 50.0)).unwrap();
        assert_eq!((k.values[0], k.flagged[0]), (6.0, true));
        let k = model.predict(&w(1.0, 1.0, 1.5)).unwrap();
        assert_eq!((k.values[0], k.flagged[0]), (6.0, true));
    }

    #[test]
    fn quantile_edges_dedup() {
        assert_eq!(
            quantile_edges(&[0.0, 0.0, 0.0, 0.0, 4.0], 4),
            vec![0.0, 4.0]
        );
        assert_eq!(
            quantile_edges(&[0.0, 0.0, 0.0, 4.0, 8.0], 2),
            vec![0.0, 8.0]
        );
        assert_eq!(quantile_edges(&[2.0, 2.0], 4), vec![2.0, 2.0]);
        let e = quantile_edges(&[1.0, 2.0, 3.0, 4.0, 5.0], 4);
        assert_eq!(e, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn k_series_csv_round_trip() {
        let ks = constant_years(&[(2019, 1234.5)]);
        let mut buf = Vec::new();
        ks.write_csv(&mut buf).unwrap();
        let back = KSeries::parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, ks);
    }
}

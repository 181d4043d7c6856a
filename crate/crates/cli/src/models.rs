//! Fitted onset and severity models as flat-file artifacts.

use std::str::FromStr;

use chrono::NaiveDate;
use spillcast_core::artifact::{Artifact, ArtifactError, Table};
use spillcast_core::carrycap::{KMethod, KPredictor, KSeries, PlaneBin, PlaneModel};
use spillcast_core::onset::{fit_onset_pdf, FeatureTransform, OnsetPdf, OnsetSample};
use spillcast_core::severity::{fit_rate_surface, RateSurface, SeveritySample, WeatherFeature};

use crate::error::CliError;

pub const ONSET_KIND: &str = "onset-model";
pub const SEVERITY_KIND: &str = "severity-model";

fn bad(key: &str, msg: impl Into<String>) -> ArtifactError {
    ArtifactError::BadValue {
        key: key.to_string(),
        msg: msg.into(),
    }
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn split(a: &Artifact, key: &str) -> Result<Vec<f64>, ArtifactError> {
    a.get(key)?
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| bad(key, e.to_string())))
        .collect()
}

fn pair(a: &Artifact, key: &str) -> Result<(f64, f64), ArtifactError> {
    match split(a, key)?.as_slice() {
        [x, y] => Ok((*x, *y)),
        _ => Err(bad(key, "expected two values")),
    }
}

fn parse_enum<T: FromStr<Err = String>>(a: &Artifact, key: &str) -> Result<T, ArtifactError> {
    a.get(key)?.parse().map_err(|e: String| bad(key, e))
}

fn dates(t: &Table, col: &str) -> Result<Vec<NaiveDate>, ArtifactError> {
    let i = t.col(col)?;
    t.rows
        .iter()
        .map(|r| NaiveDate::parse_from_str(&r[i], "%Y-%m-%d").map_err(|e| bad(col, e.to_string())))
        .collect()
}

/// Stores the calibrated history and, for the plane method, its fitted
/// bins, so predictions never need the training weather again.
fn put_predictor(a: &mut Artifact, history: &KSeries, predictor: &KPredictor) {
    a.set("k_method", predictor.method());
    let mut t = Table::new(&["date", "K"]);
    for (d, k) in history.dates.iter().zip(&history.values) {
        t.push(vec![d.to_string(), k.to_string()]);
    }
    a.tables.insert("k_history".into(), t);
    match predictor {
        KPredictor::Ar { order, .. } => a.set("k_ar_order", order),
        KPredictor::Plane(model) => {
            let mut t = Table::new(&["lo", "hi", "a", "b", "c", "samples", "usable"]);
            for b in &model.bins {
                t.push(vec![
                    b.lo.to_string(),
                    b.hi.to_string(),
                    b.a.to_string(),
                    b.b.to_string(),
                    b.c.to_string(),
                    b.samples.to_string(),
                    b.usable.to_string(),
                ]);
            }
            a.tables.insert("plane".into(), t);
        }
        KPredictor::Series(_) | KPredictor::Mean(_) => {}
    }
}

fn get_predictor(a: &Artifact) -> Result<(KSeries, KPredictor), ArtifactError> {
    let t = a.table("k_history")?;
    let history = KSeries::new(dates(t, "date")?, t.parse_col("K")?);
    let method: KMethod = parse_enum(a, "k_method")?;
    let predictor = match method {
        KMethod::Csv => KPredictor::Series(history.clone()),
        KMethod::Mean => KPredictor::Mean(history.clone()),
        KMethod::Ar => KPredictor::Ar {
            history: history.clone(),
            order: a.parse("k_ar_order")?,
        },
        KMethod::Plane => {
            let t = a.table("plane")?;
            let lo: Vec<f64> = t.parse_col("lo")?;
            let hi: Vec<f64> = t.parse_col("hi")?;
            let ca: Vec<f64> = t.parse_col("a")?;
            let cb: Vec<f64> = t.parse_col("b")?;
            let cc: Vec<f64> = t.parse_col("c")?;
            let n: Vec<usize> = t.parse_col("samples")?;
            let usable: Vec<bool> = t.parse_col("usable")?;
            let bins = (0..lo.len())
                .map(|i| PlaneBin {
                    lo: lo[i],
                    hi: hi[i],
                    a: ca[i],
                    b: cb[i],
                    c: cc[i],
                    samples: n[i],
                    usable: usable[i],
                })
                .collect();
            KPredictor::Plane(PlaneModel { bins })
        }
    };
    Ok((history, predictor))
}

/// Onset samples and the settings that reproduce the fitted density.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetModel {
    pub samples: Vec<OnsetSample>,
    pub bandwidth: (f64, f64),
    pub levels: Vec<f64>,
    pub resolution: usize,
    pub transform: FeatureTransform,
    pub k_history: KSeries,
    pub k_predictor: KPredictor,
}

impl OnsetModel {
    pub fn pdf(&self) -> Result<OnsetPdf, CliError> {
        Ok(fit_onset_pdf(
            &self.samples,
            Some(self.bandwidth),
            &self.levels,
            self.resolution,
            self.transform,
        )?)
    }

    pub fn to_artifact(&self) -> Artifact {
        let mut a = Artifact::new(ONSET_KIND);
        a.set("bandwidth", join(&[self.bandwidth.0, self.bandwidth.1]));
        a.set("contour_levels", join(&self.levels));
        a.set("grid_resolution", self.resolution);
        a.set("transform", self.transform);
        let mut t = Table::new(&["date", "m", "r0", "weight"]);
        for s in &self.samples {
            t.push(vec![
                s.date.to_string(),
                s.m.to_string(),
                s.r0.to_string(),
                s.weight.to_string(),
            ]);
        }
        a.tables.insert("samples".into(), t);
        put_predictor(&mut a, &self.k_history, &self.k_predictor);
        a
    }

    pub fn from_artifact(a: &Artifact) -> Result<Self, ArtifactError> {
        let t = a.table("samples")?;
        let d = dates(t, "date")?;
        let m: Vec<f64> = t.parse_col("m")?;
        let r0: Vec<f64> = t.parse_col("r0")?;
        let w: Vec<f64> = t.parse_col("weight")?;
        let samples = (0..d.len())
            .map(|i| OnsetSample {
                date: d[i],
                m: m[i],
                r0: r0[i],
                weight: w[i],
            })
            .collect();
        let (k_history, k_predictor) = get_predictor(a)?;
        Ok(OnsetModel {
            samples,
            bandwidth: pair(a, "bandwidth")?,
            levels: split(a, "contour_levels")?,
            resolution: a.parse("grid_resolution")?,
            transform: parse_enum(a, "transform")?,
            k_history,
            k_predictor,
        })
    }
}

/// Severity samples and the settings that reproduce the rate surface.
#[derive(Debug, Clone, PartialEq)]
pub struct SeverityModel {
    pub samples: Vec<SeveritySample>,
    pub bandwidth: (f64, f64),
    pub resolution: usize,
    pub feature: WeatherFeature,
    pub k_history: KSeries,
    pub k_predictor: KPredictor,
}

impl SeverityModel {
    pub fn surface(&self) -> Result<RateSurface, CliError> {
        Ok(fit_rate_surface(
            &self.samples,
            Some(self.bandwidth),
            self.resolution,
        )?)
    }

    pub fn to_artifact(&self) -> Artifact {
        let mut a = Artifact::new(SEVERITY_KIND);
        a.set("bandwidth", join(&[self.bandwidth.0, self.bandwidth.1]));
        a.set("grid_resolution", self.resolution);
        let f = &self.feature;
        a.set(
            "weather_feature",
            join(&[f.temperature, f.humidity, f.precipitation]),
        );
        let mut t = Table::new(&["m", "w", "x"]);
        for s in &self.samples {
            t.push(vec![s.m.to_string(), s.w.to_string(), s.x.to_string()]);
        }
        a.tables.insert("samples".into(), t);
        put_predictor(&mut a, &self.k_history, &self.k_predictor);
        a
    }

    pub fn from_artifact(a: &Artifact) -> Result<Self, ArtifactError> {
        let t = a.table("samples")?;
        let m: Vec<f64> = t.parse_col("m")?;
        let w: Vec<f64> = t.parse_col("w")?;
        let x: Vec<u32> = t.parse_col("x")?;
        let samples = (0..m.len())
            .map(|i| SeveritySample {
                m: m[i],
                w: w[i],
                x: x[i],
            })
            .collect();
        let feature = match split(a, "weather_feature")?.as_slice() {
            [t, h, p] => WeatherFeature {
                temperature: *t,
                humidity: *h,
                precipitation: *p,
            },
            _ => return Err(bad("weather_feature", "expected three weights")),
        };
        let (k_history, k_predictor) = get_predictor(a)?;
        Ok(SeverityModel {
            samples,
            bandwidth: pair(a, "bandwidth")?,
            resolution: a.parse("grid_resolution")?,
            feature,
            k_history,
            k_predictor,
        })
    }
}

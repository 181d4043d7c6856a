//! Poisson rate surface over `(M, W)`, grid posteriors per candidate case
//! count and maximum-posterior-predictive severity.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::epimodel::Trajectory;
use crate::grid::{gaussian_kernel, silverman_bandwidth, Grid2};
use crate::ingest::{CaseSeries, WeatherRecord, WeatherSeries};
use crate::onset::{week_midpoint, OnsetPdf, RiskLevel};

/// Cells whose total kernel weight falls below this get `lambda = 0`.
pub const MIN_KERNEL_WEIGHT: f64 = 1e-12;

/// Relative tolerance under which two posterior densities count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SeverityError {
    #[error("need at least 2 severity samples, have {0}")]
    TooFewSamples(usize),
    #[error("bandwidth is zero or not finite on the {0} axis")]
    ZeroBandwidth(&'static str),
    #[error("prior curve is empty")]
    EmptyCurve,
    #[error("prior has no mass on the grid")]
    ZeroPriorMass,
    #[error("likelihood of x = {0} is zero wherever the prior has mass")]
    ZeroEvidence(u32),
    #[error("grid resolution must be at least 16")]
    InvalidResolution,
    #[error("no trajectory day for {0}")]
    MissingTrajectory(NaiveDate),
    #[error("no weather for {0}")]
    MissingWeather(NaiveDate),
}

/// Linear reduction of daily weather to the scalar `W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherFeature {
    pub temperature: f64,
    pub humidity: f64,
    pub precipitation: f64,
}

impl Default for WeatherFeature {
    fn default() -> Self {
        WeatherFeature {
            temperature: 1.0,
            humidity: 0.0,
            precipitation: 0.0,
        }
    }
}

impl WeatherFeature {
    pub fn apply(&self, r: &WeatherRecord) -> f64 {
        self.temperature * r.temp_mean + self.humidity * r.humidity + self.precipitation * r.precip
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeveritySample {
    pub m: f64,
    pub w: f64,
    pub x: u32,
}

/// One sample per nonzero case week, read at the week midpoint.
pub fn collect_severity_samples(
    traj: &Trajectory,
    weather: &WeatherSeries,
    cases: &CaseSeries,
    feature: &WeatherFeature,
) -> Result<Vec<SeveritySample>, SeverityError> {
    let mut out = Vec::new();
    for c in cases.records().iter().filter(|c| c.count > 0) {
        let date = week_midpoint(c.week_start);
        let ti = traj
            .index_of(date)
            .ok_or(SeverityError::MissingTrajectory(date))?;
        let wi = weather
            .index_of(date)
            .ok_or(SeverityError::MissingWeather(date))?;
        out.push(SeveritySample {
            m: traj.mosquitoes[ti],
            w: feature.apply(&weather.records()[wi]),
            x: c.count,
        });
    }
    Ok(out)
}

/// Nadaraya-Watson estimate of the Poisson rate on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSurface {
    pub grid: Grid2,
    pub lambda: Vec<f64>,
    pub bandwidth: (f64, f64),
}

/// Kernel-weighted mean count at `(m, w)`, or `None` when the total kernel
/// weight is below [`MIN_KERNEL_WEIGHT`].
pub fn nw_rate(samples: &[SeveritySample], h: (f64, f64), m: f64, w: f64) -> Option<f64> {
    // Unnormalised kernels: the common factor cancels in the ratio but the
    // support test must not depend on the bandwidth scale.
    let norm = 2.0 * std::f64::consts::PI * h.0 * h.1;
    let (mut num, mut den) = (0.0, 0.0);
    for s in samples {
        let k = gaussian_kernel(m - s.m, w - s.w, h) * norm;
        num += k * s.x as f64;
        den += k;
    }
    (den >= MIN_KERNEL_WEIGHT).then(|| num / den)
}

/// Fits the rate surface on a grid spanning the samples plus three
/// bandwidths. `bandwidth = None` applies Silverman's rule per axis.
pub fn fit_rate_surface(
    samples: &[SeveritySample],
    bandwidth: Option<(f64, f64)>,
    resolution: usize,
) -> Result<RateSurface, SeverityError> {
    if samples.len() < 2 {
        return Err(SeverityError::TooFewSamples(samples.len()));
    }
    if resolution < 16 {
        return Err(SeverityError::InvalidResolution);
    }
    let points: Vec<(f64, f64)> = samples.iter().map(|s| (s.m, s.w)).collect();
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(&points, &vec![1.0; points.len()]));
    for (v, axis) in [(h.0, "M"), (h.1, "W")] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SeverityError::ZeroBandwidth(axis));
        }
    }
    let grid = Grid2::around(&points, (3.0 * h.0, 3.0 * h.1), resolution, resolution);
    let lambda = grid
        .centers()
        .map(|(m, w)| nw_rate(samples, h, m, w).unwrap_or(0.0))
        .collect();
    Ok(RateSurface {
        grid,
        lambda,
        bandwidth: h,
    })
}

impl RateSurface {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,w,lambda")?;
        for (idx, l) in self.lambda.iter().enumerate() {
            let (m, ww) = self.grid.center(idx);
            writeln!(w, "{m},{ww},{l}")?;
        }
        Ok(())
    }
}

/// `ln(e^-lambda lambda^x / x!)`, with `ln pmf(0; 0) = 0` and
/// `ln pmf(x > 0; 0) = -inf`.
pub fn poisson_ln_pmf(x: u32, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let xf = x as f64;
    -lambda + xf * lambda.ln() - ln_gamma(xf + 1.0)
}

pub fn poisson_pmf(x: u32, lambda: f64) -> f64 {
    if x <= 20 && lambda > 0.0 {
        let mut p = (-lambda).exp();
        for k in 1..=x {
            p *= lambda / k as f64;
        }
        p
    } else {
        poisson_ln_pmf(x, lambda).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorChoice {
    Uniform,
    Gaussian,
    Band,
}

impl FromStr for PriorChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(PriorChoice::Uniform),
            "gaussian" => Ok(PriorChoice::Gaussian),
            "band" => Ok(PriorChoice::Band),
            other => Err(format!("unknown prior `{other}` (uniform|gaussian|band)")),
        }
    }
}

impl fmt::Display for PriorChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorChoice::Uniform => "uniform",
            PriorChoice::Gaussian => "gaussian",
            PriorChoice::Band => "band",
        })
    }
}

/// Prior shape. Distances are measured in grid-normalised coordinates, where
/// the grid extent maps to the unit square.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    UniformBox,
    GaussianRidge { sigma: f64 },
    UniformBand { halfwidth: f64 },
}

impl PriorKind {
    pub fn from_choice(choice: PriorChoice, sigma: f64, halfwidth: f64) -> Self {
        match choice {
            PriorChoice::Uniform => PriorKind::UniformBox,
            PriorChoice::Gaussian => PriorKind::GaussianRidge { sigma },
            PriorChoice::Band => PriorKind::UniformBand { halfwidth },
        }
    }
}

/// Prior density on a grid, normalised so `sum(density) * cell_area = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorGrid {
    pub kind: PriorKind,
    pub density: Vec<f64>,
}

pub fn build_prior(
    kind: PriorKind,
    curve: &[(f64, f64)],
    grid: &Grid2,
) -> Result<PriorGrid, SeverityError> {
    let raw: Vec<f64> = match kind {
        PriorKind::UniformBox => vec![1.0; grid.len()],
        PriorKind::GaussianRidge { sigma } => {
            if curve.is_empty() {
                return Err(SeverityError::EmptyCurve);
            }
            let pts: Vec<(f64, f64)> = curve.iter().map(|&(m, w)| grid.normalize(m, w)).collect();
            if sigma > 0.0 {
                grid.centers()
                    .map(|(m, w)| {
                        let (u, v) = grid.normalize(m, w);
                        pts.iter()
                            .map(|&(pu, pv)| {
                                let d2 = (u - pu).powi(2) + (v - pv).powi(2);
                                (-0.5 * d2 / (sigma * sigma)).exp()
                            })
                            .sum()
                    })
                    .collect()
            } else {
                curve_cells(curve, grid)
            }
        }
        PriorKind::UniformBand { halfwidth } => {
            if curve.is_empty() {
                return Err(SeverityError::EmptyCurve);
            }
            let pts: Vec<(f64, f64)> = curve.iter().map(|&(m, w)| grid.normalize(m, w)).collect();
            let mut ind = curve_cells(curve, grid);
            for (idx, (m, w)) in grid.centers().enumerate() {
                let (u, v) = grid.normalize(m, w);
                if pts
                    .iter()
                    .any(|&(pu, pv)| (u - pu).powi(2) + (v - pv).powi(2) <= halfwidth * halfwidth)
                {
                    ind[idx] = 1.0;
                }
            }
            ind
        }
    };
    let mass = grid.mass(&raw);
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(SeverityError::ZeroPriorMass);
    }
    Ok(PriorGrid {
        kind,
        density: raw.into_iter().map(|d| d / mass).collect(),
    })
}

/// Indicator of cells containing at least one on-grid curve point.
fn curve_cells(curve: &[(f64, f64)], grid: &Grid2) -> Vec<f64> {
    let mut ind = vec![0.0; grid.len()];
    for &(m, w) in curve {
        let (idx, outside) = grid.nearest_cell(m, w);
        if !outside {
            ind[idx] = 1.0;
        }
    }
    ind
}

/// Posterior density on the rate-surface grid for one candidate count.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub x: u32,
    pub density: Vec<f64>,
}

/// Cellwise `prior * pmf(x, lambda)`, renormalised to unit mass. Computed in
/// log space so large counts do not underflow.
pub fn posterior(
    x: u32,
    prior: &PriorGrid,
    surface: &RateSurface,
) -> Result<PosteriorGrid, SeverityError> {
    let log_terms: Vec<f64> = prior
        .density
        .iter()
        .zip(&surface.lambda)
        .map(|(&p, &l)| {
            if p > 0.0 {
                p.ln() + poisson_ln_pmf(x, l)
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(SeverityError::ZeroEvidence(x));
    }
    let scaled: Vec<f64> = log_terms.iter().map(|&t| (t - max).exp()).collect();
    let mass = surface.grid.mass(&scaled);
    Ok(PosteriorGrid {
        x,
        density: scaled.into_iter().map(|v| v / mass).collect(),
    })
}

/// Posteriors for `x = 1..=x_max` on a shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSet {
    pub grid: Grid2,
    pub posteriors: Vec<PosteriorGrid>,
}

pub fn posterior_set(
    x_max: u32,
    prior: &PriorGrid,
    surface: &RateSurface,
) -> Result<PosteriorSet, SeverityError> {
    let posteriors = (1..=x_max)
        .map(|x| posterior(x, prior, surface))
        .collect::<Result<_, _>>()?;
    Ok(PosteriorSet {
        grid: surface.grid.clone(),
        posteriors,
    })
}

/// Index of the maximum, treating values within [`TIE_TOLERANCE`] (relative)
/// of the maximum as ties and returning the first of them.
pub fn argmax_first(values: &[f64]) -> usize {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .position(|&v| v >= max - TIE_TOLERANCE * max.abs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MppPrediction {
    pub x: u32,
    /// The point lay outside the grid and was mapped to the nearest cell.
    pub off_grid: bool,
}

impl PosteriorSet {
    /// Candidate `x` whose posterior is densest at the cell of `(m, w)`.
    pub fn mpp_predict(&self, m: f64, w: f64) -> MppPrediction {
        let (cell, off_grid) = self.grid.nearest_cell(m, w);
        let at: Vec<f64> = self.posteriors.iter().map(|p| p.density[cell]).collect();
        MppPrediction {
            x: self.posteriors[argmax_first(&at)].x,
            off_grid,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,m,w,density")?;
        for p in &self.posteriors {
            for (idx, d) in p.density.iter().enumerate() {
                let (m, ww) = self.grid.center(idx);
                writeln!(w, "{},{m},{ww},{d}", p.x)?;
            }
        }
        Ok(())
    }
}

/// Daily severity output.
#[derive(Debug, Clone, PartialEq)]
pub struct SeveritySeries {
    pub dates: Vec<NaiveDate>,
    pub m: Vec<f64>,
    pub w: Vec<f64>,
    pub predicted: Vec<u32>,
    pub off_grid: Vec<bool>,
}

impl SeveritySeries {
    pub fn empty() -> Self {
        SeveritySeries {
            dates: vec![],
            m: vec![],
            w: vec![],
            predicted: vec![],
            off_grid: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn extend(&mut self, other: SeveritySeries) {
        self.dates.extend(other.dates);
        self.m.extend(other.m);
        self.w.extend(other.w);
        self.predicted.extend(other.predicted);
        self.off_grid.extend(other.off_grid);
    }

    pub fn prediction_on(&self, date: NaiveDate) -> Option<u32> {
        self.dates
            .iter()
            .position(|&d| d == date)
            .map(|i| self.predicted[i])
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,M,W,predicted_cases")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.dates[i], self.m[i], self.w[i], self.predicted[i]
            )?;
        }
        Ok(())
    }
}

/// The `(M, W)` curve of a trajectory under its driving weather.
pub fn mw_curve(
    traj: &Trajectory,
    weather: &WeatherSeries,
    feature: &WeatherFeature,
) -> Result<Vec<(f64, f64)>, SeverityError> {
    traj.dates
        .iter()
        .zip(&traj.mosquitoes)
        .map(|(d, &m)| {
            let i = weather
                .index_of(*d)
                .ok_or(SeverityError::MissingWeather(*d))?;
            Ok((m, feature.apply(&weather.records()[i])))
        })
        .collect()
}

/// MPP prediction for every trajectory day. With a gate, days the onset
/// model classifies as green report 0.
pub fn estimate_severity(
    traj: &Trajectory,
    weather: &WeatherSeries,
    posteriors: &PosteriorSet,
    feature: &WeatherFeature,
    gate: Option<&OnsetPdf>,
) -> Result<SeveritySeries, SeverityError> {
    let curve = mw_curve(traj, weather, feature)?;
    let mut out = SeveritySeries::empty();
    for (i, &(m, w)) in curve.iter().enumerate() {
        let pred = posteriors.mpp_predict(m, w);
        let gated = gate.is_some_and(|pdf| pdf.classify(m, traj.r0[i]) == RiskLevel::Green);
        out.dates.push(traj.dates[i]);
        out.m.push(m);
        out.w.push(w);
        out.predicted.push(if gated { 0 } else { pred.x });
        out.off_grid.push(pred.off_grid);
    }
    Ok(out)
}

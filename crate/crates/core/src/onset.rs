//! Case-weighted onset density over `(M, R0)`, highest-density-region
//! thresholds and daily risk classification.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::{Duration, NaiveDate};
use thiserror::Error;

use crate::epimodel::Trajectory;
use crate::grid::{silverman_bandwidth, GaussianKde, Grid2};
use crate::ingest::CaseSeries;

#[derive(Debug, Error, PartialEq)]
pub enum OnsetError {
    #[error("need at least 2 onset samples with positive weight, have {0}")]
    TooFewSamples(usize),
    #[error("bandwidth is zero or not finite on the {0} axis")]
    ZeroBandwidth(&'static str),
    #[error("contour levels must be three values strictly increasing in (0, 1)")]
    InvalidLevels,
    #[error("grid resolution must be at least 16")]
    InvalidResolution,
    #[error("no trajectory day for {0}")]
    MissingTrajectory(NaiveDate),
}

/// Transform applied to `(M, R0)` before density estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureTransform {
    #[default]
    Identity,
    /// `(ln(1 + M), R0)`.
    Log1pM,
}

impl FeatureTransform {
    pub fn apply(&self, m: f64, r0: f64) -> (f64, f64) {
        match self {
            FeatureTransform::Identity => (m, r0),
            FeatureTransform::Log1pM => (m.ln_1p(), r0),
        }
    }
}

impl FromStr for FeatureTransform {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" => Ok(FeatureTransform::Identity),
            "log1p" => Ok(FeatureTransform::Log1pM),
            other => Err(format!("unknown transform `{other}` (identity|log1p)")),
        }
    }
}

impl fmt::Display for FeatureTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureTransform::Identity => "identity",
            FeatureTransform::Log1pM => "log1p",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnsetSample {
    pub date: NaiveDate,
    /// Mosquito profile, untransformed.
    pub m: f64,
    pub r0: f64,
    pub weight: f64,
}

/// Onset samples plus the years that had no cases.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetCollection {
    pub samples: Vec<OnsetSample>,
    pub years_without_cases: Vec<i32>,
}

/// Midpoint of a case week.
pub fn week_midpoint(week_start: NaiveDate) -> NaiveDate {
    week_start + Duration::days(3)
}

/// One sample per year: `(M, R0)` at the midpoint of the first week with
/// nonzero count, weighted by that count.
pub fn collect_onset_samples(
    traj: &Trajectory,
    cases: &CaseSeries,
) -> Result<OnsetCollection, OnsetError> {
    let mut out = OnsetCollection {
        samples: Vec::new(),
        years_without_cases: Vec::new(),
    };
    for year in cases.years() {
        let Some(first) = cases.year(year).into_iter().find(|c| c.count > 0) else {
            out.years_without_cases.push(year);
            continue;
        };
        let date = week_midpoint(first.week_start);
        let i = traj
            .index_of(date)
            .ok_or(OnsetError::MissingTrajectory(date))?;
        out.samples.push(OnsetSample {
            date,
            m: traj.mosquitoes[i],
            r0: traj.r0[i],
            weight: first.count as f64,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RiskLevel {
    Green,
    Low,
    Risky,
    High,
}

impl RiskLevel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RiskLevel::Green => "green",
            RiskLevel::Low => "low",
            RiskLevel::Risky => "risky",
            RiskLevel::High => "high",
        }
    }
}

impl fmt::Display for RiskLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RiskLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "green" => Ok(RiskLevel::Green),
            "low" => Ok(RiskLevel::Low),
            "risky" => Ok(RiskLevel::Risky),
            "high" => Ok(RiskLevel::High),
            other => Err(format!("unknown risk level `{other}`")),
        }
    }
}

/// Density thresholds of the highest-density regions at each level.
///
/// Cells are sorted by density, highest first, and their masses (normalised
/// by the total grid mass) accumulated; the threshold for level `l` is the
/// density of the cell at which the running mass first reaches `l`.
pub fn hdr_thresholds(density: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = density.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = sorted.iter().sum();
    let mut cumulative = Vec::with_capacity(sorted.len());
    let mut acc = 0.0;
    for d in &sorted {
        acc += d;
        cumulative.push(acc / total);
    }
    levels
        .iter()
        .map(|&l| {
            let k = cumulative.partition_point(|&c| c < l).min(sorted.len() - 1);
            sorted[k]
        })
        .collect()
}

/// Fitted onset density.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetPdf {
    pub kde: GaussianKde,
    pub grid: Grid2,
    pub density: Vec<f64>,
    pub levels: Vec<f64>,
    /// Thresholds for `levels`, non-increasing.
    pub thresholds: Vec<f64>,
    pub transform: FeatureTransform,
}

pub fn validate_levels(levels: &[f64]) -> Result<(), OnsetError> {
    let ok = levels.len() == 3
        && levels.iter().all(|&l| l > 0.0 && l < 1.0)
        && levels.windows(2).all(|w| w[1] > w[0]);
    if ok {
        Ok(())
    } else {
        Err(OnsetError::InvalidLevels)
    }
}

/// Weighted Gaussian KDE on the transformed samples. `bandwidth = None`
/// uses the weighted Silverman rule; the grid extends three bandwidths past
/// the sample range on each side.
pub fn fit_onset_pdf(
    samples: &[OnsetSample],
    bandwidth: Option<(f64, f64)>,
    levels: &[f64],
    resolution: usize,
    transform: FeatureTransform,
) -> Result<OnsetPdf, OnsetError> {
    validate_levels(levels)?;
    if resolution < 16 {
        return Err(OnsetError::InvalidResolution);
    }
    let used: Vec<&OnsetSample> = samples
        .iter()
        .filter(|s| s.weight > 0.0 && s.m.is_finite() && s.r0.is_finite())
        .collect();
    if used.len() < 2 {
        return Err(OnsetError::TooFewSamples(used.len()));
    }
    let points: Vec<(f64, f64)> = used.iter().map(|s| transform.apply(s.m, s.r0)).collect();
    let weights: Vec<f64> = used.iter().map(|s| s.weight).collect();
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(&points, &weights));
    for (v, axis) in [(h.0, "M"), (h.1, "R0")] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(OnsetError::ZeroBandwidth(axis));
        }
    }
    let grid = Grid2::around(&points, (3.0 * h.0, 3.0 * h.1), resolution, resolution);
    let kde = GaussianKde::new(points, &weights, h);
    let density = kde.evaluate(&grid);
    let thresholds = hdr_thresholds(&density, levels);
    Ok(OnsetPdf {
        kde,
        grid,
        density,
        levels: levels.to_vec(),
        thresholds,
        transform,
    })
}

impl OnsetPdf {
    /// KDE density at an untransformed `(M, R0)` point.
    pub fn density_at(&self, m: f64, r0: f64) -> f64 {
        let (x, y) = self.transform.apply(m, r0);
        self.kde.density(x, y)
    }

    pub fn level_for_density(&self, d: f64) -> RiskLevel {
        if d >= self.thresholds[0] {
            RiskLevel::High
        } else if d >= self.thresholds[1] {
            RiskLevel::Risky
        } else if d >= self.thresholds[2] {
            RiskLevel::Low
        } else {
            RiskLevel::Green
        }
    }

    /// Risk level of an untransformed `(M, R0)` point. Thresholds are
    /// inclusive: a density equal to a threshold takes the higher level.
    pub fn classify(&self, m: f64, r0: f64) -> RiskLevel {
        self.level_for_density(self.density_at(m, r0))
    }

    /// Grid export as `m,r0,density` in transformed coordinates.
    pub fn write_grid_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,r0,density")?;
        for (idx, d) in self.density.iter().enumerate() {
            let (x, y) = self.grid.center(idx);
            writeln!(w, "{x},{y},{d}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelCounts {
    pub high: usize,
    pub risky: usize,
    pub low: usize,
    pub green: usize,
}

impl LevelCounts {
    pub fn tally(levels: &[RiskLevel]) -> Self {
        let mut c = LevelCounts::default();
        for l in levels {
            match l {
                RiskLevel::High => c.high += 1,
                RiskLevel::Risky => c.risky += 1,
                RiskLevel::Low => c.low += 1,
                RiskLevel::Green => c.green += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.high + self.risky + self.low + self.green
    }
}

impl fmt::Display for LevelCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "high={},risky={},low={},green={}",
            self.high, self.risky, self.low, self.green
        )
    }
}

/// Daily risk series.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskSeries {
    pub dates: Vec<NaiveDate>,
    pub m: Vec<f64>,
    pub r0: Vec<f64>,
    pub levels: Vec<RiskLevel>,
}

impl RiskSeries {
    pub fn empty() -> Self {
        RiskSeries {
            dates: vec![],
            m: vec![],
            r0: vec![],
            levels: vec![],
        }
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn counts(&self) -> LevelCounts {
        LevelCounts::tally(&self.levels)
    }

    pub fn level_on(&self, date: NaiveDate) -> Option<RiskLevel> {
        self.dates
            .iter()
            .position(|&d| d == date)
            .map(|i| self.levels[i])
    }

    pub fn extend(&mut self, other: RiskSeries) {
        self.dates.extend(other.dates);
        self.m.extend(other.m);
        self.r0.extend(other.r0);
        self.levels.extend(other.levels);
    }

    /// `date,M,R0,risk_level` rows, then a `# summary:` footer line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "date,M,R0,risk_level")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                self.dates[i], self.m[i], self.r0[i], self.levels[i]
            )?;
        }
        writeln!(w, "# summary: {}", self.counts())
    }
}

/// Classifies every day of a trajectory.
pub fn forecast_onset(pdf: &OnsetPdf, traj: &Trajectory) -> RiskSeries {
    RiskSeries {
        dates: traj.dates.clone(),
        m: traj.mosquitoes.clone(),
        r0: traj.r0.clone(),
        levels: traj
            .mosquitoes
            .iter()
            .zip(&traj.r0)
            .map(|(&m, &r)| pdf.classify(m, r))
            .collect(),
    }
}

//! Annual high-risk indicators and their linear trend.

use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

use crate::carrycap::{CarryCapError, KPredictor};
use crate::epimodel::{simulate_with_steps, CompartmentState, ModelError, ModelParams};
use crate::ingest::WeatherSeries;
use crate::onset::{forecast_onset, LevelCounts, OnsetPdf, RiskLevel};

#[derive(Debug, Error)]
pub enum TrendError {
    #[error("risk series for the year is empty")]
    EmptyYear,
    #[error("need at least 3 distinct years, have {0}")]
    TooFewYears(usize),
    #[error("all years are identical")]
    ZeroVariance,
    #[error("need at least 5 residuals, have {0}")]
    TooFewResiduals(usize),
    #[error("residuals have zero spread")]
    DegenerateResiduals,
    #[error("years and values differ in length")]
    LengthMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    CarryCap(#[from] CarryCapError),
}

/// `(r_year, r_relative)`: High days over all days, and High days over
/// all non-green days (0 when there are none).
pub fn annual_indicators(levels: &[RiskLevel]) -> Result<(f64, f64), TrendError> {
    if levels.is_empty() {
        return Err(TrendError::EmptyYear);
    }
    let c = LevelCounts::tally(levels);
    let risk_days = c.high + c.risky + c.low;
    let r_year = c.high as f64 / levels.len() as f64;
    let r_relative = if risk_days == 0 {
        0.0
    } else {
        c.high as f64 / risk_days as f64
    };
    Ok((r_year, r_relative))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub p_value: f64,
    pub residuals: Vec<f64>,
    /// Residual normality p-value; `None` with fewer than five residuals or
    /// zero residual spread.
    pub ks_p_value: Option<f64>,
}

/// Ordinary least squares of `values` on `years`, with a two-sided t test
/// on the slope. Years are centred internally.
pub fn ols_trend(years: &[i32], values: &[f64]) -> Result<TrendResult, TrendError> {
    if years.len() != values.len() {
        return Err(TrendError::LengthMismatch);
    }
    let mut distinct = years.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() == 1 && years.len() >= 3 {
        return Err(TrendError::ZeroVariance);
    }
    if distinct.len() < 3 {
        return Err(TrendError::TooFewYears(distinct.len()));
    }
    let n = years.len() as f64;
    let t: Vec<f64> = years.iter().map(|&y| y as f64).collect();
    let t_mean = t.iter().sum::<f64>() / n;
    let y_mean = values.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|ti| (ti - t_mean).powi(2)).sum();
    let sxy: f64 = t
        .iter()
        .zip(values)
        .map(|(ti, yi)| (ti - t_mean) * (yi - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let residuals: Vec<f64> = t
        .iter()
        .zip(values)
        .map(|(ti, yi)| yi - (y_mean + slope * (ti - t_mean)))
        .collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let df = n - 2.0;
    let slope_se = (sse / df / sxx).sqrt();
    let p_value = if slope_se > 0.0 {
        let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
        (2.0 * (1.0 - dist.cdf((slope / slope_se).abs()))).clamp(0.0, 1.0)
    } else if slope == 0.0 {
        1.0
    } else {
        0.0
    };
    let ks_p_value = ks_normality(&residuals).ok().map(|k| k.p_value);
    Ok(TrendResult {
        slope,
        intercept,
        slope_se,
        p_value,
        residuals,
        ks_p_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Largest gap between the empirical CDF of `values` and `cdf`.
pub fn ks_statistic(values: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov survival function
/// `Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS test against a normal with the sample mean and standard deviation.
/// The p-value uses the asymptotic Kolmogorov distribution at `sqrt(n) D`,
/// which ignores the effect of estimating the parameters.
pub fn ks_normality(residuals: &[f64]) -> Result<KsResult, TrendError> {
    if residuals.len() < 5 {
        return Err(TrendError::TooFewResiduals(residuals.len()));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd.is_nan() || sd <= 1e-12 * mean.abs().max(1e-300) {
        return Err(TrendError::DegenerateResiduals);
    }
    let normal = Normal::new(mean, sd).map_err(|_| TrendError::DegenerateResiduals)?;
    let statistic = ks_statistic(residuals, |x| normal.cdf(x));
    Ok(KsResult {
        statistic,
        p_value: kolmogorov_q(n.sqrt() * statistic),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YearIndicators {
    pub year: i32,
    pub r_year: f64,
    pub r_relative: f64,
    pub counts: LevelCounts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    pub rows: Vec<YearIndicators>,
    pub r_year: TrendResult,
    pub r_relative: TrendResult,
}

/// Model inputs shared by every simulated year.
#[derive(Debug, Clone, Copy)]
pub struct RunSetup<'a> {
    pub params: &'a ModelParams,
    pub init: &'a CompartmentState,
    pub steps_per_day: usize,
}

/// Simulates each requested full year from `init`, classifies every day
/// and regresses both indicators on the year.
pub fn trend_report(
    weather: &WeatherSeries,
    years: &[i32],
    pdf: &OnsetPdf,
    setup: RunSetup<'_>,
    k: &KPredictor,
) -> Result<TrendReport, TrendError> {
    let available = weather.full_years();
    let selected: Vec<i32> = years
        .iter()
        .copied()
        .filter(|y| available.contains(y))
        .collect();
    if selected.len() < 3 {
        return Err(TrendError::TooFewYears(selected.len()));
    }
    let mut rows = Vec::with_capacity(selected.len());
    for &year in &selected {
        let wy = weather.year(year);
        let ks = k.predict(&wy)?;
        let traj = simulate_with_steps(setup.params, &wy, &ks, setup.init, setup.steps_per_day)?;
        let risk = forecast_onset(pdf, &traj);
        let (r_year, r_relative) = annual_indicators(&risk.levels)?;
        rows.push(YearIndicators {
            year,
            r_year,
            r_relative,
            counts: risk.counts(),
        });
    }
    let ys: Vec<i32> = rows.iter().map(|r| r.year).collect();
    let r_year = ols_trend(&ys, &rows.iter().map(|r| r.r_year).collect::<Vec<_>>())?;
    let r_relative = ols_trend(&ys, &rows.iter().map(|r| r.r_relative).collect::<Vec<_>>())?;
    Ok(TrendReport {
        rows,
        r_year,
        r_relative,
    })
}

impl TrendReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "year,r_year,r_relative")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.year, r.r_year, r.r_relative)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_examples() {
        let mut v = vec![RiskLevel::Green; 365];
        v[..73].fill(RiskLevel::High);
        assert_eq!(annual_indicators(&v).unwrap().0, 0.2);
        assert_eq!(
            annual_indicators(&[RiskLevel::Green; 10]).unwrap(),
            (0.0, 0.0)
        );
        let mut v = vec![RiskLevel::High; 10];
        v.extend([RiskLevel::Risky; 10]);
        v.extend([RiskLevel::Green; 5]);
        assert_eq!(annual_indicators(&v).unwrap().1, 0.5);
        assert!(matches!(annual_indicators(&[]), Err(TrendError::EmptyYear)));
    }

    #[test]
    fn perfect_line() {
        let years: Vec<i32> = (0..10).collect();
        let y: Vec<f64> = years.iter().map(|&t| 2.0 * t as f64 + 1.0).collect();
        let r = ols_trend(&years, &y).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!((r.intercept - 1.0).abs() < 1e-12);
        assert!(r.slope_se < 1e-12);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn constant_values() {
        let years: Vec<i32> = (1991..2001).collect();
        let r = ols_trend(&years, &[0.3; 10]).unwrap();
        assert_eq!(r.slope, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.ks_p_value, None);
    }

    #[test]
    fn too_few_years() {
        assert!(matches!(
            ols_trend(&[2000, 2001], &[1.0, 2.0]),
            Err(TrendError::TooFewYears(2))
        ));
        assert!(matches!(
            ols_trend(&[2000, 2000, 2000], &[1.0, 2.0, 3.0]),
            Err(TrendError::ZeroVariance)
        ));
    }

    #[test]
    fn kolmogorov_tail() {
        assert!((kolmogorov_q(1.358) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_q(1.628) - 0.01).abs() < 1e-3);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }
}

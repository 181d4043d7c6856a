//! Synthetic weather and case data generated from the model itself, used
//! for fixtures and recovery tests.

use std::f64::consts::PI;

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::epimodel::ModelError;
use crate::ingest::{CaseRecord, CaseSeries, Config, WeatherRecord, WeatherSeries};
use crate::pipeline::{simulate_years, PipelineError};

/// Seasonal climate: sinusoidal temperature and humidity with Gaussian
/// noise, and intermittent exponential rainfall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Climate {
    pub mean_temp: f64,
    pub temp_amplitude: f64,
    /// Day of year of the temperature maximum.
    pub warmest_day: f64,
    /// Added to the mean temperature per year elapsed.
    pub warming_per_year: f64,
    pub temp_noise: f64,
    pub mean_humidity: f64,
    pub humidity_amplitude: f64,
    pub humidity_noise: f64,
    pub rain_probability: f64,
    pub mean_rain: f64,
}

impl Default for Climate {
    fn default() -> Self {
        Climate {
            mean_temp: 18.0,
            temp_amplitude: 8.0,
            warmest_day: 200.0,
            warming_per_year: 0.0,
            temp_noise: 1.5,
            mean_humidity: 60.0,
            humidity_amplitude: 10.0,
            humidity_noise: 5.0,
            rain_probability: 0.25,
            mean_rain: 4.0,
        }
    }
}

impl Climate {
    /// Noise-free temperature on `date`, `years` after the first year.
    pub fn temperature(&self, date: NaiveDate, years: f64) -> f64 {
        let phase = 2.0 * PI * (date.ordinal() as f64 - self.warmest_day) / 365.25;
        self.mean_temp + self.warming_per_year * years + self.temp_amplitude * phase.cos()
    }

    pub fn humidity(&self, date: NaiveDate) -> f64 {
        // Drier in the warm season.
        let phase = 2.0 * PI * (date.ordinal() as f64 - self.warmest_day) / 365.25;
        self.mean_humidity - self.humidity_amplitude * phase.cos()
    }

    /// Daily weather for `n_years` calendar years starting at `first_year`.
    pub fn generate<R: Rng>(&self, first_year: i32, n_years: i32, rng: &mut R) -> WeatherSeries {
        let start = NaiveDate::from_ymd_opt(first_year, 1, 1).unwrap();
        let end = NaiveDate::from_ymd_opt(first_year + n_years, 1, 1).unwrap();
        let t_noise = Normal::new(0.0, self.temp_noise.max(0.0)).unwrap();
        let h_noise = Normal::new(0.0, self.humidity_noise.max(0.0)).unwrap();
        let records = start
            .iter_days()
            .take_while(|d| *d < end)
            .map(|date| {
                let years = (date.year() - first_year) as f64;
                let rain = if rng.random::<f64>() < self.rain_probability {
                    -self.mean_rain * (1.0 - rng.random::<f64>()).ln()
                } else {
                    0.0
                };
                WeatherRecord {
                    date,
                    temp_mean: self.temperature(date, years) + t_noise.sample(rng),
                    humidity: (self.humidity(date) + h_noise.sample(rng)).clamp(0.0, 100.0),
                    precip: rain,
                }
            })
            .collect();
        WeatherSeries::observed(records).expect("generated weather is contiguous")
    }
}

/// Weekly expected reported cases from per-year simulations at a constant
/// K per year, for weeks starting on the first weather day.
pub fn expected_weekly_cases(
    cfg: &Config,
    weather: &WeatherSeries,
    k_per_year: &[f64],
) -> Result<(Vec<NaiveDate>, Vec<f64>), PipelineError> {
    let years = weather.years();
    if years.len() != k_per_year.len() {
        return Err(PipelineError::Invalid(format!(
            "{} years of weather but {} K values",
            years.len(),
            k_per_year.len()
        )));
    }
    let k: Vec<f64> = weather
        .records()
        .iter()
        .map(|r| k_per_year[years.iter().position(|&y| y == r.date.year()).unwrap()])
        .collect();
    let traj = simulate_years(cfg, weather, &k)?;
    let first = weather.first_date().ok_or(ModelError::ZeroSteps)?;
    let last = weather.last_date().unwrap();
    let weeks: Vec<NaiveDate> = (0..)
        .map(|i| first + Duration::days(7 * i))
        .take_while(|d| *d <= last)
        .collect();
    let expected = traj.weekly_reported(&weeks);
    Ok((weeks, expected))
}

/// Poisson draws around the expected weekly counts.
pub fn sample_cases<R: Rng>(weeks: &[NaiveDate], expected: &[f64], rng: &mut R) -> CaseSeries {
    let records = weeks
        .iter()
        .zip(expected)
        .map(|(&week_start, &mu)| CaseRecord {
            week_start,
            count: if mu > 0.0 {
                Poisson::new(mu).unwrap().sample(rng) as u32
            } else {
                0
            },
        })
        .collect();
    CaseSeries::new(records).expect("weeks are evenly spaced")
}

/// Expected counts rounded to the nearest integer.
pub fn rounded_cases(weeks: &[NaiveDate], expected: &[f64]) -> CaseSeries {
    let records = weeks
        .iter()
        .zip(expected)
        .map(|(&week_start, &mu)| CaseRecord {
            week_start,
            count: mu.round().max(0.0) as u32,
        })
        .collect();
    CaseSeries::new(records).expect("weeks are evenly spaced")
}

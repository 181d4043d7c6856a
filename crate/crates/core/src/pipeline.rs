//! End-to-end procedures combining calibration, weather forecasting,
//! simulation, onset classification and severity inference.

use chrono::{Datelike, Duration, NaiveDate};
use thiserror::Error;

use crate::carrycap::{calibrate_k, CarryCapError, KMethod, KPredictor, KSeries};
use crate::epimodel::{simulate_with_steps, CompartmentState, ModelError, Trajectory};
use crate::eval::{bayesian_predictive, nb_one_step, EvalError, PredictiveDist};
use crate::ingest::{CaseSeries, Config, IngestError, WeatherSeries};
use crate::onset::{
    collect_onset_samples, fit_onset_pdf, forecast_onset, week_midpoint, OnsetError, OnsetPdf,
    OnsetSample, RiskSeries,
};
use crate::severity::{
    build_prior, collect_severity_samples, estimate_severity, fit_rate_surface, mw_curve,
    posterior_set, PriorChoice, PriorKind, RateSurface, SeverityError, SeveritySample,
    SeveritySeries,
};
use crate::weathercast::{forecast_weather, ArError, ForecastMode};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    CarryCap(#[from] CarryCapError),
    #[error(transparent)]
    Ar(#[from] ArError),
    #[error(transparent)]
    Onset(#[from] OnsetError),
    #[error(transparent)]
    Severity(#[from] SeverityError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Invalid(String),
}

/// Forecast horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    LongTerm,
    ShortTerm { lead: usize },
}

pub fn year_start(year: i32) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, 1, 1).expect("valid year")
}

/// Simulates each calendar year of `weather` separately, starting every
/// year from the configured initial populations on its first day.
pub fn simulate_years(
    cfg: &Config,
    weather: &WeatherSeries,
    k: &[f64],
) -> Result<Trajectory, PipelineError> {
    let init = cfg.init.state();
    let mut out: Option<Trajectory> = None;
    let mut offset = 0;
    for year in weather.years() {
        let wy = weather.year(year);
        let ky = &k[offset..offset + wy.len()];
        offset += wy.len();
        let traj = simulate_with_steps(&cfg.params, &wy, ky, &init, cfg.steps_per_day)?;
        match out.as_mut() {
            Some(t) => t.extend(traj),
            None => out = Some(traj),
        }
    }
    out.ok_or_else(|| PipelineError::Invalid("weather series is empty".into()))
}

/// Calibrated K history and the predictor built from it.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub history: KSeries,
    pub predictor: KPredictor,
}

pub fn calibrate(
    cfg: &Config,
    weather: &WeatherSeries,
    cases: &CaseSeries,
    method: KMethod,
) -> Result<Calibration, PipelineError> {
    let history = calibrate_k(
        weather,
        cases,
        &cfg.params,
        &cfg.init.state(),
        cfg.steps_per_day,
        &cfg.k_grid,
    )?;
    let predictor = KPredictor::from_history(
        method,
        weather,
        &history,
        cfg.forecast.k_ar_order,
        cfg.forecast.precip_bins,
    )?;
    Ok(Calibration { history, predictor })
}

/// Trajectory over the calibrated years, driven by the calibrated K.
pub fn historical_trajectory(
    cfg: &Config,
    weather: &WeatherSeries,
    history: &KSeries,
) -> Result<(WeatherSeries, Trajectory), PipelineError> {
    let first = *history.dates.first().ok_or(CarryCapError::EmptyHistory)?;
    let last = *history.dates.last().unwrap();
    let w = weather.between(first, last + Duration::days(1));
    let k = history.for_dates(&w.dates())?;
    let traj = simulate_years(cfg, &w, &k)?;
    Ok((w, traj))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnsetFit {
    pub calibration: Calibration,
    pub samples: Vec<OnsetSample>,
    pub years_without_cases: Vec<i32>,
    pub pdf: OnsetPdf,
}

pub fn fit_onset_model(
    cfg: &Config,
    weather: &WeatherSeries,
    cases: &CaseSeries,
    method: KMethod,
) -> Result<OnsetFit, PipelineError> {
    let calibration = calibrate(cfg, weather, cases, method)?;
    let (_, traj) = historical_trajectory(cfg, weather, &calibration.history)?;
    let in_range = restrict_cases(cases, &traj)?;
    let collected = collect_onset_samples(&traj, &in_range)?;
    let pdf = onset_pdf_from_samples(cfg, &collected.samples)?;
    Ok(OnsetFit {
        calibration,
        samples: collected.samples,
        years_without_cases: collected.years_without_cases,
        pdf,
    })
}

pub fn onset_pdf_from_samples(
    cfg: &Config,
    samples: &[OnsetSample],
) -> Result<OnsetPdf, PipelineError> {
    Ok(fit_onset_pdf(
        samples,
        cfg.kde.onset_bandwidth,
        &cfg.kde.contour_levels,
        cfg.kde.onset_resolution,
        cfg.kde.transform,
    )?)
}

/// Case weeks whose midpoint falls inside the trajectory.
fn restrict_cases(cases: &CaseSeries, traj: &Trajectory) -> Result<CaseSeries, PipelineError> {
    let kept: Vec<_> = cases
        .records()
        .iter()
        .filter(|c| traj.index_of(c.week_start + Duration::days(3)).is_some())
        .copied()
        .collect();
    Ok(CaseSeries::new(kept)?)
}

/// Forecast weather for a span and the trajectory it drives.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRun {
    pub weather: WeatherSeries,
    pub trajectory: Trajectory,
}

fn check_span(start: NaiveDate, end: NaiveDate) -> Result<(), PipelineError> {
    if end < start {
        return Err(PipelineError::Invalid(format!(
            "forecast end {end} precedes start {start}"
        )));
    }
    Ok(())
}

/// Long-term run: one AR forecast of `long_lead` days from all weather
/// before Jan 1 of `year`, simulated from the initial populations.
pub fn long_term_run(
    cfg: &Config,
    weather: &WeatherSeries,
    k: &KPredictor,
    year: i32,
) -> Result<ForecastRun, PipelineError> {
    let start = year_start(year);
    let history = weather.before(start);
    if history.last_date() != Some(start - Duration::days(1)) {
        return Err(PipelineError::Invalid(format!(
            "weather history must run up to {}",
            start - Duration::days(1)
        )));
    }
    let fw = forecast_weather(
        &history,
        ForecastMode::LongTerm {
            order: cfg.forecast.long_ar_order,
        },
        cfg.forecast.long_lead,
    )?;
    let ks = k.predict(&fw)?;
    let trajectory =
        simulate_with_steps(&cfg.params, &fw, &ks, &cfg.init.state(), cfg.steps_per_day)?;
    Ok(ForecastRun {
        weather: fw,
        trajectory,
    })
}

/// Short-term runs over `[start, end)` in windows of `lead` days. Each
/// window forecasts with AR(`lead`) on all weather before it and starts
/// from the state reached by simulating the observed weather since Jan 1.
pub fn short_term_runs(
    cfg: &Config,
    weather: &WeatherSeries,
    k: &KPredictor,
    start: NaiveDate,
    end: NaiveDate,
    lead: usize,
) -> Result<Vec<ForecastRun>, PipelineError> {
    check_span(start, end)?;
    if lead == 0 {
        return Ok(Vec::new());
    }
    let mut state: CompartmentState = cfg.init.state();
    let jan1 = year_start(start.year());
    if start > jan1 {
        state = advance(cfg, weather, k, jan1, start, state)?;
    }
    let mut runs = Vec::new();
    let mut t = start;
    while t < end {
        let history = weather.before(t);
        if history.last_date() != Some(t - Duration::days(1)) {
            return Err(PipelineError::Invalid(format!(
                "observed weather must run up to {}",
                t - Duration::days(1)
            )));
        }
        let window = lead.min((end - t).num_days() as usize);
        let fw = forecast_weather(&history, ForecastMode::ShortTerm, lead)?;
        let fw = fw.between(t, t + Duration::days(window as i64));
        let ks = k.predict(&fw)?;
        let trajectory = simulate_with_steps(&cfg.params, &fw, &ks, &state, cfg.steps_per_day)?;
        runs.push(ForecastRun {
            weather: fw,
            trajectory,
        });
        let next = t + Duration::days(window as i64);
        if next < end {
            state = advance(cfg, weather, k, t, next, state)?;
        }
        t = next;
    }
    Ok(runs)
}

/// Simulates observed weather on `[from, to)` starting from `state`.
fn advance(
    cfg: &Config,
    weather: &WeatherSeries,
    k: &KPredictor,
    from: NaiveDate,
    to: NaiveDate,
    state: CompartmentState,
) -> Result<CompartmentState, PipelineError> {
    let w = weather.between(from, to);
    if w.len() as i64 != (to - from).num_days() {
        return Err(PipelineError::Invalid(format!(
            "observed weather missing between {from} and {to}"
        )));
    }
    let ks = k.predict(&w)?;
    let traj = simulate_with_steps(&cfg.params, &w, &ks, &state, cfg.steps_per_day)?;
    Ok(*traj.last_state().unwrap_or(&state))
}

/// Forecast runs covering the target year for the given mode.
pub fn target_runs(
    cfg: &Config,
    weather: &WeatherSeries,
    k: &KPredictor,
    year: i32,
    mode: Mode,
) -> Result<Vec<ForecastRun>, PipelineError> {
    match mode {
        Mode::LongTerm => Ok(vec![long_term_run(cfg, weather, k, year)?]),
        Mode::ShortTerm { lead } => {
            let start = year_start(year);
            let end = start + Duration::days(cfg.forecast.long_lead as i64);
            short_term_runs(cfg, weather, k, start, end, lead)
        }
    }
}

/// Daily onset risk over the target year.
pub fn predict_onset(
    cfg: &Config,
    pdf: &OnsetPdf,
    weather: &WeatherSeries,
    k: &KPredictor,
    year: i32,
    mode: Mode,
) -> Result<RiskSeries, PipelineError> {
    let mut out = RiskSeries::empty();
    for run in target_runs(cfg, weather, k, year, mode)? {
        out.extend(forecast_onset(pdf, &run.trajectory));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeverityFit {
    pub calibration: Calibration,
    pub samples: Vec<SeveritySample>,
    pub surface: RateSurface,
}

pub fn fit_severity_model(
    cfg: &Config,
    weather: &WeatherSeries,
    cases: &CaseSeries,
    method: KMethod,
) -> Result<SeverityFit, PipelineError> {
    let calibration = calibrate(cfg, weather, cases, method)?;
    let (w, traj) = historical_trajectory(cfg, weather, &calibration.history)?;
    let in_range = restrict_cases(cases, &traj)?;
    let samples = collect_severity_samples(&traj, &w, &in_range, &cfg.forecast.weather_feature)?;
    let surface = severity_surface(cfg, &samples)?;
    Ok(SeverityFit {
        calibration,
        samples,
        surface,
    })
}

pub fn severity_surface(
    cfg: &Config,
    samples: &[SeveritySample],
) -> Result<RateSurface, PipelineError> {
    Ok(fit_rate_surface(
        samples,
        cfg.kde.severity_bandwidth,
        cfg.kde.severity_resolution,
    )?)
}

/// Severity for one trajectory, with the prior built from its own `(M, W)`
/// curve.
pub fn severity_for_run(
    cfg: &Config,
    surface: &RateSurface,
    run: &ForecastRun,
    prior: PriorChoice,
    gate: Option<&OnsetPdf>,
) -> Result<SeveritySeries, PipelineError> {
    if run.trajectory.is_empty() {
        return Ok(SeveritySeries::empty());
    }
    let feature = &cfg.forecast.weather_feature;
    let curve = mw_curve(&run.trajectory, &run.weather, feature)?;
    let kind = PriorKind::from_choice(
        prior,
        cfg.forecast.prior_sigma,
        cfg.forecast.prior_halfwidth,
    );
    let prior = build_prior(kind, &curve, &surface.grid)?;
    let posteriors = posterior_set(cfg.forecast.x_max, &prior, surface)?;
    Ok(estimate_severity(
        &run.trajectory,
        &run.weather,
        &posteriors,
        feature,
        gate,
    )?)
}

/// Severity estimated on observed weather for the given span.
pub fn estimate_on_observed(
    cfg: &Config,
    surface: &RateSurface,
    weather: &WeatherSeries,
    k: &KPredictor,
    prior: PriorChoice,
    gate: Option<&OnsetPdf>,
) -> Result<SeveritySeries, PipelineError> {
    let ks = k.predict(weather)?;
    let trajectory = simulate_years(cfg, weather, &ks)?;
    let run = ForecastRun {
        weather: weather.clone(),
        trajectory,
    };
    severity_for_run(cfg, surface, &run, prior, gate)
}

/// Severity forecast over the target year.
#[allow(clippy::too_many_arguments)]
pub fn predict_severity(
    cfg: &Config,
    surface: &RateSurface,
    weather: &WeatherSeries,
    k: &KPredictor,
    year: i32,
    mode: Mode,
    prior: PriorChoice,
    gate: Option<&OnsetPdf>,
) -> Result<SeveritySeries, PipelineError> {
    let mut out = SeveritySeries::empty();
    for run in target_runs(cfg, weather, k, year, mode)? {
        out.extend(severity_for_run(cfg, surface, &run, prior, gate)?);
    }
    Ok(out)
}

/// Observed case weeks whose midpoint is one of `dates`.
pub fn scored_weeks(cases: &CaseSeries, dates: &[NaiveDate]) -> Vec<(NaiveDate, u32)> {
    cases
        .records()
        .iter()
        .filter(|c| dates.binary_search(&week_midpoint(c.week_start)).is_ok())
        .map(|c| (c.week_start, c.count))
        .collect()
}

/// Bayesian weekly predictive distributions: the MPP count on each week's
/// midpoint, widened by the configured discretised Gaussian.
pub fn bayes_predictions(
    cfg: &Config,
    severity: &SeveritySeries,
    weeks: &[(NaiveDate, u32)],
) -> Result<Vec<(NaiveDate, PredictiveDist)>, PipelineError> {
    weeks
        .iter()
        .map(|&(week, _)| {
            let mid = week_midpoint(week);
            let x = severity.prediction_on(mid).ok_or_else(|| {
                PipelineError::Invalid(format!("no severity prediction for {mid}"))
            })?;
            Ok((
                week,
                bayesian_predictive(x as f64, cfg.score.sigma, cfg.score.x_cap),
            ))
        })
        .collect()
}

/// Negative-binomial one-step predictions: each week is predicted from all
/// case weeks before it.
pub fn nb_predictions(
    cfg: &Config,
    cases: &CaseSeries,
    weeks: &[(NaiveDate, u32)],
) -> Result<Vec<(NaiveDate, PredictiveDist)>, PipelineError> {
    weeks
        .iter()
        .map(|&(week, _)| {
            let window: Vec<u32> = cases
                .records()
                .iter()
                .take_while(|c| c.week_start < week)
                .map(|c| c.count)
                .collect();
            Ok((
                week,
                nb_one_step(&window, cfg.score.x_cap, cfg.score.min_history)?,
            ))
        })
        .collect()
}

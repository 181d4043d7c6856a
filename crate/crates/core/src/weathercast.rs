//! Autoregressive weather forecasting.

use chrono::Duration;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ingest::{Origin, WeatherRecord, WeatherSeries};

/// Ridge added to the diagonal of the normal equations.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum ArError {
    #[error("AR order must be at least 1")]
    ZeroOrder,
    #[error("series of length {got} is too short for AR({order}); need {needed}")]
    TooShort {
        order: usize,
        needed: usize,
        got: usize,
    },
    #[error("AR design matrix is singular")]
    SingularDesign,
    #[error("history of length {got} is shorter than AR order {order}")]
    HistoryTooShort { order: usize, got: usize },
    #[error("weather history is too short for {mode} forecasting: need {needed} days, have {got}")]
    InsufficientHistory {
        mode: &'static str,
        needed: usize,
        got: usize,
    },
}

/// `y_t = c + sum_i phi_i y_{t-i} + e_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArModel {
    pub intercept: f64,
    /// `phi_1..phi_p`, most recent lag first.
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    /// One-step prediction from the trailing `order` values of `history`.
    pub fn predict_next(&self, history: &[f64]) -> f64 {
        let n = history.len();
        self.intercept
            + self
                .coefficients
                .iter()
                .enumerate()
                .map(|(i, phi)| phi * history[n - 1 - i])
                .sum::<f64>()
    }
}

/// Lagged design matrix `[1, y_{t-1}, ..., y_{t-p}]` for `t = p..n`.
pub fn design_matrix(series: &[f64], order: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows = series.len() - order;
    let x = DMatrix::from_fn(rows, order + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            series[order + r - c]
        }
    });
    let y = DVector::from_fn(rows, |r, _| series[order + r]);
    (x, y)
}

/// Least-squares AR fit. Requires `len >= 2 * order + 1`.
pub fn fit_ar(series: &[f64], order: usize) -> Result<ArModel, ArError> {
    if order == 0 {
        return Err(ArError::ZeroOrder);
    }
    let needed = 2 * order + 1;
    if series.len() < needed {
        return Err(ArError::TooShort {
            order,
            needed,
            got: series.len(),
        });
    }
    let (x, y) = design_matrix(series, order);
    let mut xtx = x.tr_mul(&x);
    for i in 0..=order {
        xtx[(i, i)] += RIDGE;
    }
    let xty = x.tr_mul(&y);
    let beta = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx
            .svd(true, true)
            .solve(&xty, 1e-12)
            .map_err(|_| ArError::SingularDesign)?,
    };
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(ArError::SingularDesign);
    }
    let resid = &y - &x * &beta;
    let residual_variance = resid.norm_squared() / resid.len() as f64;
    Ok(ArModel {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        residual_variance,
    })
}

/// Iterated one-step forecast; predictions are fed back as inputs.
pub fn forecast(model: &ArModel, history: &[f64], horizon: usize) -> Result<Vec<f64>, ArError> {
    let p = model.order();
    if history.len() < p {
        return Err(ArError::HistoryTooShort {
            order: p,
            got: history.len(),
        });
    }
    let mut buf: Vec<f64> = history[history.len() - p..].to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = model.predict_next(&buf);
        buf.push(next);
        out.push(next);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecastMode {
    /// One AR(`order`) model per variable, forecasting `lead` days.
    LongTerm { order: usize },
    /// AR(`lead`) per variable.
    ShortTerm,
}

/// Forecasts `lead` days past the end of `history`, one AR model per
/// variable. Humidity is clamped to [0, 100] and precipitation at 0.
pub fn forecast_weather(
    history: &WeatherSeries,
    mode: ForecastMode,
    lead: usize,
) -> Result<WeatherSeries, ArError> {
    if lead == 0 {
        return Ok(WeatherSeries::new(vec![], vec![]).expect("empty series"));
    }
    let (order, needed, label) = match mode {
        ForecastMode::LongTerm { order } => (order, (2 * order + 1).max(730), "long-term"),
        ForecastMode::ShortTerm => (lead, 2 * lead + 1, "short-term"),
    };
    if history.len() < needed {
        return Err(ArError::InsufficientHistory {
            mode: label,
            needed,
            got: history.len(),
        });
    }
    let mut columns = Vec::with_capacity(3);
    for var in [
        crate::ingest::WeatherVariable::Temperature,
        crate::ingest::WeatherVariable::Humidity,
        crate::ingest::WeatherVariable::Precipitation,
    ] {
        let values = history.column(var);
        let model = fit_ar(&values, order)?;
        columns.push(forecast(&model, &values, lead)?);
    }
    let last = history.last_date().expect("non-empty history");
    let records = (0..lead)
        .map(|i| WeatherRecord {
            date: last + Duration::days(i as i64 + 1),
            temp_mean: columns[0][i],
            humidity: columns[1][i].clamp(0.0, 100.0),
            precip: columns[2][i].max(0.0),
        })
        .collect();
    Ok(WeatherSeries::new(records, vec![Origin::Forecast; lead]).expect("forecast is contiguous"))
}

//! Logarithmic scoring and the negative-binomial one-step baseline.

use std::io::Write;

use chrono::NaiveDate;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Tolerance on predictive-distribution normalisation.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("predictive distribution sums to {0}, not 1")]
    UnnormalizedDist(f64),
    #[error("need at least {needed} observations, have {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("prediction and observation weeks do not line up")]
    WeekMismatch,
}

/// Probabilities over counts `0..=x_cap`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDist {
    pub probs: Vec<f64>,
}

impl PredictiveDist {
    /// Normalises nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        PredictiveDist {
            probs: weights.into_iter().map(|w| w / total).collect(),
        }
    }

    pub fn x_cap(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, x: u32) -> f64 {
        self.probs.get(x as usize).copied().unwrap_or(0.0)
    }

    pub fn check(&self) -> Result<(), EvalError> {
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > NORM_TOLERANCE || self.probs.iter().any(|&p| p < 0.0) {
            return Err(EvalError::UnnormalizedDist(total));
        }
        Ok(())
    }
}

/// `max(ln p(observed), floor)`; observations beyond the support score the
/// floor.
pub fn log_score(dist: &PredictiveDist, observed: u32, floor: f64) -> Result<f64, EvalError> {
    dist.check()?;
    let p = dist.prob(observed);
    Ok(if p > 0.0 { p.ln().max(floor) } else { floor })
}

/// Discretised Gaussian around a point prediction, truncated to
/// `0..=x_cap`. `sigma = 0` gives a point mass at the rounded prediction.
pub fn bayesian_predictive(predicted: f64, sigma: f64, x_cap: usize) -> PredictiveDist {
    let centre = predicted.max(0.0);
    if sigma <= 0.0 {
        let mut probs = vec![0.0; x_cap + 1];
        probs[(centre.round() as usize).min(x_cap)] = 1.0;
        return PredictiveDist { probs };
    }
    let weights: Vec<f64> = (0..=x_cap)
        .map(|k| (-0.5 * ((k as f64 - centre) / sigma).powi(2)).exp())
        .collect();
    if weights.iter().sum::<f64>() > 0.0 {
        PredictiveDist::from_weights(weights)
    } else {
        bayesian_predictive(predicted, 0.0, x_cap)
    }
}

/// Count model for the baseline. `NegBin` uses
/// `pmf(k) = C(k + r - 1, k) p^r (1 - p)^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NegBinModel {
    NegBin { r: f64, p: f64 },
    Poisson { mean: f64 },
}

impl NegBinModel {
    pub fn ln_pmf(&self, k: u32) -> f64 {
        let kf = k as f64;
        match *self {
            NegBinModel::NegBin { r, p } => {
                ln_gamma(kf + r) - ln_gamma(r) - ln_gamma(kf + 1.0)
                    + r * p.ln()
                    + if k == 0 { 0.0 } else { kf * (1.0 - p).ln() }
            }
            NegBinModel::Poisson { mean } => crate::severity::poisson_ln_pmf(k, mean),
        }
    }

    pub fn pmf(&self, k: u32) -> f64 {
        self.ln_pmf(k).exp()
    }

    pub fn mean(&self) -> f64 {
        match *self {
            NegBinModel::NegBin { r, p } => r * (1.0 - p) / p,
            NegBinModel::Poisson { mean } => mean,
        }
    }

    pub fn log_likelihood(&self, data: &[u32]) -> f64 {
        data.iter().map(|&k| self.ln_pmf(k)).sum()
    }

    /// pmf on `0..=x_cap`, renormalised.
    pub fn truncated(&self, x_cap: usize) -> PredictiveDist {
        PredictiveDist::from_weights((0..=x_cap as u32).map(|k| self.pmf(k)).collect())
    }
}

/// Profile log-likelihood of the dispersion `r` with `p = r / (r + mean)`.
pub fn nb_profile_loglik(data: &[u32], r: f64) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().map(|&k| k as f64).sum::<f64>() / n;
    let p = r / (r + mean);
    NegBinModel::NegBin { r, p }.log_likelihood(data)
}

/// Maximum-likelihood negative binomial. Falls back to Poisson when the
/// sample variance does not exceed the mean.
pub fn fit_negbin(data: &[u32], min_obs: usize) -> Result<NegBinModel, EvalError> {
    if data.len() < min_obs.max(1) {
        return Err(EvalError::TooFewObservations {
            needed: min_obs.max(1),
            got: data.len(),
        });
    }
    let n = data.len() as f64;
    let mean = data.iter().map(|&k| k as f64).sum::<f64>() / n;
    let var = if data.len() > 1 {
        data.iter().map(|&k| (k as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    if var <= mean || mean == 0.0 {
        return Ok(NegBinModel::Poisson { mean });
    }
    // Coarse scan over ln r, then golden-section refinement around the best
    // bracket.
    let f = |ln_r: f64| nb_profile_loglik(data, ln_r.exp());
    let (lo, hi, steps) = (-9.0_f64, 14.0_f64, 230);
    let step = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|i| lo + step * i as f64)
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap();
    let (mut a, mut b) = (best - step, best + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let ln_r = if f(best) > f((a + b) / 2.0) {
        best
    } else {
        (a + b) / 2.0
    };
    let r = ln_r.exp();
    Ok(NegBinModel::NegBin {
        r,
        p: r / (r + mean),
    })
}

/// Fits on the window and returns the truncated pmf for the next week.
pub fn nb_one_step(
    window: &[u32],
    x_cap: usize,
    min_obs: usize,
) -> Result<PredictiveDist, EvalError> {
    Ok(fit_negbin(window, min_obs)?.truncated(x_cap))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeekScore {
    pub week: NaiveDate,
    pub observed: u32,
    pub prob_observed: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub weeks: Vec<WeekScore>,
    /// All weeks.
    pub ts: f64,
    /// Weeks with zero observed cases.
    pub zs: f64,
    /// Weeks with nonzero observed cases.
    pub nzs: f64,
}

/// Per-week log scores and their zero / nonzero split.
pub fn score_run(
    predictions: &[(NaiveDate, PredictiveDist)],
    observations: &[(NaiveDate, u32)],
    floor: f64,
) -> Result<ScoreReport, EvalError> {
    if predictions.len() != observations.len()
        || predictions
            .iter()
            .zip(observations)
            .any(|(p, o)| p.0 != o.0)
    {
        return Err(EvalError::WeekMismatch);
    }
    let mut report = ScoreReport {
        weeks: Vec::with_capacity(predictions.len()),
        ts: 0.0,
        zs: 0.0,
        nzs: 0.0,
    };
    for ((week, dist), &(_, observed)) in predictions.iter().zip(observations) {
        let score = log_score(dist, observed, floor)?;
        if observed == 0 {
            report.zs += score;
        } else {
            report.nzs += score;
        }
        report.weeks.push(WeekScore {
            week: *week,
            observed,
            prob_observed: dist.prob(observed),
            score,
        });
    }
    report.ts = report.zs + report.nzs;
    Ok(report)
}

impl ScoreReport {
    /// Rows `week,observed,model,prob_observed,score` (no header).
    pub fn write_rows<W: Write>(&self, mut w: W, model: &str) -> std::io::Result<()> {
        for s in &self.weeks {
            writeln!(
                w,
                "{},{},{model},{},{}",
                s.week, s.observed, s.prob_observed, s.score
            )?;
        }
        Ok(())
    }
}

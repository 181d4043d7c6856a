//! Closed-form basic reproduction number.
//!
//! `R0 = sqrt(R0_bird * R0_mosquito)` where each factor is a transmission
//! rate times a susceptible count, times the probability of surviving the
//! exposed phase (an exponential race), times the mean infectious duration.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum R0Error {
    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),
}

/// Rates (per day) and susceptible counts entering the reproduction number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct R0Inputs {
    pub beta_bird_to_mosquito: f64,
    pub bird_incubation: f64,
    pub bird_mortality: f64,
    pub bird_recovery: f64,
    pub bird_wnd_mortality: f64,
    pub beta_mosquito_to_bird: f64,
    pub pdr: f64,
    pub mosquito_mortality: f64,
    pub susceptible_mosquitoes: f64,
    pub susceptible_birds: f64,
}

/// Probability that an exponential progression clock fires before an
/// exponential death clock.
pub fn exposed_survival(progress_rate: f64, death_rate: f64) -> Result<f64, R0Error> {
    let total = progress_rate + death_rate;
    if total <= 0.0 {
        return Err(R0Error::ZeroDenominator("exposed_survival"));
    }
    Ok(progress_rate / total)
}

/// Bird-side factor: `beta_BM * M_S * delta_B / ((delta_B + mu_B)(lambda_B + mu_WND + mu_B))`.
pub fn r0_bird(i: &R0Inputs) -> Result<f64, R0Error> {
    let exposed = i.bird_incubation + i.bird_mortality;
    let infectious = i.bird_recovery + i.bird_wnd_mortality + i.bird_mortality;
    if exposed <= 0.0 || infectious <= 0.0 {
        return Err(R0Error::ZeroDenominator("r0_bird"));
    }
    Ok(
        i.beta_bird_to_mosquito * i.susceptible_mosquitoes * i.bird_incubation
            / (exposed * infectious),
    )
}

/// Mosquito-side factor: `beta_MB * B_S * PDR / (mu_M (PDR + mu_M))`.
pub fn r0_mosquito(i: &R0Inputs) -> Result<f64, R0Error> {
    let mu = i.mosquito_mortality;
    if mu <= 0.0 || i.pdr + mu <= 0.0 {
        return Err(R0Error::ZeroDenominator("r0_mosquito"));
    }
    Ok(i.beta_mosquito_to_bird * i.susceptible_birds * i.pdr / (mu * (i.pdr + mu)))
}

pub fn r0(i: &R0Inputs) -> Result<f64, R0Error> {
    let product = r0_bird(i)? * r0_mosquito(i)?;
    Ok(if product > 0.0 { product.sqrt() } else { 0.0 })
}

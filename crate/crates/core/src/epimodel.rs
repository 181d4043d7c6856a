//! Temperature-driven compartmental model for mosquitoes, birds and humans.
//!
//! Mosquitoes follow an egg -> aquatic -> adult chain whose aquatic
//! recruitment is capped logistically by the carrying capacity `K`. Adults
//! and adult birds run an SEI / SEIR infection cycle coupled by
//! frequency-dependent biting; humans are a dead-end SEIR population that is
//! infected by mosquitoes but never transmits.
//!
//! Integration is fixed-step RK4 (24 steps per day by default) with the
//! day's weather held constant over the day.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use thiserror::Error;

use crate::ingest::WeatherSeries;
use crate::r0::{self, R0Error, R0Inputs};

/// Any compartment above this size aborts a run.
pub const BLOW_UP_LIMIT: f64 = 1e12;

pub const DEFAULT_STEPS_PER_DAY: usize = 24;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite model input: {0}")]
    NonFiniteInput(&'static str),
    #[error("carrying-capacity series has {k} values but weather has {weather} days")]
    LengthMismatch { weather: usize, k: usize },
    #[error("compartment {compartment} exceeded {limit:e} on {date}")]
    BlowUp {
        date: NaiveDate,
        compartment: &'static str,
        limit: f64,
    },
    #[error("steps per day must be positive")]
    ZeroSteps,
    #[error(transparent)]
    R0(#[from] R0Error),
}

#[derive(Debug, Error)]
#[error("invalid rate specification `{spec}`: {reason}")]
pub struct RateParseError {
    spec: String,
    reason: String,
}

/// Thermal response of a biological rate. Evaluation never goes below zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalCurve {
    /// `c * T * (T - t_min) * sqrt(t_max - T)` on `[t_min, t_max]`, zero elsewhere.
    Briere {
        c: f64,
        t_min: f64,
        t_max: f64,
    },
    /// `-c * (T - t_min) * (T - t_max)`, clamped at zero.
    Quadratic {
        c: f64,
        t_min: f64,
        t_max: f64,
    },
    Constant(f64),
}

impl ThermalCurve {
    pub fn eval(&self, temp: f64) -> f64 {
        match *self {
            ThermalCurve::Briere { c, t_min, t_max } => {
                if temp < t_min || temp > t_max {
                    0.0
                } else {
                    (c * temp * (temp - t_min) * (t_max - temp).max(0.0).sqrt()).max(0.0)
                }
            }
            ThermalCurve::Quadratic { c, t_min, t_max } => {
                (-c * (temp - t_min) * (temp - t_max)).max(0.0)
            }
            ThermalCurve::Constant(v) => v.max(0.0),
        }
    }

    fn coefficients(&self) -> Vec<f64> {
        match *self {
            ThermalCurve::Briere { c, t_min, t_max }
            | ThermalCurve::Quadratic { c, t_min, t_max } => vec![c, t_min, t_max],
            ThermalCurve::Constant(v) => vec![v],
        }
    }

    fn is_finite(&self) -> bool {
        self.coefficients().iter().all(|c| c.is_finite())
    }
}

impl fmt::Display for ThermalCurve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ThermalCurve::Briere { c, t_min, t_max } => write!(f, "briere {c} {t_min} {t_max}"),
            ThermalCurve::Quadratic { c, t_min, t_max } => {
                write!(f, "quadratic {c} {t_min} {t_max}")
            }
            ThermalCurve::Constant(v) => write!(f, "constant {v}"),
        }
    }
}

/// A model rate: either a thermal curve read directly, or the reciprocal of
/// a thermal lifespan curve (mortality from survival-type data).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Direct(ThermalCurve),
    Lifespan { curve: ThermalCurve, min_days: f64 },
}

impl Rate {
    pub const fn constant(v: f64) -> Self {
        Rate::Direct(ThermalCurve::Constant(v))
    }

    pub fn eval(&self, temp: f64) -> f64 {
        match self {
            Rate::Direct(curve) => curve.eval(temp),
            Rate::Lifespan { curve, min_days } => 1.0 / curve.eval(temp).max(*min_days),
        }
    }

    pub fn is_valid(&self) -> bool {
        match self {
            Rate::Direct(c) => c.is_finite() && c.coefficients()[0] >= 0.0,
            Rate::Lifespan { curve, min_days } => {
                curve.is_finite() && min_days.is_finite() && *min_days > 0.0
            }
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rate::Direct(c) => write!(f, "{c}"),
            Rate::Lifespan { curve, min_days } => write!(f, "lifespan {curve} {min_days}"),
        }
    }
}

impl FromStr for Rate {
    type Err = RateParseError;

    /// Accepts `briere c t_min t_max`, `quadratic c t_min t_max`,
    /// `constant v`, a bare number, or any of the curves prefixed with
    /// `lifespan` and optionally followed by a minimum lifespan in days.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| RateParseError {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let mut tokens: Vec<&str> = s.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(err("empty"));
        }
        let lifespan = tokens[0].eq_ignore_ascii_case("lifespan");
        if lifespan {
            tokens.remove(0);
        }
        let nums = |t: &[&str]| -> Result<Vec<f64>, RateParseError> {
            t.iter()
                .map(|x| x.parse::<f64>().map_err(|_| err("expected a number")))
                .collect()
        };
        let (curve, rest) = match tokens.first().map(|t| t.to_ascii_lowercase()).as_deref() {
            Some("briere") | Some("quadratic") => {
                if tokens.len() < 4 {
                    return Err(err("curve needs c, t_min, t_max"));
                }
                let v = nums(&tokens[1..4])?;
                let curve = if tokens[0].eq_ignore_ascii_case("briere") {
                    ThermalCurve::Briere {
                        c: v[0],
                        t_min: v[1],
                        t_max: v[2],
                    }
                } else {
                    ThermalCurve::Quadratic {
                        c: v[0],
                        t_min: v[1],
                        t_max: v[2],
                    }
                };
                (curve, &tokens[4..])
            }
            Some("constant") => {
                if tokens.len() < 2 {
                    return Err(err("constant needs a value"));
                }
                (
                    ThermalCurve::Constant(nums(&tokens[1..2])?[0]),
                    &tokens[2..],
                )
            }
            _ => (ThermalCurve::Constant(nums(&tokens[..1])?[0]), &tokens[1..]),
        };
        if lifespan {
            let min_days = match rest {
                [] => 1.0,
                [m] => nums(&[m])?[0],
                _ => return Err(err("trailing tokens")),
            };
            Ok(Rate::Lifespan { curve, min_days })
        } else if rest.is_empty() {
            Ok(Rate::Direct(curve))
        } else {
            Err(err("trailing tokens"))
        }
    }
}

/// All model rates, per day unless noted.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Eggs laid per adult mosquito per day.
    pub egg_laying: Rate,
    pub egg_hatching: Rate,
    /// Aquatic (larva/pupa) to adult development.
    pub aquatic_development: Rate,
    /// Mortality of eggs and aquatic stages.
    pub aquatic_mortality: Rate,
    pub adult_mortality: Rate,
    /// Pathogen development rate (extrinsic incubation) in mosquitoes.
    pub pdr: Rate,
    pub beta_bird_to_mosquito: Rate,
    pub beta_mosquito_to_bird: Rate,
    pub beta_mosquito_to_human: Rate,
    pub bird_egg_laying: Rate,
    pub bird_hatching: Rate,
    pub bird_fledging: Rate,
    pub bird_mortality: Rate,
    pub bird_incubation: Rate,
    pub bird_recovery: Rate,
    pub bird_wnd_mortality: Rate,
    pub human_incubation: Rate,
    pub human_recovery: Rate,
    /// Fraction of human infections that are reported, in (0, 1].
    pub reporting_fraction: f64,
}

const BIRD_MORTALITY: f64 = 1.0 / 730.0;
const BIRD_HATCHING: f64 = 1.0 / 14.0;
const BIRD_FLEDGING: f64 = 1.0 / 30.0;

impl Default for ModelParams {
    fn default() -> Self {
        // Bird egg laying balances natural mortality through the egg and
        // fledgling stages so the disease-free bird population is stationary.
        let m = BIRD_MORTALITY;
        let bird_lay =
            m * (BIRD_HATCHING + m) * (BIRD_FLEDGING + m) / (BIRD_HATCHING * BIRD_FLEDGING);
        ModelParams {
            egg_laying: Rate::Direct(ThermalCurve::Quadratic {
                c: 0.02,
                t_min: 5.0,
                t_max: 38.0,
            }),
            egg_hatching: Rate::constant(0.5),
            aquatic_development: Rate::Direct(ThermalCurve::Briere {
                c: 6.0e-5,
                t_min: 7.0,
                t_max: 38.0,
            }),
            aquatic_mortality: Rate::constant(0.05),
            adult_mortality: Rate::Lifespan {
                curve: ThermalCurve::Quadratic {
                    c: 0.08,
                    t_min: 0.0,
                    t_max: 36.0,
                },
                min_days: 1.0,
            },
            pdr: Rate::Direct(ThermalCurve::Briere {
                c: 7.4e-5,
                t_min: 11.4,
                t_max: 45.2,
            }),
            beta_bird_to_mosquito: Rate::Direct(ThermalCurve::Briere {
                c: 1.0e-4,
                t_min: 9.4,
                t_max: 39.6,
            }),
            beta_mosquito_to_bird: Rate::Direct(ThermalCurve::Briere {
                c: 1.0e-4,
                t_min: 9.4,
                t_max: 39.6,
            }),
            beta_mosquito_to_human: Rate::Direct(ThermalCurve::Briere {
                c: 2.0e-6,
                t_min: 9.4,
                t_max: 39.6,
            }),
            bird_egg_laying: Rate::constant(bird_lay),
            bird_hatching: Rate::constant(BIRD_HATCHING),
            bird_fledging: Rate::constant(BIRD_FLEDGING),
            bird_mortality: Rate::constant(m),
            bird_incubation: Rate::constant(1.0 / 3.0),
            bird_recovery: Rate::constant(0.2),
            bird_wnd_mortality: Rate::constant(0.15),
            human_incubation: Rate::constant(1.0 / 7.0),
            human_recovery: Rate::constant(0.1),
            reporting_fraction: 1.0,
        }
    }
}

impl ModelParams {
    /// Named view of every rate, in config-key order.
    pub fn rates(&self) -> [(&'static str, &Rate); 18] {
        [
            ("egg_laying", &self.egg_laying),
            ("egg_hatching", &self.egg_hatching),
            ("aquatic_development", &self.aquatic_development),
            ("aquatic_mortality", &self.aquatic_mortality),
            ("adult_mortality", &self.adult_mortality),
            ("pdr", &self.pdr),
            ("beta_bird_to_mosquito", &self.beta_bird_to_mosquito),
            ("beta_mosquito_to_bird", &self.beta_mosquito_to_bird),
            ("beta_mosquito_to_human", &self.beta_mosquito_to_human),
            ("bird_egg_laying", &self.bird_egg_laying),
            ("bird_hatching", &self.bird_hatching),
            ("bird_fledging", &self.bird_fledging),
            ("bird_mortality", &self.bird_mortality),
            ("bird_incubation", &self.bird_incubation),
            ("bird_recovery", &self.bird_recovery),
            ("bird_wnd_mortality", &self.bird_wnd_mortality),
            ("human_incubation", &self.human_incubation),
            ("human_recovery", &self.human_recovery),
        ]
    }

    pub fn rate_mut(&mut self, name: &str) -> Option<&mut Rate> {
        Some(match name {
            "egg_laying" => &mut self.egg_laying,
            "egg_hatching" => &mut self.egg_hatching,
            "aquatic_development" => &mut self.aquatic_development,
            "aquatic_mortality" => &mut self.aquatic_mortality,
            "adult_mortality" => &mut self.adult_mortality,
            "pdr" => &mut self.pdr,
            "beta_bird_to_mosquito" => &mut self.beta_bird_to_mosquito,
            "beta_mosquito_to_bird" => &mut self.beta_mosquito_to_bird,
            "beta_mosquito_to_human" => &mut self.beta_mosquito_to_human,
            "bird_egg_laying" => &mut self.bird_egg_laying,
            "bird_hatching" => &mut self.bird_hatching,
            "bird_fledging" => &mut self.bird_fledging,
            "bird_mortality" => &mut self.bird_mortality,
            "bird_incubation" => &mut self.bird_incubation,
            "bird_recovery" => &mut self.bird_recovery,
            "bird_wnd_mortality" => &mut self.bird_wnd_mortality,
            "human_incubation" => &mut self.human_incubation,
            "human_recovery" => &mut self.human_recovery,
            _ => return None,
        })
    }

    pub fn rates_at(&self, temp: f64) -> DailyRates {
        DailyRates {
            egg_laying: self.egg_laying.eval(temp),
            egg_hatching: self.egg_hatching.eval(temp),
            aquatic_development: self.aquatic_development.eval(temp),
            aquatic_mortality: self.aquatic_mortality.eval(temp),
            adult_mortality: self.adult_mortality.eval(temp),
            pdr: self.pdr.eval(temp),
            beta_bird_to_mosquito: self.beta_bird_to_mosquito.eval(temp),
            beta_mosquito_to_bird: self.beta_mosquito_to_bird.eval(temp),
            beta_mosquito_to_human: self.beta_mosquito_to_human.eval(temp),
            bird_egg_laying: self.bird_egg_laying.eval(temp),
            bird_hatching: self.bird_hatching.eval(temp),
            bird_fledging: self.bird_fledging.eval(temp),
            bird_mortality: self.bird_mortality.eval(temp),
            bird_incubation: self.bird_incubation.eval(temp),
            bird_recovery: self.bird_recovery.eval(temp),
            bird_wnd_mortality: self.bird_wnd_mortality.eval(temp),
            human_incubation: self.human_incubation.eval(temp),
            human_recovery: self.human_recovery.eval(temp),
        }
    }
}

/// Rates evaluated at one temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DailyRates {
    pub egg_laying: f64,
    pub egg_hatching: f64,
    pub aquatic_development: f64,
    pub aquatic_mortality: f64,
    pub adult_mortality: f64,
    pub pdr: f64,
    pub beta_bird_to_mosquito: f64,
    pub beta_mosquito_to_bird: f64,
    pub beta_mosquito_to_human: f64,
    pub bird_egg_laying: f64,
    pub bird_hatching: f64,
    pub bird_fledging: f64,
    pub bird_mortality: f64,
    pub bird_incubation: f64,
    pub bird_recovery: f64,
    pub bird_wnd_mortality: f64,
    pub human_incubation: f64,
    pub human_recovery: f64,
}

impl DailyRates {
    /// The reproduction-number inputs for this day's rates and state.
    pub fn r0_inputs(&self, state: &CompartmentState) -> R0Inputs {
        R0Inputs {
            beta_bird_to_mosquito: self.beta_bird_to_mosquito,
            bird_incubation: self.bird_incubation,
            bird_mortality: self.bird_mortality,
            bird_recovery: self.bird_recovery,
            bird_wnd_mortality: self.bird_wnd_mortality,
            beta_mosquito_to_bird: self.beta_mosquito_to_bird,
            pdr: self.pdr,
            mosquito_mortality: self.adult_mortality,
            susceptible_mosquitoes: state.m_s,
            susceptible_birds: state.b_s,
        }
    }
}

pub const N_COMPARTMENTS: usize = 15;

/// Compartment sizes (individuals).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompartmentState {
    pub h_s: f64,
    pub h_e: f64,
    pub h_i: f64,
    pub h_r: f64,
    pub e_m: f64,
    pub a_m: f64,
    pub m_s: f64,
    pub m_e: f64,
    pub m_i: f64,
    pub e_b: f64,
    pub f_b: f64,
    pub b_s: f64,
    pub b_e: f64,
    pub b_i: f64,
    pub b_r: f64,
}

pub const COMPARTMENT_NAMES: [&str; N_COMPARTMENTS] = [
    "H_S", "H_E", "H_I", "H_R", "E_M", "A_M", "M_S", "M_E", "M_I", "E_B", "F_B", "B_S", "B_E",
    "B_I", "B_R",
];

impl CompartmentState {
    pub fn to_array(&self) -> [f64; N_COMPARTMENTS] {
        [
            self.h_s, self.h_e, self.h_i, self.h_r, self.e_m, self.a_m, self.m_s, self.m_e,
            self.m_i, self.e_b, self.f_b, self.b_s, self.b_e, self.b_i, self.b_r,
        ]
    }

    pub fn from_array(a: &[f64]) -> Self {
        CompartmentState {
            h_s: a[0],
            h_e: a[1],
            h_i: a[2],
            h_r: a[3],
            e_m: a[4],
            a_m: a[5],
            m_s: a[6],
            m_e: a[7],
            m_i: a[8],
            e_b: a[9],
            f_b: a[10],
            b_s: a[11],
            b_e: a[12],
            b_i: a[13],
            b_r: a[14],
        }
    }

    pub fn humans(&self) -> f64 {
        self.h_s + self.h_e + self.h_i + self.h_r
    }

    /// Adult mosquitoes, `M = M_S + M_E + M_I`.
    pub fn mosquitoes(&self) -> f64 {
        self.m_s + self.m_e + self.m_i
    }

    pub fn adult_birds(&self) -> f64 {
        self.b_s + self.b_e + self.b_i + self.b_r
    }

    pub fn is_disease_free(&self) -> bool {
        self.h_e == 0.0
            && self.h_i == 0.0
            && self.m_e == 0.0
            && self.m_i == 0.0
            && self.b_e == 0.0
            && self.b_i == 0.0
    }
}

/// Starting populations for a season run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialPopulations {
    pub humans: f64,
    pub birds: f64,
    pub mosquito_eggs: f64,
    pub aquatic: f64,
    pub adult_mosquitoes: f64,
    pub infected_birds: f64,
}

impl Default for InitialPopulations {
    fn default() -> Self {
        InitialPopulations {
            humans: 100_000.0,
            birds: 1_000.0,
            mosquito_eggs: 1_000.0,
            aquatic: 1_000.0,
            adult_mosquitoes: 1_000.0,
            infected_birds: 1.0,
        }
    }
}

impl InitialPopulations {
    pub fn state(&self) -> CompartmentState {
        CompartmentState {
            h_s: self.humans,
            e_m: self.mosquito_eggs,
            a_m: self.aquatic,
            m_s: self.adult_mosquitoes,
            b_s: (self.birds - self.infected_birds).max(0.0),
            b_i: self.infected_birds.min(self.birds),
            ..Default::default()
        }
    }
}

// Integrator state: compartments plus cumulative human incidence.
const N_AUG: usize = N_COMPARTMENTS + 1;
type Aug = [f64; N_AUG];

fn rhs(y: &Aug, r: &DailyRates, k: f64, out: &mut Aug) {
    let [h_s, h_e, h_i, _h_r, e_m, a_m, m_s, m_e, m_i, e_b, f_b, b_s, b_e, b_i, b_r, _] = *y;
    let mosquitoes = m_s + m_e + m_i;
    let birds = b_s + b_e + b_i + b_r;
    let humans = h_s + h_e + h_i + y[3];

    let force_on_mosquitoes = if birds > 0.0 {
        r.beta_bird_to_mosquito * b_i / birds
    } else {
        0.0
    };
    let force_on_birds = if birds > 0.0 {
        r.beta_mosquito_to_bird * m_i / birds
    } else {
        0.0
    };
    let force_on_humans = if humans > 0.0 {
        r.beta_mosquito_to_human * m_i / humans
    } else {
        0.0
    };

    let hatch = r.egg_hatching * e_m;
    let recruitment = if k > 0.0 {
        hatch * (1.0 - a_m / k).max(0.0)
    } else {
        0.0
    };
    let mu_a = r.aquatic_mortality;
    let mu_m = r.adult_mortality;
    let mu_b = r.bird_mortality;

    let mosquito_infection = force_on_mosquitoes * m_s;
    let bird_infection = force_on_birds * b_s;
    let human_infection = force_on_humans * h_s;

    out[0] = -human_infection;
    out[1] = human_infection - r.human_incubation * h_e;
    out[2] = r.human_incubation * h_e - r.human_recovery * h_i;
    out[3] = r.human_recovery * h_i;

    out[4] = r.egg_laying * mosquitoes - (r.egg_hatching + mu_a) * e_m;
    out[5] = recruitment - (r.aquatic_development + mu_a) * a_m;
    out[6] = r.aquatic_development * a_m - mosquito_infection - mu_m * m_s;
    out[7] = mosquito_infection - (r.pdr + mu_m) * m_e;
    out[8] = r.pdr * m_e - mu_m * m_i;

    out[9] = r.bird_egg_laying * birds - (r.bird_hatching + mu_b) * e_b;
    out[10] = r.bird_hatching * e_b - (r.bird_fledging + mu_b) * f_b;
    out[11] = r.bird_fledging * f_b - bird_infection - mu_b * b_s;
    out[12] = bird_infection - (r.bird_incubation + mu_b) * b_e;
    out[13] = r.bird_incubation * b_e - (r.bird_recovery + r.bird_wnd_mortality + mu_b) * b_i;
    out[14] = r.bird_recovery * b_i - mu_b * b_r;

    out[15] = human_infection;
}

fn augment(state: &CompartmentState, cumulative: f64) -> Aug {
    let mut y = [0.0; N_AUG];
    y[..N_COMPARTMENTS].copy_from_slice(&state.to_array());
    y[N_COMPARTMENTS] = cumulative;
    y
}

/// Right-hand side of the ODE system at temperature `temp` and carrying
/// capacity `k`.
pub fn derivatives(
    state: &CompartmentState,
    params: &ModelParams,
    temp: f64,
    k: f64,
) -> Result<CompartmentState, ModelError> {
    if !temp.is_finite() {
        return Err(ModelError::NonFiniteInput("temperature"));
    }
    if !k.is_finite() {
        return Err(ModelError::NonFiniteInput("carrying capacity"));
    }
    if state.to_array().iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput("state"));
    }
    let rates = params.rates_at(temp);
    let mut out = [0.0; N_AUG];
    rhs(&augment(state, 0.0), &rates, k, &mut out);
    Ok(CompartmentState::from_array(&out))
}

/// Expected human infection incidence (per day) at a state.
pub fn human_incidence(state: &CompartmentState, rates: &DailyRates) -> f64 {
    let humans = state.humans();
    if humans > 0.0 {
        rates.beta_mosquito_to_human * state.m_i / humans * state.h_s
    } else {
        0.0
    }
}

fn rk4_step(y: &mut Aug, r: &DailyRates, k: f64, h: f64) {
    let mut k1 = [0.0; N_AUG];
    let mut k2 = [0.0; N_AUG];
    let mut k3 = [0.0; N_AUG];
    let mut k4 = [0.0; N_AUG];
    let mut tmp = [0.0; N_AUG];

    rhs(y, r, k, &mut k1);
    for i in 0..N_AUG {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    rhs(&tmp, r, k, &mut k2);
    for i in 0..N_AUG {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    rhs(&tmp, r, k, &mut k3);
    for i in 0..N_AUG {
        tmp[i] = y[i] + h * k3[i];
    }
    rhs(&tmp, r, k, &mut k4);
    for i in 0..N_AUG {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Daily model output. Entry `i` is the state at the midnight that closes
/// day `i`; incidence on day `i` is the infection flow integrated over it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dates: Vec<NaiveDate>,
    pub states: Vec<CompartmentState>,
    /// Adult mosquito profile `M`.
    pub mosquitoes: Vec<f64>,
    pub r0: Vec<f64>,
    /// Expected new human infections per day.
    pub new_infections: Vec<f64>,
    /// `reporting_fraction * new_infections`.
    pub reported: Vec<f64>,
    /// Number of integration steps in which a compartment was clamped at 0.
    pub clamped_steps: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.dates.first()?;
        let idx = (date - first).num_days();
        if idx < 0 || idx as usize >= self.len() {
            None
        } else {
            Some(idx as usize)
        }
    }

    /// Expected reported cases in the 7 days starting at each week start.
    /// Days outside the trajectory contribute nothing.
    pub fn weekly_reported(&self, week_starts: &[NaiveDate]) -> Vec<f64> {
        let Some(&first) = self.dates.first() else {
            return vec![0.0; week_starts.len()];
        };
        week_starts
            .iter()
            .map(|ws| {
                let start = (*ws - first).num_days();
                (start..start + 7)
                    .filter(|&d| d >= 0 && (d as usize) < self.len())
                    .map(|d| self.reported[d as usize])
                    .sum()
            })
            .collect()
    }

    pub fn last_state(&self) -> Option<&CompartmentState> {
        self.states.last()
    }

    /// Appends `other`, which must start the day after `self` ends.
    pub fn extend(&mut self, other: Trajectory) {
        self.dates.extend(other.dates);
        self.states.extend(other.states);
        self.mosquitoes.extend(other.mosquitoes);
        self.r0.extend(other.r0);
        self.new_infections.extend(other.new_infections);
        self.reported.extend(other.reported);
        self.clamped_steps += other.clamped_steps;
    }

    /// CSV with `date,M,R0,H_new_cases` followed by one column per compartment.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "date,M,R0,H_new_cases")?;
        for name in COMPARTMENT_NAMES {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(
                w,
                "{},{},{},{}",
                self.dates[i], self.mosquitoes[i], self.r0[i], self.reported[i]
            )?;
            for v in self.states[i].to_array() {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

pub fn simulate(
    params: &ModelParams,
    weather: &WeatherSeries,
    k_series: &[f64],
    init: &CompartmentState,
) -> Result<Trajectory, ModelError> {
    simulate_with_steps(params, weather, k_series, init, DEFAULT_STEPS_PER_DAY)
}

/// Fixed-step RK4 over the weather days. Temperature and `K` are held
/// constant within each day.
pub fn simulate_with_steps(
    params: &ModelParams,
    weather: &WeatherSeries,
    k_series: &[f64],
    init: &CompartmentState,
    steps_per_day: usize,
) -> Result<Trajectory, ModelError> {
    if steps_per_day == 0 {
        return Err(ModelError::ZeroSteps);
    }
    if k_series.len() != weather.len() {
        return Err(ModelError::LengthMismatch {
            weather: weather.len(),
            k: k_series.len(),
        });
    }
    if init.to_array().iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput("initial state"));
    }

    let n = weather.len();
    let h = 1.0 / steps_per_day as f64;
    let mut traj = Trajectory {
        dates: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
        mosquitoes: Vec::with_capacity(n),
        r0: Vec::with_capacity(n),
        new_infections: Vec::with_capacity(n),
        reported: Vec::with_capacity(n),
        clamped_steps: 0,
    };
    let mut y = augment(init, 0.0);
    for (rec, &k) in weather.records().iter().zip(k_series) {
        if !rec.temp_mean.is_finite() {
            return Err(ModelError::NonFiniteInput("temperature"));
        }
        if !k.is_finite() {
            return Err(ModelError::NonFiniteInput("carrying capacity"));
        }
        let rates = params.rates_at(rec.temp_mean);
        let before = y[N_COMPARTMENTS];
        for _ in 0..steps_per_day {
            rk4_step(&mut y, &rates, k, h);
            let mut clamped = false;
            for v in y.iter_mut().take(N_COMPARTMENTS) {
                if *v < 0.0 {
                    *v = 0.0;
                    clamped = true;
                }
            }
            if clamped {
                traj.clamped_steps += 1;
            }
        }
        for (i, v) in y.iter().take(N_COMPARTMENTS).enumerate() {
            if !v.is_finite() || *v > BLOW_UP_LIMIT {
                return Err(ModelError::BlowUp {
                    date: rec.date,
                    compartment: COMPARTMENT_NAMES[i],
                    limit: BLOW_UP_LIMIT,
                });
            }
        }
        let state = CompartmentState::from_array(&y[..N_COMPARTMENTS]);
        let infections = (y[N_COMPARTMENTS] - before).max(0.0);
        traj.dates.push(rec.date);
        traj.mosquitoes.push(state.mosquitoes());
        traj.r0.push(r0::r0(&rates.r0_inputs(&state))?);
        traj.new_infections.push(infections);
        traj.reported.push(params.reporting_fraction * infections);
        traj.states.push(state);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::WeatherSeries;
    use chrono::NaiveDate;

    fn start() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
    }

    #[test]
    fn briere_is_zero_at_lower_limit() {
        let c = ThermalCurve::Briere {
            c: 1.0,
            t_min: 10.0,
            t_max: 35.0,
        };
        assert_eq!(c.eval(10.0), 0.0);
    }

    #[test]
    fn quadratic_midpoint() {
        let c = ThermalCurve::Quadratic {
            c: 1.0,
            t_min: 10.0,
            t_max: 30.0,
        };
        assert_eq!(c.eval(20.0), 100.0);
        assert_eq!(c.eval(5.0), 0.0);
    }

    #[test]
    fn briere_beyond_upper_limit() {
        let c = ThermalCurve::Briere {
            c: 2e-4,
            t_min: 9.4,
            t_max: 39.6,
        };
        assert_eq!(c.eval(45.0), 0.0);
        assert_eq!(c.eval(39.6), 0.0);
        assert!(c.eval(25.0) > 0.0);
    }

    #[test]
    fn rate_parsing() {
        assert_eq!(
            "briere 2e-4 9.4 39.6".parse::<Rate>().unwrap(),
            Rate::Direct(ThermalCurve::Briere {
                c: 2e-4,
                t_min: 9.4,
                t_max: 39.6
            })
        );
        assert_eq!("0.25".parse::<Rate>().unwrap(), Rate::constant(0.25));
        assert_eq!(
            "lifespan quadratic 0.08 0 36 2".parse::<Rate>().unwrap(),
            Rate::Lifespan {
                curve: ThermalCurve::Quadratic {
                    c: 0.08,
                    t_min: 0.0,
                    t_max: 36.0
                },
                min_days: 2.0
            }
        );
        assert!("briere 1 2".parse::<Rate>().is_err());
        assert!("wobble 1".parse::<Rate>().is_err());
        let r = ModelParams::default().adult_mortality;
        assert_eq!(r.to_string().parse::<Rate>().unwrap(), r);
    }

    #[test]
    fn lifespan_rate_is_reciprocal_with_floor() {
        let r = Rate::Lifespan {
            curve: ThermalCurve::Quadratic {
                c: 0.08,
                t_min: 0.0,
                t_max: 36.0,
            },
            min_days: 1.0,
        };
        assert!((r.eval(25.0) - 1.0 / 22.0).abs() < 1e-12);
        assert_eq!(r.eval(-5.0), 1.0);
    }

    fn infected_state() -> CompartmentState {
        CompartmentState {
            h_s: 1000.0,
            h_e: 3.0,
            h_i: 2.0,
            h_r: 1.0,
            e_m: 500.0,
            a_m: 400.0,
            m_s: 900.0,
            m_e: 30.0,
            m_i: 20.0,
            e_b: 10.0,
            f_b: 10.0,
            b_s: 100.0,
            b_e: 5.0,
            b_i: 4.0,
            b_r: 2.0,
        }
    }

    #[test]
    fn disease_free_state_has_no_infection_flow() {
        let mut s = infected_state();
        s.m_e = 0.0;
        s.m_i = 0.0;
        s.b_e = 0.0;
        s.b_i = 0.0;
        s.h_e = 0.0;
        s.h_i = 0.0;
        let d = derivatives(&s, &ModelParams::default(), 25.0, 1000.0).unwrap();
        assert_eq!(d.m_e, 0.0);
        assert_eq!(d.m_i, 0.0);
        assert_eq!(d.b_e, 0.0);
        assert_eq!(d.b_i, 0.0);
        assert_eq!(d.h_e, 0.0);
        assert_eq!(d.h_i, 0.0);
        assert_eq!(d.h_s, 0.0);
    }

    #[test]
    fn human_derivatives_sum_to_zero() {
        let s = infected_state();
        for t in [5.0, 15.0, 25.0, 33.0] {
            let d = derivatives(&s, &ModelParams::default(), t, 1000.0).unwrap();
            let sum = d.h_s + d.h_e + d.h_i + d.h_r;
            assert!(sum.abs() < 1e-12, "{sum}");
        }
    }

    #[test]
    fn saturated_aquatic_stage_has_no_recruitment() {
        let s = infected_state();
        let p = ModelParams::default();
        let r = p.rates_at(25.0);
        let d = derivatives(&s, &p, 25.0, s.a_m).unwrap();
        let expected = -(r.aquatic_development + r.aquatic_mortality) * s.a_m;
        assert!((d.a_m - expected).abs() < 1e-9);
    }

    #[test]
    fn non_finite_inputs_are_rejected() {
        let p = ModelParams::default();
        let s = infected_state();
        assert!(matches!(
            derivatives(&s, &p, f64::NAN, 1.0),
            Err(ModelError::NonFiniteInput(_))
        ));
        let mut bad = s;
        bad.m_s = f64::INFINITY;
        assert!(derivatives(&bad, &p, 20.0, 1.0).is_err());
    }

    #[test]
    fn simulate_rejects_misaligned_capacity() {
        let w = WeatherSeries::from_temperatures(start(), &[20.0; 10]);
        let init = InitialPopulations::default().state();
        let err = simulate(&ModelParams::default(), &w, &[1000.0; 9], &init).unwrap_err();
        assert!(matches!(err, ModelError::LengthMismatch { .. }));
    }

    #[test]
    fn disease_free_run_stays_disease_free() {
        let temps: Vec<f64> = (0..200)
            .map(|d| 18.0 + 8.0 * (d as f64 / 30.0).sin())
            .collect();
        let w = WeatherSeries::from_temperatures(start(), &temps);
        let init = InitialPopulations {
            infected_birds: 0.0,
            ..Default::default()
        };
        let traj = simulate(
            &ModelParams::default(),
            &w,
            &vec![5000.0; 200],
            &init.state(),
        )
        .unwrap();
        assert!(traj.states.iter().all(|s| s.is_disease_free()));
        assert!(traj.new_infections.iter().all(|&x| x == 0.0));
        assert_eq!(traj.len(), 200);
    }

    #[test]
    fn blow_up_is_reported() {
        let p = ModelParams {
            egg_laying: Rate::constant(1e9),
            egg_hatching: Rate::constant(0.0),
            ..Default::default()
        };
        let w = WeatherSeries::from_temperatures(start(), &[25.0; 30]);
        let err = simulate(
            &p,
            &w,
            &[1000.0; 30],
            &InitialPopulations::default().state(),
        );
        assert!(matches!(err, Err(ModelError::BlowUp { .. })));
    }

    #[test]
    fn trajectory_csv_has_one_row_per_day() {
        let w = WeatherSeries::from_temperatures(start(), &[22.0; 5]);
        let traj = simulate(
            &ModelParams::default(),
            &w,
            &[1000.0; 5],
            &InitialPopulations::default().state(),
        )
        .unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].starts_with("date,M,R0,H_new_cases,H_S"));
    }
}

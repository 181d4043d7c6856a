//! West Nile virus spillover forecasting: a temperature-driven
//! mosquito-bird-human model, onset-risk densities over `(M, R0)`, Poisson
//! severity posteriors, forecast scoring and warming-trend analysis.

pub mod artifact;
pub mod carrycap;
pub mod epimodel;
pub mod eval;
pub mod grid;
pub mod ingest;
pub mod onset;
pub mod pipeline;
pub mod r0;
pub mod severity;
pub mod synthetic;
pub mod trend;
pub mod weathercast;

//! Experiment driver for zeros of P(φ)₂ random polynomials: configuration,
//! resumable pipelines, file formats and plots on top of `pphi-core`.

pub mod config;
pub mod io;
pub mod pipeline;
pub mod plot;

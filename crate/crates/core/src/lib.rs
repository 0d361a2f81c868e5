//! Hypoxemia severity triage toolkit.
//!
//! The crate covers the full offline workflow: NEWS2+ scoring and severity
//! labels ([`scoring`]), cleaning and minute-grid interpolation with
//! synthetic-data masks ([`pipeline`]), chained-equations imputation
//! ([`impute`]), a histogram gradient-boosted tree learner ([`gbdt`]),
//! dataset assembly for five-minutes-ahead prediction ([`dataset`]),
//! multiclass evaluation ([`metrics`]) and exploratory analysis
//! ([`analysis`]). [`synth`] generates patient data with the same schema
//! as the expected CSV input.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod gbdt;
pub mod impute;
pub mod metrics;
pub mod pipeline;
pub mod scoring;
pub mod synth;

pub use error::{Error, Result};

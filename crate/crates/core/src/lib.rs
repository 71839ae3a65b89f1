//! Performance-portability metrics.
//!
//! Computes application and architectural efficiencies under explicit
//! baseline policies, turns them into portability scores, audits the
//! scores against the metric criteria, and keeps an append-only
//! repository of measurements whose scores update as data arrives.

pub mod audit;
pub mod cli;
pub mod efficiency;
pub mod fixtures;
pub mod input;
pub mod metrics;
pub mod model;
pub mod render;
pub mod service;
pub mod store;

pub use efficiency::{
    application_efficiency, architectural_efficiency, best_measurement, resolve_baseline,
    roofline_peak, BaselineValue, EfficiencyError,
};
pub use metrics::{pbar, pp_harmonic, score_study, MetricOutcome, ScoreError};
pub use model::*;

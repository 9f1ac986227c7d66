//! Stochastic road-capacity estimation from censored traffic-flow records,
//! and Monte Carlo studies of how reliable those estimates are for a given
//! number of recorded breakdowns.

pub mod capacity;
pub mod cli;
pub mod error;
pub mod io;
pub mod metrics;
pub mod mle;
pub mod optimize;
pub mod plot;
pub mod regression;
pub mod study;
pub mod synthetic;

pub use capacity::{IntensityLevel, WeibullCapacity};
pub use error::{Error, Result, Unidentifiable};
pub use metrics::{CurvePair, MetricReport};
pub use mle::{fit, grid_search, log_likelihood, predicted_breakdowns, CensoredHistogram, EstimateResult, FitOptions};
pub use regression::{FittedModel, RegressionObservation, Variable};
pub use study::{run_study, RunRecord, StudyConfig, StudyResults};
pub use synthetic::{CalibrationSpec, IntensityProfile, PseudoEmpiricalDataset};

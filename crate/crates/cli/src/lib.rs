//! Experiment harness around `mixbayes-core`: the four benchmark truths,
//! seeded replicate runs of every estimator, posterior-of-`k` tables and rate
//! curves, all written as CSV.

pub mod error;
pub mod experiment;
pub mod kexp;
pub mod rates;
pub mod seeds;

pub use error::{CliError, Result};
pub use experiment::{builtin_truth, run_experiment, Case, ExperimentPlan, Method, ResultRow};
pub use kexp::{run_k_experiment, KExperimentPlan, KRow};
pub use rates::{rates_table, RatesRow};
pub use seeds::cell_seed;

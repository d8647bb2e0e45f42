//! Bayesian estimation of finite Gaussian location mixtures with an unknown
//! number of components.
//!
//! The crate covers the mixing-distribution model ([`mixture`]), distances
//! between mixing distributions and their densities ([`metrics`]), moment
//! machinery including the median-of-batches Hermite-denoised estimator
//! ([`moments`]), priors on the number of components and their rate
//! calculators ([`priors`]), and posterior samplers: reversible-jump MCMC for
//! mixtures of finite mixtures, Neal's auxiliary-variable Gibbs sampler for
//! Dirichlet process mixtures and EM for MAP estimation ([`samplers`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod metrics;
pub mod mixture;
pub mod moments;
pub mod priors;
pub mod quadrature;
pub mod samplers;

pub use error::{Error, Result};
pub use metrics::{wasserstein, TransportPlan};
pub use mixture::{AtomicMixture, Dataset, GaussianMixtureDensity, SeparationSpec, DEFAULT_L};
pub use priors::{DpPriorSpec, KFamily, PriorSpec, Schedule};
pub use samplers::{PosteriorSummary, PosteriorTrace, SamplerConfig, TraceState};

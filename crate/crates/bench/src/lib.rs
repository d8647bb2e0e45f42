//! Shared fixtures for the benchmarks.

use mixbayes_core::mixture::sample;
use mixbayes_core::AtomicMixture;

/// The well-separated four-atom truth.
pub fn case1() -> AtomicMixture {
    AtomicMixture::uniform(vec![-3.0, -1.0, 1.0, 3.0]).unwrap()
}

pub fn case1_data(n: usize) -> Vec<f64> {
    sample(&case1(), n, 1).unwrap().observations
}

//! EM for the MAP mixing measure under a symmetric Dirichlet weight prior and a
//! uniform atom prior on `[-L, L]`.

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mixture::{AtomicMixture, GaussianMixtureDensity};
use crate::priors::PriorSpec;

const WEIGHT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub mixture: AtomicMixture,
    /// Log-posterior (up to a constant) at the start and after every iteration.
    pub log_posterior: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Some component lost (almost) all responsibility and its weight was floored.
    pub floored: bool,
}

impl EmFit {
    pub fn final_log_posterior(&self) -> f64 {
        *self.log_posterior.last().expect("trace holds the initial value")
    }
}

/// Log-likelihood plus the log Dirichlet(`dirichlet`) weight density, dropping constants.
pub fn em_log_posterior(data: &[f64], mixture: &AtomicMixture, dirichlet: f64) -> f64 {
    let density = GaussianMixtureDensity::new(mixture.clone());
    let loglik: f64 = data.iter().map(|&x| density.ln_density(x)).sum();
    loglik + (dirichlet - 1.0) * mixture.weights().iter().map(|w| w.ln()).sum::<f64>()
}

/// EM ascent from `init` with `k = init.len()` components. Stops when an
/// iteration gains less than `tol` or after `max_iter` iterations.
pub fn em_map(data: &[f64], prior: &PriorSpec, init: &AtomicMixture, max_iter: usize, tol: f64) -> Result<EmFit> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    let bound = prior.bound;
    let c = prior.dirichlet;
    let k = init.len();
    let n = data.len() as f64;
    let mut atoms: Vec<f64> = init.atoms().iter().map(|a| a.clamp(-bound, bound)).collect();
    let mut weights: Vec<f64> = init.weights().iter().map(|w| w.max(WEIGHT_FLOOR)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut mixture = AtomicMixture::new(atoms.clone(), weights.clone())?;
    let mut trace = vec![em_log_posterior(data, &mixture, c)];
    let mut floored = false;
    let mut converged = false;
    let mut iterations = 0;
    let mut logr = vec![0.0; k];
    while iterations < max_iter {
        iterations += 1;
        let mut mass = vec![0.0; k];
        let mut first = vec![0.0; k];
        for &x in data {
            let mut max = f64::NEG_INFINITY;
            for j in 0..k {
                logr[j] = weights[j].ln() - 0.5 * (x - atoms[j]).powi(2);
                max = max.max(logr[j]);
            }
            let s: f64 = logr.iter().map(|l| (l - max).exp()).sum();
            for j in 0..k {
                let r = (logr[j] - max).exp() / s;
                mass[j] += r;
                first[j] += r * x;
            }
        }
        let denom = n + k as f64 * (c - 1.0);
        for j in 0..k {
            let w = (mass[j] + c - 1.0) / denom;
            if w < WEIGHT_FLOOR || mass[j] < WEIGHT_FLOOR {
                floored = true;
            }
            weights[j] = w.max(WEIGHT_FLOOR);
            if mass[j] >= WEIGHT_FLOOR {
                atoms[j] = (first[j] / mass[j]).clamp(-bound, bound);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        mixture = AtomicMixture::new(atoms.clone(), weights.clone())?;
        let lp = em_log_posterior(data, &mixture, c);
        let gain = lp - trace.last().unwrap();
        trace.push(lp);
        if gain < tol {
            converged = true;
            break;
        }
    }
    Ok(EmFit {
        mixture,
        log_posterior: trace,
        iterations,
        converged,
        floored,
    })
}

/// Random initialization: `k` distinct observations (clipped) with equal weights.
pub fn random_init<R: Rng>(data: &[f64], k: usize, bound: f64, rng: &mut R) -> Result<AtomicMixture> {
    if data.is_empty() {
        return Err(Error::EmptySample);
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let atoms: Vec<f64> = if data.len() >= k {
        index::sample(rng, data.len(), k).iter().map(|i| data[i]).collect()
    } else {
        (0..k).map(|_| data[rng.random_range(0..data.len())]).collect()
    };
    AtomicMixture::uniform(atoms.into_iter().map(|a| a.clamp(-bound, bound)).collect())
}

/// Runs [`em_map`] from `restarts` random initializations and keeps the fit with
/// the highest final log-posterior.
pub fn em_map_restarts<R: Rng>(
    data: &[f64],
    k: usize,
    prior: &PriorSpec,
    restarts: usize,
    max_iter: usize,
    tol: f64,
    rng: &mut R,
) -> Result<EmFit> {
    let mut best: Option<EmFit> = None;
    for _ in 0..restarts.max(1) {
        let init = random_init(data, k, prior.bound, rng)?;
        let fit = em_map(data, prior, &init, max_iter, tol)?;
        if best.as_ref().is_none_or(|b| fit.final_log_posterior() > b.final_log_posterior()) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

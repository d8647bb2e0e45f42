//! Moments of mixing distributions, Hermite denoising of empirical moments, the
//! median-of-batches moment estimator and moment-based reconstruction of a
//! `k`-atomic mixing distribution.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::{kahan_sum, AtomicMixture, Dataset};

/// Largest Hermite order whose coefficients are evaluated without overflow concerns.
pub const MAX_HERMITE_ORDER: usize = 40;

const MIN_HANKEL_EIG: f64 = 1e-10;

/// `(m_1, ..., m_r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentVector {
    pub order: usize,
    pub values: Vec<f64>,
}

impl MomentVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            order: values.len(),
            values,
        }
    }

    /// `m_h` for `h` in `0..=order`, with `m_0 = 1`.
    pub fn get(&self, h: usize) -> f64 {
        if h == 0 {
            1.0
        } else {
            self.values[h - 1]
        }
    }

    /// Smallest eigenvalue of the Hankel matrix `[m_{i+j}]` on `(1, m_1, ..., m_{2s})`
    /// with `s = floor(order / 2)`.
    pub fn hankel_min_eigenvalue(&self) -> f64 {
        let s = self.order / 2;
        let h = DMatrix::from_fn(s + 1, s + 1, |i, j| self.get(i + j));
        SymmetricEigen::new(h).eigenvalues.min()
    }
}

/// `m_h(nu) = sum_j w_j theta_j^h` for `h = 1..=r`.
pub fn moment_vector(nu: &AtomicMixture, r: usize) -> MomentVector {
    let values = (1..=r as i32)
        .map(|h| kahan_sum(nu.iter().map(|(a, w)| w * a.powi(h))))
        .collect();
    MomentVector::new(values)
}

/// Coefficients `c_a = h! (-1/2)^a / (a! (h-2a)!)` for `a = 0..=h/2`, multiplying `x^(h-2a)`.
pub fn hermite_coefficients(h: usize) -> Result<Vec<f64>> {
    if h > MAX_HERMITE_ORDER {
        return Err(Error::HermiteOrder(h));
    }
    let fact = |n: usize| (1..=n).fold(1.0_f64, |p, i| p * i as f64);
    Ok((0..=h / 2)
        .map(|a| fact(h) * (-0.5_f64).powi(a as i32) / (fact(a) * fact(h - 2 * a)))
        .collect())
}

/// Probabilists' Hermite polynomial `He_h(x)`.
pub fn hermite(h: usize, x: f64) -> Result<f64> {
    let coef = hermite_coefficients(h)?;
    Ok(coef
        .iter()
        .enumerate()
        .map(|(a, c)| c * x.powi((h - 2 * a) as i32))
        .sum())
}

/// Raw batch moments pushed through the Hermite transform, so that each output
/// coordinate is an unbiased estimate of the corresponding mixing moment.
pub fn denoised_batch_moments(batch: &[f64], r: usize) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = batch.len() as f64;
    let mut raw = vec![1.0; r + 1];
    for (h, slot) in raw.iter_mut().enumerate().skip(1) {
        *slot = kahan_sum(batch.iter().map(|x| x.powi(h as i32))) / n;
    }
    (1..=r)
        .map(|h| {
            let coef = hermite_coefficients(h)?;
            Ok(coef.iter().enumerate().map(|(a, c)| c * raw[h - 2 * a]).sum())
        })
        .collect()
}

/// The median-of-batches denoised moments of order `2k - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenoisedEstimate {
    pub order: usize,
    pub values: Vec<f64>,
    pub batches: usize,
    pub eta: f64,
}

impl DenoisedEstimate {
    pub fn moments(&self) -> MomentVector {
        MomentVector::new(self.values.clone())
    }
}

/// Batch count `min(floor(log(2k / eta)), n)`, never below one.
pub fn batch_count(n: usize, k: usize, eta: f64) -> usize {
    let raw = (2.0 * k as f64 / eta).ln().floor();
    (raw.max(1.0) as usize).min(n).max(1)
}

/// Default confidence parameter `1 / n`.
pub fn default_eta(n: usize) -> f64 {
    1.0 / n.max(2) as f64
}

/// Lower median: the element at index `ceil(N/2) - 1` of the sorted values.
pub fn lower_median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[values.len().div_ceil(2) - 1]
}

/// Splits the sample (in order) into `N` nearly equal batches, the first `n mod N`
/// of which get one extra point, and takes coordinatewise lower medians of the
/// batch-denoised moments.
pub fn median_denoised_estimator(data: &Dataset, k: usize, eta: f64) -> Result<DenoisedEstimate> {
    median_denoised_from_slice(&data.observations, k, eta)
}

pub fn median_denoised_from_slice(xs: &[f64], k: usize, eta: f64) -> Result<DenoisedEstimate> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta = {eta} must lie in (0,1)")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = xs.len();
    let order = 2 * k - 1;
    let batches = batch_count(n, k, eta);
    let per_batch = batch_moments(xs, batches, order)?;
    let values = (0..order)
        .map(|h| {
            let mut col: Vec<f64> = per_batch.iter().map(|m| m[h]).collect();
            lower_median(&mut col)
        })
        .collect();
    Ok(DenoisedEstimate {
        order,
        values,
        batches,
        eta,
    })
}

/// Denoised moments of each batch in the fixed batch layout.
pub fn batch_moments(xs: &[f64], batches: usize, order: usize) -> Result<Vec<Vec<f64>>> {
    let n = xs.len();
    let base = n / batches;
    let extra = n % batches;
    let mut start = 0;
    (0..batches)
        .map(|l| {
            let len = base + usize::from(l < extra);
            let batch = &xs[start..start + len];
            start += len;
            denoised_batch_moments(batch, order)
        })
        .collect()
}

/// Output of [`fit_mixture_from_moments`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFit {
    pub mixture: AtomicMixture,
    /// Ridge added to the Hankel matrix to make it positive definite (0 when none was needed).
    pub ridge: f64,
    /// Set when the input was not an exact moment vector of a `k`-atomic
    /// distribution on `[-L, L]` and the fit is only a nearest feasible one.
    pub flagged: bool,
}

/// Recovers a `k`-atomic distribution on `[-L, L]` from `(m_1, ..., m_{2k-1})`.
///
/// Nodes are the Gauss quadrature nodes of the moment sequence, i.e. the
/// generalized eigenvalues of the shifted Hankel pencil `(H_1, H_0)`; a ridge
/// restores positive definiteness for noisy input. Weights solve the
/// Vandermonde moment system, are clamped at zero and renormalized, and a final
/// Newton polish on all `2k` moment equations sharpens clean inputs.
pub fn fit_mixture_from_moments(m: &MomentVector, k: usize, bound: f64) -> Result<MomentFit> {
    if k == 0 || m.order != 2 * k - 1 {
        return Err(Error::InvalidArgument(format!(
            "need 2k-1 = {} moments, got {}",
            2 * k.max(1) - 1,
            m.order
        )));
    }
    if !(bound > 0.0) {
        return Err(Error::InvalidArgument("bound must be positive".into()));
    }
    if m.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("moments must be finite".into()));
    }
    if k == 1 {
        let theta = m.values[0];
        let clipped = theta.clamp(-bound, bound);
        return Ok(MomentFit {
            mixture: AtomicMixture::point_mass(clipped),
            ridge: 0.0,
            flagged: clipped != theta,
        });
    }

    // work on atoms scaled into [-1, 1]
    let scaled: Vec<f64> = (0..2 * k).map(|h| m.get(h) / bound.powi(h as i32)).collect();
    let mut h0 = DMatrix::from_fn(k, k, |i, j| scaled[i + j]);
    let h1 = DMatrix::from_fn(k, k, |i, j| scaled[i + j + 1]);

    let min_eig = SymmetricEigen::new(h0.clone()).eigenvalues.min();
    let mut ridge = 0.0;
    if min_eig < MIN_HANKEL_EIG {
        ridge = MIN_HANKEL_EIG - min_eig;
        for i in 0..k {
            h0[(i, i)] += ridge;
        }
    }
    let chol = h0
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("Hankel matrix not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;
    let pencil = &l_inv * &h1 * l_inv.transpose();
    let sym = (&pencil + pencil.transpose()) * 0.5;
    let mut nodes: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let mut flagged = ridge > 0.0;
    for x in nodes.iter_mut() {
        if x.abs() > 1.0 {
            *x = x.clamp(-1.0, 1.0);
            flagged = true;
        }
    }

    let mut weights = vandermonde_weights(&nodes, &scaled);
    if weights.iter().any(|&w| w < 0.0) {
        flagged = true;
    }
    weights.iter_mut().for_each(|w| *w = w.max(0.0));
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        weights = vec![1.0 / k as f64; k];
        flagged = true;
    } else {
        weights.iter_mut().for_each(|w| *w /= total);
    }

    if !flagged {
        newton_polish(&mut nodes, &mut weights, &scaled);
    }

    let atoms = nodes.iter().map(|x| x * bound).collect();
    let mixture = AtomicMixture::new(atoms, weights)?;
    Ok(MomentFit {
        mixture,
        ridge,
        flagged,
    })
}

/// Least-squares weights matching moments `0..2k` at fixed nodes.
fn vandermonde_weights(nodes: &[f64], scaled: &[f64]) -> Vec<f64> {
    let k = nodes.len();
    let rows = scaled.len();
    let v = DMatrix::from_fn(rows, k, |h, j| nodes[j].powi(h as i32));
    let rhs = DVector::from_column_slice(scaled);
    match v.svd(true, true).solve(&rhs, 1e-14) {
        Ok(w) => w.iter().copied().collect(),
        Err(_) => vec![1.0 / k as f64; k],
    }
}

fn moment_residual(nodes: &[f64], weights: &[f64], scaled: &[f64]) -> DVector<f64> {
    DVector::from_fn(scaled.len(), |h, _| {
        kahan_sum(nodes.iter().zip(weights).map(|(x, w)| w * x.powi(h as i32))) - scaled[h]
    })
}

/// Newton iterations on `sum_j w_j x_j^h = m_h`, `h = 0..2k`, keeping a step only
/// when it lowers the residual and stays feasible.
fn newton_polish(nodes: &mut [f64], weights: &mut [f64], scaled: &[f64]) {
    let k = nodes.len();
    let mut res = moment_residual(nodes, weights, scaled);
    for _ in 0..8 {
        let norm = res.norm();
        if norm < 1e-15 {
            break;
        }
        let jac = DMatrix::from_fn(2 * k, 2 * k, |h, c| {
            if c < k {
                nodes[c].powi(h as i32)
            } else if h == 0 {
                0.0
            } else {
                let j = c - k;
                h as f64 * weights[j] * nodes[j].powi(h as i32 - 1)
            }
        });
        let Some(step) = jac.lu().solve(&(-&res)) else {
            break;
        };
        let new_w: Vec<f64> = (0..k).map(|j| weights[j] + step[j]).collect();
        let new_x: Vec<f64> = (0..k).map(|j| nodes[j] + step[k + j]).collect();
        if new_w.iter().any(|&w| w < 0.0) || new_x.iter().any(|x| x.abs() > 1.0) {
            break;
        }
        let new_res = moment_residual(&new_x, &new_w, scaled);
        if new_res.norm() >= norm {
            break;
        }
        nodes.copy_from_slice(&new_x);
        weights.copy_from_slice(&new_w);
        res = new_res;
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::wasserstein;

    #[test]
    fn moment_vector_examples() {
        let sym = AtomicMixture::uniform(vec![-1.0, 1.0]).unwrap();
        assert_eq!(moment_vector(&sym, 3).values, vec![0.0, 1.0, 0.0]);
        assert_eq!(moment_vector(&AtomicMixture::point_mass(2.0), 2).values, vec![2.0, 4.0]);
        let case1 = AtomicMixture::uniform(vec![-3.0, -1.0, 1.0, 3.0]).unwrap();
        assert_eq!(moment_vector(&case1, 2).values, vec![0.0, 5.0]);
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite(0, 1.7).unwrap(), 1.0);
        assert_eq!(hermite(1, 1.7).unwrap(), 1.7);
        assert_eq!(hermite(2, 3.0).unwrap(), 8.0);
        assert_eq!(hermite(3, 2.0).unwrap(), 2.0);
        assert!(hermite(40, 0.5).is_ok());
        assert!(matches!(hermite(41, 0.5), Err(Error::HermiteOrder(41))));
    }

    #[test]
    fn single_point_denoising() {
        let x = 1.3;
        let m = denoised_batch_moments(&[x], 2).unwrap();
        assert!((m[0] - x).abs() < 1e-15);
        assert!((m[1] - (x * x - 1.0)).abs() < 1e-15);
        assert!(denoised_batch_moments(&[], 2).is_err());
    }

    #[test]
    fn batch_layout_and_median() {
        assert_eq!(batch_count(1000, 1, 0.5), 1);
        assert_eq!(batch_count(1000, 4, 0.01), 6);
        assert_eq!(batch_count(3, 4, 1e-6), 3);
        let mut v = vec![10.0, 1.0, 2.0];
        assert_eq!(lower_median(&mut v), 2.0);
        let mut even = vec![4.0, 1.0, 3.0, 2.0];
        assert_eq!(lower_median(&mut even), 2.0);

        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let b = batch_moments(&xs, 3, 1).unwrap();
        // batches {0..4}, {4..7}, {7..10}
        assert_eq!(b[0][0], 1.5);
        assert_eq!(b[1][0], 5.0);
        assert_eq!(b[2][0], 8.0);
    }

    #[test]
    fn single_batch_estimator_matches_full_sample() {
        let xs = vec![0.3, -1.2, 2.2, 0.9, -0.4];
        let est = median_denoised_from_slice(&xs, 1, 0.5).unwrap();
        assert_eq!(est.batches, 1);
        assert_eq!(est.values, denoised_batch_moments(&xs, 1).unwrap());
        assert!(median_denoised_from_slice(&xs, 1, 1.0).is_err());
        assert!(median_denoised_from_slice(&[], 1, 0.5).is_err());
    }

    #[test]
    fn fit_examples() {
        let fit = fit_mixture_from_moments(&MomentVector::new(vec![0.0]), 1, 6.0).unwrap();
        assert_eq!(fit.mixture, AtomicMixture::point_mass(0.0));

        let sym = AtomicMixture::uniform(vec![-1.0, 1.0]).unwrap();
        let fit = fit_mixture_from_moments(&moment_vector(&sym, 3), 2, 6.0).unwrap();
        assert!(!fit.flagged);
        for (got, want) in fit.mixture.atoms().iter().zip([-1.0, 1.0]) {
            assert!((got - want).abs() < 1e-8);
        }
        for w in fit.mixture.weights() {
            assert!((w - 0.5).abs() < 1e-8);
        }

        let case1 = AtomicMixture::uniform(vec![-3.0, -1.0, 1.0, 3.0]).unwrap();
        let fit = fit_mixture_from_moments(&moment_vector(&case1, 7), 4, 6.0).unwrap();
        assert!(wasserstein(&fit.mixture, &case1, 1.0) < 1e-6);
    }

    #[test]
    fn infeasible_moments_are_flagged() {
        // m2 < m1^2 admits no distribution
        let fit = fit_mixture_from_moments(&MomentVector::new(vec![1.0, 0.5, 0.0]), 2, 6.0).unwrap();
        assert!(fit.flagged);
        assert!(fit.mixture.max_abs_atom() <= 6.0);
        assert!(fit_mixture_from_moments(&MomentVector::new(vec![1.0, 0.5]), 2, 6.0).is_err());
    }

    #[test]
    fn exact_moment_hankel_is_psd() {
        let nu = AtomicMixture::new(vec![-2.0, 0.5, 4.0], vec![0.2, 0.5, 0.3]).unwrap();
        assert!(moment_vector(&nu, 6).hankel_min_eigenvalue() > -1e-8);
    }
}

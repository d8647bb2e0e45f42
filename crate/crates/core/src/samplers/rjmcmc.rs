//! Reversible-jump MCMC for the mixture-of-finite-mixtures posterior.
//!
//! The chain runs on mixtures with sorted atoms. Fixed-dimension moves use the
//! marginal (assignment-free) likelihood; the dimension-changing moves are the
//! split/merge pair of Richardson and Green restricted to adjacent atoms and a
//! birth/death pair drawing the new component from the prior. Assignments are
//! redrawn from their full conditional at the end of every sweep.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::{PosteriorTrace, SamplerConfig, TraceKind, TraceState};
use crate::error::{Error, Result};
use crate::mixture::{AtomicMixture, LN_SQRT_2PI};
use crate::priors::{dirichlet_symmetric_log_density, PriorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MoveKind {
    Atom,
    Weight,
    Split,
    Merge,
    Birth,
    Death,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
    /// Proposals rejected before evaluation (no valid reverse move, or `k` at a boundary).
    pub infeasible: u64,
}

impl MoveStats {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// A split that was accepted: the state before and after, and the index of the
/// split component.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAudit {
    pub index: usize,
    pub before_atoms: Vec<f64>,
    pub before_weights: Vec<f64>,
    pub after_atoms: Vec<f64>,
    pub after_weights: Vec<f64>,
}

impl SplitAudit {
    /// Merges the two components the split produced.
    pub fn inverse_merge(&self) -> (Vec<f64>, Vec<f64>) {
        let (theta, w, _, _) = merge_map(&self.after_atoms, &self.after_weights, self.index, 1.0);
        let mut atoms = self.after_atoms.clone();
        let mut weights = self.after_weights.clone();
        atoms.splice(self.index..self.index + 2, [theta]);
        weights.splice(self.index..self.index + 2, [w]);
        (atoms, weights)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MfmDiagnostics {
    pub atom: MoveStats,
    pub weight: MoveStats,
    pub split: MoveStats,
    pub merge: MoveStats,
    pub birth: MoveStats,
    pub death: MoveStats,
    /// Proposals auto-rejected because the acceptance log-ratio was NaN or `+inf`.
    pub overflow_rejections: u64,
    pub log_ratios: Vec<(MoveKind, f64)>,
    pub split_audits: Vec<SplitAudit>,
}

impl MfmDiagnostics {
    fn stats(&mut self, kind: MoveKind) -> &mut MoveStats {
        match kind {
            MoveKind::Atom => &mut self.atom,
            MoveKind::Weight => &mut self.weight,
            MoveKind::Split => &mut self.split,
            MoveKind::Merge => &mut self.merge,
            MoveKind::Birth => &mut self.birth,
            MoveKind::Death => &mut self.death,
        }
    }
}

/// Per-observation component log-kernels and the mixture log-density, kept in
/// a shifted linear form so that single-component and weight updates cost one
/// exponential per observation.
#[derive(Debug, Clone, PartialEq)]
struct LikCache {
    /// `lphi[j][i] = -(x_i - theta_j)^2 / 2`.
    lphi: Vec<Vec<f64>>,
    /// `e[j][i] = exp(lphi[j][i] - shift[i])`.
    e: Vec<Vec<f64>>,
    shift: Vec<f64>,
    /// `log sum_j w_j exp(lphi[j][i])`.
    lf: Vec<f64>,
    loglik: f64,
}

const TINY_ROW: f64 = 1e-250;

fn lphi_column(data: &[f64], theta: f64) -> Vec<f64> {
    data.iter().map(|x| -0.5 * (x - theta) * (x - theta)).collect()
}

fn log_sum_exp_weighted(weights: &[f64], terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms
        .clone()
        .zip(weights)
        .map(|(t, w)| t + w.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = terms.zip(weights).map(|(t, w)| (t + w.ln() - max).exp()).sum();
    max + s.ln()
}

fn total_loglik(lf: &[f64]) -> f64 {
    lf.iter().sum::<f64>() - lf.len() as f64 * LN_SQRT_2PI
}

impl LikCache {
    fn build(data: &[f64], atoms: &[f64], weights: &[f64]) -> Self {
        let n = data.len();
        let lphi: Vec<Vec<f64>> = atoms.iter().map(|&t| lphi_column(data, t)).collect();
        let mut cache = Self {
            e: vec![vec![0.0; n]; atoms.len()],
            lphi,
            shift: vec![0.0; n],
            lf: vec![0.0; n],
            loglik: 0.0,
        };
        for i in 0..n {
            cache.reshift_row(i);
            cache.lf[i] = cache.row_log_density(i, weights);
        }
        cache.loglik = total_loglik(&cache.lf);
        cache
    }

    fn reshift_row(&mut self, i: usize) {
        let s = self.lphi.iter().map(|c| c[i]).fold(f64::NEG_INFINITY, f64::max);
        self.shift[i] = s;
        for (e, l) in self.e.iter_mut().zip(&self.lphi) {
            e[i] = (l[i] - s).exp();
        }
    }

    fn row_log_density(&self, i: usize, weights: &[f64]) -> f64 {
        let s: f64 = self.e.iter().zip(weights).map(|(e, w)| w * e[i]).sum();
        if s > TINY_ROW && s.is_finite() {
            self.shift[i] + s.ln()
        } else {
            log_sum_exp_weighted(weights, self.lphi.iter().map(|c| c[i]))
        }
    }

    /// Log-densities after replacing component `j`'s kernel column.
    fn eval_column(&self, j: usize, col: &[f64], weights: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
        let n = col.len();
        let mut e_new = vec![0.0; n];
        let mut lf = vec![0.0; n];
        let mut dirty = Vec::new();
        for i in 0..n {
            let ev = (col[i] - self.shift[i]).exp();
            e_new[i] = ev;
            let mut s = 0.0;
            for (m, (e, w)) in self.e.iter().zip(weights).enumerate() {
                s += w * if m == j { ev } else { e[i] };
            }
            if s > TINY_ROW && s.is_finite() {
                lf[i] = self.shift[i] + s.ln();
            } else {
                dirty.push(i);
                lf[i] = log_sum_exp_weighted(
                    weights,
                    self.lphi
                        .iter()
                        .enumerate()
                        .map(|(m, c)| if m == j { col[i] } else { c[i] }),
                );
            }
        }
        (e_new, lf, dirty)
    }

    fn commit_column(&mut self, j: usize, col: Vec<f64>, e_new: Vec<f64>, lf: Vec<f64>, dirty: &[usize]) {
        self.lphi[j] = col;
        self.e[j] = e_new;
        self.lf = lf;
        for &i in dirty {
            self.reshift_row(i);
        }
        self.loglik = total_loglik(&self.lf);
    }

    fn eval_weights(&self, weights: &[f64]) -> Vec<f64> {
        (0..self.lf.len()).map(|i| self.row_log_density(i, weights)).collect()
    }

    fn commit_weights(&mut self, lf: Vec<f64>) {
        self.lf = lf;
        self.loglik = total_loglik(&self.lf);
    }
}

/// A state of the reversible-jump chain: sorted atoms, weights, assignments and
/// the cached log-posterior (up to an additive constant).
#[derive(Debug, Clone, PartialEq)]
pub struct MfmState {
    atoms: Vec<f64>,
    weights: Vec<f64>,
    /// Component index of every observation, drawn at the end of each sweep.
    pub assignments: Vec<usize>,
    log_posterior: f64,
    cache: LikCache,
    log_k_prior: Vec<f64>,
    bound: f64,
    dirichlet: f64,
}

impl MfmState {
    /// Builds a state at `mixture`; `data` must be the data later passed to
    /// [`rjmcmc_step`] (empty for prior-only chains).
    pub fn new(mixture: &AtomicMixture, data: &[f64], prior: &PriorSpec, cfg: &SamplerConfig) -> Result<Self> {
        let n_prior = cfg.prior_n.unwrap_or(data.len());
        let log_k_prior = prior.k_log_pmf_table(n_prior);
        if mixture.len() > log_k_prior.len() {
            return Err(Error::InvalidArgument(format!(
                "{} components exceed the prior cap {}",
                mixture.len(),
                log_k_prior.len()
            )));
        }
        mixture.check_bound(prior.bound)?;
        if mixture.weights().iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidArgument("initial weights must be positive".into()));
        }
        let mut pairs: Vec<(f64, f64)> = mixture.iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let atoms: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let template = Self {
            cache: LikCache::build(&[], &[], &[]),
            atoms: Vec::new(),
            weights: Vec::new(),
            assignments: Vec::new(),
            log_posterior: 0.0,
            log_k_prior,
            bound: prior.bound,
            dirichlet: prior.dirichlet,
        };
        let mut state = template.with_components(atoms, weights, data, cfg);
        state.assignments = vec![0; data.len()];
        Ok(state)
    }

    /// One component at the sample mean clipped to `[-L, L]` (zero without data).
    pub fn initial(data: &[f64], prior: &PriorSpec, cfg: &SamplerConfig) -> Result<Self> {
        let mean = if data.is_empty() {
            0.0
        } else {
            data.iter().sum::<f64>() / data.len() as f64
        };
        Self::new(&AtomicMixture::point_mass(mean.clamp(-prior.bound, prior.bound)), data, prior, cfg)
    }

    fn with_components(&self, atoms: Vec<f64>, weights: Vec<f64>, data: &[f64], cfg: &SamplerConfig) -> Self {
        let cache = LikCache::build(data, &atoms, &weights);
        let mut s = Self {
            atoms,
            weights,
            assignments: Vec::new(),
            log_posterior: 0.0,
            cache,
            log_k_prior: self.log_k_prior.clone(),
            bound: self.bound,
            dirichlet: self.dirichlet,
        };
        s.log_posterior = s.log_prior(&s.weights) + cfg.temper(s.cache.loglik);
        s
    }

    pub fn k(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_posterior(&self) -> f64 {
        self.log_posterior
    }

    /// Cached log-likelihood of the data under the current mixture.
    pub fn loglik(&self) -> f64 {
        self.cache.loglik
    }

    pub fn mixture(&self) -> AtomicMixture {
        AtomicMixture::new(self.atoms.clone(), self.weights.clone()).expect("sampler keeps a valid mixture")
    }

    /// Largest number of components with prior mass.
    pub fn k_cap(&self) -> usize {
        self.log_k_prior.len()
    }

    /// Log prior density on the sorted-atom space for a weight vector of the current size.
    fn log_prior(&self, weights: &[f64]) -> f64 {
        let k = weights.len();
        self.log_k_prior[k - 1] + ln_gamma(k as f64 + 1.0) + dirichlet_symmetric_log_density(self.dirichlet, weights)
            - k as f64 * (2.0 * self.bound).ln()
    }

    /// The log-posterior recomputed from scratch without the cache.
    pub fn recompute_log_posterior(&self, data: &[f64], cfg: &SamplerConfig) -> f64 {
        let density = crate::mixture::GaussianMixtureDensity::new(self.mixture());
        let loglik: f64 = data.iter().map(|&x| density.ln_density(x)).sum();
        self.log_prior(&self.weights) + cfg.temper(loglik)
    }

    fn sort_components(&mut self) {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| self.atoms[a].total_cmp(&self.atoms[b]));
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return;
        }
        self.atoms = order.iter().map(|&o| self.atoms[o]).collect();
        self.weights = order.iter().map(|&o| self.weights[o]).collect();
        let mut lphi = std::mem::take(&mut self.cache.lphi);
        let mut e = std::mem::take(&mut self.cache.e);
        self.cache.lphi = order.iter().map(|&o| std::mem::take(&mut lphi[o])).collect();
        self.cache.e = order.iter().map(|&o| std::mem::take(&mut e[o])).collect();
    }

    fn n(&self) -> usize {
        self.cache.lf.len()
    }

    /// Splits component `j` with auxiliary variables `(u1, u2)`; returns the
    /// proposed state and the log acceptance ratio, or `None` when the split
    /// has no valid reverse merge.
    pub fn propose_split(&self, data: &[f64], cfg: &SamplerConfig, j: usize, u1: f64, u2: f64) -> Option<(Self, f64)> {
        let k = self.k();
        if j >= k || k + 1 > self.k_cap() || !(u1 > 0.0 && u1 < 1.0 && u2 > 0.0 && u2 < 1.0) {
            return None;
        }
        let (w, theta, s) = (self.weights[j], self.atoms[j], cfg.split_scale);
        let (w1, w2) = (w * u1, w * (1.0 - u1));
        let r = ((1.0 - u1) / u1).sqrt();
        let (t1, t2) = (theta - u2 * s * r, theta + u2 * s / r);
        if t1.abs() > self.bound || t2.abs() > self.bound || w1 <= 0.0 || w2 <= 0.0 {
            return None;
        }
        if (j > 0 && t1 <= self.atoms[j - 1]) || (j + 1 < k && t2 >= self.atoms[j + 1]) {
            return None;
        }
        let mut atoms = self.atoms.clone();
        let mut weights = self.weights.clone();
        atoms.splice(j..=j, [t1, t2]);
        weights.splice(j..=j, [w1, w2]);
        let next = self.with_components(atoms, weights, data, cfg);
        let log_jac = (w * s).ln() - 0.5 * (u1 * (1.0 - u1)).ln();
        let ratio = next.log_posterior - self.log_posterior + cfg.move_probs[1].ln() - cfg.move_probs[0].ln()
            - ln_beta22(u1)
            - ln_beta22(u2)
            + log_jac;
        Some((next, ratio))
    }

    /// Merges the adjacent components `j` and `j + 1`.
    pub fn propose_merge(&self, data: &[f64], cfg: &SamplerConfig, j: usize) -> Option<(Self, f64)> {
        let k = self.k();
        if k < 2 || j + 1 >= k {
            return None;
        }
        let (theta, w, u1, u2) = merge_map(&self.atoms, &self.weights, j, cfg.split_scale);
        if !(u2 < 1.0) || !(u1 > 0.0 && u1 < 1.0) {
            return None;
        }
        let mut atoms = self.atoms.clone();
        let mut weights = self.weights.clone();
        atoms.splice(j..j + 2, [theta]);
        weights.splice(j..j + 2, [w]);
        let next = self.with_components(atoms, weights, data, cfg);
        let log_jac = (w * cfg.split_scale).ln() - 0.5 * (u1 * (1.0 - u1)).ln();
        let ratio = next.log_posterior - self.log_posterior - cfg.move_probs[1].ln() + cfg.move_probs[0].ln()
            + ln_beta22(u1)
            + ln_beta22(u2)
            - log_jac;
        Some((next, ratio))
    }

    /// Adds a component with weight `w_star` (others scaled by `1 - w_star`) at `theta_star`.
    pub fn propose_birth(&self, data: &[f64], cfg: &SamplerConfig, w_star: f64, theta_star: f64) -> Option<(Self, f64)> {
        let k = self.k();
        if k + 1 > self.k_cap() || !(w_star > 0.0 && w_star < 1.0) || theta_star.abs() > self.bound {
            return None;
        }
        let pos = self.atoms.partition_point(|&a| a < theta_star);
        let mut atoms = self.atoms.clone();
        let mut weights: Vec<f64> = self.weights.iter().map(|w| w * (1.0 - w_star)).collect();
        if weights.iter().any(|&w| w <= 0.0) {
            return None;
        }
        atoms.insert(pos, theta_star);
        weights.insert(pos, w_star);
        let next = self.with_components(atoms, weights, data, cfg);
        let ratio = next.log_posterior - self.log_posterior + self.birth_proposal_terms(k, cfg);
        Some((next, ratio))
    }

    /// Removes component `j`, rescaling the remaining weights.
    pub fn propose_death(&self, data: &[f64], cfg: &SamplerConfig, j: usize) -> Option<(Self, f64)> {
        let k = self.k();
        if k < 2 || j >= k || !(self.weights[j] < 1.0) {
            return None;
        }
        let rest = 1.0 - self.weights[j];
        let mut atoms = self.atoms.clone();
        let mut weights = self.weights.clone();
        atoms.remove(j);
        weights.remove(j);
        weights.iter_mut().for_each(|w| *w /= rest);
        let next = self.with_components(atoms, weights, data, cfg);
        let ratio = next.log_posterior - self.log_posterior - self.birth_proposal_terms(k - 1, cfg);
        Some((next, ratio))
    }

    /// Proposal and Jacobian terms of a birth from `k` components: the Beta(1, k)
    /// density of the new weight cancels against the Jacobian `(1 - w)^(k-1)`.
    fn birth_proposal_terms(&self, k: usize, cfg: &SamplerConfig) -> f64 {
        cfg.move_probs[3].ln() - ((k + 1) as f64).ln() - cfg.move_probs[2].ln() - (k as f64).ln()
            + (2.0 * self.bound).ln()
    }
}

fn ln_beta22(u: f64) -> f64 {
    (6.0 * u * (1.0 - u)).ln()
}

/// The merge of components `j`, `j + 1`: merged atom and weight and the
/// split variables `(u1, u2)` that would recreate the pair.
fn merge_map(atoms: &[f64], weights: &[f64], j: usize, s: f64) -> (f64, f64, f64, f64) {
    let (w1, w2) = (weights[j], weights[j + 1]);
    let (t1, t2) = (atoms[j], atoms[j + 1]);
    let w = w1 + w2;
    let u1 = w1 / w;
    let theta = (w1 * t1 + w2 * t2) / w;
    let u2 = (t2 - t1) * (u1 * (1.0 - u1)).sqrt() / s;
    (theta, w, u1, u2)
}

fn accept<R: Rng>(kind: MoveKind, log_ratio: f64, cfg: &SamplerConfig, diag: &mut MfmDiagnostics, rng: &mut R) -> bool {
    if cfg.record_log_ratios {
        diag.log_ratios.push((kind, log_ratio));
    }
    diag.stats(kind).proposed += 1;
    if log_ratio.is_nan() || log_ratio == f64::INFINITY {
        diag.overflow_rejections += 1;
        return false;
    }
    let ok = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if ok {
        diag.stats(kind).accepted += 1;
    }
    ok
}

fn dirichlet_log_density(conc: &[f64], w: &[f64]) -> f64 {
    let total: f64 = conc.iter().sum();
    ln_gamma(total) - conc.iter().map(|&c| ln_gamma(c)).sum::<f64>()
        + conc.iter().zip(w).map(|(c, x)| (c - 1.0) * x.ln()).sum::<f64>()
}

fn atom_moves<R: Rng>(state: &mut MfmState, data: &[f64], cfg: &SamplerConfig, diag: &mut MfmDiagnostics, rng: &mut R) {
    let n = state.n() as f64;
    let alpha = cfg.alpha_value();
    for j in 0..state.k() {
        let step = cfg.atom_step / (alpha * n * state.weights[j] + 1.0).sqrt();
        let z: f64 = StandardNormal.sample(rng);
        let proposal = state.atoms[j] + step * z;
        if proposal.abs() > state.bound {
            diag.atom.proposed += 1;
            diag.atom.infeasible += 1;
            continue;
        }
        let col = lphi_column(data, proposal);
        let (e_new, lf, dirty) = state.cache.eval_column(j, &col, &state.weights);
        let loglik = total_loglik(&lf);
        let ratio = cfg.temper(loglik) - cfg.temper(state.cache.loglik);
        if accept(MoveKind::Atom, ratio, cfg, diag, rng) {
            state.atoms[j] = proposal;
            state.cache.commit_column(j, col, e_new, lf, &dirty);
            state.log_posterior = state.log_prior(&state.weights) + cfg.temper(state.cache.loglik);
        }
    }
    state.sort_components();
}

fn weight_move<R: Rng>(state: &mut MfmState, cfg: &SamplerConfig, diag: &mut MfmDiagnostics, rng: &mut R) {
    if state.k() < 2 {
        return;
    }
    let c = (cfg.alpha_value() * state.n() as f64).max(cfg.weight_concentration);
    let conc: Vec<f64> = state.weights.iter().map(|w| c * w + 1.0).collect();
    let draws: Vec<f64> = conc
        .iter()
        .map(|&a| Gamma::new(a, 1.0).expect("shape at least one").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    let proposal: Vec<f64> = draws.iter().map(|g| g / total).collect();
    if proposal.iter().any(|&w| !(w > 0.0)) {
        diag.weight.proposed += 1;
        diag.weight.infeasible += 1;
        return;
    }
    let reverse: Vec<f64> = proposal.iter().map(|w| c * w + 1.0).collect();
    let lf = state.cache.eval_weights(&proposal);
    let loglik = total_loglik(&lf);
    let new_log_post = state.log_prior(&proposal) + cfg.temper(loglik);
    let ratio = new_log_post - state.log_posterior + dirichlet_log_density(&reverse, &state.weights)
        - dirichlet_log_density(&conc, &proposal);
    if accept(MoveKind::Weight, ratio, cfg, diag, rng) {
        state.weights = proposal;
        state.cache.commit_weights(lf);
        state.log_posterior = new_log_post;
    }
}

fn dimension_move<R: Rng>(state: &mut MfmState, data: &[f64], cfg: &SamplerConfig, diag: &mut MfmDiagnostics, rng: &mut R) {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut kind = MoveKind::Death;
    for (p, kd) in cfg.move_probs.iter().zip([MoveKind::Split, MoveKind::Merge, MoveKind::Birth, MoveKind::Death]) {
        acc += p;
        if u < acc {
            kind = kd;
            break;
        }
    }
    let k = state.k();
    let beta22 = Beta::new(2.0, 2.0).expect("valid beta");
    let proposal = match kind {
        MoveKind::Split => {
            let j = rng.random_range(0..k);
            let (u1, u2) = (beta22.sample(rng), beta22.sample(rng));
            state.propose_split(data, cfg, j, u1, u2).map(|p| (p, Some(j)))
        }
        MoveKind::Merge if k >= 2 => {
            let j = rng.random_range(0..k - 1);
            state.propose_merge(data, cfg, j).map(|p| (p, None))
        }
        MoveKind::Birth => {
            let w_star = Beta::new(1.0, k as f64).expect("valid beta").sample(rng);
            let theta_star = rng.random_range(-state.bound..=state.bound);
            state.propose_birth(data, cfg, w_star, theta_star).map(|p| (p, None))
        }
        MoveKind::Death if k >= 2 => {
            let j = rng.random_range(0..k);
            state.propose_death(data, cfg, j).map(|p| (p, None))
        }
        _ => None,
    };
    let Some(((next, ratio), split_index)) = proposal else {
        let st = diag.stats(kind);
        st.proposed += 1;
        st.infeasible += 1;
        return;
    };
    if accept(kind, ratio, cfg, diag, rng) {
        if let (true, Some(index)) = (cfg.audit_splits, split_index) {
            diag.split_audits.push(SplitAudit {
                index,
                before_atoms: state.atoms.clone(),
                before_weights: state.weights.clone(),
                after_atoms: next.atoms.clone(),
                after_weights: next.weights.clone(),
            });
        }
        let assignments = std::mem::take(&mut state.assignments);
        *state = next;
        state.assignments = assignments;
    }
}

fn draw_assignments<R: Rng>(state: &mut MfmState, rng: &mut R) {
    let k = state.k();
    state.assignments.resize(state.n(), 0);
    for i in 0..state.n() {
        let total: f64 = (0..k).map(|j| state.weights[j] * state.cache.e[j][i]).sum();
        state.assignments[i] = if total > 0.0 && total.is_finite() {
            let mut u = rng.random::<f64>() * total;
            let mut pick = k - 1;
            for j in 0..k {
                u -= state.weights[j] * state.cache.e[j][i];
                if u < 0.0 {
                    pick = j;
                    break;
                }
            }
            pick
        } else {
            (0..k)
                .max_by(|&a, &b| {
                    (state.cache.lphi[a][i] + state.weights[a].ln())
                        .total_cmp(&(state.cache.lphi[b][i] + state.weights[b].ln()))
                })
                .unwrap_or(0)
        };
    }
}

/// One sweep: random-walk updates of every atom, a Dirichlet-proposal weight
/// update, one dimension-changing move, then fresh assignments. Every
/// likelihood term in the acceptance ratios is tempered by `cfg.alpha`.
pub fn rjmcmc_step<R: Rng>(
    state: &mut MfmState,
    data: &[f64],
    cfg: &SamplerConfig,
    diag: &mut MfmDiagnostics,
    rng: &mut R,
) {
    debug_assert_eq!(data.len(), state.n());
    atom_moves(state, data, cfg, diag, rng);
    weight_move(state, cfg, diag, rng);
    dimension_move(state, data, cfg, diag, rng);
    draw_assignments(state, rng);
}

/// Runs the reversible-jump chain from one component at the clipped sample mean.
pub fn run_mfm(data: &[f64], prior: &PriorSpec, cfg: &SamplerConfig) -> Result<PosteriorTrace> {
    cfg.validate()?;
    prior.validate()?;
    let data: &[f64] = if cfg.prior_only { &[] } else { data };
    if data.is_empty() && !cfg.prior_only {
        return Err(Error::EmptySample);
    }
    if cfg.prior_only && cfg.prior_n.is_none() {
        return Err(Error::InvalidArgument("prior-only chains need prior_n".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = MfmState::initial(data, prior, cfg)?;
    let mut diag = MfmDiagnostics::default();
    let mut states = Vec::with_capacity(cfg.trace_len());
    for iter in 1..=cfg.iterations {
        rjmcmc_step(&mut state, data, cfg, &mut diag, &mut rng);
        if cfg.records(iter) {
            states.push(TraceState {
                iter,
                k: state.k(),
                log_post: state.log_posterior,
                mixture: state.mixture(),
            });
        }
    }
    Ok(PosteriorTrace {
        kind: TraceKind::Mfm,
        states,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        seed: cfg.seed,
        diagnostics: Some(diag),
    })
}

//! Neal's Algorithm 8 for the Dirichlet process location mixture with a uniform
//! base measure on `[-L, L]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use super::{PosteriorTrace, SamplerConfig, TraceKind, TraceState};
use crate::error::{Error, Result};
use crate::mixture::{AtomicMixture, LN_SQRT_2PI};
use crate::priors::{default_kbar, DpPriorSpec};

/// Cluster labels of the observations and the atom of every occupied cluster.
/// Labels are kept contiguous: `0..t()`.
#[derive(Debug, Clone, PartialEq)]
pub struct DpState {
    assignments: Vec<usize>,
    atoms: Vec<f64>,
    counts: Vec<usize>,
}

impl DpState {
    /// Builds a state from labels and per-label atoms, dropping empty labels.
    pub fn new(assignments: Vec<usize>, atoms: Vec<f64>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(&bad) = assignments.iter().find(|&&z| z >= atoms.len()) {
            return Err(Error::InvalidArgument(format!("label {bad} has no atom")));
        }
        let mut relabel = vec![usize::MAX; atoms.len()];
        let mut state = Self {
            assignments: Vec::with_capacity(assignments.len()),
            atoms: Vec::new(),
            counts: Vec::new(),
        };
        for z in assignments {
            if relabel[z] == usize::MAX {
                relabel[z] = state.atoms.len();
                state.atoms.push(atoms[z]);
                state.counts.push(0);
            }
            state.counts[relabel[z]] += 1;
            state.assignments.push(relabel[z]);
        }
        Ok(state)
    }

    /// Contiguous blocks of the sorted data, one cluster per block, each at
    /// its clipped block mean. Prior-only chains start from a single cluster.
    pub fn initial(data: &[f64], n: usize, clusters: usize, bound: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        if data.is_empty() {
            return Self::new(vec![0; n], vec![0.0]);
        }
        let t0 = clusters.clamp(1, n);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| data[a].total_cmp(&data[b]));
        let mut assignments = vec![0; n];
        let mut sums = vec![0.0; t0];
        let mut sizes = vec![0usize; t0];
        for (rank, &i) in order.iter().enumerate() {
            let c = rank * t0 / n;
            assignments[i] = c;
            sums[c] += data[i];
            sizes[c] += 1;
        }
        let atoms = sums
            .iter()
            .zip(&sizes)
            .map(|(s, &m)| (s / m as f64).clamp(-bound, bound))
            .collect();
        Self::new(assignments, atoms)
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of occupied clusters `T_n`.
    pub fn t(&self) -> usize {
        self.atoms.len()
    }

    /// Cluster frequencies times atoms.
    pub fn mixture(&self) -> AtomicMixture {
        AtomicMixture::from_unnormalized(self.atoms.clone(), self.counts.iter().map(|&c| c as f64).collect())
            .expect("occupied clusters have positive counts")
    }

    /// Log joint density of labels, atoms and (tempered) data.
    pub fn log_posterior(&self, data: &[f64], prior: &DpPriorSpec, cfg: &SamplerConfig) -> f64 {
        let n = self.assignments.len() as f64;
        let kappa = effective_kappa(prior, self.assignments.len());
        let t = self.t() as f64;
        let partition = t * kappa.ln() + self.counts.iter().map(|&c| ln_gamma(c as f64)).sum::<f64>()
            + ln_gamma(kappa)
            - ln_gamma(kappa + n);
        let base = -t * (2.0 * prior.bound).ln();
        if cfg.prior_only || data.is_empty() {
            return partition + base;
        }
        let loglik: f64 = data
            .iter()
            .zip(&self.assignments)
            .map(|(x, &z)| -0.5 * (x - self.atoms[z]).powi(2) - LN_SQRT_2PI)
            .sum();
        partition + base + cfg.temper(loglik)
    }

    fn remove_cluster(&mut self, c: usize) {
        let last = self.atoms.len() - 1;
        self.atoms.swap_remove(c);
        self.counts.swap_remove(c);
        if c != last {
            for z in self.assignments.iter_mut() {
                if *z == last {
                    *z = c;
                }
            }
        }
    }
}

fn effective_kappa(prior: &DpPriorSpec, n: usize) -> f64 {
    let kappa = prior.kappa(n as f64);
    // the 1/(n log n) schedule is infinite at n = 1, where any kappa gives one cluster
    if kappa.is_finite() && kappa > 0.0 {
        kappa
    } else {
        1.0
    }
}

/// One Gibbs sweep: every observation is reassigned among the occupied clusters
/// and `m_aux` fresh auxiliary atoms, then every atom gets a random-walk
/// Metropolis refresh. `data` is ignored for prior-only configurations.
pub fn neal8_step<R: Rng>(state: &mut DpState, data: &[f64], prior: &DpPriorSpec, cfg: &SamplerConfig, rng: &mut R) {
    let n = state.assignments.len();
    let use_lik = !cfg.prior_only && !data.is_empty();
    debug_assert!(!use_lik || data.len() == n);
    let kappa = effective_kappa(prior, n);
    let alpha = cfg.alpha_value();
    let m = cfg.m_aux.max(1);
    let log_aux = (kappa / m as f64).ln();
    let bound = prior.bound;
    let mut aux = vec![0.0; m];
    let mut logw: Vec<f64> = Vec::new();
    #[allow(clippy::needless_range_loop)] // data is empty in prior-only runs
    for i in 0..n {
        let c = state.assignments[i];
        state.counts[c] -= 1;
        let singleton = state.counts[c] == 0;
        for (slot, a) in aux.iter_mut().enumerate() {
            *a = if slot == 0 && singleton {
                state.atoms[c]
            } else {
                rng.random_range(-bound..=bound)
            };
        }
        if singleton {
            state.remove_cluster(c);
        }
        let lik = |theta: f64| if use_lik { -0.5 * alpha * (data[i] - theta).powi(2) } else { 0.0 };
        logw.clear();
        logw.extend(state.atoms.iter().zip(&state.counts).map(|(&t, &cnt)| (cnt as f64).ln() + lik(t)));
        logw.extend(aux.iter().map(|&t| log_aux + lik(t)));
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in logw.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = logw.len() - 1;
        for (idx, w) in logw.iter().enumerate() {
            u -= w;
            if u < 0.0 {
                pick = idx;
                break;
            }
        }
        let t = state.atoms.len();
        if pick < t {
            state.assignments[i] = pick;
            state.counts[pick] += 1;
        } else {
            state.assignments[i] = t;
            state.atoms.push(aux[pick - t]);
            state.counts.push(1);
        }
    }

    let t = state.atoms.len();
    let mut sums = vec![0.0; t];
    if use_lik {
        for (x, &z) in data.iter().zip(&state.assignments) {
            sums[z] += x;
        }
    }
    for (c, &sum) in sums.iter().enumerate() {
        let theta = state.atoms[c];
        let z: f64 = StandardNormal.sample(rng);
        let proposal = theta + cfg.dp_atom_step * z;
        if proposal.abs() > bound {
            continue;
        }
        let ratio = if use_lik {
            let nc = state.counts[c] as f64;
            -0.5 * alpha * (nc * (proposal * proposal - theta * theta) - 2.0 * sum * (proposal - theta))
        } else {
            0.0
        };
        if ratio >= 0.0 || rng.random::<f64>().ln() < ratio {
            state.atoms[c] = proposal;
        }
    }
}

/// Runs Neal's Algorithm 8 from a quantile partition into
/// `cfg.initial_clusters` (default `2 kbar_n`) clusters.
pub fn run_dp(data: &[f64], prior: &DpPriorSpec, cfg: &SamplerConfig) -> Result<PosteriorTrace> {
    cfg.validate()?;
    if !(prior.bound > 0.0) {
        return Err(Error::InvalidArgument("L must be positive".into()));
    }
    let data: &[f64] = if cfg.prior_only { &[] } else { data };
    let n = if cfg.prior_only {
        cfg.prior_n
            .ok_or_else(|| Error::InvalidArgument("prior-only chains need prior_n".into()))?
    } else {
        data.len()
    };
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let clusters = cfg.initial_clusters.unwrap_or(2 * default_kbar(n));
    let mut state = DpState::initial(data, n, clusters, prior.bound)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut states = Vec::with_capacity(cfg.trace_len());
    for iter in 1..=cfg.iterations {
        neal8_step(&mut state, data, prior, cfg, &mut rng);
        if cfg.records(iter) {
            states.push(TraceState {
                iter,
                k: state.t(),
                log_post: state.log_posterior(data, prior, cfg),
                mixture: state.mixture(),
            });
        }
    }
    Ok(PosteriorTrace {
        kind: TraceKind::Dp,
        states,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
        seed: cfg.seed,
        diagnostics: None,
    })
}

//! Posterior computation: reversible-jump MCMC for mixtures of finite mixtures,
//! Neal's auxiliary-variable Gibbs sampler (Algorithm 8) for Dirichlet process
//! mixtures, and EM for MAP estimates.

mod em;
mod neal8;
mod rjmcmc;

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::wasserstein;
use crate::mixture::AtomicMixture;

pub use em::{em_log_posterior, em_map, em_map_restarts, random_init, EmFit};
pub use neal8::{neal8_step, run_dp, DpState};
pub use rjmcmc::{rjmcmc_step, run_mfm, MfmState, MoveKind, MoveStats, MfmDiagnostics, SplitAudit};

/// Chain length, tempering and proposal tuning shared by the samplers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Fractional order; `None` targets the ordinary posterior.
    pub alpha: Option<f64>,
    /// Probabilities of proposing split, merge, birth and death.
    pub move_probs: [f64; 4],
    /// Scale `s` of the split move.
    pub split_scale: f64,
    /// Numerator of the atom random-walk step `c / sqrt(alpha n w_j + 1)`.
    pub atom_step: f64,
    /// Lower bound on the concentration of the Dirichlet weight proposal.
    pub weight_concentration: f64,
    /// Auxiliary atoms per observation in Neal's Algorithm 8.
    pub m_aux: usize,
    /// Random-walk step of the Neal-8 atom refresh.
    pub dp_atom_step: f64,
    /// Clusters of the initial Neal-8 partition; `None` uses `2 kbar_n`.
    pub initial_clusters: Option<usize>,
    /// Ignore the likelihood and sample the prior.
    pub prior_only: bool,
    /// Sample size used for `n`-dependent hyperparameters; defaults to the data size.
    pub prior_n: Option<usize>,
    pub seed: u64,
    /// Keep the acceptance log-ratio of every proposal in the diagnostics.
    pub record_log_ratios: bool,
    /// Keep before/after snapshots of accepted splits.
    pub audit_splits: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 21_000,
            burn_in: 1_000,
            thin: 20,
            alpha: None,
            move_probs: [0.25; 4],
            split_scale: 1.0,
            atom_step: 2.4,
            weight_concentration: 20.0,
            m_aux: 3,
            dp_atom_step: 0.5,
            initial_clusters: None,
            prior_only: false,
            prior_n: None,
            seed: 0,
            record_log_ratios: false,
            audit_splits: false,
        }
    }
}

impl SamplerConfig {
    /// The long protocol: 105,000 iterations, burn-in 5,000, thin 100.
    pub fn paper_scale() -> Self {
        Self {
            iterations: 105_000,
            burn_in: 5_000,
            thin: 100,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidArgument(format!("alpha = {a} must lie in (0, 1]")));
            }
        }
        if self.burn_in >= self.iterations {
            return Err(Error::InvalidArgument("burn-in must be shorter than the chain".into()));
        }
        if self.thin == 0 || self.m_aux == 0 {
            return Err(Error::InvalidArgument("thin and m_aux must be positive".into()));
        }
        if self.move_probs.iter().any(|&p| !(p >= 0.0)) || (self.move_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("move probabilities must be a distribution".into()));
        }
        if !(self.split_scale > 0.0 && self.atom_step > 0.0 && self.dp_atom_step > 0.0) {
            return Err(Error::InvalidArgument("proposal scales must be positive".into()));
        }
        Ok(())
    }

    /// The tempering exponent actually applied (one for the ordinary posterior).
    pub fn alpha_value(&self) -> f64 {
        self.alpha.unwrap_or(1.0)
    }

    pub(crate) fn temper(&self, loglik: f64) -> f64 {
        match self.alpha {
            None => loglik,
            Some(a) => a * loglik,
        }
    }

    /// Number of states a chain of this configuration records.
    pub fn trace_len(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }

    pub(crate) fn records(&self, iter: usize) -> bool {
        iter > self.burn_in && (iter - self.burn_in).is_multiple_of(self.thin)
    }
}

/// Which sampler produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceKind {
    /// States carry the number of components `k`.
    Mfm,
    /// States carry the number of occupied clusters `T_n`.
    Dp,
}

/// One recorded state of a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceState {
    pub iter: usize,
    /// `k` for mixture-of-finite-mixtures chains, `T_n` for Dirichlet process chains.
    pub k: usize,
    pub log_post: f64,
    /// The sampled mixing measure (cluster frequencies times atoms for DP chains).
    pub mixture: AtomicMixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTrace {
    pub kind: TraceKind,
    pub states: Vec<TraceState>,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub diagnostics: Option<MfmDiagnostics>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    iter: usize,
    #[serde(rename = "k_or_T")]
    k_or_t: usize,
    log_post: f64,
    atoms_json: String,
    weights_json: String,
}

impl PosteriorTrace {
    /// Writes `iter,k_or_T,log_post,atoms_json,weights_json` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        w.write_record(["iter", "k_or_T", "log_post", "atoms_json", "weights_json"])
            .map_err(csv_err)?;
        for s in &self.states {
            w.serialize(CsvRow {
                iter: s.iter,
                k_or_t: s.k,
                log_post: s.log_post,
                atoms_json: serde_json::to_string(s.mixture.atoms())?,
                weights_json: serde_json::to_string(s.mixture.weights())?,
            })
            .map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads the states written by [`PosteriorTrace::write_csv`].
    pub fn read_csv_states<R: Read>(input: R) -> Result<Vec<TraceState>> {
        let mut r = csv::Reader::from_reader(input);
        let mut states = Vec::new();
        for row in r.deserialize::<CsvRow>() {
            let row = row.map_err(csv_err)?;
            let atoms: Vec<f64> = serde_json::from_str(&row.atoms_json)?;
            let weights: Vec<f64> = serde_json::from_str(&row.weights_json)?;
            states.push(TraceState {
                iter: row.iter,
                k: row.k_or_t,
                log_post: row.log_post,
                mixture: AtomicMixture::new(atoms, weights)?,
            });
        }
        Ok(states)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Posterior pmf of `k` (or `T_n`), the modal mixing measure and optionally the
/// mean `W_1` distance of the sampled measures to a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub k_pmf: BTreeMap<usize, f64>,
    pub modal_k: usize,
    /// Highest-log-posterior state among those with the modal `k`.
    pub modal_mixture: AtomicMixture,
    pub mean_w1: Option<f64>,
}

impl PosteriorSummary {
    /// `P(k > k0)` under the empirical pmf.
    pub fn mass_above(&self, k0: usize) -> f64 {
        self.k_pmf.range(k0 + 1..).map(|(_, p)| p).sum()
    }

    pub fn pmf(&self, k: usize) -> f64 {
        self.k_pmf.get(&k).copied().unwrap_or(0.0)
    }
}

pub fn posterior_summaries(
    states: &[TraceState],
    reference: Option<&AtomicMixture>,
) -> Result<PosteriorSummary> {
    if states.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for s in states {
        *counts.entry(s.k).or_default() += 1;
    }
    // ties go to the smaller k
    let modal_k = counts
        .iter()
        .fold((0, 0), |best, (&k, &c)| if c > best.1 { (k, c) } else { best })
        .0;
    let total = states.len() as f64;
    let k_pmf = counts.iter().map(|(&k, &c)| (k, c as f64 / total)).collect();
    let modal = states
        .iter()
        .filter(|s| s.k == modal_k)
        .fold(None::<&TraceState>, |best, s| match best {
            Some(b) if b.log_post >= s.log_post => Some(b),
            _ => Some(s),
        })
        .expect("modal slice is nonempty");
    let mean_w1 = reference.map(|r| {
        states.iter().map(|s| wasserstein(&s.mixture, r, 1.0)).sum::<f64>() / total
    });
    Ok(PosteriorSummary {
        k_pmf,
        modal_k,
        modal_mixture: modal.mixture.clone(),
        mean_w1,
    })
}

/// Total-variation distance between two pmfs on the positive integers.
pub fn total_variation(p: &BTreeMap<usize, f64>, q: &BTreeMap<usize, f64>) -> f64 {
    let keys: std::collections::BTreeSet<usize> = p.keys().chain(q.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) - q.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(iter: usize, atoms: Vec<f64>, log_post: f64) -> TraceState {
        TraceState {
            iter,
            k: atoms.len(),
            log_post,
            mixture: AtomicMixture::uniform(atoms).unwrap(),
        }
    }

    #[test]
    fn summaries_count_and_pick_mode() {
        let mut states = Vec::new();
        for i in 0..10 {
            if i < 6 {
                states.push(state(i, vec![-1.0, 0.0, 1.0], i as f64));
            } else {
                states.push(state(i, vec![-1.0, 0.0, 1.0, 2.0], 100.0));
            }
        }
        let s = posterior_summaries(&states, None).unwrap();
        assert_eq!(s.modal_k, 3);
        assert!((s.pmf(3) - 0.6).abs() < 1e-15 && (s.pmf(4) - 0.4).abs() < 1e-15);
        assert!((s.mass_above(3) - 0.4).abs() < 1e-15);
        assert_eq!(s.modal_mixture, states[5].mixture);

        let same = vec![state(1, vec![0.5], 0.0); 4];
        let s = posterior_summaries(&same, Some(&AtomicMixture::point_mass(0.0))).unwrap();
        assert_eq!(s.k_pmf.len(), 1);
        assert_eq!(s.modal_mixture, same[0].mixture);
        assert!((s.mean_w1.unwrap() - 0.5).abs() < 1e-15);
        assert!(posterior_summaries(&[], None).is_err());
    }

    #[test]
    fn config_defaults_and_lengths() {
        let c = SamplerConfig::paper_scale();
        assert_eq!(c.trace_len(), 1000);
        assert_eq!((1..=c.iterations).filter(|&i| c.records(i)).count(), 1000);
        assert!(c.validate().is_ok());
        let bad = SamplerConfig { alpha: Some(1.5), ..SamplerConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig { burn_in: 30_000, ..SamplerConfig::default() };
        assert!(bad.validate().is_err());
        let parsed: SamplerConfig = serde_json::from_str(r#"{"iterations": 50, "burn_in": 10, "alpha": 0.5}"#).unwrap();
        assert_eq!(parsed.thin, 20);
        assert_eq!(parsed.alpha, Some(0.5));
    }

    #[test]
    fn csv_round_trip() {
        let trace = PosteriorTrace {
            kind: TraceKind::Mfm,
            states: vec![state(20, vec![-1.0, 2.5], -3.25), state(40, vec![0.125], -1.0)],
            burn_in: 0,
            thin: 20,
            seed: 1,
            diagnostics: None,
        };
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("iter,k_or_T,log_post,atoms_json,weights_json\n"));
        let back = PosteriorTrace::read_csv_states(&buf[..]).unwrap();
        assert_eq!(back, trace.states);
    }
}

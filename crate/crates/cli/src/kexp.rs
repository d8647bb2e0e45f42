use std::io::Write;

use mixbayes_core::mixture::sample;
use mixbayes_core::samplers::{posterior_summaries, run_dp, run_mfm};
use mixbayes_core::{AtomicMixture, SamplerConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::experiment::Method;
use crate::seeds::{cell_seed, data_seed};

/// Number of pmf columns: `k1` to `k9`, then `k10+` for everything from ten up.
pub const PMF_BINS: usize = 10;

const LABEL: &str = "kexp";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KExperimentPlan {
    pub truth: AtomicMixture,
    pub n_grid: Vec<usize>,
    pub methods: Vec<Method>,
    pub replicates: usize,
    pub seed: u64,
    pub sampler: SamplerConfig,
}

impl Default for KExperimentPlan {
    fn default() -> Self {
        Self {
            truth: AtomicMixture::uniform(vec![-2.0, 0.0, 2.0]).unwrap(),
            n_grid: vec![50, 100, 250, 1000, 2500],
            methods: vec![Method::MfmVary, Method::MfmConst, Method::DpVary, Method::DpConst],
            replicates: 5,
            seed: 0,
            sampler: SamplerConfig::default(),
        }
    }
}

/// Posterior pmf of `k` (MFM) or `T_n` (DP) for one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct KRow {
    pub method: Method,
    pub n: usize,
    pub replicate: usize,
    pub mode: usize,
    pub pmf: [f64; PMF_BINS],
}

impl KRow {
    /// Posterior mass on values above `k`.
    pub fn mass_above(&self, k: usize) -> f64 {
        self.pmf[k.min(PMF_BINS)..].iter().sum()
    }
}

fn header() -> Vec<String> {
    let mut h: Vec<String> = ["method", "n", "replicate", "mode"].iter().map(|s| s.to_string()).collect();
    h.extend((1..PMF_BINS).map(|k| format!("k{k}")));
    h.push(format!("k{PMF_BINS}+"));
    h
}

fn run_cell(plan: &KExperimentPlan, data: &[f64], method: Method, n: usize, rep: usize) -> Result<KRow> {
    let cfg = SamplerConfig {
        seed: cell_seed(plan.seed, LABEL, method.name(), n, rep),
        ..plan.sampler.clone()
    };
    let trace = if let Some(prior) = method.mfm_prior() {
        run_mfm(data, &prior, &cfg)?
    } else if let Some(prior) = method.dp_prior() {
        run_dp(data, &prior, &cfg)?
    } else {
        return Err(CliError::Config(format!("{method} has no posterior on k")));
    };
    let summary = posterior_summaries(&trace.states, None)?;
    let mut pmf = [0.0; PMF_BINS];
    for (&k, &p) in &summary.k_pmf {
        pmf[k.min(PMF_BINS) - 1] += p;
    }
    Ok(KRow {
        method,
        n,
        replicate: rep,
        mode: summary.modal_k,
        pmf,
    })
}

/// Posterior pmfs of the number of components for every `(n, replicate, method)`.
pub fn run_k_experiment<W: Write>(plan: &KExperimentPlan, out: W) -> Result<Vec<KRow>> {
    if plan.replicates == 0 || plan.n_grid.is_empty() || plan.n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("need a strictly increasing n_grid and at least one replicate".into()));
    }
    if let Some(m) = plan.methods.iter().find(|m| m.mfm_prior().is_none() && m.dp_prior().is_none()) {
        return Err(CliError::Config(format!("{m} has no posterior on k")));
    }
    plan.sampler.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(header())?;
    let mut rows = Vec::new();
    for &n in &plan.n_grid {
        let datasets = (0..plan.replicates)
            .into_par_iter()
            .map(|rep| sample(&plan.truth, n, data_seed(plan.seed, LABEL, n, rep)).map(|d| d.observations))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let cells: Vec<(usize, Method)> = (0..plan.replicates)
            .flat_map(|rep| plan.methods.iter().map(move |&m| (rep, m)))
            .collect();
        let batch = cells
            .par_iter()
            .map(|&(rep, m)| run_cell(plan, &datasets[rep], m, n, rep))
            .collect::<Result<Vec<_>>>()?;
        for row in &batch {
            let mut record = vec![row.method.to_string(), n.to_string(), row.replicate.to_string(), row.mode.to_string()];
            record.extend(row.pmf.iter().map(|p| p.to_string()));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        rows.extend(batch);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_columns() {
        let h = header();
        assert_eq!(h.len(), 4 + PMF_BINS);
        assert_eq!(h[4], "k1");
        assert_eq!(h.last().unwrap(), "k10+");
    }

    #[test]
    fn mass_above_counts_the_tail_bin() {
        let mut pmf = [0.0; PMF_BINS];
        pmf[2] = 0.7;
        pmf[3] = 0.2;
        pmf[9] = 0.1;
        let row = KRow { method: Method::DpConst, n: 10, replicate: 0, mode: 3, pmf };
        assert!((row.mass_above(3) - 0.3).abs() < 1e-12);
        assert_eq!(row.mass_above(12), 0.0);
    }
}

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use mixbayes_core::mixture::sample;
use mixbayes_core::moments::{default_eta, fit_mixture_from_moments, median_denoised_from_slice};
use mixbayes_core::samplers::{em_map_restarts, posterior_summaries, run_dp, run_mfm};
use mixbayes_core::{wasserstein, AtomicMixture, DpPriorSpec, PriorSpec, SamplerConfig, Schedule, DEFAULT_L};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::seeds::{cell_seed, data_seed};

/// EM restarts for the MAP estimators.
pub const MAP_RESTARTS: usize = 20;
const MAP_MAX_ITER: usize = 1000;
const MAP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Case1,
    Case2,
    Case3,
    Case4,
    Custom(AtomicMixture),
}

impl Case {
    pub fn truth(&self) -> AtomicMixture {
        match self {
            Self::Case1 => builtin_truth(1).unwrap(),
            Self::Case2 => builtin_truth(2).unwrap(),
            Self::Case3 => builtin_truth(3).unwrap(),
            Self::Case4 => builtin_truth(4).unwrap(),
            Self::Custom(nu) => nu.clone(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Case1 => "case1",
            Self::Case2 => "case2",
            Self::Case3 => "case3",
            Self::Case4 => "case4",
            Self::Custom(_) => "custom",
        }
    }
}

/// The benchmark truths: well-separated, weakly separated, weak component and
/// higher-order.
pub fn builtin_truth(case: usize) -> Result<AtomicMixture> {
    let nu = match case {
        1 => AtomicMixture::uniform(vec![-3.0, -1.0, 1.0, 3.0]),
        2 => AtomicMixture::uniform(vec![-1.5, -1.0, 1.0, 3.0]),
        3 => AtomicMixture::new(vec![-3.0, -1.0, 1.0, 3.0], vec![0.4, 0.1, 0.25, 0.25]),
        4 => AtomicMixture::uniform(vec![-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0]),
        other => return Err(CliError::Config(format!("unknown case {other}; expected 1..=4"))),
    };
    Ok(nu?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MfmVary,
    MfmConst,
    MapExact,
    MapOver,
    DpVary,
    DpConst,
    Moments,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Self::MfmVary,
        Self::MfmConst,
        Self::MapExact,
        Self::MapOver,
        Self::DpVary,
        Self::DpConst,
        Self::Moments,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::MfmVary => "mfm_vary",
            Self::MfmConst => "mfm_const",
            Self::MapExact => "map_exact",
            Self::MapOver => "map_over",
            Self::DpVary => "dp_vary",
            Self::DpConst => "dp_const",
            Self::Moments => "moments",
        }
    }

    /// MFM prior: truncated Poisson with `lambda_n = 1/n`, or constant 0.01.
    pub fn mfm_prior(self) -> Option<PriorSpec> {
        match self {
            Self::MfmVary => Some(PriorSpec::poisson(Schedule::InverseN)),
            Self::MfmConst => Some(PriorSpec::poisson(Schedule::Const(0.01))),
            _ => None,
        }
    }

    /// DP prior: `kappa_n = 1/(n log n)`, or constant 0.01.
    pub fn dp_prior(self) -> Option<DpPriorSpec> {
        match self {
            Self::DpVary => Some(DpPriorSpec::vary()),
            Self::DpConst => Some(DpPriorSpec::constant(0.01)),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CliError::Config(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub case: Case,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub seed: u64,
    /// Chain settings for the MFM and DP methods; seeds are overridden per cell.
    #[serde(default)]
    pub sampler: SamplerConfig,
    /// When false, `wall_ms` is written as 0 so that reruns are byte-identical.
    #[serde(default = "yes")]
    pub timing: bool,
}

fn yes() -> bool {
    true
}

impl ExperimentPlan {
    pub fn new(case: Case, n_grid: Vec<usize>, replicates: usize, methods: Vec<Method>, seed: u64) -> Self {
        Self {
            case,
            n_grid,
            replicates,
            methods,
            seed,
            sampler: SamplerConfig::default(),
            timing: true,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(s).map_err(|e| CliError::Config(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() || self.n_grid[0] == 0 || self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config("n_grid must be positive and strictly increasing".into()));
        }
        if self.replicates == 0 {
            return Err(CliError::Config("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods requested".into()));
        }
        self.sampler.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Case::Custom(nu) = &self.case {
            nu.check_bound(DEFAULT_L).map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// One `(method, n, replicate)` cell. Failed cells carry the message in `error`
/// and leave the numeric columns empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub case: String,
    pub method: Method,
    pub n: usize,
    pub replicate: usize,
    pub w1_error: Option<f64>,
    pub k_mode: Option<usize>,
    pub wall_ms: u64,
    /// The estimate as JSON, so `w1_error` can be recomputed.
    pub estimate: String,
    pub error: String,
}

impl ResultRow {
    pub fn failed(&self) -> bool {
        !self.error.is_empty()
    }

    pub fn estimate(&self) -> Option<AtomicMixture> {
        AtomicMixture::from_json(&self.estimate).ok()
    }
}

/// Point estimate of one method and its `k`.
pub fn estimate(method: Method, data: &[f64], k_star: usize, sampler: &SamplerConfig, seed: u64) -> Result<(AtomicMixture, usize)> {
    let cfg = SamplerConfig {
        seed,
        ..sampler.clone()
    };
    let fitted = match method {
        Method::MfmVary | Method::MfmConst => {
            let trace = run_mfm(data, &method.mfm_prior().unwrap(), &cfg)?;
            let s = posterior_summaries(&trace.states, None)?;
            (s.modal_mixture, s.modal_k)
        }
        Method::DpVary | Method::DpConst => {
            let trace = run_dp(data, &method.dp_prior().unwrap(), &cfg)?;
            let s = posterior_summaries(&trace.states, None)?;
            (s.modal_mixture, s.modal_k)
        }
        Method::MapExact | Method::MapOver => {
            let k = if method == Method::MapExact { k_star } else { 2 * k_star };
            let prior = PriorSpec::poisson(Schedule::InverseN);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let fit = em_map_restarts(data, k, &prior, MAP_RESTARTS, MAP_MAX_ITER, MAP_TOL, &mut rng)?;
            (fit.mixture, k)
        }
        Method::Moments => {
            let est = median_denoised_from_slice(data, k_star, default_eta(data.len()))?;
            let fit = fit_mixture_from_moments(&est.moments(), k_star, DEFAULT_L)?;
            (fit.mixture, k_star)
        }
    };
    Ok(fitted)
}

fn run_cell(plan: &ExperimentPlan, truth: &AtomicMixture, data: &[f64], method: Method, n: usize, rep: usize) -> ResultRow {
    let label = plan.case.label();
    let seed = cell_seed(plan.seed, label, method.name(), n, rep);
    let start = Instant::now();
    let outcome = estimate(method, data, truth.len(), &plan.sampler, seed);
    let wall_ms = if plan.timing { start.elapsed().as_millis() as u64 } else { 0 };
    let mut row = ResultRow {
        case: label.to_string(),
        method,
        n,
        replicate: rep,
        w1_error: None,
        k_mode: None,
        wall_ms,
        estimate: String::new(),
        error: String::new(),
    };
    match outcome {
        Ok((nu, k)) => {
            // score the archived form so the CSV reproduces w1_error exactly
            let json = nu.to_json();
            let archived = AtomicMixture::from_json(&json).unwrap_or(nu);
            row.w1_error = Some(wasserstein(&archived, truth, 1.0));
            row.k_mode = Some(k);
            row.estimate = json;
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

/// Runs every `(n, replicate, method)` cell of the plan.
///
/// Cells of one sample size run on the rayon pool; their rows are appended to
/// `out` in `(replicate, method)` order and flushed before the next sample size
/// starts. Set `header` to false when appending to an existing file.
pub fn run_experiment<W: Write>(plan: &ExperimentPlan, out: W, header: bool) -> Result<Vec<ResultRow>> {
    plan.validate()?;
    let truth = plan.case.truth();
    let label = plan.case.label();
    let mut writer = csv::WriterBuilder::new().has_headers(header).from_writer(out);
    let mut rows = Vec::new();
    for &n in &plan.n_grid {
        let datasets = (0..plan.replicates)
            .into_par_iter()
            .map(|rep| sample(&truth, n, data_seed(plan.seed, label, n, rep)).map(|d| d.observations))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let cells: Vec<(usize, Method)> = (0..plan.replicates)
            .flat_map(|rep| plan.methods.iter().map(move |&m| (rep, m)))
            .collect();
        let batch: Vec<ResultRow> = cells
            .par_iter()
            .map(|&(rep, m)| run_cell(plan, &truth, &datasets[rep], m, n, rep))
            .collect();
        for row in &batch {
            writer.serialize(row)?;
        }
        writer.flush()?;
        rows.extend(batch);
    }
    Ok(rows)
}

/// Mean `w1_error` over the successful replicates of each `(method, n)`.
pub fn mean_errors(rows: &[ResultRow]) -> std::collections::BTreeMap<(Method, usize), f64> {
    let mut acc: std::collections::BTreeMap<(Method, usize), (f64, usize)> = Default::default();
    for r in rows {
        if let Some(w) = r.w1_error {
            let e = acc.entry((r.method, r.n)).or_default();
            e.0 += w;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(key, (s, c))| (key, s / c as f64)).collect()
}

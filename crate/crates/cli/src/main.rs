use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mixbayes_cli::experiment::{estimate, Method};
use mixbayes_cli::kexp::KExperimentPlan;
use mixbayes_cli::rates::{read_results, write_rates};
use mixbayes_cli::{builtin_truth, rates_table, run_experiment, run_k_experiment, CliError, ExperimentPlan, Result};
use mixbayes_core::mixture::sample;
use mixbayes_core::samplers::{posterior_summaries, run_dp, run_mfm};
use mixbayes_core::{wasserstein, AtomicMixture, Dataset, DpPriorSpec, PriorSpec, SamplerConfig, Schedule, DEFAULT_L};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "mixbayes", version, about = "Bayesian estimation of Gaussian location mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from one of the builtin truths.
    Gen {
        #[arg(long)]
        case: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit one method to a dataset.
    Fit {
        #[arg(long)]
        method: String,
        #[arg(long)]
        data: PathBuf,
        /// Prior JSON (MFM methods) or `{"concentration": ..., "L": ...}` (DP methods).
        #[arg(long)]
        config: Option<PathBuf>,
        /// SamplerConfig JSON.
        #[arg(long)]
        sampler: Option<PathBuf>,
        /// Number of components for the MAP and moment estimators.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paper_scale: bool,
        /// Trace CSV for the samplers, estimate JSON otherwise.
        #[arg(long)]
        out: PathBuf,
    },
    /// Wasserstein distance between two mixing distributions stored as JSON.
    Eval {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        q: f64,
    },
    /// Run an estimator comparison plan, appending rows to the output CSV.
    Experiment {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        paper_scale: bool,
        /// Write wall_ms as 0 so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Posterior of the number of components on the three-atom truth.
    Kexp {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        paper_scale: bool,
    },
    /// Rate curves, optionally next to the mean errors of an experiment.
    Rates {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        k_star: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        k0: usize,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, default_value_t = 10)]
        kbar: usize,
        #[arg(long, value_delimiter = ',', default_value = "250,500,750,1000,1250,1500,1750,2000")]
        n_grid: Vec<usize>,
        #[arg(long)]
        results: Option<PathBuf>,
    },
}

#[derive(Deserialize)]
struct DpConfig {
    concentration: String,
    #[serde(rename = "L", default = "default_l")]
    bound: f64,
}

fn default_l() -> f64 {
    DEFAULT_L
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn sampler_config(path: Option<&Path>, paper_scale: bool) -> Result<SamplerConfig> {
    let mut cfg = match path {
        Some(p) => read_json(p)?,
        None => SamplerConfig::default(),
    };
    if paper_scale {
        let scale = SamplerConfig::paper_scale();
        cfg.iterations = scale.iterations;
        cfg.burn_in = scale.burn_in;
        cfg.thin = scale.thin;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

#[allow(clippy::too_many_arguments)]
fn fit(
    method: &str,
    data: &Path,
    config: Option<&Path>,
    sampler: Option<&Path>,
    k: Option<usize>,
    seed: Option<u64>,
    paper_scale: bool,
    out: &Path,
) -> Result<()> {
    let method: Method = method.parse()?;
    let data = Dataset::read(data)?;
    let mut cfg = sampler_config(sampler, paper_scale)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let trace = if let Some(default) = method.mfm_prior() {
        let prior = match config {
            Some(p) => PriorSpec::from_json(&fs::read_to_string(p)?).map_err(|e| CliError::Config(e.to_string()))?,
            None => default,
        };
        Some(run_mfm(&data.observations, &prior, &cfg)?)
    } else if let Some(default) = method.dp_prior() {
        let prior = match config {
            Some(p) => {
                let c: DpConfig = read_json(p)?;
                DpPriorSpec {
                    concentration: Schedule::parse(&c.concentration).map_err(|e| CliError::Config(e.to_string()))?,
                    bound: c.bound,
                }
            }
            None => default,
        };
        Some(run_dp(&data.observations, &prior, &cfg)?)
    } else {
        None
    };
    match trace {
        Some(trace) => {
            let mut w = create(out)?;
            trace.write_csv(&mut w)?;
            w.flush()?;
            let s = posterior_summaries(&trace.states, data.truth.as_ref())?;
            let summary = serde_json::json!({
                "modal_k": s.modal_k,
                "k_pmf": s.k_pmf,
                "modal_mixture": s.modal_mixture,
                "mean_w1_to_truth": s.mean_w1,
            });
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        None => {
            let k = k
                .or(data.truth.as_ref().map(AtomicMixture::len))
                .ok_or_else(|| CliError::Config(format!("{method} needs --k (or a dataset with a known truth)")))?;
            let (nu, _) = estimate(method, &data.observations, k, &cfg, cfg.seed)?;
            let mut w = create(out)?;
            writeln!(w, "{}", nu.to_json())?;
            w.flush()?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen { case, n, seed, out } => {
            let truth = builtin_truth(case)?;
            let ds = sample(&truth, n, seed)?;
            let (txt, _) = ds.write(&out, &format!("case{case}_n{n}_s{seed}"))?;
            println!("{}", txt.display());
        }
        Command::Fit {
            method,
            data,
            config,
            sampler,
            k,
            seed,
            paper_scale,
            out,
        } => fit(&method, &data, config.as_deref(), sampler.as_deref(), k, seed, paper_scale, &out)?,
        Command::Eval { estimate, truth, q } => {
            if q < 1.0 {
                return Err(CliError::Config(format!("q = {q} must be at least 1")));
            }
            let a = AtomicMixture::from_json(&fs::read_to_string(estimate)?)?;
            let b = AtomicMixture::from_json(&fs::read_to_string(truth)?)?;
            println!("{}", wasserstein(&a, &b, q));
        }
        Command::Experiment {
            plan,
            out,
            paper_scale,
            no_timing,
        } => {
            let mut plan = ExperimentPlan::from_json(&fs::read_to_string(plan)?)?;
            if paper_scale {
                let scale = SamplerConfig::paper_scale();
                plan.sampler.iterations = scale.iterations;
                plan.sampler.burn_in = scale.burn_in;
                plan.sampler.thin = scale.thin;
            }
            plan.timing &= !no_timing;
            let fresh = !out.exists() || fs::metadata(&out)?.len() == 0;
            if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            let file = fs::OpenOptions::new().create(true).append(true).open(&out)?;
            let rows = run_experiment(&plan, file, fresh)?;
            let failed = rows.iter().filter(|r| r.failed()).count();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", rows.len());
                return Ok(ExitCode::from(3));
            }
        }
        Command::Kexp {
            out,
            n_grid,
            replicates,
            seed,
            paper_scale,
        } => {
            let mut plan = KExperimentPlan { seed, ..Default::default() };
            if let Some(g) = n_grid {
                plan.n_grid = g;
            }
            if let Some(r) = replicates {
                plan.replicates = r;
            }
            if paper_scale {
                plan.sampler = SamplerConfig::paper_scale();
            }
            run_k_experiment(&plan, create(&out)?)?;
        }
        Command::Rates {
            out,
            k_star,
            k0,
            gamma,
            kbar,
            n_grid,
            results,
        } => {
            let rows = match results {
                Some(p) => Some(read_results(fs::File::open(p)?)?),
                None => None,
            };
            let table = rates_table(&k_star, k0, gamma, kbar, &n_grid, rows.as_deref())?;
            write_rates(&table, &k_star, create(&out)?)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Config(_)
                | CliError::Json(_)
                | CliError::Core(mixbayes_core::Error::InvalidArgument(_) | mixbayes_core::Error::Parse(_)) => {
                    ExitCode::from(2)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}

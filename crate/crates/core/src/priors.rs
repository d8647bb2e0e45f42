//! Priors on mixing distributions: mixtures of finite mixtures with an
//! `n`-dependent prior on the number of components, spike-and-slab weights and
//! the Dirichlet process, together with the contraction-rate calculators.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::mixture::{AtomicMixture, DEFAULT_L};

/// Default constant in the exponent of the `k`-prior decay.
pub const DEFAULT_A: f64 = 4.0;

/// Upper bound on the true number of components: `floor(log n / log log n)`,
/// at least one (and exactly one for `n < 8`).
pub fn default_kbar(n: usize) -> usize {
    if n < 8 {
        return 1;
    }
    let ln = (n as f64).ln();
    ((ln / ln.ln()).floor() as usize).max(1)
}

/// How a hyperparameter depends on the sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    /// The decaying schedule of the family: `a exp(-A kbar log n)` (Poisson mean,
    /// geometric failure probability) or `a exp(-2 A kbar log n)` (binomial success).
    Theory,
    /// `1 / n`.
    InverseN,
    /// `1 / (n log n)`.
    InverseNLogN,
    Const(f64),
}

impl Schedule {
    pub fn parse(s: &str) -> Result<Self> {
        let t = s.trim().replace(' ', "");
        match t.as_str() {
            "theory" => Ok(Self::Theory),
            "1/n" => Ok(Self::InverseN),
            "1/(nlogn)" | "1/nlogn" => Ok(Self::InverseNLogN),
            _ => {
                let v = t.strip_prefix("const:").unwrap_or(&t);
                v.parse::<f64>()
                    .map(Self::Const)
                    .map_err(|_| Error::Parse(format!("unknown schedule {s:?}")))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Theory => "theory".into(),
            Self::InverseN => "1/n".into(),
            Self::InverseNLogN => "1/(n log n)".into(),
            Self::Const(c) => format!("const:{c}"),
        }
    }

    fn eval_plain(&self, n: f64) -> Option<f64> {
        match *self {
            Self::InverseN => Some(1.0 / n.max(1.0)),
            Self::InverseNLogN => Some(1.0 / (n.max(1.0) * n.ln().max(f64::MIN_POSITIVE))),
            Self::Const(c) => Some(c),
            Self::Theory => None,
        }
    }
}

/// Family of the prior on the number of components `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KFamily {
    /// `k - 1 ~ Poisson(lambda_n)`.
    Poisson { lambda: Schedule },
    /// `P(k) = (1 - p_n)^(k-1) p_n`.
    Geometric { p: Schedule },
    /// `k - 1 ~ Binomial(kbar_n - 1, p_n)`.
    Binomial { p: Schedule },
    /// Spike-and-slab unnormalized weights; induces the binomial law on `k`
    /// and `Dirichlet(shape, ..., shape)` weights.
    SpikeSlab { p: Schedule, shape: f64, rate: f64 },
}

/// The mixture-of-finite-mixtures prior: `k`, then symmetric Dirichlet weights,
/// then i.i.d. uniform atoms on `[-L, L]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    pub family: KFamily,
    /// Symmetric Dirichlet concentration of the weights.
    pub dirichlet: f64,
    pub bound: f64,
    /// Scale constant `a`.
    pub a: f64,
    /// Decay constant `A`.
    pub big_a: f64,
    /// Fixed `kbar`; `None` uses [`default_kbar`].
    pub kbar: Option<usize>,
}

impl PriorSpec {
    pub fn new(family: KFamily) -> Self {
        let dirichlet = match family {
            KFamily::SpikeSlab { shape, .. } => shape,
            _ => 1.0,
        };
        Self {
            family,
            dirichlet,
            bound: DEFAULT_L,
            a: 1.0,
            big_a: DEFAULT_A,
            kbar: None,
        }
    }

    /// Poisson prior with the given mean schedule.
    pub fn poisson(lambda: Schedule) -> Self {
        Self::new(KFamily::Poisson { lambda })
    }

    pub fn geometric(p: Schedule) -> Self {
        Self::new(KFamily::Geometric { p })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bound > 0.0) {
            return Err(Error::InvalidArgument("L must be positive".into()));
        }
        if !(self.dirichlet > 0.0) || !(self.a > 0.0) || !(self.big_a > 0.0) {
            return Err(Error::InvalidArgument(
                "Dirichlet concentration, a and A must be positive".into(),
            ));
        }
        if let KFamily::SpikeSlab { shape, rate, .. } = self.family {
            if !(shape > 0.0) || !(rate > 0.0) {
                return Err(Error::InvalidArgument("gamma shape and rate must be positive".into()));
            }
        }
        for n in [8usize, 1000] {
            let v = self.schedule_value(n);
            let ok = match self.family {
                KFamily::Poisson { .. } => v > 0.0 && v.is_finite(),
                _ => v > 0.0 && v <= 1.0,
            };
            if !ok {
                return Err(Error::InvalidArgument(format!(
                    "schedule evaluates to {v} at n = {n}"
                )));
            }
        }
        Ok(())
    }

    pub fn kbar(&self, n: usize) -> usize {
        self.kbar.unwrap_or_else(|| default_kbar(n)).max(1)
    }

    /// Largest `k` with prior mass: `10 kbar_n`, or `kbar_n` for the binomial laws.
    pub fn k_cap(&self, n: usize) -> usize {
        match self.family {
            KFamily::Binomial { .. } | KFamily::SpikeSlab { .. } => self.kbar(n),
            _ => 10 * self.kbar(n),
        }
    }

    fn theory_decay(&self, n: usize, factor: f64) -> f64 {
        let n = n.max(1) as f64;
        self.a * (-factor * self.big_a * self.kbar(n as usize) as f64 * n.ln()).exp()
    }

    /// The family's hyperparameter at sample size `n`: Poisson mean, geometric
    /// success probability, or binomial success probability.
    pub fn schedule_value(&self, n: usize) -> f64 {
        match self.family {
            KFamily::Poisson { lambda } => lambda
                .eval_plain(n as f64)
                .unwrap_or_else(|| self.theory_decay(n, 1.0)),
            KFamily::Geometric { p } => p
                .eval_plain(n as f64)
                .unwrap_or_else(|| 1.0 - self.theory_decay(n, 1.0)),
            KFamily::Binomial { p } | KFamily::SpikeSlab { p, .. } => p
                .eval_plain(n as f64)
                .unwrap_or_else(|| self.theory_decay(n, 2.0)),
        }
    }

    fn unnormalized_log_pmf(&self, n: usize, k: usize) -> f64 {
        let v = self.schedule_value(n);
        let km1 = (k - 1) as f64;
        match self.family {
            KFamily::Poisson { .. } => -v + km1 * v.ln() - ln_gamma(k as f64),
            KFamily::Geometric { p } => {
                // the theory schedule has p_n within 1e-14 of one, so 1 - p_n is formed directly
                let log_q = match p {
                    Schedule::Theory => self.theory_decay(n, 1.0).ln(),
                    _ => (-v).ln_1p(),
                };
                if k == 1 {
                    v.ln()
                } else {
                    km1 * log_q + v.ln()
                }
            }
            KFamily::Binomial { .. } | KFamily::SpikeSlab { .. } => {
                let trials = (self.kbar(n) - 1) as f64;
                let log_choose =
                    ln_gamma(trials + 1.0) - ln_gamma(km1 + 1.0) - ln_gamma(trials - km1 + 1.0);
                let succ = if km1 > 0.0 { km1 * v.ln() } else { 0.0 };
                let fail = if trials - km1 > 0.0 {
                    (trials - km1) * (-v).ln_1p()
                } else {
                    0.0
                };
                log_choose + succ + fail
            }
        }
    }

    /// `log P(k)` for `k = 1..=k_cap(n)`, normalized over the truncated support.
    pub fn k_log_pmf_table(&self, n: usize) -> Vec<f64> {
        let cap = self.k_cap(n);
        let raw: Vec<f64> = (1..=cap).map(|k| self.unnormalized_log_pmf(n, k)).collect();
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + raw.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        raw.iter().map(|v| v - lse).collect()
    }

    /// `log P(k)`; `-inf` outside the truncated support.
    pub fn k_log_pmf(&self, n: usize, k: usize) -> f64 {
        if k == 0 || k > self.k_cap(n) {
            return f64::NEG_INFINITY;
        }
        self.k_log_pmf_table(n)[k - 1]
    }

    /// Log-density of `Dirichlet(c, ..., c)` at `w`.
    pub fn dirichlet_log_density(&self, w: &[f64]) -> f64 {
        dirichlet_symmetric_log_density(self.dirichlet, w)
    }
}

/// Log-density of the symmetric Dirichlet with concentration `c`.
pub fn dirichlet_symmetric_log_density(c: f64, w: &[f64]) -> f64 {
    let k = w.len() as f64;
    let norm = ln_gamma(k * c) - k * ln_gamma(c);
    if c == 1.0 {
        return norm;
    }
    norm + (c - 1.0) * w.iter().map(|x| x.ln()).sum::<f64>()
}

/// A prior mass value, flagged when it underflowed below `1e-300`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmfValue {
    pub value: f64,
    pub underflow: bool,
}

/// `Pi(k)` for the configured family at sample size `n`.
pub fn k_prior_pmf(spec: &PriorSpec, n: usize, k: usize) -> Result<PmfValue> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let v = spec.k_log_pmf(n, k).exp();
    Ok(if v < 1e-300 {
        PmfValue {
            value: 0.0,
            underflow: true,
        }
    } else {
        PmfValue {
            value: v,
            underflow: false,
        }
    })
}

/// Constants of the two conditions on the `k`-prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct P1Constants {
    /// Ratio condition `Pi(k+1) / Pi(k) <= c1 exp(-A kbar log n)`.
    pub c1: f64,
    /// Lower condition `Pi(k) >= c2 exp(-c3 kbar log n k)` for `k <= kbar`.
    pub c2: f64,
    pub c3: f64,
}

impl P1Constants {
    /// Constants under which the decaying schedules of each family satisfy both
    /// conditions for `n >= 3`.
    pub fn for_spec(spec: &PriorSpec) -> Self {
        let slack = (-spec.a.ln()).max(0.0);
        match spec.family {
            KFamily::Poisson { .. } => Self {
                c1: spec.a,
                c2: (-spec.a).exp(),
                c3: spec.big_a + 1.0 + slack,
            },
            KFamily::Geometric { .. } => Self {
                c1: spec.a,
                c2: (1.0 - spec.a * 3f64.powf(-spec.big_a)).max(f64::MIN_POSITIVE),
                c3: spec.big_a + slack,
            },
            KFamily::Binomial { .. } | KFamily::SpikeSlab { .. } => Self {
                c1: 2.0 * spec.a,
                c2: 0.5,
                c3: 2.0 * spec.big_a + slack,
            },
        }
    }
}

/// Outcome of [`validate_assumption_p1`]. Margins are on the log scale;
/// positive means violated.
#[derive(Debug, Clone, PartialEq)]
pub struct P1Report {
    pub constants: P1Constants,
    pub ratio_checks: usize,
    pub lower_checks: usize,
    pub ratio_violations: usize,
    pub lower_violations: usize,
    pub worst_ratio_margin: f64,
    pub worst_lower_margin: f64,
}

impl P1Report {
    pub fn passed(&self) -> bool {
        self.ratio_violations == 0 && self.lower_violations == 0
    }
}

/// Numerically checks the ratio and lower-mass conditions on the `k`-prior over
/// a grid of sample sizes and component counts.
pub fn validate_assumption_p1(spec: &PriorSpec, n_grid: &[usize], k_grid: &[usize]) -> Result<P1Report> {
    validate_assumption_p1_with(spec, n_grid, k_grid, P1Constants::for_spec(spec))
}

pub fn validate_assumption_p1_with(
    spec: &PriorSpec,
    n_grid: &[usize],
    k_grid: &[usize],
    constants: P1Constants,
) -> Result<P1Report> {
    if n_grid.is_empty() || k_grid.is_empty() {
        return Err(Error::InvalidArgument("grids must be nonempty".into()));
    }
    const TOL: f64 = 1e-9;
    let mut report = P1Report {
        constants,
        ratio_checks: 0,
        lower_checks: 0,
        ratio_violations: 0,
        lower_violations: 0,
        worst_ratio_margin: f64::NEG_INFINITY,
        worst_lower_margin: f64::NEG_INFINITY,
    };
    for &n in n_grid {
        let table = spec.k_log_pmf_table(n);
        let kbar = spec.kbar(n) as f64;
        let log_n = (n as f64).ln();
        for &k in k_grid {
            if k >= 1 && k < table.len() {
                let margin = (table[k] - table[k - 1])
                    - (constants.c1.ln() - spec.big_a * kbar * log_n);
                report.ratio_checks += 1;
                report.worst_ratio_margin = report.worst_ratio_margin.max(margin);
                if margin > TOL {
                    report.ratio_violations += 1;
                }
            }
            if k >= 1 && k as f64 <= kbar && k <= table.len() {
                let margin =
                    (constants.c2.ln() - constants.c3 * kbar * log_n * k as f64) - table[k - 1];
                report.lower_checks += 1;
                report.worst_lower_margin = report.worst_lower_margin.max(margin);
                if margin > TOL {
                    report.lower_violations += 1;
                }
            }
        }
    }
    Ok(report)
}

/// One draw of the spike-and-slab construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeSlabDraw {
    pub k: usize,
    /// Normalized weights of the nonzero slots, in slot order.
    pub weights: Vec<f64>,
}

/// Simulates the law of `(k, w)` induced by spike-and-slab unnormalized weights:
/// slot 1 is always a `Gamma(shape, rate)` slab, slots `2..=kbar_n` are zero with
/// probability `1 - p_n`.
pub fn spike_slab_induced_law<R: Rng>(
    spec: &PriorSpec,
    n: usize,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<SpikeSlabDraw>> {
    let KFamily::SpikeSlab { shape, rate, .. } = spec.family else {
        return Err(Error::InvalidArgument("spec is not a spike-and-slab prior".into()));
    };
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be positive".into()));
    }
    let p = spec.schedule_value(n);
    let kbar = spec.kbar(n);
    let gamma = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let draw_slab = |rng: &mut R| loop {
        // shape < 1 can underflow to an exact zero, which would be misread as a spike
        let g: f64 = gamma.sample(rng);
        if g > 0.0 {
            break g;
        }
    };
    Ok((0..draws)
        .map(|_| {
            let mut raw = vec![draw_slab(rng)];
            for _ in 1..kbar {
                if rng.random::<f64>() < p {
                    raw.push(draw_slab(rng));
                }
            }
            let total: f64 = raw.iter().sum();
            SpikeSlabDraw {
                k: raw.len(),
                weights: raw.iter().map(|g| g / total).collect(),
            }
        })
        .collect())
}

/// Monte Carlo estimate of `P(sum_j |w_j - w0_j| <= 2 eta)` under a Dirichlet.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallBallReport {
    pub estimate: f64,
    pub standard_error: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Compares the Monte Carlo small-ball probability of `Dirichlet(kappa)` around
/// `w0` with the lower bound `eta^(2(k-1)) prod_j kappa_j`; passes unless the
/// estimate falls more than five standard errors below the bound.
pub fn dirichlet_small_ball_check<R: Rng>(
    kappa: &[f64],
    w0: &[f64],
    eta: f64,
    draws: usize,
    rng: &mut R,
) -> Result<SmallBallReport> {
    let k = kappa.len();
    if k == 0 || w0.len() != k {
        return Err(Error::InvalidArgument("kappa and w0 must have equal nonzero length".into()));
    }
    if kappa.iter().any(|&c| !(c > 0.0 && c <= 1.0)) {
        return Err(Error::InvalidArgument("concentrations must lie in (0, 1]".into()));
    }
    if !(eta > 0.0 && eta <= 1.0 / k as f64) || draws == 0 {
        return Err(Error::InvalidArgument("eta must lie in (0, 1/k] and draws be positive".into()));
    }
    let gammas: Vec<Gamma<f64>> = kappa
        .iter()
        .map(|&c| Gamma::new(c, 1.0).map_err(|e| Error::InvalidArgument(e.to_string())))
        .collect::<Result<_>>()?;
    let mut hits = 0usize;
    let mut g = vec![0.0; k];
    for _ in 0..draws {
        let total = loop {
            for (slot, d) in g.iter_mut().zip(&gammas) {
                *slot = d.sample(rng);
            }
            let t: f64 = g.iter().sum();
            if t > 0.0 {
                break t;
            }
        };
        let l1: f64 = g.iter().zip(w0).map(|(x, w)| (x / total - w).abs()).sum();
        if l1 <= 2.0 * eta {
            hits += 1;
        }
    }
    let estimate = hits as f64 / draws as f64;
    let standard_error = (estimate * (1.0 - estimate) / draws as f64).sqrt();
    let bound = eta.powi(2 * (k as i32 - 1)) * kappa.iter().product::<f64>();
    Ok(SmallBallReport {
        estimate,
        standard_error,
        bound,
        passed: estimate + 5.0 * standard_error >= bound,
    })
}

fn check_rate_domain(k_star: usize, k0: usize, kbar: usize, n: f64) -> Result<()> {
    if !(1 <= k0 && k0 <= k_star && k_star <= kbar) {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k0 <= k* <= kbar, got k0 = {k0}, k* = {k_star}, kbar = {kbar}"
        )));
    }
    if !(n >= 3.0) {
        return Err(Error::InvalidArgument(format!("n = {n} must be at least 3")));
    }
    Ok(())
}

/// `(k*)^((3k*-1)/(2k*-1)) (kbar log n / n)^(1/(4k*-2))`.
pub fn rate_exact(k_star: usize, kbar: usize, n: f64) -> Result<f64> {
    check_rate_domain(k_star, 1, kbar, n)?;
    let k = k_star as f64;
    let base = kbar as f64 * n.ln() / n;
    Ok(k.powf((3.0 * k - 1.0) / (2.0 * k - 1.0)) * base.powf(1.0 / (4.0 * k - 2.0)))
}

/// Rate under `k0 (gamma, omega)`-separation:
/// `(k*)^((3k*-2k0+2)/(2(k*-k0)+1)) gamma^(-(2k0-2)/(2(k*-k0)+1)) (kbar log n / n)^(1/(4(k*-k0)+2))`.
pub fn rate_adaptive(k_star: usize, k0: usize, gamma: f64, kbar: usize, n: f64) -> Result<f64> {
    check_rate_domain(k_star, k0, kbar, n)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    let (k, k0) = (k_star as f64, k0 as f64);
    let denom = 2.0 * (k - k0) + 1.0;
    let base = kbar as f64 * n.ln() / n;
    Ok(k.powf((3.0 * k - 2.0 * k0 + 2.0) / denom)
        * gamma.powf(-(2.0 * k0 - 2.0) / denom)
        * base.powf(1.0 / (4.0 * (k - k0) + 2.0)))
}

/// `log log n / log n`.
pub fn rate_higher_order(n: f64) -> Result<f64> {
    if !(n >= 3.0) {
        return Err(Error::InvalidArgument(format!("n = {n} must be at least 3")));
    }
    Ok(n.ln().ln() / n.ln())
}

/// Concentration schedule of the Dirichlet process prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpPriorSpec {
    pub concentration: Schedule,
    pub bound: f64,
}

impl DpPriorSpec {
    /// `kappa_n = 1 / (n log n)`, uniform base on `[-6, 6]`.
    pub fn vary() -> Self {
        Self {
            concentration: Schedule::InverseNLogN,
            bound: DEFAULT_L,
        }
    }

    pub fn constant(kappa: f64) -> Self {
        Self {
            concentration: Schedule::Const(kappa),
            bound: DEFAULT_L,
        }
    }

    /// `kappa_n` at a (possibly non-integer) sample size.
    pub fn kappa(&self, n: f64) -> f64 {
        match self.concentration {
            Schedule::Theory | Schedule::InverseNLogN => 1.0 / (n * n.ln()),
            Schedule::InverseN => 1.0 / n,
            Schedule::Const(c) => c,
        }
    }
}

/// Unsigned Stirling numbers of the first kind `|s(n, t)|` for `t = 0..=n`.
pub fn stirling_first_unsigned(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for m in 0..n {
        let mut next = vec![0.0; m + 2];
        for (t, &v) in row.iter().enumerate() {
            next[t] += m as f64 * v;
            next[t + 1] += v;
        }
        row = next;
    }
    row
}

/// `P(T_n = t) = |s(n,t)| kappa^t Gamma(kappa) / Gamma(kappa + n)` for `t = 1..=n`
/// (index 0 of the result is `t = 1`).
pub fn crp_cluster_pmf(n: usize, kappa: f64) -> Vec<f64> {
    let s = stirling_first_unsigned(n);
    let log_norm = ln_gamma(kappa) - ln_gamma(kappa + n as f64);
    (1..=n)
        .map(|t| (s[t].ln() + t as f64 * kappa.ln() + log_norm).exp())
        .collect()
}

/// Stick-breaking draw from `DP(kappa, U[-L, L])`, truncated once the remaining
/// stick falls below `tail`; the remainder goes to the last atom.
pub fn stick_breaking<R: Rng>(kappa: f64, bound: f64, tail: f64, rng: &mut R) -> AtomicMixture {
    let beta = rand_distr::Beta::new(1.0, kappa).expect("positive concentration");
    let mut remaining = 1.0;
    let mut atoms = Vec::new();
    let mut masses = Vec::new();
    while remaining > tail {
        let e: f64 = beta.sample(rng);
        masses.push(remaining * e);
        remaining *= 1.0 - e;
        atoms.push(rng.random_range(-bound..=bound));
    }
    if let Some(last) = masses.last_mut() {
        *last += remaining;
    }
    AtomicMixture::from_unnormalized(atoms, masses).expect("positive stick masses")
}

/// JSON form of a [`PriorSpec`], as read by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub family: String,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(rename = "A", default = "default_big_a")]
    pub big_a: f64,
    #[serde(default)]
    pub dirichlet: Option<Vec<f64>>,
    #[serde(rename = "L", default = "default_l")]
    pub bound: f64,
    #[serde(default)]
    pub lambda: Option<String>,
    #[serde(default)]
    pub p: Option<String>,
    #[serde(default)]
    pub shape: Option<f64>,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub kbar: Option<usize>,
}

fn one() -> f64 {
    1.0
}
fn default_big_a() -> f64 {
    DEFAULT_A
}
fn default_l() -> f64 {
    DEFAULT_L
}

impl TryFrom<PriorConfig> for PriorSpec {
    type Error = Error;

    fn try_from(c: PriorConfig) -> Result<Self> {
        let sched = |s: &Option<String>| -> Result<Schedule> {
            s.as_deref().map(Schedule::parse).unwrap_or(Ok(Schedule::Theory))
        };
        let family = match c.family.to_ascii_lowercase().as_str() {
            "poisson" | "truncated-poisson" => KFamily::Poisson { lambda: sched(&c.lambda)? },
            "geometric" => KFamily::Geometric { p: sched(&c.p)? },
            "binomial" => KFamily::Binomial { p: sched(&c.p)? },
            "spike-slab" | "spikeslab" => KFamily::SpikeSlab {
                p: sched(&c.p)?,
                shape: c.shape.unwrap_or(0.5),
                rate: c.rate.unwrap_or(1.0),
            },
            other => return Err(Error::Parse(format!("unknown prior family {other:?}"))),
        };
        let mut spec = PriorSpec::new(family);
        if let Some(d) = &c.dirichlet {
            let first = *d.first().ok_or_else(|| Error::Parse("empty dirichlet vector".into()))?;
            if d.iter().any(|&x| x != first) {
                return Err(Error::InvalidArgument(
                    "only symmetric Dirichlet weight priors are supported".into(),
                ));
            }
            spec.dirichlet = first;
        }
        spec.a = c.a;
        spec.big_a = c.big_a;
        spec.bound = c.bound;
        spec.kbar = c.kbar;
        spec.validate()?;
        Ok(spec)
    }
}

impl PriorSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: PriorConfig = serde_json::from_str(s)?;
        cfg.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn kbar_rule() {
        assert_eq!(default_kbar(2), 1);
        assert_eq!(default_kbar(2500), 3);
        assert_eq!(default_kbar(1_000_000), 5);
    }

    #[test]
    fn pmf_examples() {
        let pois = PriorSpec::poisson(Schedule::Const(1.0));
        let v = k_prior_pmf(&pois, 1000, 1).unwrap().value;
        assert!((v - (-1.0f64).exp()).abs() < 1e-6);

        let geo = PriorSpec::geometric(Schedule::Const(0.9));
        let v = k_prior_pmf(&geo, 1000, 2).unwrap().value;
        assert!((v - 0.09).abs() < 1e-12);

        let vary = PriorSpec::poisson(Schedule::InverseN);
        let v = k_prior_pmf(&vary, 100, 2).unwrap().value;
        assert!((v - 0.009_900_498).abs() < 1e-9);

        assert!(k_prior_pmf(&vary, 100, 0).is_err());
        let theory = PriorSpec::poisson(Schedule::Theory);
        let tiny = k_prior_pmf(&theory, 5000, 10).unwrap();
        assert!(tiny.underflow && tiny.value == 0.0);
    }

    #[test]
    fn pmfs_sum_to_one() {
        let specs = [
            PriorSpec::poisson(Schedule::InverseN),
            PriorSpec::poisson(Schedule::Const(3.0)),
            PriorSpec::geometric(Schedule::Const(0.3)),
            PriorSpec::geometric(Schedule::Theory),
            PriorSpec::new(KFamily::Binomial { p: Schedule::Const(0.4) }),
            PriorSpec::new(KFamily::SpikeSlab { p: Schedule::Theory, shape: 0.5, rate: 1.0 }),
        ];
        for spec in &specs {
            for n in [10, 250, 2500, 100_000] {
                let s: f64 = spec.k_log_pmf_table(n).iter().map(|l| l.exp()).sum();
                assert!((s - 1.0).abs() < 1e-9, "{spec:?} n={n}: {s}");
            }
        }
    }

    #[test]
    fn assumption_p1_examples() {
        let ns: Vec<usize> = (1..=100).map(|i| 50 * i).collect();
        let ks: Vec<usize> = (1..=12).collect();
        let geo = PriorSpec::geometric(Schedule::Theory);
        assert!(validate_assumption_p1(&geo, &ns, &ks).unwrap().passed());
        let pois = PriorSpec::poisson(Schedule::Theory);
        assert!(validate_assumption_p1(&pois, &ns, &ks).unwrap().passed());
        let bin = PriorSpec::new(KFamily::Binomial { p: Schedule::Theory });
        assert!(validate_assumption_p1(&bin, &ns, &ks).unwrap().passed());

        let flat = PriorSpec::poisson(Schedule::Const(5.0));
        let r = validate_assumption_p1(&flat, &ns, &ks).unwrap();
        assert!(r.ratio_violations > 0);
        assert!(validate_assumption_p1(&flat, &[], &ks).is_err());
    }

    #[test]
    fn spike_slab_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut off = PriorSpec::new(KFamily::SpikeSlab { p: Schedule::Const(0.0), shape: 0.5, rate: 2.0 });
        off.kbar = Some(4);
        for d in spike_slab_induced_law(&off, 100, 200, &mut rng).unwrap() {
            assert_eq!(d.k, 1);
            assert_eq!(d.weights, vec![1.0]);
        }
        let mut on = PriorSpec::new(KFamily::SpikeSlab { p: Schedule::Const(1.0), shape: 0.5, rate: 2.0 });
        on.kbar = Some(3);
        for d in spike_slab_induced_law(&on, 100, 200, &mut rng).unwrap() {
            assert_eq!(d.k, 3);
            assert!((d.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(spike_slab_induced_law(&PriorSpec::poisson(Schedule::InverseN), 10, 5, &mut rng).is_err());
    }

    #[test]
    fn small_ball_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let r = dirichlet_small_ball_check(&[1.0, 1.0], &[0.5, 0.5], 0.25, 100_000, &mut rng).unwrap();
        assert!((r.estimate - 0.5).abs() < 5.0 * r.standard_error.max(1e-3));
        assert!((r.bound - 0.0625).abs() < 1e-15);
        assert!(r.passed);

        let r = dirichlet_small_ball_check(&[0.7], &[1.0], 1.0, 10, &mut rng).unwrap();
        assert_eq!(r.estimate, 1.0);
        assert!((r.bound - 0.7).abs() < 1e-15);
        assert!(r.passed);

        assert!(dirichlet_small_ball_check(&[1.5, 1.0], &[0.5, 0.5], 0.1, 10, &mut rng).is_err());
        assert!(dirichlet_small_ball_check(&[1.0, 1.0], &[0.5, 0.5], 0.6, 10, &mut rng).is_err());
    }

    #[test]
    fn rate_examples() {
        let kbar = 3;
        for n in [100.0, 2500.0, 1e6] {
            let want = (kbar as f64 * f64::ln(n) / n).sqrt();
            assert!((rate_exact(1, kbar, n).unwrap() - want).abs() < 1e-15);
            assert!((rate_adaptive(1, 1, 0.3, kbar, n).unwrap() - want).abs() < 1e-15);
        }
        let want = 4f64.powi(6) * 2f64.powi(-6) * (10.0 * 2000f64.ln() / 2000.0).sqrt();
        let got = rate_adaptive(4, 4, 2.0, 10, 2000.0).unwrap();
        assert!((got - want).abs() < 1e-12 * want);
        assert!((rate_higher_order(1e6).unwrap() - 0.190_07).abs() < 1e-5);
        assert!(rate_exact(4, 3, 100.0).is_err());
        assert!(rate_adaptive(2, 3, 1.0, 5, 100.0).is_err());
        assert!(rate_higher_order(2.0).is_err());
    }

    #[test]
    fn dp_schedule_and_crp() {
        let dp = DpPriorSpec::vary();
        assert!((dp.kappa(std::f64::consts::E) - (-1.0f64).exp()).abs() < 1e-15);
        let pmf = crp_cluster_pmf(3, 1.0);
        assert!((pmf[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((pmf[1] - 0.5).abs() < 1e-12);
        assert!((pmf[2] - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn config_parsing() {
        let spec = PriorSpec::from_json(
            r#"{"family":"poisson","a":1.0,"A":4.0,"dirichlet":[1,1,1],"L":6.0,"lambda":"1/n"}"#,
        )
        .unwrap();
        assert_eq!(spec.family, KFamily::Poisson { lambda: Schedule::InverseN });
        let c = PriorSpec::from_json(r#"{"family":"poisson","lambda":"const:0.01"}"#).unwrap();
        assert_eq!(c.family, KFamily::Poisson { lambda: Schedule::Const(0.01) });
        assert!(PriorSpec::from_json(r#"{"family":"poisson","dirichlet":[1,2]}"#).is_err());
        assert!(PriorSpec::from_json(r#"{"family":"zipf"}"#).is_err());
        assert!(PriorSpec::from_json(r#"{"family":"geometric","p":"const:1.5"}"#).is_err());
    }
}

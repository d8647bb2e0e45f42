//! Distances between mixing distributions and between mixture densities.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};
use crate::mixture::{AtomicMixture, GaussianMixtureDensity};
use crate::quadrature::integrate;

/// Largest combined support the LP oracle accepts.
pub const LP_ORACLE_CAP: usize = 64;

const QUAD_PAD: f64 = 12.0;
const QUAD_TOL: f64 = 1e-8;
const RATIO_FLOOR: f64 = 1e-300;

/// A coupling of two weight vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows x cols` masses.
    pub mass: Vec<f64>,
}

impl TransportPlan {
    pub fn get(&self, j: usize, h: usize) -> f64 {
        self.mass[j * self.cols + h]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|j| (0..self.cols).map(|h| self.get(j, h)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|h| (0..self.rows).map(|j| self.get(j, h)).sum())
            .collect()
    }

    /// Checks the marginal constraints to within `tol`.
    pub fn has_marginals(&self, first: &[f64], second: &[f64], tol: f64) -> bool {
        self.mass.iter().all(|&p| p >= -tol)
            && self
                .row_sums()
                .iter()
                .zip(first)
                .all(|(r, w)| (r - w).abs() <= tol)
            && self
                .col_sums()
                .iter()
                .zip(second)
                .all(|(c, w)| (c - w).abs() <= tol)
    }
}

/// `W_q(nu1, nu2)` via the monotone (quantile) coupling of the two sorted supports.
pub fn wasserstein(nu1: &AtomicMixture, nu2: &AtomicMixture, q: f64) -> f64 {
    assert!(q >= 1.0, "Wasserstein order must be at least 1");
    let mut a: Vec<(f64, f64)> = nu1.iter().filter(|p| p.1 > 0.0).collect();
    let mut b: Vec<(f64, f64)> = nu2.iter().filter(|p| p.1 > 0.0).collect();
    a.sort_by(|x, y| x.0.total_cmp(&y.0));
    b.sort_by(|x, y| x.0.total_cmp(&y.0));

    let cdf = |v: &[(f64, f64)]| {
        let mut acc = 0.0;
        let mut c: Vec<f64> = v.iter().map(|p| { acc += p.1; acc }).collect();
        *c.last_mut().unwrap() = 1.0;
        c
    };
    let (ca, cb) = (cdf(&a), cdf(&b));

    // sweep the merged quantile breakpoints; on each piece the comonotone
    // coupling pairs a[i] with b[j]
    let (mut i, mut j) = (0, 0);
    let mut prev = 0.0;
    let mut cost = 0.0;
    let mut comp = 0.0;
    while i < a.len() && j < b.len() {
        let next = ca[i].min(cb[j]);
        let term = (next - prev) * (a[i].0 - b[j].0).abs().powf(q) - comp;
        let t = cost + term;
        comp = (t - cost) - term;
        cost = t;
        prev = next;
        if ca[i] <= next {
            i += 1;
        }
        if cb[j] <= next {
            j += 1;
        }
    }
    cost.max(0.0).powf(1.0 / q)
}

/// Exact `W_q` by solving the transport linear program; intended for testing.
pub fn wasserstein_lp_oracle(
    nu1: &AtomicMixture,
    nu2: &AtomicMixture,
    q: f64,
) -> Result<(f64, TransportPlan)> {
    if q < 1.0 {
        return Err(Error::InvalidArgument(format!("q = {q} must be >= 1")));
    }
    let (k1, k2) = (nu1.len(), nu2.len());
    if k1 + k2 > LP_ORACLE_CAP {
        return Err(Error::OracleTooLarge {
            cap: LP_ORACLE_CAP,
            got: k1 + k2,
        });
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let mut vars = Vec::with_capacity(k1 * k2);
    for &t1 in nu1.atoms() {
        for &t2 in nu2.atoms() {
            vars.push(lp.add_var((t1 - t2).abs().powf(q), (0.0, f64::INFINITY)));
        }
    }
    for (j, &w) in nu1.weights().iter().enumerate() {
        let row: Vec<_> = (0..k2).map(|h| (vars[j * k2 + h], 1.0)).collect();
        lp.add_constraint(row, ComparisonOp::Eq, w);
    }
    // the last column constraint is implied by the others
    for (h, &w) in nu2.weights().iter().enumerate().take(k2 - 1) {
        let col: Vec<_> = (0..k1).map(|j| (vars[j * k2 + h], 1.0)).collect();
        lp.add_constraint(col, ComparisonOp::Eq, w);
    }
    let solution = lp.solve().map_err(|e| Error::Solver(e.to_string()))?;
    let mass: Vec<f64> = vars.iter().map(|v| solution.var_value(*v).max(0.0)).collect();
    let cost: f64 = vars
        .iter()
        .zip(&mass)
        .enumerate()
        .map(|(idx, (_, p))| {
            let (j, h) = (idx / k2, idx % k2);
            p * (nu1.atoms()[j] - nu2.atoms()[h]).abs().powf(q)
        })
        .sum();
    Ok((
        cost.max(0.0).powf(1.0 / q),
        TransportPlan {
            rows: k1,
            cols: k2,
            mass,
        },
    ))
}

fn quad_bounds(d1: &GaussianMixtureDensity, d2: &GaussianMixtureDensity) -> (f64, f64) {
    let l = d1.support_bound().max(d2.support_bound());
    (-l - QUAD_PAD, l + QUAD_PAD)
}

/// Squared Hellinger distance `int (sqrt p1 - sqrt p2)^2`.
pub fn hellinger_sq(d1: &GaussianMixtureDensity, d2: &GaussianMixtureDensity) -> f64 {
    let (a, b) = quad_bounds(d1, d2);
    let v = integrate(
        |x| {
            let s = (0.5 * d1.ln_density(x)).exp() - (0.5 * d2.ln_density(x)).exp();
            s * s
        },
        a,
        b,
        QUAD_TOL,
    );
    v.max(0.0)
}

fn log_ratio(d1: &GaussianMixtureDensity, d2: &GaussianMixtureDensity, x: f64) -> (f64, f64) {
    let l1 = d1.ln_density(x);
    let l2 = d2.ln_density(x).max(RATIO_FLOOR.ln());
    (l1.exp(), l1 - l2)
}

/// `KL(p1, p2) = int p1 log(p1 / p2)`.
pub fn kl_divergence(d1: &GaussianMixtureDensity, d2: &GaussianMixtureDensity) -> f64 {
    let (a, b) = quad_bounds(d1, d2);
    integrate(
        |x| {
            let (p1, lr) = log_ratio(d1, d2, x);
            p1 * lr
        },
        a,
        b,
        QUAD_TOL,
    )
    .max(0.0)
}

/// Second KL variation `int p1 (log(p1 / p2))^2`.
pub fn kl2_divergence(d1: &GaussianMixtureDensity, d2: &GaussianMixtureDensity) -> f64 {
    let (a, b) = quad_bounds(d1, d2);
    integrate(
        |x| {
            let (p1, lr) = log_ratio(d1, d2, x);
            p1 * lr * lr
        },
        a,
        b,
        QUAD_TOL,
    )
    .max(0.0)
}

/// Rényi divergence of order `alpha` in (0,1), `-log int p1^alpha p2^(1-alpha)`.
pub fn renyi_divergence(
    d1: &GaussianMixtureDensity,
    d2: &GaussianMixtureDensity,
    alpha: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must lie in (0,1)")));
    }
    let (a, b) = quad_bounds(d1, d2);
    let affinity = integrate(
        |x| (alpha * d1.ln_density(x) + (1.0 - alpha) * d2.ln_density(x)).exp(),
        a,
        b,
        QUAD_TOL,
    );
    Ok((-affinity.min(1.0).ln()).max(0.0))
}

/// A partition of `[-bound, bound]` into consecutive half-open bins, the last closed.
#[derive(Debug, Clone, PartialEq)]
pub struct BinPartition {
    edges: Vec<f64>,
}

impl BinPartition {
    /// `edges` must be strictly increasing and run from `-bound` to `bound`.
    pub fn new(edges: Vec<f64>, bound: f64) -> Result<Self> {
        if edges.len() < 2
            || edges.first() != Some(&-bound)
            || edges.last() != Some(&bound)
            || edges.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidArgument(format!(
                "partition edges must increase strictly from -{bound} to {bound}"
            )));
        }
        Ok(Self { edges })
    }

    /// `2^level` equal bins.
    pub fn dyadic(bound: f64, level: u32) -> Self {
        let bins = 1usize << level;
        let edges = (0..=bins)
            .map(|i| -bound + 2.0 * bound * i as f64 / bins as f64)
            .collect();
        Self { edges }
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn diameter(&self) -> f64 {
        self.edges.last().unwrap() - self.edges[0]
    }

    pub fn max_bin_width(&self) -> f64 {
        self.edges.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Bin index of `x`, `None` outside the covered interval.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let last = self.bins() - 1;
        if x < self.edges[0] || x > self.edges[last + 1] {
            return None;
        }
        let i = self.edges.partition_point(|&e| e <= x);
        Some(i.saturating_sub(1).min(last))
    }

    pub fn masses(&self, nu: &AtomicMixture) -> Option<Vec<f64>> {
        let mut m = vec![0.0; self.bins()];
        for (a, w) in nu.iter() {
            m[self.locate(a)?] += w;
        }
        Some(m)
    }
}

/// Checks `W_q(nu1, nu2) <= max_j diam(B_j) + diam(Theta) * (sum_j |nu1(B_j) - nu2(B_j)|)^(1/q)`.
pub fn wasserstein_partition_bound_check(
    nu1: &AtomicMixture,
    nu2: &AtomicMixture,
    partition: &BinPartition,
    q: f64,
) -> Result<bool> {
    let (m1, m2) = match (partition.masses(nu1), partition.masses(nu2)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InvalidArgument(
                "partition does not cover every atom".into(),
            ))
        }
    };
    let tv: f64 = m1.iter().zip(&m2).map(|(a, b)| (a - b).abs()).sum();
    let bound = partition.max_bin_width() + partition.diameter() * tv.powf(1.0 / q);
    Ok(wasserstein(nu1, nu2, q) <= bound + 1e-12)
}

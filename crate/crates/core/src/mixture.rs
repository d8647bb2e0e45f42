//! Mixing distributions, their Gaussian convolutions, synthetic data and the
//! separation structure of atoms.

use std::f64::consts::PI;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;

/// Default half-width of the atom support, `[-6, 6]`.
pub const DEFAULT_L: f64 = 6.0;

const WEIGHT_TOL: f64 = 1e-12;
const RENORMALIZE_TOL: f64 = 1e-9;
const MERGE_TOL: f64 = 1e-12;

pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

#[inline]
pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// A finite mixing distribution `sum_j w_j delta_{theta_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixture")]
pub struct AtomicMixture {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMixture {
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

impl TryFrom<RawMixture> for AtomicMixture {
    type Error = Error;

    fn try_from(raw: RawMixture) -> Result<Self> {
        AtomicMixture::new(raw.atoms, raw.weights)
    }
}

impl AtomicMixture {
    /// Builds a mixture, renormalizing weights whose sum is within 1e-9 of one.
    pub fn new(atoms: Vec<f64>, mut weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != weights.len() {
            return Err(Error::ShapeMismatch {
                atoms: atoms.len(),
                weights: weights.len(),
            });
        }
        if let Some(index) = atoms.iter().position(|a| !a.is_finite()) {
            return Err(Error::NonFiniteAtom { index });
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidWeight { index, value: w });
            }
        }
        let sum = kahan_sum(weights.iter().copied());
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::WeightSum { sum });
        }
        if (sum - 1.0).abs() > WEIGHT_TOL {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(Self { atoms, weights })
    }

    /// Like [`AtomicMixture::new`], additionally requiring every atom in `[-bound, bound]`.
    pub fn with_bound(atoms: Vec<f64>, weights: Vec<f64>, bound: f64) -> Result<Self> {
        let nu = Self::new(atoms, weights)?;
        nu.check_bound(bound)?;
        Ok(nu)
    }

    /// Normalizes arbitrary nonnegative masses into a mixture.
    pub fn from_unnormalized(atoms: Vec<f64>, masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::WeightSum { sum: total });
        }
        let weights = masses.iter().map(|m| m / total).collect();
        Self::new(atoms, weights)
    }

    pub fn point_mass(theta: f64) -> Self {
        Self {
            atoms: vec![theta],
            weights: vec![1.0],
        }
    }

    /// Equal weights on the given atoms.
    pub fn uniform(atoms: Vec<f64>) -> Result<Self> {
        let k = atoms.len();
        Self::new(atoms, vec![1.0 / k.max(1) as f64; k])
    }

    pub fn check_bound(&self, bound: f64) -> Result<()> {
        for (index, &value) in self.atoms.iter().enumerate() {
            if value.abs() > bound {
                return Err(Error::AtomOutOfBounds {
                    index,
                    value,
                    bound,
                });
            }
        }
        Ok(())
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of atoms, counting duplicates and zero weights.
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn max_abs_atom(&self) -> f64 {
        self.atoms.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
    }

    /// Sorts atoms, merges atoms closer than 1e-12 and drops zero-weight atoms.
    pub fn canonicalize(&self) -> Self {
        let mut pairs: Vec<(f64, f64)> = self.iter().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut weights: Vec<f64> = Vec::with_capacity(pairs.len());
        for (theta, w) in pairs {
            match atoms.last() {
                Some(&last) if (theta - last).abs() <= MERGE_TOL => {
                    *weights.last_mut().unwrap() += w;
                }
                _ => {
                    atoms.push(theta);
                    weights.push(w);
                }
            }
        }
        if weights.iter().any(|&w| w > 0.0) {
            let keep: Vec<bool> = weights.iter().map(|&w| w > 0.0).collect();
            let mut i = 0;
            atoms.retain(|_| {
                i += 1;
                keep[i - 1]
            });
            weights.retain(|&w| w > 0.0);
        }
        Self { atoms, weights }
    }

    /// Applies `theta -> scale * theta + shift` to every atom.
    pub fn affine(&self, scale: f64, shift: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|a| scale * a + shift).collect(),
            weights: self.weights.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        kahan_sum(self.iter().map(|(a, w)| a * w))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mixture serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Compensated summation.
pub(crate) fn kahan_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// The location mixture `nu * Phi` with unit-variance Gaussian kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixtureDensity {
    mixture: AtomicMixture,
}

impl GaussianMixtureDensity {
    pub fn new(mixture: AtomicMixture) -> Self {
        Self { mixture }
    }

    pub fn mixture(&self) -> &AtomicMixture {
        &self.mixture
    }

    /// `sum_j w_j phi(x - theta_j)`.
    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    /// Log-density by log-sum-exp over components.
    pub fn ln_density(&self, x: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for (a, w) in self.mixture.iter() {
            if w > 0.0 {
                let d = x - a;
                max = max.max(w.ln() - 0.5 * d * d);
            }
        }
        let mut s = 0.0;
        for (a, w) in self.mixture.iter() {
            if w > 0.0 {
                let d = x - a;
                s += (w.ln() - 0.5 * d * d - max).exp();
            }
        }
        max + s.ln() - LN_SQRT_2PI
    }

    /// Support half-width used for integration: at least the default bound.
    pub fn support_bound(&self) -> f64 {
        self.mixture.max_abs_atom().max(DEFAULT_L)
    }
}

/// `density(nu * Phi, x)`.
pub fn density(gmm: &GaussianMixtureDensity, x: f64) -> f64 {
    gmm.density(x)
}

/// Observations, the seed that generated them and (if synthetic) the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub observations: Vec<f64>,
    pub seed: u64,
    pub truth: Option<AtomicMixture>,
}

#[derive(Serialize, Deserialize)]
struct DatasetSidecar {
    n: usize,
    seed: u64,
    truth: Option<AtomicMixture>,
}

impl Dataset {
    pub fn from_observations(observations: Vec<f64>) -> Self {
        Self {
            observations,
            seed: 0,
            truth: None,
        }
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn mean(&self) -> f64 {
        kahan_sum(self.observations.iter().copied()) / self.len().max(1) as f64
    }

    /// Writes `<stem>.txt` (one observation per line) and `<stem>.json` (seed and truth).
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let data_path = dir.join(format!("{stem}.txt"));
        let meta_path = dir.join(format!("{stem}.json"));
        let mut out = std::io::BufWriter::new(fs::File::create(&data_path)?);
        for x in &self.observations {
            writeln!(out, "{x:?}")?;
        }
        out.flush()?;
        let sidecar = DatasetSidecar {
            n: self.len(),
            seed: self.seed,
            truth: self.truth.clone(),
        };
        fs::write(&meta_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok((data_path, meta_path))
    }

    /// Reads observations from a text file; a sibling `.json` sidecar is used if present.
    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path)?;
        let mut observations = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let x: f64 = t
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: {t:?}", lineno + 1)))?;
            observations.push(x);
        }
        let mut ds = Self::from_observations(observations);
        let meta = path.with_extension("json");
        if meta.exists() {
            let sidecar: DatasetSidecar = serde_json::from_str(&fs::read_to_string(meta)?)?;
            ds.seed = sidecar.seed;
            ds.truth = sidecar.truth;
        }
        Ok(ds)
    }
}

/// Draws `n` observations from `truth * Phi`, deterministically in `seed`.
pub fn sample(truth: &AtomicMixture, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picker = WeightedIndex::new(truth.weights()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let observations = (0..n)
        .map(|_| {
            let j = picker.sample(&mut rng);
            let z: f64 = StandardNormal.sample(&mut rng);
            truth.atoms()[j] + z
        })
        .collect();
    Ok(Dataset {
        observations,
        seed,
        truth: Some(truth.clone()),
    })
}

/// Parameters of the `k0 (gamma, omega)`-separation property.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationSpec {
    pub k0: usize,
    pub gamma: f64,
    pub omega: f64,
}

/// Whether the atoms split into exactly `k0` groups with cross-group gaps of at
/// least `gamma` and group weights of at least `omega`.
///
/// Zero-weight atoms are ignored. Atoms chained by gaps below `gamma` must share
/// a group, so the sorted atoms are first cut at every gap `>= gamma` into
/// clusters. Any union of clusters is a valid group (groups need not be
/// contiguous), which leaves a bin-covering question: can the cluster weights be
/// split into at least `k0` parts of weight `>= omega`? Surplus parts merge.
pub fn is_separated(nu: &AtomicMixture, spec: &SeparationSpec) -> bool {
    if spec.k0 == 0 || spec.k0 > nu.len() {
        return false;
    }
    let mut pairs: Vec<(f64, f64)> = nu.iter().filter(|&(_, w)| w > 0.0).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    if pairs.is_empty() {
        return false;
    }

    let mut cluster_weights = vec![pairs[0].1];
    for win in pairs.windows(2) {
        if win[1].0 - win[0].0 >= spec.gamma {
            cluster_weights.push(win[1].1);
        } else {
            *cluster_weights.last_mut().unwrap() += win[1].1;
        }
    }
    if cluster_weights.len() < spec.k0 {
        return false;
    }
    max_covering_parts(&cluster_weights, spec.omega) >= spec.k0
}

/// Largest number of disjoint parts with sum `>= omega` that the items can be
/// split into (leftover items join any part).
///
/// Items of size `>= omega` are best left alone; the light items go through an
/// exact subset dynamic program when there are at most 20 of them and a
/// first-fit-decreasing pass otherwise, which may undercount.
fn max_covering_parts(items: &[f64], omega: f64) -> usize {
    let heavy = items.iter().filter(|&&w| w >= omega).count();
    let mut light: Vec<f64> = items.iter().copied().filter(|&w| w < omega).collect();
    if light.len() <= 20 {
        // best[mask] = (completed parts, fill of the open part), maximized lexicographically
        let m = light.len();
        let mut best = vec![(0usize, f64::NEG_INFINITY); 1 << m];
        best[0] = (0, 0.0);
        for mask in 0..(1usize << m) {
            let (parts, fill) = best[mask];
            if fill == f64::NEG_INFINITY {
                continue;
            }
            for (i, &w) in light.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    continue;
                }
                let next = if fill + w >= omega { (parts + 1, 0.0) } else { (parts, fill + w) };
                let slot = &mut best[mask | (1 << i)];
                if next.0 > slot.0 || (next.0 == slot.0 && next.1 > slot.1) {
                    *slot = next;
                }
            }
        }
        heavy + best[(1 << m) - 1].0
    } else {
        light.sort_by(|a, b| b.total_cmp(a));
        let mut parts = 0;
        let mut fill = 0.0;
        for w in light {
            fill += w;
            if fill >= omega {
                parts += 1;
                fill = 0.0;
            }
        }
        heavy + parts
    }
}

/// Minimum pairwise atom gap `gamma(nu)` (infinite for a single atom).
pub fn min_atom_gap(nu: &AtomicMixture) -> f64 {
    let mut atoms = nu.atoms().to_vec();
    atoms.sort_by(f64::total_cmp);
    atoms
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
}

/// Minimum weight `omega(nu)`.
pub fn min_weight(nu: &AtomicMixture) -> f64 {
    nu.weights().iter().copied().fold(f64::INFINITY, f64::min)
}

/// For `candidate` inside the W1 ball of radius `c * gamma(nu0) * omega(nu0)`,
/// reports whether it is `k0 ((1-2c) gamma, (1-4c)/(1-3c) omega)`-separated with
/// `k0` the number of atoms of `nu0`. The inclusion says this always holds.
pub fn separation_witness_for_ball(
    nu0: &AtomicMixture,
    c: f64,
    candidate: &AtomicMixture,
) -> Result<bool> {
    if !(c > 0.0 && c < 0.25) {
        return Err(Error::InvalidArgument(format!("c = {c} must lie in (0, 1/4)")));
    }
    let gamma = min_atom_gap(nu0);
    let omega = min_weight(nu0);
    if !(gamma > 0.0) || !(omega > 0.0) {
        return Err(Error::InvalidArgument(
            "reference mixture needs distinct atoms and positive weights".into(),
        ));
    }
    let radius = c * gamma * omega;
    let distance = metrics::wasserstein(candidate, nu0, 1.0);
    if !(distance < radius) {
        return Err(Error::OutsideBall { distance, radius });
    }
    let spec = SeparationSpec {
        k0: nu0.len(),
        gamma: (1.0 - 2.0 * c) * gamma,
        omega: (1.0 - 4.0 * c) / (1.0 - 3.0 * c) * omega,
    };
    Ok(is_separated(candidate, &spec))
}

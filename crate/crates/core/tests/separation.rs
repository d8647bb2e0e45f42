mod common;

use mixbayes_core::metrics::wasserstein;
use mixbayes_core::mixture::{is_separated, min_atom_gap, min_weight, separation_witness_for_ball};
use mixbayes_core::{AtomicMixture, SeparationSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every assignment of `n` labelled items to exactly `k` nonempty groups, as
/// restricted growth strings.
fn set_partitions(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, used: usize, n: usize, k: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            if used == k {
                out.push(prefix.clone());
            }
            return;
        }
        for g in 0..(used + 1).min(k) {
            prefix.push(g);
            extend(prefix, used.max(g + 1), n, k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), 0, n, k, &mut out);
    out
}

fn separated_by_enumeration(nu: &AtomicMixture, spec: &SeparationSpec) -> bool {
    let (atoms, weights) = (nu.atoms(), nu.weights());
    set_partitions(atoms.len(), spec.k0).iter().any(|groups| {
        let mut mass = vec![0.0; spec.k0];
        for (g, w) in groups.iter().zip(weights) {
            mass[*g] += w;
        }
        let gaps_ok = (0..atoms.len()).all(|i| {
            (0..atoms.len()).all(|j| groups[i] == groups[j] || (atoms[i] - atoms[j]).abs() >= spec.gamma)
        });
        gaps_ok && mass.iter().all(|&m| m >= spec.omega)
    })
}

#[test]
fn partition_enumeration_counts_are_stirling_numbers() {
    assert_eq!(set_partitions(4, 2).len(), 7);
    assert_eq!(set_partitions(6, 3).len(), 90);
}

#[test]
fn separation_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut positives = 0;
    for _ in 0..1000 {
        let k = rng.random_range(1..=6);
        // half-integer grid so that gaps equal to gamma occur
        let mut atoms: Vec<f64> = Vec::new();
        while atoms.len() < k {
            let a = rng.random_range(-12..=12) as f64 * 0.5;
            if !atoms.contains(&a) {
                atoms.push(a);
            }
        }
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(1..=8) as f64).collect();
        let total: f64 = raw.iter().sum();
        let nu = AtomicMixture::new(atoms, raw.iter().map(|r| r / total).collect()).unwrap();
        let spec = SeparationSpec {
            k0: rng.random_range(1..=k),
            gamma: rng.random_range(1..=6) as f64 * 0.5,
            omega: rng.random_range(1..=10) as f64 * 0.05,
        };
        let fast = is_separated(&nu, &spec);
        assert_eq!(fast, separated_by_enumeration(&nu, &spec), "{nu:?} {spec:?}");
        positives += fast as usize;
    }
    assert!(positives > 100 && positives < 900, "{positives} positive cases");
}

/// A candidate near `nu0`: each atom is split into up to three nearby atoms and
/// a little mass is moved between components, all scaled by `t`.
fn perturb<R: Rng>(nu0: &AtomicMixture, t: f64, rng: &mut R, bound: f64) -> AtomicMixture {
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    let k = nu0.len();
    let transfer: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
    for (j, (theta, w)) in nu0.iter().enumerate() {
        let pieces = rng.random_range(1..=3);
        let keep = w * (1.0 - 0.5 * t * transfer[j]);
        for _ in 0..pieces {
            atoms.push((theta + t * rng.random_range(-1.0..1.0)).clamp(-bound, bound));
            weights.push(keep / pieces as f64);
        }
    }
    let moved: f64 = nu0.weights().iter().zip(&transfer).map(|(w, u)| w * 0.5 * t * u).sum();
    let target = rng.random_range(0..k);
    atoms.push(nu0.atoms()[target]);
    weights.push(moved);
    AtomicMixture::from_unnormalized(atoms, weights).unwrap()
}

#[test]
fn ball_around_separated_mixture_stays_separated() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..500 {
        let k = rng.random_range(1..=5);
        let nu0 = common::random_mixture(&mut rng, k, 6.0, 0.3, 0.05);
        let c = rng.random_range(0.001..0.249);
        let radius = c * min_atom_gap(&nu0).min(1e6) * min_weight(&nu0);
        let mut t = 1.0;
        let candidate = loop {
            let cand = perturb(&nu0, t, &mut rng, 6.0);
            if wasserstein(&cand, &nu0, 1.0) < radius {
                break cand;
            }
            t *= 0.7;
        };
        assert!(
            separation_witness_for_ball(&nu0, c, &candidate).unwrap(),
            "trial {trial}: {nu0:?} c={c} {candidate:?}"
        );
    }
}

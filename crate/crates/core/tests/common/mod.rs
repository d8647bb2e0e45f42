#![allow(dead_code)]

use mixbayes_core::AtomicMixture;
use rand::Rng;

/// Random mixture with `k` atoms in `[-bound, bound]`, pairwise gaps of at least
/// `min_gap` and weights of at least `min_weight`.
pub fn random_mixture<R: Rng>(
    rng: &mut R,
    k: usize,
    bound: f64,
    min_gap: f64,
    min_weight: f64,
) -> AtomicMixture {
    let atoms = loop {
        let mut a: Vec<f64> = (0..k).map(|_| rng.random_range(-bound..=bound)).collect();
        a.sort_by(f64::total_cmp);
        if a.windows(2).all(|w| w[1] - w[0] >= min_gap) {
            break a;
        }
    };
    let raw: Vec<f64> = (0..k).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    let free = 1.0 - min_weight * k as f64;
    let weights = raw.iter().map(|r| min_weight + free * r / total).collect();
    AtomicMixture::new(atoms, weights).unwrap()
}

/// Random mixture with 1..=max_k atoms and no separation requirement.
pub fn loose_mixture<R: Rng>(rng: &mut R, max_k: usize, bound: f64) -> AtomicMixture {
    let k = rng.random_range(1..=max_k);
    random_mixture(rng, k, bound, 0.0, 0.0)
}

pub fn case(i: usize) -> AtomicMixture {
    match i {
        1 => AtomicMixture::uniform(vec![-3.0, -1.0, 1.0, 3.0]).unwrap(),
        2 => AtomicMixture::uniform(vec![-1.5, -1.0, 1.0, 3.0]).unwrap(),
        3 => AtomicMixture::new(vec![-3.0, -1.0, 1.0, 3.0], vec![0.4, 0.1, 0.25, 0.25]).unwrap(),
        4 => AtomicMixture::uniform(vec![-6.0, -4.0, -2.0, 0.0, 2.0, 4.0, 6.0]).unwrap(),
        _ => panic!("no case {i}"),
    }
}

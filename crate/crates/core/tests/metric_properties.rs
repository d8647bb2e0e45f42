mod common;

use mixbayes_core::metrics::{
    hellinger_sq, kl_divergence, wasserstein, wasserstein_lp_oracle, wasserstein_partition_bound_check,
    BinPartition,
};
use mixbayes_core::{AtomicMixture, GaussianMixtureDensity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn quantile_sweep_matches_transport_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..200 {
        let a = common::loose_mixture(&mut rng, 6, 6.0);
        let b = common::loose_mixture(&mut rng, 6, 6.0);
        for q in [1.0, 2.0] {
            let fast = wasserstein(&a, &b, q);
            let (exact, plan) = wasserstein_lp_oracle(&a, &b, q).unwrap();
            assert!((fast - exact).abs() < 1e-9, "trial {trial} q={q}: {fast} vs {exact}");
            assert!(plan.has_marginals(a.weights(), b.weights(), 1e-9));
        }
    }
}

#[test]
fn wasserstein_is_a_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let a = common::loose_mixture(&mut rng, 6, 6.0);
        let b = common::loose_mixture(&mut rng, 6, 6.0);
        let c = common::loose_mixture(&mut rng, 6, 6.0);
        for q in [1.0, 2.0] {
            let ab = wasserstein(&a, &b, q);
            assert!((ab - wasserstein(&b, &a, q)).abs() < 1e-12);
            assert!(ab <= wasserstein(&a, &c, q) + wasserstein(&c, &b, q) + 1e-9);
            assert!(wasserstein(&a, &a, q) < 1e-9);
        }
        // the same measure written with its atoms in another order
        let mut pairs: Vec<(f64, f64)> = a.iter().collect();
        pairs.reverse();
        let reordered = AtomicMixture::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect()).unwrap();
        assert!(wasserstein(&a, &reordered, 1.0) < 1e-9);
    }
}

#[test]
fn w1_never_exceeds_w2() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let a = common::loose_mixture(&mut rng, 6, 6.0);
        let b = common::loose_mixture(&mut rng, 6, 6.0);
        assert!(wasserstein(&a, &b, 1.0) <= wasserstein(&b, &a, 2.0) + 1e-12);
    }
}

#[test]
fn hellinger_and_kl_are_dominated_by_w2() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let a = common::loose_mixture(&mut rng, 4, 6.0);
        let b = common::loose_mixture(&mut rng, 4, 6.0);
        let w2sq = wasserstein(&a, &b, 2.0).powi(2);
        let (da, db) = (GaussianMixtureDensity::new(a), GaussianMixtureDensity::new(b));
        let h = hellinger_sq(&da, &db);
        let kl = kl_divergence(&da, &db);
        assert!(h <= 0.25 * w2sq + 1e-6, "H^2 {h} vs W2^2/4 {}", 0.25 * w2sq);
        assert!(kl <= 0.5 * w2sq + 1e-6, "KL {kl} vs W2^2/2 {}", 0.5 * w2sq);
        assert!(kl >= -1e-8 && h >= -1e-8);
    }
}

#[test]
fn partition_bound_holds_on_dyadic_partitions() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let a = common::loose_mixture(&mut rng, 6, 6.0);
        let b = common::loose_mixture(&mut rng, 6, 6.0);
        let partition = BinPartition::dyadic(6.0, rng.random_range(0..=6));
        let q = if rng.random::<bool>() { 1.0 } else { 2.0 };
        assert!(wasserstein_partition_bound_check(&a, &b, &partition, q).unwrap());
    }
}

proptest! {
    #[test]
    fn scaling_atoms_scales_w1(
        a in proptest::collection::vec(-6.0f64..6.0, 1..6),
        b in proptest::collection::vec(-6.0f64..6.0, 1..6),
        s in 0.01f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let nu1 = AtomicMixture::uniform(a).unwrap();
        let nu2 = AtomicMixture::uniform(b).unwrap();
        let base = wasserstein(&nu1, &nu2, 1.0);
        let scaled = wasserstein(&nu1.affine(s, shift), &nu2.affine(s, shift), 1.0);
        prop_assert!((scaled - s * base).abs() <= 1e-12 * (1.0 + s * base) * 10.0);
    }
}

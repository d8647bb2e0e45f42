use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mixbayes_core::metrics::{hellinger_sq, wasserstein_lp_oracle};
use mixbayes_core::{wasserstein, AtomicMixture, GaussianMixtureDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn random_mixture(rng: &mut ChaCha8Rng, k: usize) -> AtomicMixture {
    let atoms = (0..k).map(|_| rng.random_range(-6.0..6.0)).collect();
    let masses = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
    AtomicMixture::from_unnormalized(atoms, masses).unwrap()
}

fn bench_wasserstein(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut group = c.benchmark_group("wasserstein");
    for k in [4, 16, 256] {
        let (a, b) = (random_mixture(&mut rng, k), random_mixture(&mut rng, k));
        group.bench_with_input(BenchmarkId::new("sweep_w1", k), &k, |bench, _| {
            bench.iter(|| wasserstein(black_box(&a), black_box(&b), 1.0))
        });
    }
    let (a, b) = (random_mixture(&mut rng, 6), random_mixture(&mut rng, 6));
    group.bench_function("lp_oracle_w1/6", |bench| bench.iter(|| wasserstein_lp_oracle(black_box(&a), black_box(&b), 1.0)));
    group.finish();
}

fn bench_hellinger(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = GaussianMixtureDensity::new(random_mixture(&mut rng, 4));
    let b = GaussianMixtureDensity::new(random_mixture(&mut rng, 4));
    c.bench_function("hellinger_sq/4", |bench| bench.iter(|| hellinger_sq(black_box(&a), black_box(&b))));
}

criterion_group!(benches, bench_wasserstein, bench_hellinger);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use mixbayes_bench::case1_data;
use mixbayes_core::samplers::{neal8_step, rjmcmc_step, DpState, MfmDiagnostics, MfmState};
use mixbayes_core::{DpPriorSpec, PriorSpec, SamplerConfig, Schedule};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn bench_rjmcmc(c: &mut Criterion) {
    let mut group = c.benchmark_group("rjmcmc_sweep");
    let prior = PriorSpec::poisson(Schedule::InverseN);
    let cfg = SamplerConfig::default();
    for n in [250, 2500] {
        let data = case1_data(n);
        let mut state = MfmState::initial(&data, &prior, &cfg).unwrap();
        let mut diag = MfmDiagnostics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // warm up so the state sits near the posterior
        for _ in 0..500 {
            rjmcmc_step(&mut state, &data, &cfg, &mut diag, &mut rng);
        }
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter_batched(
                || state.clone(),
                |mut s| rjmcmc_step(&mut s, &data, &cfg, &mut diag, &mut rng),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn bench_neal8(c: &mut Criterion) {
    let mut group = c.benchmark_group("neal8_sweep");
    let prior = DpPriorSpec::vary();
    let cfg = SamplerConfig::default();
    for n in [250, 2500] {
        let data = case1_data(n);
        let mut state = DpState::initial(&data, n, 6, prior.bound).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            neal8_step(&mut state, &data, &prior, &cfg, &mut rng);
        }
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter_batched(
                || state.clone(),
                |mut s| neal8_step(&mut s, &data, &prior, &cfg, &mut rng),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, bench_rjmcmc, bench_neal8);
criterion_main!(benches);

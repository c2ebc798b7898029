use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use interweave_bench::{copula_data, unit_grid, LATENT};
use interweave_core::ar1::{sample_block_recursive, simulate_path, Block};
use interweave_core::copulas::{self, CopulaParams};
use interweave_core::dists::StdSkewT;
use interweave_core::engine::Chain;
use interweave_core::{rng, ChainConfig, CopulaFamily, DynCopulaModel, SamplerSpec};
use std::hint::black_box;

fn block_sampler(c: &mut Criterion) {
    let mut r = rng::stream(1, 0);
    let s = simulate_path(&LATENT, 200, &mut r);
    for len in [5, 20, 100] {
        let blk = Block::new(50, 49 + len).unwrap();
        c.bench_function(&format!("ar1 block draw, length {len}"), |b| {
            b.iter(|| sample_block_recursive(&LATENT, &blk, s[49], Some(s[50 + len]), &mut r).unwrap())
        });
    }
}

fn copula_density(c: &mut Criterion) {
    let grid = unit_grid(30);
    for family in [
        CopulaFamily::Gaussian,
        CopulaFamily::ExtClayton,
        CopulaFamily::StudentT,
        CopulaFamily::Mixture,
    ] {
        let p = CopulaParams::mixture(-0.4, 6.0, 0.4);
        c.bench_function(&format!("copula log density, {} (900 points)", family.name()), |b| {
            b.iter(|| {
                grid.iter()
                    .map(|&(u1, u2)| copulas::logdensity(family, u1, u2, &p).unwrap())
                    .sum::<f64>()
            })
        });
    }
}

fn skew_t(c: &mut Criterion) {
    let d = StdSkewT::new(-0.51, 6.84).unwrap();
    c.bench_function("skew-t log density", |b| b.iter(|| d.logpdf(black_box(0.7))));
    c.bench_function("skew-t cdf", |b| b.iter(|| d.cdf(black_box(0.7))));
    c.bench_function("skew-t quantile", |b| b.iter(|| d.quantile(black_box(0.3)).unwrap()));
}

fn sweeps(c: &mut Criterion) {
    let u = copula_data(500);
    let mut group = c.benchmark_group("ext_clayton sweep, T = 500");
    for spec in ["(5,I)", "(5,NI)", "(T,I)", "(T,NI)"] {
        group.bench_function(spec, |b| {
            b.iter_batched(
                || DynCopulaModel::new(CopulaFamily::ExtClayton, &u, f64::NAN, f64::NAN).unwrap(),
                |mut model| {
                    let cfg = ChainConfig::new(SamplerSpec::parse(spec).unwrap(), 10, 0, 3);
                    let mut chain = Chain::new(&mut model, cfg).unwrap();
                    for _ in 0..10 {
                        chain.sweep().unwrap();
                    }
                },
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, block_sampler, copula_density, skew_t, sweeps);
criterion_main!(benches);

//! Sequential vs data-parallel exhaustive search over the discrete phase
//! space, on a surface small enough to enumerate.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ris_opt::baselines::{exhaustive_oracle_par, exhaustive_oracle_seq};
use ris_opt::channel::realize_channels;
use ris_opt::config::SystemConfig;

fn bench_oracle(c: &mut Criterion) {
    let mut group = c.benchmark_group("exhaustive_oracle");
    for (n, bits) in [(9usize, 1u32), (9, 2), (16, 1)] {
        let cfg = SystemConfig {
            n_elements: n,
            n_antennas: 2,
            n_users: 2,
            resolution_bits: bits,
            ..SystemConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let ch = realize_channels(&cfg, &mut rng).unwrap();
        let label = format!("N{n}_R{bits}");
        group.bench_with_input(BenchmarkId::new("sequential", &label), &(), |b, _| {
            b.iter(|| exhaustive_oracle_seq(&ch, &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("parallel", &label), &(), |b, _| {
            b.iter(|| exhaustive_oracle_par(&ch, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_oracle
}
criterion_main!(benches);

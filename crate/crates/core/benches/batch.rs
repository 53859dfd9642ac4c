//! Sequential vs data-parallel batch of MaxRP solves on Saidman-like pools.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rpkep::generate::{generate_saidman_like, SaidmanConfig};
use rpkep::mechanisms::{solve_maxrp, MaxRpOptions};
use rpkep::{par, Execution, Market};

fn batch(c: &mut Criterion) {
    let cfg = SaidmanConfig::default().with_pool_sizes(vec![15, 15]);
    let markets: Vec<Market> = (0..24)
        .map(|s| {
            let inst = generate_saidman_like(&cfg, s).unwrap();
            Market::new(inst).with_execution(Execution::Sequential)
        })
        .collect();
    let opts = MaxRpOptions::default();

    let mut group = c.benchmark_group("maxrp_batch_15x2");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let name = if exec.is_parallel() { "parallel" } else { "sequential" };
        group.bench_function(name, |b| {
            b.iter(|| {
                let values = par::map(exec, &markets, |m| solve_maxrp(m, &opts).unwrap().0.value);
                black_box(values)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);

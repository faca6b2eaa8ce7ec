use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use hetsplit_bench::{batch, features, network, reports, CLASSES};
use hetsplit_core::aggregation::{aggregate_round, AggregationConfig};
use hetsplit_core::nn::{backward, forward, softmax_cross_entropy};
use hetsplit_core::tpgf::{tpgf_step, ClientState, ConnectivityOracle, TpgfConfig};
use hetsplit_core::ClientProfile;

fn dense(c: &mut Criterion) {
    let net = network(1);
    let x = features(32, 2);
    let labels = batch(32, 2).labels;
    c.bench_function("forward_full_path_b32", |b| b.iter(|| forward(black_box(net.full_path()), black_box(&x))));
    c.bench_function("forward_backward_b32", |b| {
        b.iter(|| {
            let (logits, cache) = forward(net.full_path(), &x).unwrap();
            let (_, d) = softmax_cross_entropy(&logits, &labels).unwrap();
            backward(net.full_path(), &cache, &d).unwrap()
        })
    });
}

fn step(c: &mut Criterion) {
    let net = network(1);
    let depth = 3;
    let client = ClientState::new(
        0,
        depth,
        net.slice_prefix(depth).unwrap(),
        Some(net.make_client_head(depth, CLASSES, 4).unwrap()),
        ClientProfile { memory_gb: 8.0, latency_ms: 50.0 },
    );
    let b32 = batch(32, 3);
    let oracle = ConnectivityOracle::always();
    let cfg = TpgfConfig::default();
    c.bench_function("tpgf_step_b32", |b| {
        b.iter_batched(
            || (client.clone(), net.clone()),
            |(mut cl, mut sv)| tpgf_step(&mut cl, &mut sv, &b32, &oracle, 0, 0, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn aggregation(c: &mut Criterion) {
    let net = network(1);
    let reps = reports(10);
    let cfg = AggregationConfig::default();
    c.bench_function("aggregate_round_10_clients", |b| {
        b.iter_batched(
            || net.clone(),
            |mut sv| aggregate_round(black_box(&reps), &mut sv, &cfg).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, dense, step, aggregation);
criterion_main!(benches);

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use newsmon_core::neural::{predict, Lstm, NetSpec, Network};
use newsmon_core::rng::rng_for;
use newsmon_core::synth::planted_topics;
use newsmon_core::topics::GibbsSampler;
use newsmon_core::tsdecomp::{decompose, DecompModel, DecomposeOptions, VolumeSeries};

fn gibbs_sweep(c: &mut Criterion) {
    let p = planted_topics(500, 200, 8, 80, 0.8, 0);
    let mut g = GibbsSampler::new(&p.docs, p.v, 8, 50.0 / 8.0, 0.01, None, rng_for(0, 1)).unwrap();
    c.bench_function("gibbs sweep 40k tokens K=8", |b| b.iter(|| g.sweep()));
}

fn decomposition(c: &mut Criterion) {
    let season = [1.3, 0.8, 0.9, 1.1, 1.2, 0.7, 1.0];
    let values = (0..140).map(|t| (20.0 + 1.5 * t as f64) * season[t % 7] + (t % 5) as f64).collect();
    let s = VolumeSeries::new("2020-01-21".parse().unwrap(), values).unwrap();
    c.bench_function("multiplicative decomposition 140 days", |b| {
        b.iter(|| decompose(black_box(&s), DecompModel::Multiplicative, DecomposeOptions::default()).unwrap())
    });
}

fn lstm(c: &mut Criterion) {
    let (d, h, t) = (100, 100, 200);
    let layer = Lstm::init(d, h, &mut rng_for(0, 2));
    let x: Vec<f64> = (0..t * d).map(|i| (i as f64 * 0.37).sin()).collect();
    let mask = vec![true; t];
    c.bench_function("lstm forward 200x100 -> 100", |b| {
        b.iter(|| layer.forward(black_box(&x), &mask, false))
    });

    let mut spec = NetSpec::sentiment().with_dims(64, 64, 32, 32);
    spec.vocab_size = 5000;
    let net = Network::new(&spec).unwrap();
    let ids: Vec<u32> = (0..200).map(|i| (i * 37 % 4999 + 1) as u32).collect();
    c.bench_function("sentiment net predict 200 tokens", |b| b.iter(|| predict(&net, black_box(&ids)).unwrap()));
}

criterion_group!(benches, gibbs_sweep, decomposition, lstm);
criterion_main!(benches);

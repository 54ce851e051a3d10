use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use lifetest_core::data_io::{generate_synthetic, split, SynthConfig};
use lifetest_core::forest::Tuning;
use lifetest_core::lpalt::{train_lpalt, LpAltConfig};
use lifetest_core::pcdp::{samples, train_pcdp, PcdpConfig};
use lifetest_core::ForestParams;

fn fixed(n_estimators: usize) -> Tuning {
    Tuning::Fixed { params: ForestParams { n_estimators, ..ForestParams::default() } }
}

fn synth(c: &mut Criterion) {
    let cfg = SynthConfig { seed: 1, ..SynthConfig::default() };
    c.bench_function("synth_default", |b| b.iter(|| generate_synthetic(black_box(&cfg)).unwrap()));
}

fn pcdp(c: &mut Criterion) {
    let ds = generate_synthetic(&SynthConfig { n_devices: 12, n_test: 4, seed: 1, ..SynthConfig::default() }).unwrap();
    let (train, _) = split(&ds.devices, &ds.split).unwrap();
    let cfg = PcdpConfig { tuning: fixed(20), seed: 1, ..PcdpConfig::default() };
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("pcdp_train_8dev_20trees", |b| b.iter(|| train_pcdp(&samples(black_box(&train)), &cfg).unwrap()));
    g.finish();
}

fn lpalt(c: &mut Criterion) {
    let ds = generate_synthetic(&SynthConfig::life_prediction(1)).unwrap();
    let (train, _) = split(&ds.devices, &ds.split).unwrap();
    let cfg = LpAltConfig { tuning: fixed(100), seed: 1, ..LpAltConfig::default() };
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    g.bench_function("lpalt_train_75dev_100trees", |b| b.iter(|| train_lpalt(black_box(&train), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, synth, pcdp, lpalt);
criterion_main!(benches);

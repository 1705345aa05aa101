//! Throughput benchmarks for the pipeline's hot paths: histogram fitting
//! and sampling, variant generation, model forward/backward, and the attack
//! loop.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use ards_core::attack::build_adversarial_set;
use ards_core::augment::{generate, GenConfig, VecSink};
use ards_core::hist::EmpiricalModel;
use ards_core::io::DataSource;
use ards_core::model::{backward, forward_eval, forward_train, init_params, RegularizerConfig};
use ards_core::streams::{rng_for, Domain};
use ards_core::synth::make_synthetic;
use ards_core::{AttackConfig, SynthConfig, TrainConfig};

fn bench_histograms(c: &mut Criterion) {
    let ds = make_synthetic(&SynthConfig::new(10_000, 1));
    let mut group = c.benchmark_group("histograms");
    group.throughput(Throughput::Elements(ds.len() as u64));
    group.bench_function("fit_100_bins", |b| {
        b.iter(|| EmpiricalModel::fit(black_box(&ds), 100).unwrap())
    });

    let em = EmpiricalModel::fit(&ds, 100).unwrap();
    group.throughput(Throughput::Elements(10_000));
    group.bench_function("sample_10k_draws", |b| {
        let mut rng = rng_for(2, Domain::Augment, &[0]);
        b.iter(|| {
            let mut acc = 0.0;
            for i in 0..10_000usize {
                acc += em.sample_feature(i % 87, &mut rng).unwrap();
            }
            acc
        })
    });
    group.finish();
}

fn bench_generation(c: &mut Criterion) {
    let source = make_synthetic(&SynthConfig::new(1_000, 3));
    let mut group = c.benchmark_group("generation");
    group.sample_size(20);
    for n_vars in [5usize, 10] {
        let cfg = GenConfig::new(100, n_vars, 10, 7).unwrap();
        group.throughput(Throughput::Elements(10_000));
        group.bench_with_input(BenchmarkId::new("rows", n_vars), &cfg, |b, cfg| {
            b.iter(|| {
                let mut sink = VecSink::new();
                generate(black_box(&source), cfg, &mut sink).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_model(c: &mut Criterion) {
    let model = init_params(5, 0.075, ards_core::default_schema()).unwrap();
    let ds = make_synthetic(&SynthConfig::new(64, 6));
    let reg = RegularizerConfig::default();

    let mut group = c.benchmark_group("model");
    group.throughput(Throughput::Elements(ds.len() as u64));
    group.bench_function("forward_eval", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for s in ds.samples() {
                acc += forward_eval(black_box(&model), s.features());
            }
            acc
        })
    });
    group.bench_function("forward_backward", |b| {
        b.iter(|| {
            let mut rng = rng_for(6, Domain::Regularizer, &[0]);
            let mut acc = 0.0;
            for s in ds.samples() {
                let cache = forward_train(black_box(&model), s.features(), &reg, &mut rng);
                let grad = backward(&model, &cache, s.label());
                acc += grad.tail.b_out;
            }
            acc
        })
    });
    group.finish();
}

fn bench_attack(c: &mut Criterion) {
    let ds = make_synthetic(&SynthConfig::new(5_000, 8));
    let train_cfg = TrainConfig {
        seed: 8,
        batch_size: 512,
        ..TrainConfig::default()
    };
    let (model, _) = ards_core::train(&DataSource::Memory(ds.clone()), &train_cfg, 0.075).unwrap();
    let eval_ds = make_synthetic(&SynthConfig::new(200, 9));
    let victim = |x: &[f64]| ards_core::model::predict(&model, x);

    let mut group = c.benchmark_group("attack");
    group.sample_size(10);
    group.throughput(Throughput::Elements(eval_ds.len() as u64));
    group.bench_function("build_adversarial_200_rows", |b| {
        let cfg = AttackConfig {
            n_bins: 100,
            n_vars: 5,
            max_tries: 20,
            seed: 10,
        };
        b.iter(|| build_adversarial_set(black_box(&victim), &eval_ds, &cfg).unwrap().1)
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_histograms,
    bench_generation,
    bench_model,
    bench_attack
);
criterion_main!(benches);

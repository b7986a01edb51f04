//! Kernel throughput on one thread (the sequential path) versus a full pool.
//!
//! Run with `cargo bench -p rankmir`; build with `--no-default-features` to
//! compare against a binary without rayon at all.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rankmir::classify::{predict_scores, train_ovr_linear, Hyperparams};
use rankmir::normalize::{fit_rank_reference, l2_normalize, power_normalize, rank_normalize_approx, rank_normalize_exact, TiePolicy};
use rankmir::par::with_threads;
use rankmir::rerank::mir_rerank;
use rankmir::{LabelVector, Matrix, MirParams};

fn random(n: usize, d: usize, seed: u64) -> Matrix {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    Matrix::new(n, d, (0..n * d).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap()
}

fn thread_counts() -> Vec<usize> {
    // On single-core hosts the pool still runs, measuring pure overhead.
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    vec![1, all.max(2)]
}

fn bench<F: Fn() + Sync + Send>(c: &mut Criterion, group: &str, f: F) {
    let mut g = c.benchmark_group(group);
    for t in thread_counts() {
        g.bench_with_input(BenchmarkId::new("threads", t), &t, |b, &t| {
            with_threads(t, || b.iter(&f));
        });
    }
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let x = random(2000, 512, 1);
    let reference = fit_rank_reference(&x, 100, 2).unwrap();
    let scores = random(4000, 16, 3);
    let y = LabelVector::new((0..600).map(|i| i % 8).collect());
    let train = random(600, 256, 4);
    let h = Hyperparams { epochs: 20, ..Hyperparams::default() };
    let model = train_ovr_linear(&train, &y, &h, 0).unwrap();
    let test = random(4000, 256, 5);

    bench(c, "rank_exact_2000x512", || {
        std::hint::black_box(rank_normalize_exact(&x, TiePolicy::Average));
    });
    bench(c, "rank_approx_s100_2000x512", || {
        std::hint::black_box(rank_normalize_approx(&x, &reference).unwrap());
    });
    bench(c, "l2_2000x512", || {
        std::hint::black_box(l2_normalize(&x));
    });
    bench(c, "power_2000x512", || {
        std::hint::black_box(power_normalize(&x, 0.5).unwrap());
    });
    bench(c, "mir_4000x16", || {
        std::hint::black_box(mir_rerank(&scores, &MirParams::default()).unwrap());
    });
    bench(c, "predict_4000x256_k8", || {
        std::hint::black_box(predict_scores(&model, &test).unwrap());
    });
    bench(c, "train_600x256_k8_20epochs", || {
        std::hint::black_box(train_ovr_linear(&train, &y, &h, 0).unwrap());
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);

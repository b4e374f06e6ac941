//! Parallel vs sequential comparison for the hot paths: whole-table
//! mapping under each weighting scheme, and the sparsemax kernel alone.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use crosstitch_core::lexicon::Side;
use crosstitch_core::mapping::{map_table, map_table_seq};
use crosstitch_core::relrep::{sparsemax, WeightKind, WeightingScheme};
use crosstitch_core::synth::{generate_pair, SynthScenario};

fn bench_map_table(c: &mut Criterion) {
    let scenario = SynthScenario {
        vocab_size: 600,
        dim: 24,
        noise_sigma: 0.3,
        anchor_count: 200,
        n_classes: 3,
        examples: 4,
        seed: 99,
    };
    let (source, target, anchors) = generate_pair(&scenario).unwrap();

    let mut group = c.benchmark_group("map_table");
    group.sample_size(20);
    for kind in WeightKind::ALL {
        let scheme = WeightingScheme::new(kind, 50, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::new("parallel", kind), &scheme, |b, s| {
            b.iter(|| {
                map_table(
                    black_box(&target),
                    &anchors,
                    Side::Target,
                    &source,
                    s,
                    false,
                )
                .unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("sequential", kind), &scheme, |b, s| {
            b.iter(|| {
                map_table_seq(
                    black_box(&target),
                    &anchors,
                    Side::Target,
                    &source,
                    s,
                    false,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

fn bench_sparsemax(c: &mut Criterion) {
    let z: Vec<f64> = (0..256)
        .map(|i| ((i as f64 * 12.9898).sin() * 43758.5453).fract())
        .collect();
    c.bench_function("sparsemax_256", |b| b.iter(|| sparsemax(black_box(&z))));
}

criterion_group!(benches, bench_map_table, bench_sparsemax);
criterion_main!(benches);

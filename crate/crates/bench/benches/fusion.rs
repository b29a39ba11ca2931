use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ensel::fusion::{fuse_stack, ThresholdVector};
use ensel::pipeline::{emit_stack, random_masks, synthesize_matrix, FitnessTable, SyntheticPredictorSpec};

fn specs(k: usize) -> Vec<SyntheticPredictorSpec> {
    (0..k)
        .map(|i| SyntheticPredictorSpec::new(format!("m{i}"), 0.5 + 0.05 * i as f64, 3.0, 0, i as u64))
        .collect()
}

fn fuse(c: &mut Criterion) {
    let mut group = c.benchmark_group("fuse_stack");
    // one 288x384 image, as in the retinal-vessel setting
    let mask = &random_masks(1, 288, 384, 2, 1)[0];
    for k in [3, 9] {
        let stack = emit_stack(mask, &specs(k), 2, 0).unwrap();
        let t = ThresholdVector::filled(k, 0.4);
        group.throughput(Throughput::Elements((288 * 384) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(k), &stack, |b, s| {
            b.iter(|| fuse_stack(black_box(s), &t).unwrap())
        });
    }
    group.finish();
}

fn fitness(c: &mut Criterion) {
    let mut group = c.benchmark_group("fitness");
    let masks = random_masks(20, 64, 64, 2, 7);
    for k in [3, 9] {
        let pm = synthesize_matrix(&masks, &specs(k), 2, 5).unwrap();
        let table = FitnessTable::new(&pm);
        let t = vec![0.4; k];
        group.throughput(Throughput::Elements(pm.pixel_count() as u64));
        group.bench_with_input(BenchmarkId::new("table", k), &t, |b, t| b.iter(|| table.report(black_box(t))));
    }
    group.finish();
}

criterion_group!(benches, fuse, fitness);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ensel::clpso::{optimize_in, Bounds, Swarm};
use ensel::pipeline::{random_masks, synthesize_matrix, FitnessTable, SyntheticPredictorSpec};
use ensel::testfns::TestFunction;
use ensel::SwarmConfig;

fn sphere_run(c: &mut Criterion) {
    let mut group = c.benchmark_group("clpso_sphere");
    for dim in [2, 10, 30] {
        let cfg = SwarmConfig { max_iter: 200, seed: 1, ..SwarmConfig::default() };
        let f = |x: &[f64]| -TestFunction::Sphere.eval(x);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, &dim| {
            b.iter(|| optimize_in(&cfg, &f, Bounds::cube(dim, -5.0, 5.0).unwrap()).unwrap())
        });
    }
    group.finish();
}

fn threshold_steps(c: &mut Criterion) {
    let masks = random_masks(20, 32, 32, 2, 2024);
    let specs: Vec<_> = (0..9)
        .map(|i| SyntheticPredictorSpec::new(format!("m{i}"), 0.5 + 0.05 * i as f64, 3.0, 0, i as u64))
        .collect();
    let pm = synthesize_matrix(&masks, &specs, 2, 5).unwrap();
    let table = FitnessTable::new(&pm);
    c.bench_function("clpso_step_k9", |b| {
        let cfg = SwarmConfig { seed: 2, ..SwarmConfig::default() };
        let mut swarm = Swarm::new(cfg, Bounds::thresholds(9, 2).unwrap(), &table).unwrap();
        b.iter(|| swarm.step(black_box(&table)).unwrap())
    });
}

criterion_group!(benches, sphere_run, threshold_steps);
criterion_main!(benches);

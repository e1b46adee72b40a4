//! Sequential vs rayon execution of the same sweep.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mlo_sim::scenario::SweepSpec;
use mlo_sim::{Execution, Preset};

fn spec(duration_s: f64) -> SweepSpec {
    SweepSpec {
        preset: Some(Preset::Fig4),
        loads_bps: vec![0.5e9, 2.5e9],
        seeds: Some(vec![1, 2]),
        duration_s: Some(duration_s),
        warmup_fraction: None,
        schemes: Vec::new(),
    }
}

fn sweep_execution(c: &mut Criterion) {
    let mut group = c.benchmark_group("fig4_sweep");
    group.sample_size(10);
    for duration in [0.2, 1.0] {
        let spec = spec(duration);
        for (name, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(name, duration), &spec, |b, spec| {
                b.iter(|| mlo_sim::sweep(spec, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn single_run(c: &mut Criterion) {
    let mut s = Preset::Fig4.scenarios(2.5e9).remove(2);
    s.duration_s = 1.0;
    c.bench_function("fig4_emlmr4_1s", |b| {
        b.iter(|| mlo_sim::run(&s, 1).unwrap())
    });
}

criterion_group!(benches, sweep_execution, single_run);
criterion_main!(benches);

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pon_mpc::{AllocatorKind, Scenario, Simulation};

fn slots(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate_1000_slots");
    group.sample_size(10);
    for name in AllocatorKind::NAMES {
        let scenario = Scenario { allocator: name.parse().unwrap(), ..Scenario::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &scenario, |b, s| {
            b.iter(|| {
                let mut sim = Simulation::new(s).unwrap();
                for _ in 0..1000 {
                    sim.step().unwrap();
                }
                sim.finish()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, slots);
criterion_main!(benches);

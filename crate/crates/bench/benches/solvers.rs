use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pon_mpc::opt::{brute_force_ilp, build_mpc_program, check_totally_unimodular_ghouila_houri, solve_lp, solve_myopic_maxflow};
use pon_mpc_bench::{desk_case, oracle_cases};
use std::hint::black_box;

fn lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_lp");
    for h in [0, 4, 10] {
        let case = desk_case(h);
        let inst = build_mpc_program(&case.banks, &case.specs, &case.slot, &case.predicted).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(h), &inst, |b, inst| b.iter(|| solve_lp(black_box(inst)).unwrap()));
    }
    group.finish();
}

fn maxflow(c: &mut Criterion) {
    let case = desk_case(0);
    c.bench_function("myopic_maxflow", |b| {
        b.iter(|| solve_myopic_maxflow(black_box(&case.banks), &case.specs, &case.slot).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let insts: Vec<_> = oracle_cases(50, None)
        .into_iter()
        .map(|k| build_mpc_program(&k.banks, &k.specs, &k.slot, &k.predicted).unwrap())
        .collect();
    c.bench_function("brute_force_ilp_50_instances", |b| {
        b.iter(|| insts.iter().map(|i| brute_force_ilp(i).unwrap()).sum::<i64>())
    });
}

fn unimodularity(c: &mut Criterion) {
    let case = desk_case(3);
    let single = build_mpc_program(&case.banks[..1], &case.specs[..1], &case.slot, &case.predicted[..1]).unwrap();
    let m = pon_mpc::opt::reduce_by_unit_rows(&single.matrix());
    c.bench_function("ghouila_houri_single_class_h3", |b| b.iter(|| check_totally_unimodular_ghouila_houri(black_box(&m)).unwrap()));
}

criterion_group!(benches, lp, maxflow, oracle, unimodularity);
criterion_main!(benches);

use criterion::{black_box, criterion_group, criterion_main, Criterion};
use lgs_bench::basin;
use lgs_core::lattice::{collide_cell, equilibrium_unchecked};

fn collide(c: &mut Criterion) {
    let mut f = equilibrium_unchecked(1.0, [0.01, -0.02, 0.005]);
    c.bench_function("collide_cell", |b| {
        b.iter(|| black_box(collide_cell(black_box(&mut f), 1.0, [0.0, 0.0, -1e-4])))
    });
}

fn step(c: &mut Criterion) {
    let mut sim = basin(32);
    c.bench_function("step_basin_32", |b| b.iter(|| sim.step().unwrap()));
}

criterion_group!(benches, collide, step);
criterion_main!(benches);

use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use nozzle_core::{
    boundary_data, build_grid, build_shear_profile, discrete_energy, energy_gradient, preset_geometry, solve_minimizer,
    DiscreteField, FlowConstants, Initialization, PresetParams, SolverConfig,
};

fn bump_field(nx: usize, ns: usize) -> DiscreteField {
    let consts = FlowConstants::new(1.0).unwrap();
    let geom = preset_geometry("symmetric-bump", &PresetParams::new()).unwrap();
    let grid = Arc::new(build_grid(&geom, 5.0, nx, ns).unwrap());
    let bd = boundary_data(&geom, &grid, &consts).unwrap();
    let psi = (0..grid.len()).map(|n| bd.values[n].max(grid.sigma[n % ns])).collect();
    DiscreteField::new(grid, consts, &bd, psi).unwrap()
}

fn shear(c: &mut Criterion) {
    let consts = FlowConstants::new(1.0).unwrap();
    c.bench_function("shear_profile d=0.5 201 nodes", |b| {
        b.iter(|| build_shear_profile(black_box(0.5), &consts, 201).unwrap())
    });
}

fn energy(c: &mut Criterion) {
    let field = bump_field(161, 41);
    c.bench_function("discrete_energy 161x41", |b| b.iter(|| discrete_energy(black_box(&field))));
    c.bench_function("energy_gradient 161x41", |b| b.iter(|| energy_gradient(black_box(&field))));
}

fn grid(c: &mut Criterion) {
    let geom = preset_geometry("symmetric-bump", &PresetParams::new()).unwrap();
    c.bench_function("build_grid 161x41", |b| b.iter(|| build_grid(&geom, 5.0, black_box(161), 41).unwrap()));
}

fn solve(c: &mut Criterion) {
    let consts = FlowConstants::new(1.0).unwrap();
    let geom = preset_geometry("symmetric-bump", &PresetParams::new()).unwrap();
    let grid = Arc::new(build_grid(&geom, 5.0, 81, 21).unwrap());
    let bd = boundary_data(&geom, &grid, &consts).unwrap();
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    for (name, init) in [("column-shear", Initialization::ColumnShear), ("sigma-linear", Initialization::SigmaLinear)] {
        let cfg = SolverConfig { init, deterministic: true, ..SolverConfig::default() };
        group.bench_function(format!("symmetric-bump 81x21 {name}"), |b| {
            b.iter(|| solve_minimizer(grid.clone(), &bd, &consts, &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, shear, energy, grid, solve);
criterion_main!(benches);

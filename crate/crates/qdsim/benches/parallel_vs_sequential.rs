//! Compares the data-parallel sweep against the sequential fallback on a
//! compact device. On a single-core host the two should be within noise of
//! each other; on multi-core hosts the parallel mode should win roughly
//! linearly in the number of sweep points per core.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qdsim::device::{DeviceSpec, Grid2D};
use qdsim::excitonics::SolverOptions;
use qdsim::sweep::{sweep_quadrupole, ExecMode};

fn bench_sweep(c: &mut Criterion) {
    let spec = DeviceSpec {
        shell_thickness_nm: 30.0,
        dielectric_thickness_nm: 30.0,
        gate_arc_width_nm: 60.0,
        ..DeviceSpec::default()
    };
    let grid = Grid2D::square(96, 210.0);
    let opts = SolverOptions::default();
    let n_points = 4;

    let mut group = c.benchmark_group("quadrupole_sweep");
    group.sample_size(10);
    for (label, mode) in [
        ("sequential", ExecMode::Sequential),
        ("parallel", ExecMode::Parallel),
    ] {
        group.bench_with_input(BenchmarkId::new(label, n_points), &mode, |b, &mode| {
            b.iter(|| {
                let records =
                    sweep_quadrupole(&spec, &grid, (-0.3, 0.3), n_points, &opts, mode).unwrap();
                assert!(records.iter().all(|r| r.report().is_some()));
                records
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);

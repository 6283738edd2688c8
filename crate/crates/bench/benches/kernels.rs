use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kernrank_core::{
    assemble_y, kernel_matrix, outer_field, rank_report, DotKernel, KernelFamily, KernelSpec, ManifoldSpec,
    TolerancePolicy,
};
use std::hint::black_box;

fn kernel_matrices(c: &mut Criterion) {
    let s2 = ManifoldSpec::sphere(2).unwrap();
    let mut group = c.benchmark_group("kernel_matrix");
    for k in [50, 150, 300] {
        let sample = s2.sample_uniform(k, 1, None).unwrap();
        for family in [KernelFamily::SquaredDistance, KernelFamily::DotProduct(DotKernel::ArccosSquared)] {
            let kernel = KernelSpec::new(family, s2);
            group.bench_with_input(BenchmarkId::new(family.to_string(), k), &sample, |b, s| {
                b.iter(|| kernel_matrix(&kernel, black_box(s), s).unwrap())
            });
        }
    }
    group.finish();
}

fn rank_reports(c: &mut Criterion) {
    let s2 = ManifoldSpec::sphere(2).unwrap();
    let kernel = KernelSpec::new(KernelFamily::SquaredDistance, s2);
    let mut group = c.benchmark_group("rank_report");
    for k in [50, 150, 300] {
        let sample = s2.sample_uniform(k, 1, None).unwrap();
        let m = kernel_matrix(&kernel, &sample, &sample).unwrap().entries;
        group.bench_with_input(BenchmarkId::from_parameter(k), &m, |b, m| {
            b.iter(|| rank_report(black_box(m), TolerancePolicy::default()).unwrap())
        });
    }
    group.finish();
}

fn tensor_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("assemble_y");
    for m in [ManifoldSpec::euclidean(3).unwrap(), ManifoldSpec::sphere(2).unwrap()] {
        for k in [20, 60] {
            let sample = m.sample_uniform(k, 1, None).unwrap();
            group.bench_with_input(BenchmarkId::new(m.to_string(), k), &sample, |b, s| {
                b.iter(|| assemble_y(&outer_field(m, black_box(s)).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, kernel_matrices, rank_reports, tensor_assembly);
criterion_main!(benches);

use calabi_core::calabi::{calabi_pair, calabi_point};
use calabi_core::decompose::{detect, DetectOptions};
use calabi_core::dsl::parse_immersion;
use calabi_core::exec::Execution;
use calabi_core::grid::Grid;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn detect_grid(c: &mut Criterion) {
    let h = parse_immersion("immersion h2 { vars: s; components: (0.7071067811865476*exp(s), 0.7071067811865476*exp(-s)); }")
        .unwrap();
    let def = calabi_pair(&h, &calabi_point(&h).unwrap()).unwrap();
    let mut group = c.benchmark_group("detect_pair_h_point");
    group.sample_size(10);
    for k in [2usize, 3] {
        let points = Grid::cube(def.dim(), -0.3, 0.3, k).points();
        for (label, execution) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            let opts = DetectOptions { execution, ..Default::default() };
            group.bench_with_input(BenchmarkId::new(label, points.len()), &points, |b, pts| {
                b.iter(|| detect(&def, pts, &opts))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, detect_grid);
criterion_main!(benches);

//! Sequential vs rayon execution of the per-point hot loops: field
//! evaluation of a fitted-size model, ray-cast occupancy labelling, IoU and
//! Chamfer-L1.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use neural_parts::geometry::{sample_sphere, Aabb, Fixture, InsideTester};
use neural_parts::homeo::{HomeoConfig, NeuralParts};
use neural_parts::metrics::{chamfer_l1, iou, MeshSolid};
use neural_parts::Exec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn bench_field(c: &mut Criterion) {
    let model = NeuralParts::init(HomeoConfig::desk(), 2, &mut rng(0)).unwrap();
    let points = Aabb::unit_cube().sample_uniform(8192, &mut rng(1));
    let mut group = c.benchmark_group("field_8k");
    for (name, exec) in MODES {
        let m = model.clone().with_exec(exec);
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(m.field(&points).unwrap()))
        });
    }
    group.finish();
}

fn bench_occupancy(c: &mut Criterion) {
    let tester = InsideTester::new(&Fixture::Dumbbell.mesh()).unwrap();
    let points = Aabb::unit_cube().sample_uniform(20_000, &mut rng(2));
    let mut group = c.benchmark_group("inside_20k");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(tester.contains_batch(&points, 0, exec)))
        });
    }
    group.finish();
}

fn bench_iou(c: &mut Criterion) {
    let tester = InsideTester::new(&Fixture::Sphere.mesh()).unwrap();
    let solid = MeshSolid { tester: &tester, seed: 0 };
    let model = NeuralParts::init(HomeoConfig::desk(), 1, &mut rng(0)).unwrap();
    let mut group = c.benchmark_group("iou_20k");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(iou(&model, &solid, &Aabb::unit_cube(), 20_000, &mut rng(3), exec).unwrap()))
        });
    }
    group.finish();
}

fn bench_chamfer(c: &mut Criterion) {
    let x = sample_sphere(4000, 0.3, &mut rng(4));
    let y = sample_sphere(4000, 0.4, &mut rng(5));
    let mut group = c.benchmark_group("chamfer_4k");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(chamfer_l1(&x, &y, exec).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_field, bench_occupancy, bench_iou, bench_chamfer);
criterion_main!(benches);

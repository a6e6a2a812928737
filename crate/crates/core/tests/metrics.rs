mod common;

use ndarray::{concatenate, Array2, Axis};
use neural_parts::diffgraph::Graph;
use neural_parts::geometry::{box_mesh, sample_sphere, sphere, Aabb, InsideTester, Vec3};
use neural_parts::losses::loss_rec;
use neural_parts::metrics::*;
use neural_parts::Exec;

fn squared_chamfer(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut g = Graph::new();
    let x = g.constant(a.clone());
    let y = g.constant(b.clone());
    let l = loss_rec(&mut g, x, y).unwrap();
    g.scalar(l)
}

#[test]
fn iou_of_offset_cube_meshes() {
    let a = InsideTester::new(&box_mesh(Vec3::new(-0.5, -0.25, -0.25), Vec3::new(0.0, 0.25, 0.25))).unwrap();
    let b = InsideTester::new(&box_mesh(Vec3::new(-0.25, -0.25, -0.25), Vec3::new(0.25, 0.25, 0.25))).unwrap();
    let sa = MeshSolid { tester: &a, seed: 1 };
    let sb = MeshSolid { tester: &b, seed: 1 };
    let v = iou(&sa, &sb, &Aabb::unit_cube(), 100_000, &mut common::rng(3), Exec::Parallel).unwrap();
    assert!((v - 1.0 / 3.0).abs() < 0.01, "{v}");
}

#[test]
fn iou_is_symmetric_and_seed_stable() {
    let a = Aabb { min: Vec3::repeat(-0.3), max: Vec3::repeat(0.1) };
    let b = Aabb { min: Vec3::repeat(-0.1), max: Vec3::repeat(0.3) };
    let n = 40_000;
    let ab = iou(&a, &b, &Aabb::unit_cube(), n, &mut common::rng(1), Exec::Sequential).unwrap();
    let ba = iou(&b, &a, &Aabb::unit_cube(), n, &mut common::rng(1), Exec::Sequential).unwrap();
    assert_eq!(ab, ba);
    // Exact value: intersection 0.2^3, union 2 * 0.4^3 - 0.2^3.
    let exact = 0.008 / (2.0 * 0.064 - 0.008);
    let union_frac = 0.12;
    let sigma = (exact * (1.0 - exact) / (n as f64 * union_frac)).sqrt();
    for seed in 2..6 {
        let v = iou(&a, &b, &Aabb::unit_cube(), n, &mut common::rng(seed), Exec::Sequential).unwrap();
        assert!((v - exact).abs() < 3.0 * sigma + 1e-12, "seed {seed}: {v} vs {exact}");
    }
}

#[test]
fn disjoint_shapes_have_zero_iou() {
    let a = Aabb { min: Vec3::repeat(-0.5), max: Vec3::repeat(-0.1) };
    let b = Aabb { min: Vec3::repeat(0.1), max: Vec3::repeat(0.5) };
    assert_eq!(iou(&a, &b, &Aabb::unit_cube(), 10_000, &mut common::rng(0), Exec::Sequential).unwrap(), 0.0);
}

#[test]
fn identity_primitive_matches_sphere_mesh() {
    let model = common::identity_model(common::small_config(4, 0.25), 1, 0);
    let tester = InsideTester::new(&sphere(0.25)).unwrap();
    let solid = MeshSolid { tester: &tester, seed: 0 };
    let v = iou(&model, &solid, &Aabb::unit_cube(), 100_000, &mut common::rng(0), Exec::Parallel).unwrap();
    assert!(v > 0.99, "{v}");
}

#[test]
fn concentric_sphere_chamfer() {
    let a = sample_sphere(10_000, 0.3, &mut common::rng(1));
    let b = sample_sphere(10_000, 0.4, &mut common::rng(2));
    let d = chamfer_l1(&a, &b, Exec::Parallel).unwrap();
    assert!((d - 0.2).abs() < 0.01, "{d}");
}

#[test]
fn chamfer_symmetry_and_union_bound() {
    let x = common::random_points(300, 0.5, 1);
    let y = common::random_points(200, 0.5, 2);
    let xy = chamfer_l1(&x, &y, Exec::Sequential).unwrap();
    let yx = chamfer_l1(&y, &x, Exec::Sequential).unwrap();
    assert!((xy - yx).abs() < 1e-12);
    let union = concatenate(Axis(0), &[x.view(), y.view()]).unwrap();
    assert!(chamfer_l1(&x, &union, Exec::Sequential).unwrap() <= xy);
}

#[test]
fn training_and_metric_chamfer_rank_offsets_alike() {
    let x = sample_sphere(800, 0.3, &mut common::rng(3));
    assert_eq!(squared_chamfer(&x, &x), 0.0);
    assert_eq!(chamfer_l1(&x, &x, Exec::Sequential).unwrap(), 0.0);
    let mut prev = (0.0, 0.0);
    for k in 1..6 {
        let shift = 0.02 * k as f64;
        let y = x.mapv(|v| v) + &Array2::from_shape_fn((1, 3), |(_, j)| if j == 0 { shift } else { 0.0 });
        let cur = (squared_chamfer(&x, &y), chamfer_l1(&x, &y, Exec::Sequential).unwrap());
        assert!(cur.0 > prev.0 && cur.1 > prev.1);
        prev = cur;
    }
}

#[test]
fn evaluate_identity_against_matching_sphere() {
    let model = common::identity_model(common::small_config(4, 0.25), 2, 0);
    let cfg = EvalConfig { iou_samples: 50_000, chamfer_samples: 4000, resolution: (32, 64), seed: 3 };
    let r = evaluate(&model, &sphere(0.25), "sphere", &cfg, Exec::Parallel).unwrap();
    assert!(r.iou > 0.98, "{}", r.iou);
    assert!(r.chamfer_l1.is_finite() && r.chamfer_l1 < 0.03);
    assert_eq!(r.retention.len(), 2);
    assert!(r.retention.iter().all(|v| (0.0..=1.0).contains(v)));
    // Identical primitives: every interior point lies inside both.
    assert!(r.multi_containment > 0.99);
    let again = evaluate(&model, &sphere(0.25), "sphere", &cfg, Exec::Sequential).unwrap();
    assert_eq!(r, again);
}

#[test]
fn evaluate_against_distant_target() {
    let model = common::identity_model(common::small_config(4, 0.1), 1, 0);
    let far = box_mesh(Vec3::new(0.3, 0.3, 0.3), Vec3::new(0.5, 0.5, 0.5));
    let cfg = EvalConfig { iou_samples: 20_000, chamfer_samples: 1000, resolution: (16, 32), seed: 0 };
    let r = evaluate(&model, &far, "far", &cfg, Exec::Parallel).unwrap();
    assert!(r.iou < 0.01);
    assert!(r.chamfer_l1 > 0.3);
}

#[test]
fn report_csv_has_fixed_columns() {
    let model = common::identity_model(common::small_config(4, 0.25), 1, 0);
    let cfg = EvalConfig { iou_samples: 5000, chamfer_samples: 500, resolution: (16, 32), seed: 0 };
    let r = evaluate(&model, &sphere(0.25), "sphere", &cfg, Exec::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("summary.csv");
    r.append_csv(&path).unwrap();
    r.append_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("sphere,1,"));
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert!(json["iou"].is_number());
}

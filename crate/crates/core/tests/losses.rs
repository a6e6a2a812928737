mod common;

use ndarray::{array, Array2};
use neural_parts::diffgraph::{Graph, Var};
use neural_parts::geometry::sample_sphere;
use neural_parts::losses::*;
use proptest::prelude::*;

fn eval(f: impl FnOnce(&mut Graph) -> Var) -> f64 {
    let mut g = Graph::new();
    let v = f(&mut g);
    g.evaluate(v).unwrap()[[0, 0]]
}

fn rec(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    eval(|g| {
        let x = g.constant(a.clone());
        let y = g.constant(b.clone());
        loss_rec(g, x, y).unwrap()
    })
}

fn points() -> impl Strategy<Value = Array2<f64>> {
    (1usize..12).prop_flat_map(|n| {
        proptest::collection::vec(-1.0f64..1.0, n * 3)
            .prop_map(move |v| Array2::from_shape_vec((n, 3), v).unwrap())
    })
}

#[test]
fn identity_sphere_normals_agree() {
    // Identity network with M = 1: grad G is radial, matching outward normals.
    let model = common::identity_model(common::small_config(4, 0.3), 1, 0);
    let x = sample_sphere(50, 0.3, &mut common::rng(1));
    let normals = x.mapv(|v| v / 0.3);
    let probes = fd_probes(&x, 1e-4);
    let (g_vals, _) = model.union_field(&probes).unwrap();
    let shifted = Array2::from_shape_vec((g_vals.len(), 1), g_vals).unwrap();
    let out = eval(|g| {
        let s = g.constant(shifted.clone());
        let grad = fd_gradient(g, s, 50, 1e-4);
        loss_norm(g, grad, &normals)
    });
    assert!(out < 1e-6);
    let flipped = eval(|g| {
        let s = g.constant(shifted.clone());
        let grad = fd_gradient(g, s, 50, 1e-4);
        loss_norm(g, grad, &normals.mapv(|v| -v))
    });
    assert!((flipped - 2.0).abs() < 1e-6);
}

#[test]
fn rec_is_zero_only_for_equal_sets() {
    let a = array![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [0.5, 0.5, 0.5]];
    let perm = array![[0.5, 0.5, 0.5], [0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [0.0, 0.0, 0.0]];
    assert_eq!(rec(&a, &perm), 0.0);
    let extra = array![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [0.5, 0.5, 0.5], [0.5, 0.5, 0.6]];
    assert!(rec(&a, &extra) > 0.0);
}

#[test]
fn cover_lower_bound_for_shrunk_primitive() {
    // Primitive 1 misses every interior point by at least delta in g.
    let delta = 0.05;
    let fields = Array2::from_shape_fn((20, 2), |(i, m)| {
        if m == 0 { -0.1 } else { delta + 0.01 * i as f64 }
    });
    let v = eval(|g| {
        let f = g.constant(fields.clone());
        loss_cover(g, f, 10).unwrap()
    });
    assert!(v >= 10.0 * delta);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rec_is_symmetric_and_nonnegative(a in points(), b in points()) {
        let ab = rec(&a, &b);
        let ba = rec(&b, &a);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
    }

    #[test]
    fn occ_is_nonnegative(vals in proptest::collection::vec((-1.0f64..1.0, any::<bool>(), 0.1f64..3.0), 1..20)) {
        let n = vals.len();
        let u = Array2::from_shape_fn((n, 1), |(i, _)| vals[i].0);
        let labels: Vec<bool> = vals.iter().map(|v| v.1).collect();
        let weights: Vec<f64> = vals.iter().map(|v| v.2).collect();
        let v = eval(|g| { let x = g.constant(u.clone()); loss_occ(g, x, &labels, &weights, 4e-3) });
        prop_assert!(v >= 0.0 && v.is_finite());
    }

    #[test]
    fn occ_duplicate_with_half_weight(vals in proptest::collection::vec((-0.05f64..0.05, any::<bool>(), 0.1f64..3.0), 1..20), pick in 0usize..20) {
        let n = vals.len();
        let i = pick % n;
        let mut rows: Vec<(f64, bool, f64)> = vals.clone();
        rows[i].2 *= 0.5;
        rows.push(rows[i]);
        let run = |rows: &[(f64, bool, f64)]| {
            let u = Array2::from_shape_fn((rows.len(), 1), |(k, _)| rows[k].0);
            let labels: Vec<bool> = rows.iter().map(|v| v.1).collect();
            let weights: Vec<f64> = rows.iter().map(|v| v.2).collect();
            eval(|g| { let x = g.constant(u.clone()); loss_occ(g, x, &labels, &weights, 4e-3) })
        };
        let a = run(&vals);
        let b = run(&rows);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn norm_is_bounded(grad in proptest::collection::vec(-2.0f64..2.0, 3..30), seed in 0u64..1000) {
        let n = grad.len() / 3;
        let gr = Array2::from_shape_vec((n, 3), grad[..3 * n].to_vec()).unwrap();
        let normals = sample_sphere(n, 1.0, &mut common::rng(seed));
        let v = eval(|g| { let x = g.constant(gr.clone()); loss_norm(g, x, &normals) });
        prop_assert!((-1e-12..=2.0 + 1e-12).contains(&v));
    }

    #[test]
    fn overlap_and_cover_are_nonnegative(vals in proptest::collection::vec(-0.1f64..0.1, 30), m in 1usize..4) {
        let n = vals.len() / m;
        let f = Array2::from_shape_vec((n, m), vals[..n * m].to_vec()).unwrap();
        let o = eval(|g| { let x = g.constant(f.clone()); loss_overlap(g, x, 4e-3, 1.0f64.max(m as f64 * 0.65)) });
        prop_assert!(o >= 0.0);
        let c = eval(|g| { let x = g.constant(f.clone()); loss_cover(g, x, n.min(10)).unwrap() });
        prop_assert!(c >= 0.0);
    }

    #[test]
    fn single_primitive_never_overlaps(vals in proptest::collection::vec(-1.0f64..1.0, 1..40)) {
        let f = Array2::from_shape_vec((vals.len(), 1), vals).unwrap();
        let o = eval(|g| { let x = g.constant(f.clone()); loss_overlap(g, x, 4e-3, 1.95) });
        prop_assert_eq!(o, 0.0);
    }
}

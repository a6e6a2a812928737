mod common;

use approx::assert_abs_diff_eq;
use common::*;
use ndarray::{array, Array2, Axis};
use neural_parts::geometry::{sample_sphere, uv_sphere, Vec3};
use neural_parts::homeo::{union_of, ConditionalHomeomorphism, HomeoConfig, NeuralParts, EMBEDDINGS};
use proptest::prelude::*;

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[test]
fn coupling_round_trip_is_tight() {
    let model = random_model(small_config(4, 0.25), 2, 1, 0.3);
    let y = random_points(1000, 0.5, 2);
    for layer in 0..4 {
        let c = model.embedding(1);
        let x = model.coupling_forward(layer, &y, &c).unwrap();
        let back = model.coupling_inverse(layer, &x, &c).unwrap();
        assert!(max_abs_diff(&back, &y) < 1e-12);
    }
}

#[test]
fn coupling_passthrough_is_bit_exact() {
    let model = random_model(small_config(4, 0.25), 1, 3, 0.5);
    let y = random_points(200, 0.5, 4);
    let c = model.embedding(0);
    for (l, layer) in model.homeo.layers.iter().enumerate() {
        let x = model.coupling_forward(l, &y, &c).unwrap();
        let x_inv = model.coupling_inverse(l, &y, &c).unwrap();
        for k in layer.pass {
            assert_eq!(x.column(k), y.column(k));
            assert_eq!(x_inv.column(k), y.column(k));
        }
        assert!(max_abs_diff(&x, &y) > 0.0);
    }
}

#[test]
fn coupling_with_constant_scale_and_shift() {
    let cfg = small_config(1, 0.25);
    let homeo = ConditionalHomeomorphism::new(cfg, &[2]).unwrap();
    let mut params = homeo.init_params(1, &mut rng(0)).unwrap();
    // Constant nets: zero final weights, biases set to the wanted outputs.
    params.assign("coupling0.s.b2", &array![[2f64.ln()]]).unwrap();
    params.assign("coupling0.t.b2", &array![[1.0]]).unwrap();
    let model = NeuralParts::new(homeo, params).unwrap();
    let c = model.embedding(0);
    let x = model.coupling_forward(0, &array![[0.1, 0.2, 0.3]], &c).unwrap();
    assert!(max_abs_diff(&x, &array![[0.1, 0.2, 1.6]]) < 1e-15);
    let y = model.coupling_inverse(0, &array![[0.1, 0.2, 1.6]], &c).unwrap();
    assert!(max_abs_diff(&y, &array![[0.1, 0.2, 0.3]]) < 1e-15);
}

#[test]
fn zero_initialized_layers_are_identity() {
    let model = identity_model(small_config(4, 0.25), 3, 5);
    let y = random_points(500, 0.6, 6);
    for m in 0..3 {
        assert_eq!(model.phi_forward(m, &y).unwrap(), y);
        assert_eq!(model.phi_inverse(m, &y).unwrap(), y);
        for l in 0..4 {
            assert_eq!(model.coupling_forward(l, &y, &model.embedding(m)).unwrap(), y);
        }
    }
}

#[test]
fn phi_round_trip() {
    for draw in 0..5 {
        let model = random_model(small_config(4, 0.25), 2, 100 + draw, 0.3);
        let y = random_points(1000, 0.5, 200 + draw);
        for m in 0..2 {
            let x = model.phi_forward(m, &y).unwrap();
            let back = model.phi_inverse(m, &x).unwrap();
            assert!(max_abs_diff(&back, &y) < 1e-9);
        }
    }
}

#[test]
fn empty_stack_is_identity() {
    let model = identity_model(small_config(0, 0.25), 1, 0);
    let y = random_points(10, 1.0, 1);
    assert_eq!(model.phi_forward(0, &y).unwrap(), y);
}

#[test]
fn distinct_embeddings_give_distinct_images() {
    let model = random_model(small_config(4, 0.25), 2, 7, 0.3);
    let y = random_points(50, 0.5, 8);
    let a = model.phi_forward(0, &y).unwrap();
    let b = model.phi_forward(1, &y).unwrap();
    for i in 0..50 {
        let d = (&a.row(i) - &b.row(i)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d > 1e-12);
    }
}

#[test]
fn implicit_g_of_identity_network() {
    let model = identity_model(small_config(4, 1.0), 1, 0);
    assert_abs_diff_eq!(model.implicit_g(0, &Vec3::new(2.0, 0.0, 0.0)).unwrap(), 1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(model.implicit_g(0, &Vec3::zeros()).unwrap(), -1.0, epsilon = 1e-15);
}

#[test]
fn implicit_g_vanishes_on_mapped_sphere() {
    let model = random_model(small_config(4, 0.25), 2, 9, 0.3);
    let latent = sample_sphere(500, 0.25, &mut rng(10));
    for m in 0..2 {
        let x = model.surface_points(m, &latent).unwrap();
        let g = model.implicit_with(&model.embedding(m), &x).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-9));
    }
}

#[test]
fn sign_matches_latent_norm() {
    let model = random_model(small_config(4, 0.25), 1, 12, 0.3);
    let x = random_points(500, 0.5, 13);
    let g = model.implicit_with(&model.embedding(0), &x).unwrap();
    let y = model.phi_inverse(0, &x).unwrap();
    for (i, row) in y.rows().into_iter().enumerate() {
        assert_eq!(g[i] < 0.0, row.dot(&row).sqrt() < 0.25);
    }
}

#[test]
fn union_of_single_primitive_equals_g() {
    let model = random_model(small_config(4, 0.25), 1, 14, 0.3);
    let p = Vec3::new(0.1, -0.2, 0.05);
    let (g, m) = model.implicit_union(&p).unwrap();
    assert_eq!(m, 0);
    assert_eq!(g, model.implicit_g(0, &p).unwrap());
}

#[test]
fn union_picks_the_containing_primitive() {
    // Separate identity networks with radii 1 and 2.
    let small = identity_model(small_config(4, 1.0), 1, 0);
    let large = identity_model(small_config(4, 2.0), 1, 0);
    let x = Vec3::new(1.5, 0.0, 0.0);
    let g = [small.implicit_g(0, &x).unwrap(), large.implicit_g(0, &x).unwrap()];
    assert_eq!(union_of(&g).unwrap(), (-0.5, 1));

    // One model whose second primitive is the latent sphere scaled by two.
    // The field is measured in latent units, so G = 1.5 / 2 - 1.
    let mut model = full_schedule_model(small_config(3, 1.0), 2);
    gated_scaling(&mut model, 2.0, &[0.0, 1.0]);
    let (g, m) = model.implicit_union(&x).unwrap();
    assert_eq!(m, 1);
    assert_abs_diff_eq!(g, -0.25, epsilon = 1e-12);
}

#[test]
fn union_ties_go_to_lowest_index() {
    assert_eq!(union_of(&[0.3, -0.1, -0.1]).unwrap(), (-0.1, 1));
    assert!(union_of(&[]).unwrap_err().is_usage());
}

#[test]
fn surface_points_checks_radius() {
    let model = identity_model(small_config(4, 0.25), 1, 0);
    let latent = sample_sphere(20, 0.25, &mut rng(1));
    assert_eq!(model.surface_points(0, &latent).unwrap(), latent);
    let off = latent.mapv(|v| v * 1.01);
    assert!(model.surface_points(0, &off).unwrap_err().is_usage());
    let empty = model.surface_points(0, &Array2::zeros((0, 3))).unwrap();
    assert_eq!(empty.nrows(), 0);
}

#[test]
fn union_surface_single_and_identical() {
    let model = random_model(small_config(4, 0.25), 1, 15, 0.3);
    let pts = model.surface_points(0, &sample_sphere(300, 0.25, &mut rng(16))).unwrap();
    let u = model.union_surface(std::slice::from_ref(&pts)).unwrap();
    assert_eq!(u.points, pts);
    assert!(u.labels.iter().all(|&l| l == 0));

    let mut twin = random_model(small_config(4, 0.25), 2, 17, 0.3);
    let row = twin.embedding(0);
    twin.set_embedding(1, &row).unwrap();
    let latent = sample_sphere(300, 0.25, &mut rng(18));
    let a = twin.surface_points(0, &latent).unwrap();
    let b = twin.surface_points(1, &latent).unwrap();
    let u = twin.union_surface(&[a, b]).unwrap();
    assert_eq!(u.points.nrows(), 600);
}

#[test]
fn union_surface_drops_nested_primitive() {
    let mut model = full_schedule_model(small_config(4, 0.5), 2);
    gated_scaling(&mut model, 2.0, &[0.0, 1.0]);
    let latent = sample_sphere(400, 0.5, &mut rng(19));
    let inner = model.surface_points(0, &latent).unwrap();
    let outer = model.surface_points(1, &latent).unwrap();
    let norms = outer.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    assert!(norms.iter().all(|n| (n - 1.0).abs() < 1e-12));
    let u = model.union_surface(&[inner, outer.clone()]).unwrap();
    assert_eq!(u.points, outer);
    assert!(u.labels.iter().all(|&l| l == 1));
}

#[test]
fn primitive_mesh_keeps_faces() {
    let tess = uv_sphere(8, 12, 0.25).unwrap();
    let ident = identity_model(small_config(4, 0.25), 1, 0);
    assert_eq!(ident.primitive_mesh(0, &tess).unwrap(), tess.mesh);
    let model = random_model(small_config(4, 0.25), 1, 20, 0.3);
    let mesh = model.primitive_mesh(0, &tess).unwrap();
    assert_eq!(mesh.faces, tess.mesh.faces);
    assert_eq!(mesh.vertices.len(), tess.mesh.vertices.len());
    assert_eq!(mesh.euler_characteristic(), 2);
    let wrong = uv_sphere(8, 12, 0.3).unwrap();
    assert!(model.primitive_mesh(0, &wrong).is_err());
}

#[test]
fn union_gradient_of_identity_network() {
    let model = identity_model(small_config(4, 1.0), 1, 0);
    let g = model.grad_union(&Vec3::new(2.0, 0.0, 0.0), 1e-4).unwrap();
    assert!((g - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-6);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let g = model.grad_union(&Vec3::new(s, s, 0.0), 1e-4).unwrap();
    assert!((g - Vec3::new(s, s, 0.0)).norm() < 1e-6);
}

#[test]
fn union_gradient_step_halving() {
    let model = random_model(small_config(4, 0.25), 2, 21, 0.3);
    let p = Vec3::new(0.12, -0.07, 0.2);
    let a = model.grad_union(&p, 1e-4).unwrap();
    let b = model.grad_union(&p, 1e-5).unwrap();
    assert!((a - b).amax() < 1e-5);
}

#[test]
fn non_finite_input_is_numeric_error() {
    let model = identity_model(small_config(4, 0.25), 1, 0);
    let bad = array![[f64::NAN, 0.0, 0.0]];
    assert!(model.phi_forward(0, &bad).unwrap_err().is_numeric());
}

#[test]
fn overflowing_scale_is_numeric_error() {
    let cfg = small_config(4, 0.25);
    let homeo = ConditionalHomeomorphism::new(cfg, &[0, 1, 2, 0]).unwrap();
    let mut params = homeo.init_params(1, &mut rng(0)).unwrap();
    for l in 0..4 {
        params.assign(&format!("coupling{l}.s.b2"), &array![[10.0]]).unwrap();
    }
    let model = NeuralParts::new(homeo, params).unwrap();
    let huge = array![[1e300, 1e300, 1e300]];
    assert!(model.phi_forward(0, &huge).unwrap_err().is_numeric());
}

#[test]
fn schedule_rules() {
    let cfg = HomeoConfig::desk();
    assert!(ConditionalHomeomorphism::new(cfg.clone(), &[0, 0, 1, 2]).is_err());
    assert!(ConditionalHomeomorphism::new(cfg.clone(), &[0, 1, 3, 2]).is_err());
    assert!(ConditionalHomeomorphism::new(cfg.clone(), &[0, 1, 2]).is_err());
    for seed in 0..50 {
        let s = ConditionalHomeomorphism::random_schedule(8, &mut rng(seed));
        assert!(s.windows(2).all(|w| w[0] != w[1]));
        assert!(s.iter().all(|&d| d < 3));
    }
}

#[test]
fn store_layout_is_checked() {
    let model = identity_model(small_config(2, 0.25), 2, 0);
    let other = ConditionalHomeomorphism::new(small_config(3, 0.25), &[0, 1, 2]).unwrap();
    assert!(NeuralParts::new(other, model.params.clone()).is_err());
    assert_eq!(model.params.get(EMBEDDINGS).unwrap().dim(), (2, 8));
}

#[test]
fn hard_tanh_bounds_the_scale() {
    let cfg = small_config(1, 0.25);
    let homeo = ConditionalHomeomorphism::new(cfg, &[0]).unwrap();
    let mut params = homeo.init_params(1, &mut rng(0)).unwrap();
    params.assign("coupling0.s.b2", &array![[50.0]]).unwrap();
    let model = NeuralParts::new(homeo, params).unwrap();
    let x = model.coupling_forward(0, &array![[1.0, 0.0, 0.0]], &model.embedding(0)).unwrap();
    assert_abs_diff_eq!(x[[0, 0]], 10f64.exp(), epsilon = 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn round_trip_any_seed(seed in 0u64..10_000, scale in 0.01f64..2.0) {
        let model = random_model(small_config(4, 0.25), 1, seed, 0.2);
        let y = random_points(64, scale, seed + 1);
        let back = model.phi_inverse(0, &model.phi_forward(0, &y).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&back, &y) < 1e-9);
    }

    #[test]
    fn union_surface_is_subset(seed in 0u64..10_000) {
        let model = random_model(small_config(2, 0.25), 3, seed, 0.3);
        let latent = sample_sphere(40, 0.25, &mut rng(seed));
        let per: Vec<_> = (0..3).map(|m| model.surface_points(m, &latent).unwrap()).collect();
        let u = model.union_surface(&per).unwrap();
        for (i, row) in u.points.rows().into_iter().enumerate() {
            let src = &per[u.labels[i]];
            prop_assert!(src.rows().into_iter().any(|r| r == row));
        }
    }
}

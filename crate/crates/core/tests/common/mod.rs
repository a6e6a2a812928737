#![allow(dead_code)]

pub mod grad;

use ndarray::Array2;
use neural_parts::homeo::{ConditionalHomeomorphism, HomeoConfig, NeuralParts, EMBEDDINGS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_config(layers: usize, radius: f64) -> HomeoConfig {
    HomeoConfig {
        layers,
        hidden: 16,
        embed_dim: 8,
        feature_dim: 8,
        radius,
    }
}

/// Freshly initialized model (identity map).
pub fn identity_model(cfg: HomeoConfig, primitives: usize, seed: u64) -> NeuralParts {
    NeuralParts::init(cfg, primitives, &mut rng(seed)).unwrap()
}

/// Model with every parameter, including the zero-initialized final s/t
/// layers, perturbed by Gaussian noise of scale `noise`.
pub fn random_model(cfg: HomeoConfig, primitives: usize, seed: u64, noise: f64) -> NeuralParts {
    let mut r = rng(seed);
    let mut model = NeuralParts::init(cfg, primitives, &mut r).unwrap();
    let flat: Vec<f64> = model
        .params
        .to_flat()
        .into_iter()
        .map(|v| v + noise * r.sample::<f64, _>(StandardNormal))
        .collect();
    model.params.set_flat(&flat).unwrap();
    model
}

pub fn random_points(n: usize, scale: f64, seed: u64) -> Array2<f64> {
    let mut r = rng(seed);
    Array2::from_shape_fn((n, 3), |_| scale * (2.0 * r.random::<f64>() - 1.0))
}

fn set(model: &mut NeuralParts, name: &str, f: impl Fn(&mut Array2<f64>)) {
    let mut a = model.params.get(name).unwrap().to_owned();
    f(&mut a);
    model.params.assign(name, &a).unwrap();
}

/// Rewires the coupling networks so that primitive `m` is the latent sphere
/// scaled by `alpha^gates[m]` about the origin, while the translation
/// networks output zero. The first coupling layer transforming each axis
/// gets `s = ln(alpha) * relu(C[0])`; all other layers are identities.
/// Needs a schedule that touches every axis.
pub fn gated_scaling(model: &mut NeuralParts, alpha: f64, gates: &[f64]) {
    gated_affine(model, alpha, [0.0; 3], gates);
}

/// As [`gated_scaling`], and additionally shifts axis `d` by
/// `offset[d] * relu(C[0])` after the scaling.
pub fn gated_affine(model: &mut NeuralParts, alpha: f64, offset: [f64; 3], gates: &[f64]) {
    let homeo: ConditionalHomeomorphism = model.homeo.clone();
    let mut seen = [false; 3];
    for layer in &homeo.layers {
        let first = !seen[layer.dim];
        seen[layer.dim] = true;
        let l = layer.index;
        for (net, out) in [("s", alpha.ln()), ("t", offset[layer.dim])] {
            set(model, &format!("coupling{l}.{net}.w0_embed"), |a| {
                a.column_mut(0).fill(0.0);
                a[[0, 0]] = 1.0;
            });
            set(model, &format!("coupling{l}.{net}.w0_feat"), |a| a.column_mut(0).fill(0.0));
            set(model, &format!("coupling{l}.{net}.b0"), |a| a[[0, 0]] = 0.0);
            set(model, &format!("coupling{l}.{net}.w1"), |a| {
                a.column_mut(0).fill(0.0);
                a[[0, 0]] = 1.0;
            });
            set(model, &format!("coupling{l}.{net}.b1"), |a| a[[0, 0]] = 0.0);
            set(model, &format!("coupling{l}.{net}.w2"), |a| {
                a.fill(0.0);
                if first {
                    a[[0, 0]] = out;
                }
            });
            set(model, &format!("coupling{l}.{net}.b2"), |a| a.fill(0.0));
        }
    }
    assert!(seen.iter().all(|&s| s), "schedule must touch every axis");
    set(model, EMBEDDINGS, |a| {
        for (m, &g) in gates.iter().enumerate() {
            a[[m, 0]] = g;
        }
    });
}

/// A model whose schedule touches every axis.
pub fn full_schedule_model(cfg: HomeoConfig, primitives: usize) -> NeuralParts {
    let homeo = ConditionalHomeomorphism::new(cfg.clone(), &[0, 1, 2, 0][..cfg.layers]).unwrap();
    let params = homeo.init_params(primitives, &mut rng(11)).unwrap();
    NeuralParts::new(homeo, params).unwrap()
}

use neural_parts::diffgraph::central_difference;
use neural_parts::geometry::{cube, Aabb, InsideTester, OccupancyPool};
use neural_parts::homeo::{HomeoConfig, NeuralParts};
use neural_parts::losses::{LossHyper, LossWeights};
use neural_parts::trainer::{Batch, BatchSizes, Objective};
use neural_parts::Exec;

use super::{random_model, rng, small_config};

pub const H: f64 = 1e-6;

/// Largest `|a - n| / max(|a|, |n|, floor)` over all coordinates.
pub fn rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn tiny_setup(seed: u64) -> (NeuralParts, Batch, Objective) {
    let cfg = small_config(2, 0.25);
    let cfg = HomeoConfig { hidden: 8, ..cfg };
    let model = random_model(cfg, 2, seed, 0.3);
    let mesh = cube(0.5);
    let tester = InsideTester::new(&mesh).unwrap();
    let pool = OccupancyPool::build(&tester, Aabb::unit_cube(), 4000, 0, &mut rng(seed), Exec::Sequential).unwrap();
    let sizes = BatchSizes { surface: 16, normals: 16, occupancy: 16, sphere: 16 };
    let batch = Batch::draw(&mesh, &pool, sizes, 2, 0.25, &mut rng(seed + 1)).unwrap();
    let objective = Objective {
        weights: LossWeights::default(),
        hyper: LossHyper { k_cover: 4, ..LossHyper::default() },
        fd_step: 1e-4,
    };
    (model, batch, objective)
}

/// Analytic gradient of the full objective against central differences
/// over every parameter.
pub fn full_loss_gradient_error(seed: u64) -> f64 {
    let (model, batch, objective) = tiny_setup(seed);
    let (grads, _) = objective.gradients(&model, &batch).unwrap();
    let x0 = model.params.to_flat();
    let mut m = model.clone();
    let mut f = |x: &[f64]| {
        m.params.set_flat(x).unwrap();
        objective.value(&m, &batch).unwrap().total
    };
    let numeric = central_difference(&mut f, &x0, H);
    rel_err(&grads.to_flat(), &numeric, 1e-4)
}


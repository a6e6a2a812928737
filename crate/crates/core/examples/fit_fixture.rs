//! Fits primitives to a built-in fixture and prints the evaluation.
//!
//! `cargo run --release --example fit_fixture -- sphere 1 1500`

use std::time::Instant;

use neural_parts::geometry::{Aabb, Fixture, InsideTester, OccupancyPool};
use neural_parts::metrics::{evaluate, EvalConfig};
use neural_parts::trainer::{FitConfig, Trainer};
use neural_parts::Exec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> neural_parts::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("sphere");
    let m: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let iters: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1500);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let fixture = Fixture::from_name(name).expect("unknown fixture");
    let mesh = fixture.mesh();
    let tester = InsideTester::new(&mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pool = OccupancyPool::build(&tester, Aabb::unit_cube(), 100_000, 0, &mut rng, Exec::Parallel)?;
    let config = FitConfig {
        primitives: m,
        iterations: iters,
        learning_rate: lr,
        ..FitConfig::desk()
    };
    let mut t = Trainer::new(config, &mesh, &pool)?;
    let start = Instant::now();
    while t.state.step < iters {
        let l = t.step()?;
        if t.state.step % 100 == 0 || t.state.step == 1 {
            println!(
                "{:5} {:8.1}s total {:.5} rec {:.5} occ {:.4} norm {:.4} ovl {:.4} cov {:.4}",
                t.state.step,
                start.elapsed().as_secs_f64(),
                l.total,
                l.rec,
                l.occ,
                l.norm,
                l.overlap,
                l.cover
            );
        }
    }
    let report = evaluate(&t.state.model, &mesh, name, &EvalConfig::default(), Exec::Parallel)?;
    println!("{}", report.to_json());
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

//! Meshes and the supervision data derived from them: surface samples,
//! labelled occupancy points, sphere samples and tessellations, and
//! point-in-mesh queries.

mod fixtures;
mod inside;
mod mesh;
mod occupancy;
mod sampling;
mod sphere;

pub use fixtures::{capsule, cube, dumbbell, revolve, sphere, box_mesh, Fixture};
pub use inside::InsideTester;
pub use mesh::{load_mesh, normalize_mesh, NormalizeTransform, TriMesh};
pub use occupancy::{OccupancyPool, OccupancySet};
pub use sampling::{sample_faces, sample_surface, SurfaceSamples};
pub use sphere::{sample_sphere, uv_sphere, SphereTessellation};

use ndarray::Array2;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    /// The sampling cube `[-0.5, 0.5]^3` all normalized meshes live in.
    pub fn unit_cube() -> Self {
        Aabb {
            min: Vec3::repeat(-0.5),
            max: Vec3::repeat(0.5),
        }
    }

    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    /// `n` points drawn uniformly from the box, as an `n × 3` array.
    pub fn sample_uniform<R: rand::Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Array2<f64> {
        let e = self.extent();
        Array2::from_shape_fn((n, 3), |(_, k)| self.min[k] + e[k] * rng.random::<f64>())
    }
}

/// Packs points into an `n × 3` array.
pub fn to_array(points: &[Vec3]) -> Array2<f64> {
    Array2::from_shape_fn((points.len(), 3), |(i, k)| points[i][k])
}

/// Unpacks an `n × 3` array into points.
pub fn from_array(a: &Array2<f64>) -> Vec<Vec3> {
    a.rows().into_iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect()
}

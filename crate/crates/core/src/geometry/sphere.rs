use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

/// Closed latitude/longitude triangulation of a sphere centered at the
/// origin. Poles are single vertices surrounded by triangle fans.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereTessellation {
    pub mesh: TriMesh,
    pub n_lat: usize,
    pub n_lon: usize,
    pub radius: f64,
}

impl SphereTessellation {
    /// Vertex positions as an `n × 3` array.
    pub fn vertex_array(&self) -> Array2<f64> {
        super::to_array(&self.mesh.vertices)
    }

    /// `2 + (n_lat - 1) * n_lon`.
    pub fn vertex_count(n_lat: usize, n_lon: usize) -> usize {
        2 + (n_lat - 1) * n_lon
    }
}

/// UV sphere with `n_lat` latitude bands and `n_lon` longitude segments.
pub fn uv_sphere(n_lat: usize, n_lon: usize, radius: f64) -> Result<SphereTessellation> {
    if n_lat < 3 || n_lon < 3 {
        return Err(Error::usage(format!(
            "uv sphere needs at least 3x3 segments, got {n_lat}x{n_lon}"
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::usage(format!("invalid sphere radius {radius}")));
    }
    let profile: Vec<(f64, f64)> = (0..=n_lat)
        .map(|i| {
            let theta = PI * i as f64 / n_lat as f64;
            (radius * theta.cos(), radius * theta.sin())
        })
        .collect();
    let mesh = super::revolve(&profile, n_lon);
    Ok(SphereTessellation {
        mesh,
        n_lat,
        n_lon,
        radius,
    })
}

/// `n` points uniform on the radius-`r` sphere (normalized Gaussian draws).
pub fn sample_sphere<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> Array2<f64> {
    let mut out = Array2::zeros((n, 3));
    for mut row in out.rows_mut() {
        let v = loop {
            let v = Vec3::new(
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            );
            let len = v.norm();
            if len > 1e-12 {
                break v * (r / len);
            }
        };
        row[0] = v.x;
        row[1] = v.y;
        row[2] = v.z;
    }
    out
}

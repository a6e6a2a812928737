use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

/// Points on a mesh surface with the unit normals of their source faces.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSamples {
    pub points: Array2<f64>,
    pub normals: Array2<f64>,
    /// Source face of each sample.
    pub faces: Vec<usize>,
}

impl SurfaceSamples {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }
}

/// Samples `n` points: a face with probability proportional to its area,
/// then a uniform point inside it.
pub fn sample_surface<R: Rng + ?Sized>(mesh: &TriMesh, n: usize, rng: &mut R) -> Result<SurfaceSamples> {
    sample_faces(mesh, None, n, rng)
}

/// Like [`sample_surface`] but restricted to faces with `keep[f] == true`.
pub fn sample_faces<R: Rng + ?Sized>(
    mesh: &TriMesh,
    keep: Option<&[bool]>,
    n: usize,
    rng: &mut R,
) -> Result<SurfaceSamples> {
    if n == 0 {
        return Err(Error::usage("surface sample count must be at least 1"));
    }
    let areas: Vec<f64> = (0..mesh.faces.len())
        .map(|f| match keep {
            Some(k) if !k[f] => 0.0,
            _ => mesh.face_area(f),
        })
        .collect();
    let dist = WeightedIndex::new(&areas)
        .map_err(|_| Error::data("mesh has no surface area to sample"))?;
    let mut points = Array2::zeros((n, 3));
    let mut normals = Array2::zeros((n, 3));
    let mut faces = Vec::with_capacity(n);
    for i in 0..n {
        let f = dist.sample(rng);
        let [a, b, c] = mesh.triangle(f);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let p: Vec3 = a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2);
        let nrm = mesh.face_normal(f);
        for k in 0..3 {
            points[[i, k]] = p[k];
            normals[[i, k]] = nrm[k];
        }
        faces.push(f);
    }
    Ok(SurfaceSamples {
        points,
        normals,
        faces,
    })
}

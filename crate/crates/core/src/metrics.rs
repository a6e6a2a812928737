//! Evaluation metrics: Monte-Carlo volumetric IoU and Chamfer-L1.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_faces, sample_surface, uv_sphere, Aabb, InsideTester, TriMesh, Vec3};
use crate::homeo::NeuralParts;
use crate::par::Exec;

pub const CSV_HEADER: &str = "mesh,M,iou,chamfer_l1,multi_containment";

/// Anything that can classify points as inside or outside.
pub trait Solid: Sync {
    fn contains_batch(&self, points: &Array2<f64>, exec: Exec) -> Result<Vec<bool>>;
}

impl Solid for Aabb {
    fn contains_batch(&self, points: &Array2<f64>, _exec: Exec) -> Result<Vec<bool>> {
        Ok(points
            .rows()
            .into_iter()
            .map(|r| self.contains(&Vec3::new(r[0], r[1], r[2])))
            .collect())
    }
}

/// Mesh containment with a fixed ray seed.
pub struct MeshSolid<'a> {
    pub tester: &'a InsideTester,
    pub seed: u64,
}

impl Solid for MeshSolid<'_> {
    fn contains_batch(&self, points: &Array2<f64>, exec: Exec) -> Result<Vec<bool>> {
        Ok(self.tester.contains_batch(points, self.seed, exec))
    }
}

/// Union of primitives, inside where `G < 0`.
impl Solid for NeuralParts {
    fn contains_batch(&self, points: &Array2<f64>, exec: Exec) -> Result<Vec<bool>> {
        let mut model = self.clone();
        model.exec = exec;
        let (g, _) = model.union_field(points)?;
        Ok(g.into_iter().map(|v| v < 0.0).collect())
    }
}

fn ratio(a: &[bool], b: &[bool]) -> Result<f64> {
    let both = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let either = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if either == 0 {
        return Err(Error::data("IoU is undefined: neither shape contains any sample"));
    }
    Ok(both as f64 / either as f64)
}

/// Monte-Carlo IoU from `n` uniform samples of `bounds`.
pub fn iou<R: Rng + ?Sized>(
    a: &dyn Solid,
    b: &dyn Solid,
    bounds: &Aabb,
    n: usize,
    rng: &mut R,
    exec: Exec,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::usage("IoU needs at least one sample"));
    }
    let pts = bounds.sample_uniform(n, rng);
    ratio(&a.contains_batch(&pts, exec)?, &b.contains_batch(&pts, exec)?)
}

/// Mean distance from each row of `from` to its nearest row of `to`.
pub fn mean_nearest(from: &Array2<f64>, to: &Array2<f64>, exec: Exec) -> f64 {
    let chunks = exec.map_chunks(from.nrows(), 256, |range| {
        range
            .map(|i| {
                let p = from.row(i);
                let mut best = f64::INFINITY;
                for q in to.rows() {
                    let d = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
                    if d < best {
                        best = d;
                    }
                }
                best.sqrt()
            })
            .sum::<f64>()
    });
    chunks.iter().sum::<f64>() / from.nrows() as f64
}

/// Symmetric Chamfer-L1: the two mean unsquared nearest distances, summed.
pub fn chamfer_l1(x: &Array2<f64>, y: &Array2<f64>, exec: Exec) -> Result<f64> {
    if x.nrows() == 0 || y.nrows() == 0 {
        return Err(Error::usage("Chamfer distance of an empty point set"));
    }
    Ok(mean_nearest(x, y, exec) + mean_nearest(y, x, exec))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub iou_samples: usize,
    pub chamfer_samples: usize,
    /// Latitude and longitude bands of the tessellation used for primitive meshes.
    pub resolution: (usize, usize),
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_samples: 100_000,
            chamfer_samples: 10_000,
            resolution: (64, 128),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mesh: String,
    pub primitives: usize,
    pub iou: f64,
    pub chamfer_l1: f64,
    /// Share of each primitive's surface area lying on the union surface.
    pub retention: Vec<f64>,
    /// Retained surface area of each primitive.
    pub retained_area: Vec<f64>,
    /// Share of target-interior samples inside two or more primitives.
    pub multi_containment: f64,
    pub iou_samples: usize,
    pub chamfer_samples: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.mesh, self.primitives, self.iou, self.chamfer_l1, self.multi_containment
        )
    }

    /// Appends a row to a CSV summary, writing the header to a new file.
    pub fn append_csv(&self, path: &Path) -> Result<()> {
        let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut text = String::new();
        if fresh {
            text.push_str(CSV_HEADER);
            text.push('\n');
        }
        text.push_str(&self.csv_row());
        text.push('\n');
        f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Smallest retained area divided by the largest.
    pub fn min_area_ratio(&self) -> f64 {
        let max = self.retained_area.iter().copied().fold(0.0, f64::max);
        let min = self.retained_area.iter().copied().fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }
}

/// Primitive meshes merged into one, with a per-face retention mask.
pub struct UnionMesh {
    pub mesh: TriMesh,
    pub keep: Vec<bool>,
    /// Face range of each primitive in `mesh`.
    pub ranges: Vec<std::ops::Range<usize>>,
}

/// Extracts every primitive mesh at `(n_lat, n_lon)` and marks a face as
/// retained when `G >= -SURFACE_EPS` at its representative surface point: the
/// latent face centroid pushed back onto the sphere and mapped forward. A
/// plain centroid would sit inside any convex primitive.
pub fn union_mesh(model: &NeuralParts, n_lat: usize, n_lon: usize) -> Result<UnionMesh> {
    let tess = uv_sphere(n_lat, n_lon, model.radius())?;
    let r = model.radius();
    let latent = Array2::from_shape_fn((tess.mesh.faces.len(), 3), |(f, k)| {
        let c = tess.mesh.face_centroid(f);
        c[k] * r / c.norm()
    });
    let mut mesh = TriMesh {
        vertices: Vec::new(),
        faces: Vec::new(),
    };
    let mut ranges = Vec::with_capacity(model.primitives());
    let mut probes = Vec::with_capacity(model.primitives());
    for m in 0..model.primitives() {
        let pm = model.primitive_mesh(m, &tess)?;
        let base = mesh.vertices.len();
        let start = mesh.faces.len();
        mesh.vertices.extend(pm.vertices);
        mesh.faces
            .extend(pm.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
        ranges.push(start..mesh.faces.len());
        probes.push(model.phi_forward(m, &latent)?);
    }
    let keep = model
        .union_surface_mask(&probes)?
        .into_iter()
        .flatten()
        .collect();
    Ok(UnionMesh { mesh, keep, ranges })
}

impl UnionMesh {
    /// Only the retained faces, with unused vertices dropped.
    pub fn retained(&self) -> TriMesh {
        let mut map = vec![usize::MAX; self.mesh.vertices.len()];
        let mut out = TriMesh {
            vertices: Vec::new(),
            faces: Vec::new(),
        };
        for (f, face) in self.mesh.faces.iter().enumerate() {
            if !self.keep[f] {
                continue;
            }
            let mut nf = [0; 3];
            for (k, &v) in face.iter().enumerate() {
                if map[v] == usize::MAX {
                    map[v] = out.vertices.len();
                    out.vertices.push(self.mesh.vertices[v]);
                }
                nf[k] = map[v];
            }
            out.faces.push(nf);
        }
        out
    }
}

/// Full report for a model against a target mesh.
pub fn evaluate(model: &NeuralParts, mesh: &TriMesh, name: &str, cfg: &EvalConfig, exec: Exec) -> Result<EvalReport> {
    let tester = InsideTester::new(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    if cfg.iou_samples == 0 || cfg.chamfer_samples == 0 {
        return Err(Error::usage("sample counts must be at least 1"));
    }

    let pts = Aabb::unit_cube().sample_uniform(cfg.iou_samples, &mut rng);
    let inside_target = tester.contains_batch(&pts, cfg.seed, exec);
    let mut model = model.clone();
    model.exec = exec;
    let field = model.field(&pts)?;
    let counts: Vec<usize> = field
        .rows()
        .into_iter()
        .map(|r| r.iter().filter(|&&v| v < 0.0).count())
        .collect();
    let inside_pred: Vec<bool> = counts.iter().map(|&c| c > 0).collect();
    let iou = ratio(&inside_pred, &inside_target)?;
    let interior: Vec<usize> = (0..pts.nrows()).filter(|&i| inside_target[i]).collect();
    let multi = if interior.is_empty() {
        0.0
    } else {
        interior.iter().filter(|&&i| counts[i] >= 2).count() as f64 / interior.len() as f64
    };

    let um = union_mesh(&model, cfg.resolution.0, cfg.resolution.1)?;
    let mut retention = Vec::with_capacity(model.primitives());
    let mut retained_area = Vec::with_capacity(model.primitives());
    for r in &um.ranges {
        let total = r.clone().map(|f| um.mesh.face_area(f)).fold(0.0, |a, b| a + b);
        let kept = r.clone().filter(|&f| um.keep[f]).map(|f| um.mesh.face_area(f)).fold(0.0, |a, b| a + b);
        retained_area.push(kept);
        retention.push(if total > 0.0 { kept / total } else { 0.0 });
    }

    let target = sample_surface(mesh, cfg.chamfer_samples, &mut rng)?;
    let predicted = sample_faces(&um.mesh, Some(&um.keep), cfg.chamfer_samples, &mut rng)
        .map_err(|_| Error::data("the union of primitives has no retained surface"))?;
    let chamfer = chamfer_l1(&target.points, &predicted.points, exec)?;

    Ok(EvalReport {
        mesh: name.to_string(),
        primitives: model.primitives(),
        iou,
        chamfer_l1: chamfer,
        retention,
        retained_area,
        multi_containment: multi,
        iou_samples: cfg.iou_samples,
        chamfer_samples: cfg.chamfer_samples,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn chamfer_examples() {
        let a = array![[0.0, 0.0, 0.0]];
        let b = array![[1.0, 0.0, 0.0]];
        assert_eq!(chamfer_l1(&a, &b, Exec::Sequential).unwrap(), 2.0);
        assert_eq!(chamfer_l1(&b, &b, Exec::Sequential).unwrap(), 0.0);
        assert!(chamfer_l1(&a, &Array2::zeros((0, 3)), Exec::Sequential).is_err());
    }

    #[test]
    fn iou_of_offset_boxes() {
        let a = Aabb { min: Vec3::new(0.0, 0.0, 0.0), max: Vec3::new(1.0, 1.0, 1.0) };
        let b = Aabb { min: Vec3::new(0.5, 0.0, 0.0), max: Vec3::new(1.5, 1.0, 1.0) };
        let bounds = Aabb { min: Vec3::new(0.0, 0.0, 0.0), max: Vec3::new(1.5, 1.0, 1.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = iou(&a, &b, &bounds, 100_000, &mut rng, Exec::Sequential).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 0.01, "{v}");
    }

    #[test]
    fn iou_of_empty_shapes_is_an_error() {
        let a = Aabb { min: Vec3::repeat(2.0), max: Vec3::repeat(3.0) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(iou(&a, &a, &Aabb::unit_cube(), 1000, &mut rng, Exec::Sequential).is_err());
    }
}

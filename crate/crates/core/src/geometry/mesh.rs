use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Aabb, Vec3};
use crate::error::{Error, Result};

/// Indexed triangle mesh with 0-based face indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriMesh {
    /// Builds a mesh after checking every index is in range.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::data(format!(
                "face {f:?} references a vertex beyond the {n} available"
            )));
        }
        Ok(TriMesh { vertices, faces })
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Non-normalized face normal, `(b - a) × (c - a)`; its length is twice
    /// the face area.
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        self.face_cross(f).normalize()
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (a + b + c) / 3.0
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Signed enclosed volume; positive for outward-facing winding.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn bounds(&self) -> Aabb {
        let mut bb = Aabb::empty();
        for v in &self.vertices {
            bb.grow(v);
        }
        bb
    }

    /// Number of undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edge_uses().len()
    }

    /// `V - E + F`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.faces.len() as i64
    }

    fn edge_uses(&self) -> HashMap<(usize, usize), usize> {
        let mut uses = HashMap::with_capacity(self.faces.len() * 3 / 2);
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *uses.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        uses
    }

    /// Number of edges not shared by exactly two faces.
    pub fn open_edge_count(&self) -> usize {
        self.edge_uses().values().filter(|&&c| c != 2).count()
    }

    /// Errors unless every edge is shared by exactly two faces.
    pub fn validate_watertight(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::data("mesh has no faces"));
        }
        match self.open_edge_count() {
            0 => Ok(()),
            n => Err(Error::data(format!(
                "mesh is not watertight: {n} edges are not shared by exactly two faces"
            ))),
        }
    }

    /// Drops faces with (numerically) zero area or repeated indices.
    pub fn remove_degenerate_faces(&mut self) -> usize {
        let before = self.faces.len();
        let scale = self.bounds().extent().norm().max(f64::MIN_POSITIVE);
        let tol = 1e-14 * scale * scale;
        let keep: Vec<[usize; 3]> = (0..self.faces.len())
            .filter(|&f| {
                let [a, b, c] = self.faces[f];
                a != b && b != c && a != c && self.face_cross(f).norm() > tol
            })
            .map(|f| self.faces[f])
            .collect();
        self.faces = keep;
        before - self.faces.len()
    }

    /// Flips every face when the enclosed volume is negative.
    pub fn orient_outward(&mut self) {
        if self.signed_volume() < 0.0 {
            for f in &mut self.faces {
                f.swap(1, 2);
            }
        }
    }

    /// Applies `p -> (p - center) * scale` to every vertex.
    pub fn transformed(&self, t: &NormalizeTransform) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|p| t.apply(p)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// OBJ text with 1-based triangle records.
    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 40 + self.faces.len() * 20);
        for v in &self.vertices {
            let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }

    pub fn write_obj(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_obj()).map_err(|e| Error::io(path, e))
    }

    /// Parses the OBJ subset `v x y z` / `f i j k ...`. Polygons are
    /// fan-triangulated; `i/t/n` index forms and negative (relative) indices
    /// are accepted, everything else is ignored.
    pub fn parse_obj(text: &str) -> std::result::Result<TriMesh, String> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let c: Vec<f64> = it
                        .take(3)
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                    if c.len() != 3 || !c.iter().all(|x| x.is_finite()) {
                        return Err(format!("line {}: expected three finite coordinates", lineno + 1));
                    }
                    vertices.push(Vec3::new(c[0], c[1], c[2]));
                }
                Some("f") => {
                    let idx: Vec<usize> = it
                        .map(|t| resolve_index(t, vertices.len()))
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|e| format!("line {}: {e}", lineno + 1))?;
                    if idx.len() < 3 {
                        return Err(format!("line {}: face needs at least 3 vertices", lineno + 1));
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(format!(
                "face index {} out of range ({} vertices)",
                f.iter().max().unwrap() + 1,
                n
            ));
        }
        Ok(TriMesh { vertices, faces })
    }
}

fn resolve_index(token: &str, seen: usize) -> std::result::Result<usize, String> {
    let head = token.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| format!("bad face index `{token}`"))?;
    match i {
        0 => Err("face index 0 is invalid in OBJ".into()),
        i if i > 0 => Ok(i as usize - 1),
        i => {
            let back = (-i) as usize;
            if back > seen {
                Err(format!("relative index {i} precedes the first vertex"))
            } else {
                Ok(seen - back)
            }
        }
    }
}

/// Reads an OBJ mesh, fan-triangulating polygons and dropping degenerate
/// faces.
pub fn load_mesh(path: &Path) -> Result<TriMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut mesh = TriMesh::parse_obj(&text).map_err(|m| Error::parse(path, m))?;
    if mesh.vertices.is_empty() || mesh.faces.is_empty() {
        return Err(Error::parse(path, "mesh is empty"));
    }
    mesh.remove_degenerate_faces();
    if mesh.faces.is_empty() {
        return Err(Error::parse(path, "every face is degenerate"));
    }
    Ok(mesh)
}

/// Uniform scale and translation into the sampling cube:
/// `normalized = (p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizeTransform {
    pub center: [f64; 3],
    pub scale: f64,
}

impl NormalizeTransform {
    pub const IDENTITY: NormalizeTransform = NormalizeTransform {
        center: [0.0; 3],
        scale: 1.0,
    };

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - Vec3::from(self.center)) * self.scale
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p / self.scale + Vec3::from(self.center)
    }
}

/// Largest bounding-box side after normalization.
pub const NORMALIZED_EXTENT: f64 = 0.9;

/// Centers the bounding box at the origin and scales uniformly so the
/// largest side is [`NORMALIZED_EXTENT`].
pub fn normalize_mesh(mesh: &TriMesh) -> Result<(TriMesh, NormalizeTransform)> {
    if mesh.vertices.is_empty() {
        return Err(Error::data("cannot normalize an empty mesh"));
    }
    let bb = mesh.bounds();
    let extent = bb.extent().max();
    if extent.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::data("mesh has zero extent"));
    }
    let c = bb.center();
    let t = NormalizeTransform {
        center: [c.x, c.y, c.z],
        scale: NORMALIZED_EXTENT / extent,
    };
    Ok((mesh.transformed(&t), t))
}

//! Point containment by ray parity, accelerated with a bounding volume
//! hierarchy.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Aabb, TriMesh, Vec3};
use crate::error::Result;
use crate::par::Exec;

const LEAF_SIZE: usize = 4;
/// Barycentric distance below which a hit counts as grazing an edge or vertex.
const EDGE_EPS: f64 = 1e-9;
const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone)]
struct BvhNode {
    bounds: Aabb,
    /// Leaf: `start..start+count` into `order`. Inner: `start` is the right
    /// child, the left child follows this node.
    start: usize,
    count: usize,
}

/// Immutable containment query structure over a watertight mesh.
///
/// Each query casts three rays in random directions and takes the majority of
/// their crossing parities. A ray passing within [`EDGE_EPS`] (barycentric)
/// of an edge or vertex is discarded and re-drawn.
#[derive(Debug, Clone)]
pub struct InsideTester {
    tris: Vec<[Vec3; 3]>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
    bounds: Aabb,
}

enum Cast {
    Crossings(usize),
    Grazing,
}

impl InsideTester {
    /// Validates watertightness and builds the hierarchy.
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        mesh.validate_watertight()?;
        let tris: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
        let centroids: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
        let mut order: Vec<usize> = (0..tris.len()).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        build(&tris, &centroids, &mut order, 0, tris.len(), &mut nodes);
        let bounds = nodes[0].bounds;
        Ok(InsideTester {
            tris,
            order,
            nodes,
            bounds,
        })
    }

    /// Majority vote of three parity rays with directions drawn from `rng`.
    pub fn contains_with<R: Rng + ?Sized>(&self, p: &Vec3, rng: &mut R) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        let mut votes = 0;
        for _ in 0..3 {
            let mut odd = false;
            for _ in 0..MAX_REDRAWS {
                let dir = random_direction(rng);
                if let Cast::Crossings(c) = self.cast(p, &dir) {
                    odd = c % 2 == 1;
                    break;
                }
            }
            votes += odd as usize;
        }
        votes >= 2
    }

    /// Containment of a single point with ray directions derived from
    /// `(seed, stream)`.
    pub fn contains(&self, p: &Vec3, seed: u64, stream: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        self.contains_with(p, &mut rng)
    }

    /// Classifies every row of `points`; row `i` uses ray stream `i`, so the
    /// result does not depend on the execution policy.
    pub fn contains_batch(&self, points: &Array2<f64>, seed: u64, exec: Exec) -> Vec<bool> {
        let chunks = exec.map_chunks(points.nrows(), 1024, |range| {
            range
                .map(|i| {
                    let p = Vec3::new(points[[i, 0]], points[[i, 1]], points[[i, 2]]);
                    self.contains(&p, seed, i as u64)
                })
                .collect::<Vec<_>>()
        });
        chunks.concat()
    }

    fn cast(&self, origin: &Vec3, dir: &Vec3) -> Cast {
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut crossings = 0;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if !ray_hits_box(origin, &inv, &node.bounds) {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    match intersect(origin, dir, &self.tris[t]) {
                        Hit::Miss => {}
                        Hit::Cross => crossings += 1,
                        Hit::Grazing => return Cast::Grazing,
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(ni + 1);
            }
        }
        Cast::Crossings(crossings)
    }
}

fn random_direction<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

fn build(
    tris: &[[Vec3; 3]],
    centroids: &[Vec3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<BvhNode>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        for v in &tris[t] {
            bounds.grow(v);
        }
        cbounds.grow(&centroids[t]);
    }
    let idx = nodes.len();
    nodes.push(BvhNode {
        bounds,
        start,
        count: end - start,
    });
    if end - start <= LEAF_SIZE {
        return idx;
    }
    let ext = cbounds.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis]
            .partial_cmp(&centroids[b][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    build(tris, centroids, order, start, mid, nodes);
    let right = build(tris, centroids, order, mid, end, nodes);
    nodes[idx].start = right;
    nodes[idx].count = 0;
    idx
}

fn ray_hits_box(o: &Vec3, inv: &Vec3, b: &Aabb) -> bool {
    let mut tmin: f64 = 0.0;
    let mut tmax = f64::INFINITY;
    for k in 0..3 {
        let t1 = (b.min[k] - o[k]) * inv[k];
        let t2 = (b.max[k] - o[k]) * inv[k];
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        // NaN (0 * inf) leaves the interval unchanged
        if lo > tmin {
            tmin = lo;
        }
        if hi < tmax {
            tmax = hi;
        }
    }
    tmin <= tmax
}

enum Hit {
    Miss,
    Cross,
    Grazing,
}

/// Möller–Trumbore with a grazing test on the barycentric coordinates.
fn intersect(o: &Vec3, d: &Vec3, tri: &[Vec3; 3]) -> Hit {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return Hit::Miss;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(&p) * inv;
    if !(-EDGE_EPS..=1.0 + EDGE_EPS).contains(&u) {
        return Hit::Miss;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return Hit::Miss;
    }
    let t = e2.dot(&q) * inv;
    if t <= 0.0 {
        return Hit::Miss;
    }
    let w = 1.0 - u - v;
    if u.abs() <= EDGE_EPS || v.abs() <= EDGE_EPS || w.abs() <= EDGE_EPS {
        return Hit::Grazing;
    }
    Hit::Cross
}

use ndarray::{s, Array1, Array2, ArcArray2, Axis};
use rand::Rng;

use super::flow::{ConditionalHomeomorphism, HomeoConfig, EMBEDDINGS};
use crate::diffgraph::{Eager, Ops, ParameterStore};
use crate::error::{Error, Result};
use crate::geometry::{SphereTessellation, TriMesh, Vec3};
use crate::par::Exec;

/// Slack on the union-surface test `G(x) >= 0`: a point generated on its own
/// primitive's surface evaluates to zero only up to round-off.
pub const SURFACE_EPS: f64 = 1e-6;

const CHUNK: usize = 2048;

/// Fitted (or freshly initialized) primitives: architecture plus parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralParts {
    pub homeo: ConditionalHomeomorphism,
    pub params: ParameterStore,
    pub exec: Exec,
    primitives: usize,
}

/// Points on the surface of the union of primitives, each tagged with the
/// primitive it was generated on.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionSurface {
    pub points: Array2<f64>,
    pub labels: Vec<usize>,
}

fn finite(a: Array2<f64>, op: &str) -> Result<Array2<f64>> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(a)
    } else {
        Err(Error::NonFinite { op: op.to_string() })
    }
}

fn check_points(points: &Array2<f64>) -> Result<()> {
    if points.ncols() != 3 {
        return Err(Error::usage(format!("expected n x 3 points, got n x {}", points.ncols())));
    }
    if !points.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite { op: "input points".into() });
    }
    Ok(())
}

/// Minimum of per-primitive values and the first index attaining it.
pub fn union_of(values: &[f64]) -> Result<(f64, usize)> {
    if values.is_empty() {
        return Err(Error::usage("union of zero primitives is undefined"));
    }
    let mut best = (values[0], 0);
    for (m, &v) in values.iter().enumerate().skip(1) {
        if v < best.0 {
            best = (v, m);
        }
    }
    Ok(best)
}

impl NeuralParts {
    pub fn new(homeo: ConditionalHomeomorphism, params: ParameterStore) -> Result<Self> {
        let primitives = homeo.check_store(&params)?;
        Ok(NeuralParts {
            homeo,
            params,
            exec: Exec::default(),
            primitives,
        })
    }

    /// Draws a split schedule, then fresh parameters, from `rng`.
    pub fn init<R: Rng + ?Sized>(config: HomeoConfig, primitives: usize, rng: &mut R) -> Result<Self> {
        let schedule = ConditionalHomeomorphism::random_schedule(config.layers, rng);
        let homeo = ConditionalHomeomorphism::new(config, &schedule)?;
        let params = homeo.init_params(primitives, rng)?;
        Self::new(homeo, params)
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn primitives(&self) -> usize {
        self.primitives
    }

    pub fn radius(&self) -> f64 {
        self.homeo.radius()
    }

    /// Shape embedding of primitive `m` as a `1 × E` row.
    pub fn embedding(&self, m: usize) -> Array2<f64> {
        let table = self.params.get(EMBEDDINGS).expect("checked at construction");
        table.slice(s![m..m + 1, ..]).to_owned()
    }

    fn check_primitive(&self, m: usize) -> Result<()> {
        if m >= self.primitives {
            return Err(Error::usage(format!(
                "primitive {m} out of range ({} primitives)",
                self.primitives
            )));
        }
        Ok(())
    }

    fn check_embedding(&self, embedding: &Array2<f64>) -> Result<()> {
        if embedding.dim() != (1, self.homeo.config.embed_dim) {
            return Err(Error::usage(format!(
                "embedding must be 1 x {}, got {:?}",
                self.homeo.config.embed_dim,
                embedding.dim()
            )));
        }
        Ok(())
    }

    fn run_layer(&self, layer: usize, points: &Array2<f64>, embedding: &Array2<f64>, inverse: bool) -> Result<Array2<f64>> {
        check_points(points)?;
        self.check_embedding(embedding)?;
        let layer = self
            .homeo
            .layers
            .get(layer)
            .ok_or_else(|| Error::usage(format!("no coupling layer {layer}")))?;
        let mut ops = Eager::new(&self.params);
        let c = ops.constant(embedding.clone());
        let cond = layer.condition(&mut ops, &c);
        let x = ops.constant(points.clone());
        let out = if inverse {
            layer.inverse(&mut ops, &x, &cond)
        } else {
            layer.forward(&mut ops, &x, &cond)
        };
        finite(out.into_owned(), if inverse { "coupling_inverse" } else { "coupling_forward" })
    }

    /// One coupling layer applied to `points` under `embedding`.
    pub fn coupling_forward(&self, layer: usize, points: &Array2<f64>, embedding: &Array2<f64>) -> Result<Array2<f64>> {
        self.run_layer(layer, points, embedding, false)
    }

    pub fn coupling_inverse(&self, layer: usize, points: &Array2<f64>, embedding: &Array2<f64>) -> Result<Array2<f64>> {
        self.run_layer(layer, points, embedding, true)
    }

    fn map_chunked(
        &self,
        points: &Array2<f64>,
        embedding: &Array2<f64>,
        f: impl Fn(&mut Eager, &ArcArray2<f64>, &[super::LayerCondition<ArcArray2<f64>>]) -> ArcArray2<f64> + Sync + Send,
    ) -> Array2<f64> {
        let chunks = self.exec.map_chunks(points.nrows(), CHUNK, |range| {
            let mut ops = Eager::new(&self.params);
            let c = ops.constant(embedding.clone());
            let conds = self.homeo.conditions(&mut ops, &c);
            let x = ops.constant(points.slice(s![range, ..]).to_owned());
            f(&mut ops, &x, &conds).into_owned()
        });
        if chunks.is_empty() {
            let width = if points.ncols() == 3 { 0 } else { points.ncols() };
            return Array2::zeros((0, width));
        }
        let views: Vec<_> = chunks.iter().map(|c| c.view()).collect();
        ndarray::concatenate(Axis(0), &views).expect("uniform chunk widths")
    }

    /// Latent points to primitive space under an explicit embedding.
    pub fn phi_forward_with(&self, embedding: &Array2<f64>, points: &Array2<f64>) -> Result<Array2<f64>> {
        check_points(points)?;
        self.check_embedding(embedding)?;
        if points.nrows() == 0 {
            return Ok(Array2::zeros((0, 3)));
        }
        let out = self.map_chunked(points, embedding, |ops, x, conds| self.homeo.forward(ops, x, conds));
        finite(out, "phi_forward")
    }

    /// Primitive space back to latent points under an explicit embedding.
    pub fn phi_inverse_with(&self, embedding: &Array2<f64>, points: &Array2<f64>) -> Result<Array2<f64>> {
        check_points(points)?;
        self.check_embedding(embedding)?;
        if points.nrows() == 0 {
            return Ok(Array2::zeros((0, 3)));
        }
        let out = self.map_chunked(points, embedding, |ops, x, conds| self.homeo.inverse(ops, x, conds));
        finite(out, "phi_inverse")
    }

    pub fn phi_forward(&self, m: usize, points: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_primitive(m)?;
        self.phi_forward_with(&self.embedding(m), points)
    }

    pub fn phi_inverse(&self, m: usize, points: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_primitive(m)?;
        self.phi_inverse_with(&self.embedding(m), points)
    }

    /// `g(x) = |phi^-1(x; C)| - r` for every row of `points`.
    pub fn implicit_with(&self, embedding: &Array2<f64>, points: &Array2<f64>) -> Result<Array1<f64>> {
        let y = self.phi_inverse_with(embedding, points)?;
        let r = self.radius();
        Ok(y.map_axis(Axis(1), |row| row.dot(&row).sqrt() - r))
    }

    /// Implicit field of primitive `m` at a single point.
    pub fn implicit_g(&self, m: usize, x: &Vec3) -> Result<f64> {
        self.check_primitive(m)?;
        let p = Array2::from_shape_vec((1, 3), vec![x.x, x.y, x.z]).expect("1 x 3");
        Ok(self.implicit_with(&self.embedding(m), &p)?[0])
    }

    /// `n × M` matrix of every primitive's implicit field.
    pub fn field(&self, points: &Array2<f64>) -> Result<Array2<f64>> {
        check_points(points)?;
        let mut out = Array2::zeros((points.nrows(), self.primitives));
        for m in 0..self.primitives {
            let g = self.implicit_with(&self.embedding(m), points)?;
            out.column_mut(m).assign(&g);
        }
        Ok(out)
    }

    /// Union field `G = min_m g^m` and its argmin for every row.
    pub fn union_field(&self, points: &Array2<f64>) -> Result<(Vec<f64>, Vec<usize>)> {
        let f = self.field(points)?;
        let mut vals = Vec::with_capacity(f.nrows());
        let mut args = Vec::with_capacity(f.nrows());
        for row in f.rows() {
            let (v, m) = union_of(row.as_slice().expect("standard layout"))?;
            vals.push(v);
            args.push(m);
        }
        Ok((vals, args))
    }

    /// `G(x)` and the lowest index of a primitive attaining it.
    pub fn implicit_union(&self, x: &Vec3) -> Result<(f64, usize)> {
        let p = Array2::from_shape_vec((1, 3), vec![x.x, x.y, x.z]).expect("1 x 3");
        let (v, a) = self.union_field(&p)?;
        Ok((v[0], a[0]))
    }

    /// Maps latent sphere samples onto the surface of primitive `m`.
    pub fn surface_points(&self, m: usize, latent: &Array2<f64>) -> Result<Array2<f64>> {
        check_points(latent)?;
        let r = self.radius();
        if let Some(i) = latent
            .rows()
            .into_iter()
            .position(|row| (row.dot(&row).sqrt() - r).abs() > 1e-12)
        {
            return Err(Error::usage(format!("latent sample {i} is not on the radius-{r} sphere")));
        }
        self.phi_forward(m, latent)
    }

    /// Keeps the points of each primitive's surface that are not inside any
    /// primitive, i.e. `G(x) >= -SURFACE_EPS`.
    pub fn union_surface(&self, per_primitive: &[Array2<f64>]) -> Result<UnionSurface> {
        let mask = self.union_surface_mask(per_primitive)?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (m, (pts, keep)) in per_primitive.iter().zip(&mask).enumerate() {
            for (i, &k) in keep.iter().enumerate() {
                if k {
                    rows.push(pts.row(i));
                    labels.push(m);
                }
            }
        }
        let points = if rows.is_empty() {
            Array2::zeros((0, 3))
        } else {
            ndarray::stack(Axis(0), &rows).expect("rows of width 3")
        };
        Ok(UnionSurface { points, labels })
    }

    /// Per-primitive masks of the points that [`Self::union_surface`] keeps.
    pub fn union_surface_mask(&self, per_primitive: &[Array2<f64>]) -> Result<Vec<Vec<bool>>> {
        let views: Vec<_> = per_primitive.iter().map(|p| p.view()).collect();
        let all = if views.is_empty() {
            Array2::zeros((0, 3))
        } else {
            ndarray::concatenate(Axis(0), &views).map_err(|_| Error::usage("surface points must be n x 3"))?
        };
        let (g, _) = self.union_field(&all)?;
        let mut out = Vec::with_capacity(per_primitive.len());
        let mut row = 0;
        for pts in per_primitive {
            out.push(g[row..row + pts.nrows()].iter().map(|&v| v >= -SURFACE_EPS).collect());
            row += pts.nrows();
        }
        Ok(out)
    }

    /// Mesh of primitive `m`: the tessellation's vertices mapped forward,
    /// faces unchanged.
    pub fn primitive_mesh(&self, m: usize, tess: &SphereTessellation) -> Result<TriMesh> {
        if (tess.radius - self.radius()).abs() > 1e-12 {
            return Err(Error::usage(format!(
                "tessellation radius {} differs from the latent sphere radius {}",
                tess.radius,
                self.radius()
            )));
        }
        let v = self.phi_forward(m, &tess.vertex_array())?;
        Ok(TriMesh {
            vertices: crate::geometry::from_array(&v),
            faces: tess.mesh.faces.clone(),
        })
    }

    /// Central-difference gradient of the union field at `x` with step `h`.
    pub fn grad_union(&self, x: &Vec3, h: f64) -> Result<Vec3> {
        let mut probes = Array2::zeros((6, 3));
        for k in 0..3 {
            for (j, sign) in [1.0, -1.0].into_iter().enumerate() {
                let mut p = *x;
                p[k] += sign * h;
                probes.row_mut(2 * k + j).assign(&ndarray::arr1(&[p.x, p.y, p.z]));
            }
        }
        let (g, _) = self.union_field(&probes)?;
        Ok(Vec3::new(
            (g[0] - g[1]) / (2.0 * h),
            (g[2] - g[3]) / (2.0 * h),
            (g[4] - g[5]) / (2.0 * h),
        ))
    }

    /// Overwrites the embedding of primitive `m`.
    pub fn set_embedding(&mut self, m: usize, embedding: &Array2<f64>) -> Result<()> {
        self.check_primitive(m)?;
        self.check_embedding(embedding)?;
        let mut table = self.params.get(EMBEDDINGS).expect("checked").to_owned();
        table.row_mut(m).assign(&embedding.row(0));
        self.params.assign(EMBEDDINGS, &table)
    }
}

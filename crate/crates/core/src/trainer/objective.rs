use ndarray::{s, Array2, Axis};
use rand::Rng;

use crate::diffgraph::{GradientMap, Graph, Ops, Var};
use crate::error::{Error, Result};
use crate::geometry::{sample_sphere, sample_surface, OccupancyPool, OccupancySet, SurfaceSamples, TriMesh};
use crate::homeo::{NeuralParts, EMBEDDINGS, SURFACE_EPS};
use crate::losses::{self, LossBreakdown, LossHyper, LossTerms, LossWeights};

/// Samples for one objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Target surface points and normals.
    pub surface: SurfaceSamples,
    /// Number of leading surface rows used by the normal loss.
    pub normal_rows: usize,
    pub occupancy: OccupancySet,
    /// Latent sphere samples, one block per primitive.
    pub sphere: Vec<Array2<f64>>,
}

/// Sample counts of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSizes {
    pub surface: usize,
    pub normals: usize,
    pub occupancy: usize,
    pub sphere: usize,
}

impl Batch {
    /// Draws surface samples, then the occupancy batch, then the sphere
    /// samples of each primitive in order.
    pub fn draw<R: Rng + ?Sized>(
        mesh: &TriMesh,
        pool: &OccupancyPool,
        sizes: BatchSizes,
        primitives: usize,
        radius: f64,
        rng: &mut R,
    ) -> Result<Batch> {
        let surface = sample_surface(mesh, sizes.surface, rng)?;
        let occupancy = pool.sample_batch(sizes.occupancy, rng);
        let sphere = (0..primitives)
            .map(|_| sample_sphere(sizes.sphere, radius, rng))
            .collect();
        Ok(Batch {
            surface,
            normal_rows: sizes.normals.min(sizes.surface),
            occupancy,
            sphere,
        })
    }

    /// Concatenation of batches, block by block.
    pub fn concat(parts: &[Batch]) -> Result<Batch> {
        let first = parts.first().ok_or_else(|| Error::usage("no batches to concatenate"))?;
        let cat = |f: &dyn Fn(&Batch) -> ndarray::ArrayView2<f64>| {
            let views: Vec<_> = parts.iter().map(f).collect();
            ndarray::concatenate(Axis(0), &views).map_err(|e| Error::usage(e.to_string()))
        };
        let normal_rows = parts.iter().map(|b| b.normal_rows).sum();
        // Normal rows lead each part; regroup so they lead the whole batch.
        let lead = cat(&|b: &Batch| b.surface.points.slice(s![..b.normal_rows, ..]))?;
        let rest = cat(&|b: &Batch| b.surface.points.slice(s![b.normal_rows.., ..]))?;
        let lead_n = cat(&|b: &Batch| b.surface.normals.slice(s![..b.normal_rows, ..]))?;
        let rest_n = cat(&|b: &Batch| b.surface.normals.slice(s![b.normal_rows.., ..]))?;
        let points = ndarray::concatenate(Axis(0), &[lead.view(), rest.view()]).expect("n x 3");
        let normals = ndarray::concatenate(Axis(0), &[lead_n.view(), rest_n.view()]).expect("n x 3");
        let mut faces: Vec<usize> = parts.iter().flat_map(|b| b.surface.faces[..b.normal_rows].to_vec()).collect();
        faces.extend(parts.iter().flat_map(|b| b.surface.faces[b.normal_rows..].to_vec()));
        let mut occupancy = first.occupancy.clone();
        for b in &parts[1..] {
            occupancy = occupancy.concat(&b.occupancy);
        }
        let mut sphere = Vec::with_capacity(first.sphere.len());
        for m in 0..first.sphere.len() {
            let views: Vec<_> = parts.iter().map(|b| b.sphere[m].view()).collect();
            sphere.push(ndarray::concatenate(Axis(0), &views).map_err(|e| Error::usage(e.to_string()))?);
        }
        Ok(Batch {
            surface: SurfaceSamples { points, normals, faces },
            normal_rows,
            occupancy,
            sphere,
        })
    }
}

/// Loss weights and hyperparameters of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub weights: LossWeights,
    pub hyper: LossHyper,
    /// Step of the central differences used for the union-field gradient.
    pub fd_step: f64,
}

impl Objective {
    /// Records the five terms and the weighted total on `g`, which must be
    /// bound to the model's parameter store.
    pub fn build(&self, g: &mut Graph, model: &NeuralParts, batch: &Batch) -> Result<(Var, LossTerms)> {
        let m_count = model.primitives();
        if batch.sphere.len() != m_count {
            return Err(Error::usage(format!(
                "batch has sphere samples for {} primitives, model has {m_count}",
                batch.sphere.len()
            )));
        }
        let occ_n = batch.occupancy.len();
        if occ_n == 0 {
            return Err(Error::usage("empty occupancy batch"));
        }
        let nn = batch.normal_rows;
        let probes = losses::fd_probes(&batch.surface.points.slice(s![..nn, ..]).to_owned(), self.fd_step);
        let queries = ndarray::concatenate(Axis(0), &[batch.occupancy.points.view(), probes.view()])
            .expect("n x 3");
        let queries = g.constant(queries);
        let table = g.param(EMBEDDINGS);

        let mut fields = Vec::with_capacity(m_count);
        let mut surfaces = Vec::with_capacity(m_count);
        for m in 0..m_count {
            let emb = Ops::row(g, &table, m);
            let conds = model.homeo.conditions(g, &emb);
            fields.push(model.homeo.implicit(g, &queries, &conds));
            let latent = g.constant(batch.sphere[m].clone());
            surfaces.push(model.homeo.forward(g, &latent, &conds));
        }
        let fields = g.concat_cols(&fields);
        let occ_fields = g.slice_rows(fields, 0..occ_n);
        let union = losses::union_field(g, occ_fields);

        let occ = losses::loss_occ(
            g,
            union,
            &batch.occupancy.labels,
            batch.occupancy.weights.as_slice().expect("contiguous weights"),
            self.hyper.tau,
        );
        let overlap = losses::loss_overlap(g, occ_fields, self.hyper.tau, self.hyper.lambda);
        let interior = batch.occupancy.interior_indices();
        let inner = g.gather_rows(occ_fields, &interior);
        let cover = losses::loss_cover(g, inner, self.hyper.k_cover)?;

        let norm = if nn == 0 {
            g.constant(Array2::zeros((1, 1)))
        } else {
            let probe_fields = g.slice_rows(fields, occ_n..occ_n + 6 * nn);
            let probe_union = losses::union_field(g, probe_fields);
            let grad = losses::fd_gradient(g, probe_union, nn, self.fd_step);
            losses::loss_norm(g, grad, &batch.surface.normals.slice(s![..nn, ..]).to_owned())
        };

        let predicted = g.concat_rows(&surfaces);
        let values = g.value(predicted).clone();
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "primitive surface".into() });
        }
        let (gv, _) = model.union_field(&values)?;
        let keep: Vec<usize> = (0..gv.len()).filter(|&i| gv[i] >= -SURFACE_EPS).collect();
        let kept = g.gather_rows(predicted, &keep);
        let target = g.constant(batch.surface.points.clone());
        let rec = losses::loss_rec(g, target, kept)?;

        let terms = LossTerms {
            rec,
            occ,
            norm,
            overlap,
            cover,
        };
        let total = losses::loss_total(g, &terms, &self.weights);
        Ok((total, terms))
    }

    /// Loss breakdown and parameter gradients of the total.
    pub fn gradients(&self, model: &NeuralParts, batch: &Batch) -> Result<(GradientMap, LossBreakdown)> {
        let mut g = Graph::with_store(&model.params);
        let (total, terms) = self.build(&mut g, model, batch)?;
        g.evaluate(total)?;
        let grads = g.backward(total)?;
        Ok((grads.for_store(&model.params), LossBreakdown::read(&g, &terms, total)))
    }

    /// Loss breakdown without gradients.
    pub fn value(&self, model: &NeuralParts, batch: &Batch) -> Result<LossBreakdown> {
        let mut g = Graph::with_store(&model.params);
        let (total, terms) = self.build(&mut g, model, batch)?;
        g.evaluate(total)?;
        Ok(LossBreakdown::read(&g, &terms, total))
    }
}

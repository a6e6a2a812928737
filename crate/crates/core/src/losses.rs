//! Training loss terms over a [`Graph`]. Each term takes graph nodes and
//! returns a `1 × 1` node, so the caller can combine and differentiate them.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::diffgraph::{Graph, Var};
use crate::error::{Error, Result};

/// Lower clamp on `|grad G|` in the normal loss.
pub const GRAD_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossWeights {
    pub w_rec: f64,
    pub w_occ: f64,
    pub w_norm: f64,
    pub w_overlap: f64,
    pub w_cover: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            w_rec: 1.0,
            w_occ: 0.1,
            w_norm: 0.01,
            w_overlap: 0.1,
            w_cover: 0.01,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        LossWeights {
            w_rec: 0.0,
            w_occ: 0.0,
            w_norm: 0.0,
            w_overlap: 0.0,
            w_cover: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.w_rec, self.w_occ, self.w_norm, self.w_overlap, self.w_cover]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::usage("loss weights must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossHyper {
    /// Boundary sharpness of the soft occupancy `sigmoid(-g / tau)`.
    pub tau: f64,
    /// Soft count of primitives a point may lie in before it is penalized.
    pub lambda: f64,
    pub k_cover: usize,
}

impl Default for LossHyper {
    fn default() -> Self {
        LossHyper {
            tau: 4e-3,
            lambda: 1.95,
            k_cover: 10,
        }
    }
}

impl LossHyper {
    pub fn validate(&self, primitives: usize) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::usage(format!("tau must be positive, got {}", self.tau)));
        }
        // With one primitive the overlap term vanishes for any lambda >= 1.
        if !(self.lambda >= 1.0 && (primitives < 2 || self.lambda <= primitives as f64)) {
            return Err(Error::usage(format!(
                "lambda must lie in [1, M = {primitives}], got {}",
                self.lambda
            )));
        }
        if self.k_cover == 0 {
            return Err(Error::usage("k_cover must be at least 1"));
        }
        Ok(())
    }
}

/// The five scalar terms of one objective evaluation.
#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub rec: Var,
    pub occ: Var,
    pub norm: Var,
    pub overlap: Var,
    pub cover: Var,
}

/// Plain values of the terms and their weighted total, for logging.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rec: f64,
    pub occ: f64,
    pub norm: f64,
    pub overlap: f64,
    pub cover: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn read(g: &Graph, terms: &LossTerms, total: Var) -> Self {
        LossBreakdown {
            rec: g.scalar(terms.rec),
            occ: g.scalar(terms.occ),
            norm: g.scalar(terms.norm),
            overlap: g.scalar(terms.overlap),
            cover: g.scalar(terms.cover),
            total: g.scalar(total),
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.rec, self.occ, self.norm, self.overlap, self.cover, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Running mean update: `self` becomes the mean of `n` previous values and `other`.
    pub fn accumulate(&mut self, other: &LossBreakdown, n: usize) {
        let a = n as f64 / (n + 1) as f64;
        let b = 1.0 / (n + 1) as f64;
        self.rec = a * self.rec + b * other.rec;
        self.occ = a * self.occ + b * other.occ;
        self.norm = a * self.norm + b * other.norm;
        self.overlap = a * self.overlap + b * other.overlap;
        self.cover = a * self.cover + b * other.cover;
        self.total = a * self.total + b * other.total;
    }
}

/// Squared bidirectional Chamfer distance between `n × 3` target points and
/// `k × 3` predicted points.
pub fn loss_rec(g: &mut Graph, target: Var, predicted: Var) -> Result<Var> {
    if g.value(predicted).nrows() == 0 {
        return Err(Error::data("all primitive surface points interior"));
    }
    if g.value(target).nrows() == 0 {
        return Err(Error::usage("empty target surface sample"));
    }
    let d = g.pairwise_sq_dist(target, predicted);
    let to_pred = g.min_cols(d);
    let to_target = g.min_rows(d);
    let a = g.mean(to_pred);
    let b = g.mean(to_target);
    Ok(g.add(a, b))
}

/// Importance-weighted binary cross-entropy between `sigmoid(-G / tau)` and
/// the labels, in logit form. `union` is `n × 1`. Normalized by the weight
/// sum, which equals `n` for a label-balanced batch.
pub fn loss_occ(g: &mut Graph, union: Var, labels: &[bool], weights: &[f64], tau: f64) -> Var {
    let n = labels.len();
    assert_eq!(g.value(union).dim(), (n, 1), "union field must be n x 1");
    assert_eq!(weights.len(), n, "one weight per label");
    let o = Array2::from_shape_fn((n, 1), |(i, _)| if labels[i] { 1.0 } else { 0.0 });
    let w = Array2::from_shape_fn((n, 1), |(i, _)| weights[i]);
    let logit = g.scale(union, -1.0 / tau);
    let sp = g.softplus(logit);
    let o = g.constant(o);
    let ol = g.mul(logit, o);
    let bce = g.sub(sp, ol);
    let total: f64 = weights.iter().sum();
    let w = g.constant(w);
    let wb = g.mul(bce, w);
    let s = g.sum(wb);
    g.scale(s, 1.0 / total)
}

/// Mean cosine distance between `grad` (`n × 3`, the gradient of the union
/// field at target surface points) and the target normals.
pub fn loss_norm(g: &mut Graph, grad: Var, normals: &Array2<f64>) -> Var {
    assert_eq!(g.value(grad).dim(), normals.dim(), "one gradient per normal");
    let n = g.constant(normals.clone());
    let dot = g.mul(grad, n);
    let dot = g.sum_cols(dot);
    let len = g.row_norm(grad);
    let len = g.clamp_min(len, GRAD_NORM_FLOOR);
    let cos = g.div(dot, len);
    let m = g.mean(cos);
    let neg = g.neg(m);
    g.add_scalar(neg, 1.0)
}

/// Mean over points of `max(0, sum_m sigmoid(-g^m / tau) - lambda)`, for
/// per-primitive fields `n × M`.
pub fn loss_overlap(g: &mut Graph, fields: Var, tau: f64, lambda: f64) -> Var {
    let logit = g.scale(fields, -1.0 / tau);
    let soft = g.sigmoid(logit);
    let count = g.sum_cols(soft);
    let excess = g.hinge(count, lambda);
    g.mean(excess)
}

/// For each primitive, the hinge `max(0, g^m)` summed over the `k` interior
/// points with smallest `g^m`, then summed over primitives. `fields` holds
/// the per-primitive fields at interior points only (`n × M`).
pub fn loss_cover(g: &mut Graph, fields: Var, k: usize) -> Result<Var> {
    let (n, m) = g.value(fields).dim();
    if n < k {
        return Err(Error::data(format!(
            "coverage needs {k} interior points, batch has {n}"
        )));
    }
    if m == 0 {
        return Err(Error::usage("coverage of zero primitives"));
    }
    let mut parts = Vec::with_capacity(m);
    for j in 0..m {
        let col = g.value(fields).column(j).to_owned();
        let nearest = smallest_k(col.as_slice().expect("contiguous column"), k);
        let c = g.cols(fields, &[j]);
        let sel = g.gather_rows(c, &nearest);
        let h = g.relu(sel);
        parts.push(g.sum(h));
    }
    let all = g.concat_cols(&parts);
    Ok(g.sum(all))
}

/// Indices of the `k` smallest values, ties broken by index.
pub fn smallest_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Weighted sum of the five terms.
pub fn loss_total(g: &mut Graph, terms: &LossTerms, weights: &LossWeights) -> Var {
    let parts = [terms.rec, terms.occ, terms.norm, terms.overlap, terms.cover];
    let scaled: Vec<Var> = parts
        .iter()
        .zip(weights.as_array())
        .map(|(&t, w)| g.scale(t, w))
        .collect();
    let row = g.concat_cols(&scaled);
    g.sum(row)
}

/// Per-point union field from per-primitive fields, `n × M -> n × 1`.
pub fn union_field(g: &mut Graph, fields: Var) -> Var {
    g.min_cols(fields)
}

/// Central-difference gradient of the union field from its values at the six
/// shifted copies of each point. `shifted` is `6n × 1`, laid out as blocks
/// `+x, -x, +y, -y, +z, -z` of `n` rows each.
pub fn fd_gradient(g: &mut Graph, shifted: Var, n: usize, h: f64) -> Var {
    assert_eq!(g.value(shifted).dim(), (6 * n, 1), "six shifted blocks");
    let mut cols = Vec::with_capacity(3);
    for k in 0..3 {
        let plus = g.slice_rows(shifted, 2 * k * n..(2 * k + 1) * n);
        let minus = g.slice_rows(shifted, (2 * k + 1) * n..(2 * k + 2) * n);
        let d = g.sub(plus, minus);
        cols.push(g.scale(d, 0.5 / h));
    }
    g.concat_cols(&cols)
}

/// Stacks the six axis-shifted copies of `points` in the layout
/// [`fd_gradient`] expects.
pub fn fd_probes(points: &Array2<f64>, h: f64) -> Array2<f64> {
    let n = points.nrows();
    let mut out = Array2::zeros((6 * n, 3));
    for k in 0..3 {
        for (j, sign) in [1.0, -1.0].into_iter().enumerate() {
            let block = 2 * k + j;
            let mut b = out.slice_mut(ndarray::s![block * n..(block + 1) * n, ..]);
            b.assign(points);
            b.column_mut(k).mapv_inplace(|v| v + sign * h);
        }
    }
    out
}

/// Plain-value helper: `min` over columns for each row.
pub fn row_min(a: &Array2<f64>) -> Vec<f64> {
    a.map_axis(Axis(1), |r| r.iter().copied().fold(f64::INFINITY, f64::min))
        .to_vec()
}

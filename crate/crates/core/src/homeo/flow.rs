use ndarray::Array2;
use rand::Rng;
use rand_distr::{StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::diffgraph::{Ops, ParameterStore};
use crate::error::{Error, Result};

/// Name of the `M × E` shape-embedding table in the parameter store.
pub const EMBEDDINGS: &str = "embeddings";

/// Bound of the hard tanh applied to the scale network output.
pub const SCALE_CLAMP: f64 = 10.0;

/// Size hyperparameters of the conditional homeomorphism.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HomeoConfig {
    /// Number of coupling layers.
    pub layers: usize,
    /// Hidden width of the s, t and p networks.
    pub hidden: usize,
    /// Shape embedding dimension.
    pub embed_dim: usize,
    /// Output width of the point-lifting network p.
    pub feature_dim: usize,
    /// Radius of the latent sphere.
    pub radius: f64,
}

impl Default for HomeoConfig {
    fn default() -> Self {
        HomeoConfig {
            layers: 4,
            hidden: 256,
            embed_dim: 512,
            feature_dim: 128,
            radius: 0.25,
        }
    }
}

impl HomeoConfig {
    /// Same structure at a width that fits in minutes on one core.
    pub fn desk() -> Self {
        HomeoConfig {
            hidden: 64,
            embed_dim: 64,
            feature_dim: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.embed_dim == 0 || self.feature_dim == 0 {
            return Err(Error::usage("network widths must be at least 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::usage(format!("sphere radius must be positive, got {}", self.radius)));
        }
        Ok(())
    }
}

/// Output activation of an MLP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FinalActivation {
    None,
    HardTanh(f64, f64),
}

/// Layer widths of an MLP with ReLU between layers; `widths[0]` is the
/// input width.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    pub final_activation: FinalActivation,
}

impl MlpSpec {
    pub fn scale(input: usize, hidden: usize) -> Self {
        MlpSpec {
            widths: vec![input, hidden, hidden, 1],
            final_activation: FinalActivation::HardTanh(-SCALE_CLAMP, SCALE_CLAMP),
        }
    }

    pub fn translation(input: usize, hidden: usize) -> Self {
        MlpSpec {
            widths: vec![input, hidden, hidden, 1],
            final_activation: FinalActivation::None,
        }
    }

    pub fn lift(hidden: usize, features: usize) -> Self {
        MlpSpec {
            widths: vec![2, hidden, features],
            final_activation: FinalActivation::None,
        }
    }

    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }
}

/// One conditional affine coupling layer: the coordinate `dim` is scaled and
/// shifted by amounts predicted from the other two coordinates and the
/// primitive's shape embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingLayer {
    pub index: usize,
    pub dim: usize,
    pub pass: [usize; 2],
    pub lift: MlpSpec,
    pub scale: MlpSpec,
    pub translation: MlpSpec,
    embed_dim: usize,
}

/// Per-primitive, per-layer constant part of the first s/t layer:
/// `C W_embed + b`, a `1 × hidden` row.
#[derive(Debug, Clone)]
pub struct LayerCondition<T> {
    pub scale: T,
    pub translation: T,
}

impl CouplingLayer {
    pub fn new(index: usize, dim: usize, cfg: &HomeoConfig) -> Self {
        let pass = match dim {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        };
        let input = cfg.embed_dim + cfg.feature_dim;
        CouplingLayer {
            index,
            dim,
            pass,
            lift: MlpSpec::lift(cfg.hidden, cfg.feature_dim),
            scale: MlpSpec::scale(input, cfg.hidden),
            translation: MlpSpec::translation(input, cfg.hidden),
            embed_dim: cfg.embed_dim,
        }
    }

    fn name(&self, net: &str, item: &str) -> String {
        format!("coupling{}.{net}.{item}", self.index)
    }

    /// Names, shapes and initializers of this layer's parameters, in
    /// storage order.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let mut out = Vec::new();
        let lift = &self.lift.widths;
        for k in 0..self.lift.depth() {
            let (i, o) = (lift[k], lift[k + 1]);
            out.push(ParamSpec::uniform(self.name("p", &format!("w{k}")), (i, o), i));
            out.push(ParamSpec::uniform(self.name("p", &format!("b{k}")), (1, o), i));
        }
        for (net, spec) in [("s", &self.scale), ("t", &self.translation)] {
            let w = &spec.widths;
            let fan0 = w[0];
            let feat = w[0] - self.embed_dim;
            out.push(ParamSpec::uniform(self.name(net, "w0_embed"), (self.embed_dim, w[1]), fan0));
            out.push(ParamSpec::uniform(self.name(net, "w0_feat"), (feat, w[1]), fan0));
            out.push(ParamSpec::uniform(self.name(net, "b0"), (1, w[1]), fan0));
            for k in 1..spec.depth() {
                let (i, o) = (w[k], w[k + 1]);
                let fan = if k + 1 == spec.depth() { 0 } else { i };
                out.push(ParamSpec::uniform(self.name(net, &format!("w{k}")), (i, o), fan));
                out.push(ParamSpec::uniform(self.name(net, &format!("b{k}")), (1, o), fan));
            }
        }
        out
    }

    /// Projects a `1 × E` embedding row through the embedding half of the
    /// first s and t layers.
    pub fn condition<O: Ops>(&self, ops: &mut O, embedding: &O::T) -> LayerCondition<O::T> {
        let mut first = |net: &str| {
            let w = ops.param(&self.name(net, "w0_embed"));
            let b = ops.param(&self.name(net, "b0"));
            let c = ops.matmul(embedding, &w);
            ops.add_row(&c, &b)
        };
        LayerCondition {
            scale: first("s"),
            translation: first("t"),
        }
    }

    fn lift<O: Ops>(&self, ops: &mut O, pass: &O::T) -> O::T {
        let mut h = pass.clone();
        for k in 0..self.lift.depth() {
            let w = ops.param(&self.name("p", &format!("w{k}")));
            let b = ops.param(&self.name("p", &format!("b{k}")));
            let z = ops.matmul(&h, &w);
            h = ops.add_row(&z, &b);
            if k + 1 < self.lift.depth() {
                h = ops.relu(&h);
            }
        }
        h
    }

    fn head<O: Ops>(&self, ops: &mut O, net: &str, spec: &MlpSpec, feat: &O::T, cond: &O::T) -> O::T {
        let w0 = ops.param(&self.name(net, "w0_feat"));
        let z = ops.matmul(feat, &w0);
        let mut h = ops.add_row(&z, cond);
        for k in 1..spec.depth() {
            h = ops.relu(&h);
            let w = ops.param(&self.name(net, &format!("w{k}")));
            let b = ops.param(&self.name(net, &format!("b{k}")));
            let z = ops.matmul(&h, &w);
            h = ops.add_row(&z, &b);
        }
        match spec.final_activation {
            FinalActivation::None => h,
            FinalActivation::HardTanh(lo, hi) => ops.hardtanh(&h, lo, hi),
        }
    }

    /// Scale `s` and shift `t` (both `n × 1`) for the given points.
    pub fn scale_shift<O: Ops>(&self, ops: &mut O, points: &O::T, cond: &LayerCondition<O::T>) -> (O::T, O::T) {
        let pass = ops.cols(points, &self.pass);
        let feat = self.lift(ops, &pass);
        let s = self.head(ops, "s", &self.scale, &feat, &cond.scale);
        let t = self.head(ops, "t", &self.translation, &feat, &cond.translation);
        (s, t)
    }

    /// `z -> z exp(s) + t` on the transformed coordinate.
    pub fn forward<O: Ops>(&self, ops: &mut O, points: &O::T, cond: &LayerCondition<O::T>) -> O::T {
        let (s, t) = self.scale_shift(ops, points, cond);
        let z = ops.cols(points, &[self.dim]);
        let e = ops.exp(&s);
        let zs = ops.mul(&z, &e);
        let out = ops.add(&zs, &t);
        ops.set_col(points, self.dim, &out)
    }

    /// `z -> (z - t) exp(-s)` on the transformed coordinate.
    pub fn inverse<O: Ops>(&self, ops: &mut O, points: &O::T, cond: &LayerCondition<O::T>) -> O::T {
        let (s, t) = self.scale_shift(ops, points, cond);
        let z = ops.cols(points, &[self.dim]);
        let d = ops.sub(&z, &t);
        let ns = ops.neg(&s);
        let e = ops.exp(&ns);
        let out = ops.mul(&d, &e);
        ops.set_col(points, self.dim, &out)
    }
}

/// A parameter tensor of the network and how it is initialized.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: (usize, usize),
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`; zero means all zeros.
    pub fan_in: usize,
}

impl ParamSpec {
    fn uniform(name: String, shape: (usize, usize), fan_in: usize) -> Self {
        ParamSpec { name, shape, fan_in }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Array2<f64> {
        if self.fan_in == 0 {
            return Array2::zeros(self.shape);
        }
        let a = 1.0 / (self.fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-a, a).expect("finite bound");
        Array2::from_shape_fn(self.shape, |_| rng.sample(dist))
    }
}

/// Stack of coupling layers mapping the latent sphere space to primitive
/// space, conditioned on a shape embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalHomeomorphism {
    pub config: HomeoConfig,
    pub layers: Vec<CouplingLayer>,
}

impl ConditionalHomeomorphism {
    /// Builds the stack for a given split schedule (transformed dimension per
    /// layer).
    pub fn new(config: HomeoConfig, schedule: &[usize]) -> Result<Self> {
        config.validate()?;
        if schedule.len() != config.layers {
            return Err(Error::usage(format!(
                "split schedule has {} entries for {} layers",
                schedule.len(),
                config.layers
            )));
        }
        if schedule.iter().any(|&d| d > 2) {
            return Err(Error::usage("split dimensions must be 0, 1 or 2"));
        }
        if schedule.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::usage("consecutive coupling layers must transform different dimensions"));
        }
        let layers = schedule
            .iter()
            .enumerate()
            .map(|(i, &d)| CouplingLayer::new(i, d, &config))
            .collect();
        Ok(ConditionalHomeomorphism { config, layers })
    }

    /// Draws a split schedule without consecutive repeats: the first
    /// dimension uniformly, every later one uniformly among the other two.
    pub fn random_schedule<R: Rng + ?Sized>(layers: usize, rng: &mut R) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::with_capacity(layers);
        for _ in 0..layers {
            let d = match out.last() {
                None => rng.random_range(0..3),
                Some(&prev) => (prev + rng.random_range(1..3)) % 3,
            };
            out.push(d);
        }
        out
    }

    pub fn schedule(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.dim).collect()
    }

    pub fn radius(&self) -> f64 {
        self.config.radius
    }

    /// Fresh parameters: coupling layers in order, then an `M × E` embedding
    /// table with standard normal entries.
    pub fn init_params<R: Rng + ?Sized>(&self, primitives: usize, rng: &mut R) -> Result<ParameterStore> {
        if primitives == 0 {
            return Err(Error::usage("need at least one primitive"));
        }
        let mut store = ParameterStore::new();
        for spec in self.layers.iter().flat_map(|l| l.param_specs()) {
            store.insert(spec.name.clone(), spec.draw(rng))?;
        }
        let emb = Array2::from_shape_fn((primitives, self.config.embed_dim), |_| rng.sample(StandardNormal));
        store.insert(EMBEDDINGS, emb)?;
        Ok(store)
    }

    /// Checks that `store` holds exactly the parameters this architecture
    /// expects, with matching shapes.
    pub fn check_store(&self, store: &ParameterStore) -> Result<usize> {
        let emb = store
            .get(EMBEDDINGS)
            .ok_or_else(|| Error::Incompatible("parameter store has no embedding table".into()))?;
        let m = emb.nrows();
        let specs: Vec<ParamSpec> = self.layers.iter().flat_map(|l| l.param_specs()).collect();
        let layout_ok = m > 0
            && emb.ncols() == self.config.embed_dim
            && store.len() == specs.len() + 1
            && specs
                .iter()
                .zip(store.iter())
                .all(|(spec, (name, v))| spec.name == name && spec.shape == v.dim());
        if !layout_ok {
            return Err(Error::Incompatible(
                "parameter names or shapes do not match the network architecture".into(),
            ));
        }
        Ok(m)
    }

    /// Layer conditions for one embedding row.
    pub fn conditions<O: Ops>(&self, ops: &mut O, embedding: &O::T) -> Vec<LayerCondition<O::T>> {
        self.layers.iter().map(|l| l.condition(ops, embedding)).collect()
    }

    /// Latent points to primitive space.
    pub fn forward<O: Ops>(&self, ops: &mut O, points: &O::T, conds: &[LayerCondition<O::T>]) -> O::T {
        let mut x = points.clone();
        for (layer, cond) in self.layers.iter().zip(conds) {
            x = layer.forward(ops, &x, cond);
        }
        x
    }

    /// Primitive space back to latent points.
    pub fn inverse<O: Ops>(&self, ops: &mut O, points: &O::T, conds: &[LayerCondition<O::T>]) -> O::T {
        let mut y = points.clone();
        for (layer, cond) in self.layers.iter().zip(conds).rev() {
            y = layer.inverse(ops, &y, cond);
        }
        y
    }

    /// `g(x) = |phi^-1(x)| - r`, an `n × 1` column.
    pub fn implicit<O: Ops>(&self, ops: &mut O, points: &O::T, conds: &[LayerCondition<O::T>]) -> O::T {
        let y = self.inverse(ops, points, conds);
        let n = ops.row_norm(&y);
        ops.add_scalar(&n, -self.radius())
    }
}

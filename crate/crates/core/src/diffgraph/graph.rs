use indexmap::IndexMap;
use ndarray::{s, Array2, Axis, Zip};

use super::store::{GradientMap, ParameterStore};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Exp(Var),
    Sigmoid(Var),
    Softplus(Var),
    Relu(Var),
    HardTanh(Var, f64, f64),
    Hinge(Var, f64),
    ClampMin(Var, f64),
    Sqrt(Var),
    Sum(Var),
    SumCols(Var),
    MinCols(Var, Vec<usize>),
    MinRows(Var, Vec<usize>),
    Cols(Var, Vec<usize>),
    SetCol(Var, usize, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    GatherRows(Var, Vec<usize>),
    RowNorm(Var),
    PairwiseSqDist(Var, Var),
}

impl Op {
    fn tag(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Param => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddRow(..) => "add_row",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::MatMul(..) => "matmul",
            Op::Exp(..) => "exp",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softplus(..) => "softplus",
            Op::Relu(..) => "relu",
            Op::HardTanh(..) => "hardtanh",
            Op::Hinge(..) => "max_hinge",
            Op::ClampMin(..) => "clamp_min",
            Op::Sqrt(..) => "sqrt",
            Op::Sum(..) => "sum",
            Op::SumCols(..) => "sum_cols",
            Op::MinCols(..) => "min_cols",
            Op::MinRows(..) => "min_rows",
            Op::Cols(..) => "cols",
            Op::SetCol(..) => "set_col",
            Op::ConcatCols(..) => "concat_cols",
            Op::ConcatRows(..) => "concat_rows",
            Op::SliceRows(..) => "slice_rows",
            Op::GatherRows(..) => "gather_rows",
            Op::RowNorm(..) => "row_norm",
            Op::PairwiseSqDist(..) => "pairwise_sq_dist",
        }
    }
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

/// Eagerly evaluated computation tape.
///
/// Parameters are bound from a [`ParameterStore`]; each named parameter maps
/// to exactly one leaf node no matter how often it is requested, so shared
/// weights accumulate their gradient naturally.
pub struct Graph<'s> {
    store: Option<&'s ParameterStore>,
    nodes: Vec<Node>,
    params: IndexMap<String, Var>,
    fault: Option<&'static str>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'s> Graph<'s> {
    pub fn new() -> Self {
        Graph {
            store: None,
            nodes: Vec::new(),
            params: IndexMap::new(),
            fault: None,
        }
    }

    pub fn with_store(store: &'s ParameterStore) -> Self {
        Graph {
            store: Some(store),
            ..Self::new()
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::Param => true,
            _ => self.parents(&op).iter().any(|p| self.nodes[p.0].requires_grad),
        };
        if self.fault.is_none() && !value.iter().all(|v| v.is_finite()) {
            self.fault = Some(op.tag());
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn parents(&self, op: &Op) -> Vec<Var> {
        match op {
            Op::Leaf | Op::Param => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::AddRow(a, b)
            | Op::MatMul(a, b)
            | Op::SetCol(a, _, b)
            | Op::PairwiseSqDist(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Exp(a)
            | Op::Sigmoid(a)
            | Op::Softplus(a)
            | Op::Relu(a)
            | Op::HardTanh(a, ..)
            | Op::Hinge(a, _)
            | Op::ClampMin(a, _)
            | Op::Sqrt(a)
            | Op::Sum(a)
            | Op::SumCols(a)
            | Op::MinCols(a, _)
            | Op::MinRows(a, _)
            | Op::Cols(a, _)
            | Op::SliceRows(a, _)
            | Op::GatherRows(a, _)
            | Op::RowNorm(a) => vec![*a],
            Op::ConcatCols(v) | Op::ConcatRows(v) => v.clone(),
        }
    }

    /// Current value of a node.
    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    /// Op tag of the node, e.g. `"matmul"`.
    pub fn op_tag(&self, v: Var) -> &'static str {
        self.nodes[v.0].op.tag()
    }

    /// Returns the value of `root`, or the first numeric fault on the tape.
    pub fn evaluate(&self, root: Var) -> Result<Array2<f64>> {
        self.check()?;
        Ok(self.nodes[root.0].value.clone())
    }

    fn check(&self) -> Result<()> {
        match self.fault {
            Some(op) => Err(Error::NonFinite { op: op.to_string() }),
            None => Ok(()),
        }
    }

    /// A constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// A differentiable free input that is not backed by the store.
    pub fn variable(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Param)
    }

    /// Leaf for a named parameter of the bound store. Repeated calls return
    /// the same node.
    ///
    /// Panics if no store is bound or the name is unknown.
    pub fn param(&mut self, name: &str) -> Var {
        if let Some(&v) = self.params.get(name) {
            return v;
        }
        let store = self.store.expect("graph has no parameter store bound");
        let value = store
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"))
            .to_owned();
        let v = self.push(value, Op::Param);
        self.params.insert(name.to_string(), v);
        v
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) / self.value(b);
        self.push(v, Op::Div(a, b))
    }

    /// `a + row`, broadcasting the `1 × k` row over every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.nrows(), 1, "add_row expects a single row");
        let v = self.value(a) + r;
        self.push(v, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, Op::AddScalar(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::exp);
        self.push(v, Op::Exp(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    /// `ln(1 + e^x)`, computed without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(|x| x.max(0.0));
        self.push(v, Op::Relu(a))
    }

    pub fn hardtanh(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(a).mapv(|x| x.clamp(lo, hi));
        self.push(v, Op::HardTanh(a, lo, hi))
    }

    /// `max(0, a - c)`.
    pub fn hinge(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).mapv(|x| (x - c).max(0.0));
        self.push(v, Op::Hinge(a, c))
    }

    /// `max(a, c)`.
    pub fn clamp_min(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a).mapv(|x| x.max(c));
        self.push(v, Op::ClampMin(a, c))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::sqrt);
        self.push(v, Op::Sqrt(a))
    }

    /// Sum of all entries, as a `1 × 1` node.
    pub fn sum(&mut self, a: Var) -> Var {
        let v = Array2::from_elem((1, 1), self.value(a).sum());
        self.push(v, Op::Sum(a))
    }

    /// Mean of all entries, as a `1 × 1` node.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Row sums, `n × k -> n × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let v = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(v, Op::SumCols(a))
    }

    /// Row minima, `n × k -> n × 1`. The gradient goes to the first minimal
    /// column of each row.
    pub fn min_cols(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut arg = Vec::with_capacity(x.nrows());
        let mut v = Array2::zeros((x.nrows(), 1));
        for (i, row) in x.rows().into_iter().enumerate() {
            let (j, m) = argmin(row.iter().copied());
            arg.push(j);
            v[[i, 0]] = m;
        }
        self.push(v, Op::MinCols(a, arg))
    }

    /// Column minima, `n × k -> 1 × k`. The gradient goes to the first
    /// minimal row of each column.
    pub fn min_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut arg = Vec::with_capacity(x.ncols());
        let mut v = Array2::zeros((1, x.ncols()));
        for (j, col) in x.columns().into_iter().enumerate() {
            let (i, m) = argmin(col.iter().copied());
            arg.push(i);
            v[[0, j]] = m;
        }
        self.push(v, Op::MinRows(a, arg))
    }

    /// Argmin indices recorded by a `min_cols`/`min_rows` node.
    pub fn argmin_of(&self, v: Var) -> Option<&[usize]> {
        match &self.nodes[v.0].op {
            Op::MinCols(_, arg) | Op::MinRows(_, arg) => Some(arg),
            _ => None,
        }
    }

    pub fn cols(&mut self, a: Var, idx: &[usize]) -> Var {
        let v = self.value(a).select(Axis(1), idx);
        self.push(v, Op::Cols(a, idx.to_vec()))
    }

    /// Copy of `a` with column `j` replaced by the single column `col`.
    pub fn set_col(&mut self, a: Var, j: usize, col: Var) -> Var {
        let mut v = self.value(a).clone();
        v.column_mut(j).assign(&self.value(col).column(0));
        self.push(v, Op::SetCol(a, j, col))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row mismatch");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.value(*p).view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows: column mismatch");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    pub fn slice_rows(&mut self, a: Var, range: std::ops::Range<usize>) -> Var {
        let v = self.value(a).slice(s![range.clone(), ..]).to_owned();
        self.push(v, Op::SliceRows(a, range.start))
    }

    /// Rows of `a` at `idx`, in order; indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let v = self.value(a).select(Axis(0), idx);
        self.push(v, Op::GatherRows(a, idx.to_vec()))
    }

    /// Euclidean norm of each row, `n × k -> n × 1`.
    pub fn row_norm(&mut self, a: Var) -> Var {
        let v = self
            .value(a)
            .map_axis(Axis(1), |r| r.dot(&r).sqrt())
            .insert_axis(Axis(1));
        self.push(v, Op::RowNorm(a))
    }

    /// `D[i, j] = |a_i - b_j|^2` for `a: n × d`, `b: k × d`.
    pub fn pairwise_sq_dist(&mut self, a: Var, b: Var) -> Var {
        let v = pairwise_sq_dist(self.value(a), self.value(b));
        self.push(v, Op::PairwiseSqDist(a, b))
    }

    /// Reverse pass from a scalar root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        self.check()?;
        let shape = self.nodes[root.0].value.dim();
        if shape != (1, 1) {
            return Err(Error::usage(format!(
                "backward needs a scalar root, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut adj: Vec<Option<Array2<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Array2::ones((1, 1)));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = adj[i].take() else { continue };
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    op: format!("{} (adjoint)", node.op.tag()),
                });
            }
            self.propagate(&node.op, &node.value, &g, &mut adj);
            adj[i] = Some(g);
        }

        Ok(Gradients {
            adjoints: adj,
            params: self.params.clone(),
        })
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&self, op: &Op, y: &Array2<f64>, g: &Array2<f64>, adj: &mut [Option<Array2<f64>>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        match op {
            Op::Leaf | Op::Param => {}
            Op::Add(a, b) => {
                self.acc(adj, *a, || g.clone());
                self.acc(adj, *b, || g.clone());
            }
            Op::Sub(a, b) => {
                self.acc(adj, *a, || g.clone());
                self.acc(adj, *b, || -g);
            }
            Op::Mul(a, b) => {
                self.acc(adj, *a, || g * val(*b));
                self.acc(adj, *b, || g * val(*a));
            }
            Op::Div(a, b) => {
                self.acc(adj, *a, || g / val(*b));
                self.acc(adj, *b, || {
                    let mut d = g * y;
                    d /= val(*b);
                    -d
                });
            }
            Op::AddRow(a, row) => {
                self.acc(adj, *a, || g.clone());
                self.acc(adj, *row, || g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::Scale(a, c) => self.acc(adj, *a, || g * *c),
            Op::AddScalar(a) => self.acc(adj, *a, || g.clone()),
            Op::MatMul(a, b) => {
                self.acc(adj, *a, || g.dot(&val(*b).t()));
                self.acc(adj, *b, || val(*a).t().dot(g));
            }
            Op::Exp(a) => self.acc(adj, *a, || g * y),
            Op::Sigmoid(a) => self.acc(adj, *a, || {
                let mut d = g.clone();
                Zip::from(&mut d).and(y).for_each(|d, &s| *d *= s * (1.0 - s));
                d
            }),
            Op::Softplus(a) => self.acc(adj, *a, || {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| *d *= sigmoid(x));
                d
            }),
            Op::Relu(a) => self.acc(adj, *a, || masked(g, val(*a), |x| x > 0.0)),
            Op::HardTanh(a, lo, hi) => {
                self.acc(adj, *a, || masked(g, val(*a), |x| x > *lo && x < *hi))
            }
            Op::Hinge(a, c) => self.acc(adj, *a, || masked(g, val(*a), |x| x > *c)),
            Op::ClampMin(a, c) => self.acc(adj, *a, || masked(g, val(*a), |x| x > *c)),
            Op::Sqrt(a) => self.acc(adj, *a, || {
                let mut d = g.clone();
                Zip::from(&mut d).and(y).for_each(|d, &r| *d /= 2.0 * r);
                d
            }),
            Op::Sum(a) => self.acc(adj, *a, || Array2::from_elem(val(*a).dim(), g[[0, 0]])),
            Op::SumCols(a) => self.acc(adj, *a, || {
                let mut d = Array2::zeros(val(*a).dim());
                d += g;
                d
            }),
            Op::MinCols(a, arg) => self.acc(adj, *a, || {
                let mut d = Array2::zeros(val(*a).dim());
                for (i, &j) in arg.iter().enumerate() {
                    d[[i, j]] = g[[i, 0]];
                }
                d
            }),
            Op::MinRows(a, arg) => self.acc(adj, *a, || {
                let mut d = Array2::zeros(val(*a).dim());
                for (j, &i) in arg.iter().enumerate() {
                    d[[i, j]] = g[[0, j]];
                }
                d
            }),
            Op::Cols(a, idx) => self.acc(adj, *a, || {
                let mut d = Array2::zeros(val(*a).dim());
                for (c, &j) in idx.iter().enumerate() {
                    let mut col = d.column_mut(j);
                    col += &g.column(c);
                }
                d
            }),
            Op::SetCol(a, j, col) => {
                self.acc(adj, *a, || {
                    let mut d = g.clone();
                    d.column_mut(*j).fill(0.0);
                    d
                });
                self.acc(adj, *col, || g.column(*j).to_owned().insert_axis(Axis(1)));
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for p in parts {
                    let w = val(*p).ncols();
                    self.acc(adj, *p, || g.slice(s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for p in parts {
                    let h = val(*p).nrows();
                    self.acc(adj, *p, || g.slice(s![start..start + h, ..]).to_owned());
                    start += h;
                }
            }
            Op::SliceRows(a, start) => self.acc(adj, *a, || {
                let mut d = Array2::zeros(val(*a).dim());
                d.slice_mut(s![*start..*start + g.nrows(), ..]).assign(g);
                d
            }),
            Op::GatherRows(a, idx) => self.acc(adj, *a, || {
                let mut d = Array2::zeros(val(*a).dim());
                for (r, &i) in idx.iter().enumerate() {
                    let mut row = d.row_mut(i);
                    row += &g.row(r);
                }
                d
            }),
            Op::RowNorm(a) => self.acc(adj, *a, || {
                let mut d = val(*a).clone();
                for (i, mut row) in d.rows_mut().into_iter().enumerate() {
                    let n = y[[i, 0]];
                    let f = if n > 0.0 { g[[i, 0]] / n } else { 0.0 };
                    row *= f;
                }
                d
            }),
            Op::PairwiseSqDist(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if self.wants(*a) {
                    // sum_j 2 g_ij (a_i - b_j) = 2 (rowsum(g) a_i - (g b)_i)
                    let rs = g.sum_axis(Axis(1)).insert_axis(Axis(1));
                    let d = (av * &rs - g.dot(bv)) * 2.0;
                    add_into(adj, *a, d);
                }
                if self.wants(*b) {
                    let cs = g.sum_axis(Axis(0)).insert_axis(Axis(1));
                    let d = (bv * &cs - g.t().dot(av)) * 2.0;
                    add_into(adj, *b, d);
                }
            }
        }
    }

    fn acc(&self, adj: &mut [Option<Array2<f64>>], v: Var, grad: impl FnOnce() -> Array2<f64>) {
        if self.wants(v) {
            add_into(adj, v, grad());
        }
    }
}

fn add_into(adj: &mut [Option<Array2<f64>>], v: Var, grad: Array2<f64>) {
    match &mut adj[v.0] {
        Some(a) => *a += &grad,
        slot @ None => *slot = Some(grad),
    }
}

fn masked(g: &Array2<f64>, x: &Array2<f64>, keep: impl Fn(f64) -> bool) -> Array2<f64> {
    let mut d = g.clone();
    Zip::from(&mut d).and(x).for_each(|d, &x| {
        if !keep(x) {
            *d = 0.0;
        }
    });
    d
}

/// First index of the minimum; NaN never wins.
fn argmin(it: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    let mut seen = false;
    for (i, x) in it.enumerate() {
        if !seen || x < best.1 {
            best = (i, x);
            seen = true;
        }
    }
    best
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub(crate) fn pairwise_sq_dist(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let mut d = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ai) in a.rows().into_iter().enumerate() {
        for (j, bj) in b.rows().into_iter().enumerate() {
            let mut acc = 0.0;
            for (x, y) in ai.iter().zip(bj.iter()) {
                let t = x - y;
                acc += t * t;
            }
            d[[i, j]] = acc;
        }
    }
    d
}

/// Result of [`Graph::backward`]: the adjoint of every node reachable from
/// the root.
#[derive(Debug)]
pub struct Gradients {
    adjoints: Vec<Option<Array2<f64>>>,
    params: IndexMap<String, Var>,
}

impl Gradients {
    /// Adjoint of `v`, or `None` when the root does not depend on it.
    pub fn wrt(&self, v: Var) -> Option<&Array2<f64>> {
        self.adjoints.get(v.0).and_then(Option::as_ref)
    }

    /// Adjoint of `v`, zeros of `like`'s shape when unreachable.
    pub fn wrt_or_zero(&self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        self.wrt(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }

    /// Gradient for every entry of `store`, in store order. Parameters the
    /// root does not depend on get exact zeros.
    pub fn for_store(&self, store: &ParameterStore) -> GradientMap {
        let mut out = GradientMap::zeros_like(store);
        for (name, grad) in out.iter_mut() {
            if let Some(g) = self.params.get(name).and_then(|v| self.wrt(*v)) {
                grad.assign(g);
            }
        }
        out
    }
}

use ndarray::{s, ArcArray2, Array2, Axis};

use super::graph::{Graph, Var};
use super::store::ParameterStore;

/// The operations needed to run the coupling network, implemented both by
/// the differentiable [`Graph`] and by the plain [`Eager`] evaluator.
pub trait Ops {
    type T: Clone;

    fn param(&mut self, name: &str) -> Self::T;
    fn constant(&mut self, value: Array2<f64>) -> Self::T;
    fn matmul(&mut self, a: &Self::T, b: &Self::T) -> Self::T;
    /// `a + row` with a `1 × k` row broadcast over `a`.
    fn add_row(&mut self, a: &Self::T, row: &Self::T) -> Self::T;
    fn add(&mut self, a: &Self::T, b: &Self::T) -> Self::T;
    fn sub(&mut self, a: &Self::T, b: &Self::T) -> Self::T;
    fn mul(&mut self, a: &Self::T, b: &Self::T) -> Self::T;
    fn exp(&mut self, a: &Self::T) -> Self::T;
    fn neg(&mut self, a: &Self::T) -> Self::T;
    fn relu(&mut self, a: &Self::T) -> Self::T;
    fn hardtanh(&mut self, a: &Self::T, lo: f64, hi: f64) -> Self::T;
    fn add_scalar(&mut self, a: &Self::T, c: f64) -> Self::T;
    fn cols(&mut self, a: &Self::T, idx: &[usize]) -> Self::T;
    fn set_col(&mut self, a: &Self::T, j: usize, col: &Self::T) -> Self::T;
    fn row(&mut self, a: &Self::T, i: usize) -> Self::T;
    fn row_norm(&mut self, a: &Self::T) -> Self::T;
}

impl Ops for Graph<'_> {
    type T = Var;

    fn param(&mut self, name: &str) -> Var {
        Graph::param(self, name)
    }
    fn constant(&mut self, value: Array2<f64>) -> Var {
        Graph::constant(self, value)
    }
    fn matmul(&mut self, a: &Var, b: &Var) -> Var {
        Graph::matmul(self, *a, *b)
    }
    fn add_row(&mut self, a: &Var, row: &Var) -> Var {
        Graph::add_row(self, *a, *row)
    }
    fn add(&mut self, a: &Var, b: &Var) -> Var {
        Graph::add(self, *a, *b)
    }
    fn sub(&mut self, a: &Var, b: &Var) -> Var {
        Graph::sub(self, *a, *b)
    }
    fn mul(&mut self, a: &Var, b: &Var) -> Var {
        Graph::mul(self, *a, *b)
    }
    fn exp(&mut self, a: &Var) -> Var {
        Graph::exp(self, *a)
    }
    fn neg(&mut self, a: &Var) -> Var {
        Graph::neg(self, *a)
    }
    fn relu(&mut self, a: &Var) -> Var {
        Graph::relu(self, *a)
    }
    fn hardtanh(&mut self, a: &Var, lo: f64, hi: f64) -> Var {
        Graph::hardtanh(self, *a, lo, hi)
    }
    fn add_scalar(&mut self, a: &Var, c: f64) -> Var {
        Graph::add_scalar(self, *a, c)
    }
    fn cols(&mut self, a: &Var, idx: &[usize]) -> Var {
        Graph::cols(self, *a, idx)
    }
    fn set_col(&mut self, a: &Var, j: usize, col: &Var) -> Var {
        Graph::set_col(self, *a, j, *col)
    }
    fn row(&mut self, a: &Var, i: usize) -> Var {
        Graph::slice_rows(self, *a, i..i + 1)
    }
    fn row_norm(&mut self, a: &Var) -> Var {
        Graph::row_norm(self, *a)
    }
}

/// Non-recording evaluator over shared arrays. Parameters are borrowed from
/// the store without copying.
pub struct Eager<'s> {
    store: &'s ParameterStore,
}

impl<'s> Eager<'s> {
    pub fn new(store: &'s ParameterStore) -> Self {
        Eager { store }
    }
}

impl Ops for Eager<'_> {
    type T = ArcArray2<f64>;

    fn param(&mut self, name: &str) -> Self::T {
        self.store
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter `{name}`"))
            .clone()
    }
    fn constant(&mut self, value: Array2<f64>) -> Self::T {
        value.into_shared()
    }
    fn matmul(&mut self, a: &Self::T, b: &Self::T) -> Self::T {
        a.dot(b).into_shared()
    }
    fn add_row(&mut self, a: &Self::T, row: &Self::T) -> Self::T {
        (a + row).into_shared()
    }
    fn add(&mut self, a: &Self::T, b: &Self::T) -> Self::T {
        (a + b).into_shared()
    }
    fn sub(&mut self, a: &Self::T, b: &Self::T) -> Self::T {
        (a - b).into_shared()
    }
    fn mul(&mut self, a: &Self::T, b: &Self::T) -> Self::T {
        (a * b).into_shared()
    }
    fn exp(&mut self, a: &Self::T) -> Self::T {
        a.mapv(f64::exp).into_shared()
    }
    fn neg(&mut self, a: &Self::T) -> Self::T {
        (a * -1.0).into_shared()
    }
    fn relu(&mut self, a: &Self::T) -> Self::T {
        a.mapv(|x| x.max(0.0)).into_shared()
    }
    fn hardtanh(&mut self, a: &Self::T, lo: f64, hi: f64) -> Self::T {
        a.mapv(|x| x.clamp(lo, hi)).into_shared()
    }
    fn add_scalar(&mut self, a: &Self::T, c: f64) -> Self::T {
        (a + c).into_shared()
    }
    fn cols(&mut self, a: &Self::T, idx: &[usize]) -> Self::T {
        a.select(Axis(1), idx).into_shared()
    }
    fn set_col(&mut self, a: &Self::T, j: usize, col: &Self::T) -> Self::T {
        let mut out = a.to_owned();
        out.column_mut(j).assign(&col.column(0));
        out.into_shared()
    }
    fn row(&mut self, a: &Self::T, i: usize) -> Self::T {
        a.slice(s![i..i + 1, ..]).to_owned().into_shared()
    }
    fn row_norm(&mut self, a: &Self::T) -> Self::T {
        a.map_axis(Axis(1), |r| r.dot(&r).sqrt())
            .insert_axis(Axis(1))
            .into_shared()
    }
}

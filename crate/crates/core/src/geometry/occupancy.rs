use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use super::{Aabb, InsideTester};
use crate::diffgraph::ParameterStore;
use crate::error::{Error, Result};
use crate::par::Exec;

/// Labelled points drawn uniformly from the sampling cube, precomputed once
/// per mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyPool {
    pub points: Array2<f64>,
    pub labels: Vec<bool>,
    inside: Vec<usize>,
    outside: Vec<usize>,
}

/// A balanced occupancy batch with importance weights that make weighted
/// means unbiased estimates of uniform-sampling means.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySet {
    pub points: Array2<f64>,
    pub labels: Vec<bool>,
    pub weights: Array1<f64>,
}

impl OccupancySet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows labelled inside, in batch order.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i]).collect()
    }

    /// Concatenation of two batches.
    pub fn concat(&self, other: &OccupancySet) -> OccupancySet {
        let points = ndarray::concatenate(Axis(0), &[self.points.view(), other.points.view()])
            .expect("both batches are n x 3");
        let labels = self.labels.iter().chain(&other.labels).copied().collect();
        let weights = ndarray::concatenate(Axis(0), &[self.weights.view(), other.weights.view()])
            .expect("1-d weights");
        OccupancySet {
            points,
            labels,
            weights,
        }
    }
}

impl OccupancyPool {
    /// Labels `size` uniform points of `bounds` against the mesh behind
    /// `tester`. Ray directions use `seed`; positions come from `rng`.
    pub fn build<R: Rng + ?Sized>(
        tester: &InsideTester,
        bounds: Aabb,
        size: usize,
        seed: u64,
        rng: &mut R,
        exec: Exec,
    ) -> Result<Self> {
        if size == 0 {
            return Err(Error::usage("occupancy pool size must be at least 1"));
        }
        let points = bounds.sample_uniform(size, rng);
        let labels = tester.contains_batch(&points, seed, exec);
        Self::from_parts(points, labels)
    }

    pub fn from_parts(points: Array2<f64>, labels: Vec<bool>) -> Result<Self> {
        assert_eq!(points.nrows(), labels.len());
        let inside: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
        let outside: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
        if inside.is_empty() {
            return Err(Error::data("mesh has no interior at this resolution"));
        }
        if outside.is_empty() {
            return Err(Error::data("mesh fills the whole sampling volume"));
        }
        Ok(OccupancyPool {
            points,
            labels,
            inside,
            outside,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inside_count(&self) -> usize {
        self.inside.len()
    }

    pub fn inside_fraction(&self) -> f64 {
        self.inside.len() as f64 / self.len() as f64
    }

    /// Importance weight `2 n_label / N` for a point with the given label.
    pub fn weight(&self, inside: bool) -> f64 {
        let n = if inside { self.inside.len() } else { self.outside.len() };
        2.0 * n as f64 / self.len() as f64
    }

    /// Draws `size / 2` inside and `size - size / 2` outside points, each
    /// with replacement, inside points first.
    pub fn sample_batch<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> OccupancySet {
        let n_in = size / 2;
        let mut idx = Vec::with_capacity(size);
        idx.extend((0..n_in).map(|_| self.inside[rng.random_range(0..self.inside.len())]));
        idx.extend((n_in..size).map(|_| self.outside[rng.random_range(0..self.outside.len())]));
        let points = self.points.select(Axis(0), &idx);
        let labels: Vec<bool> = idx.iter().map(|&i| self.labels[i]).collect();
        let weights = labels.iter().map(|&l| self.weight(l)).collect();
        OccupancySet {
            points,
            labels,
            weights,
        }
    }

    /// Writes `occupancy.json` + `occupancy.bin` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut store = ParameterStore::new();
        store.insert("points", self.points.clone())?;
        let labels = Array2::from_shape_fn((self.len(), 1), |(i, _)| self.labels[i] as u8 as f64);
        store.insert("labels", labels)?;
        store.save(dir, "occupancy")
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let store = ParameterStore::load(dir, "occupancy")?;
        let bad = || Error::parse(dir.join("occupancy.json"), "expected `points` (n x 3) and `labels` (n x 1)");
        let points = store.get("points").ok_or_else(bad)?;
        let labels = store.get("labels").ok_or_else(bad)?;
        if points.ncols() != 3 || labels.ncols() != 1 || labels.nrows() != points.nrows() {
            return Err(bad());
        }
        let labels = labels.iter().map(|&v| v != 0.0).collect();
        Self::from_parts(points.to_owned(), labels)
    }
}

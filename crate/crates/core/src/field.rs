//! Per-cell scalar fields and multi-species collections of them.

use std::ops::{Deref, DerefMut};

/// One scalar value per mesh cell, in the mesh's cell order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn zeros(n: usize) -> Self {
        Field(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Self {
        Field(vec![value; n])
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Self {
        Field((0..n).map(f).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self * a + other * b`, elementwise.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Field {
        Field(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> Field {
        Field(self.0.iter().map(|x| c * x).collect())
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Field(v)
    }
}

/// Concentrations of all species; `species[i]` is the field of species `i`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiField {
    pub species: Vec<Field>,
}

impl MultiField {
    pub fn zeros(species: usize, cells: usize) -> Self {
        MultiField {
            species: vec![Field::zeros(cells); species],
        }
    }

    pub fn new(species: Vec<Field>) -> Self {
        MultiField { species }
    }

    pub fn species_count(&self) -> usize {
        self.species.len()
    }

    pub fn cell_count(&self) -> usize {
        self.species.first().map_or(0, |f| f.len())
    }

    /// Gathers the state vector `(u_1, ..., u_m)` of one cell into `out`.
    pub fn gather(&self, cell: usize, out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.species) {
            *o = f[cell];
        }
    }

    pub fn min(&self) -> f64 {
        self.species.iter().map(Field::min).fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.species.iter().all(Field::is_finite)
    }

    /// Cellwise sum over species, each weighted by `weights[i]`.
    pub fn weighted_sum(&self, weights: &[f64]) -> Field {
        let mut out = Field::zeros(self.cell_count());
        for (f, w) in self.species.iter().zip(weights) {
            for (o, v) in out.iter_mut().zip(f.iter()) {
                *o += w * v;
            }
        }
        out
    }
}

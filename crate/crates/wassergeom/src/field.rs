//! Per-node fields tied to a grid: scalars, contravariant vectors,
//! covariant 1-forms and covariant rank-2 tensors.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;

fn check_values(grid: &Grid, values: &[f64]) -> Result<()> {
    if values.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch { got: values.len(), expected: grid.n_nodes() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        check_values(&grid, &values)?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.n_nodes();
        Self { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let n = grid.n_nodes();
        Self { grid, values: vec![c; n] }
    }

    /// Sample a closure of the node coordinates.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.n_nodes())
            .map(|node| {
                let [x, y] = grid.coord(node);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn shift(&self, c: f64) -> Self {
        self.map(|v| v + c)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Contravariant vector field, component-major storage.
#[derive(Clone)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

/// Covariant 1-form, component-major storage.
#[derive(Clone)]
pub struct OneForm {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

/// Covariant rank-2 tensor; component (i, j) lives at `i * dim + j`.
#[derive(Clone)]
pub struct TensorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

macro_rules! impl_multi_component {
    ($ty:ident, $rank_components:expr) => {
        impl $ty {
            pub fn new(grid: Arc<Grid>, components: Vec<Vec<f64>>) -> Result<Self> {
                let expected = $rank_components(grid.dim());
                if components.len() != expected {
                    return Err(Error::ShapeMismatch {
                        got: components.len(),
                        expected,
                    });
                }
                for c in &components {
                    check_values(&grid, c)?;
                }
                Ok(Self { grid, components })
            }

            pub fn zeros(grid: Arc<Grid>) -> Self {
                let n = grid.n_nodes();
                let count = $rank_components(grid.dim());
                Self { grid, components: vec![vec![0.0; n]; count] }
            }

            pub fn grid(&self) -> &Arc<Grid> {
                &self.grid
            }

            pub fn component(&self, idx: usize) -> &[f64] {
                &self.components[idx]
            }

            pub fn components(&self) -> &[Vec<f64>] {
                &self.components
            }

            pub fn scale(&self, s: f64) -> Self {
                Self {
                    grid: self.grid.clone(),
                    components: self
                        .components
                        .iter()
                        .map(|c| c.iter().map(|&v| v * s).collect())
                        .collect(),
                }
            }

            pub fn add(&self, other: &Self) -> Result<Self> {
                if !self.grid.same_as(&other.grid) {
                    return Err(Error::GridMismatch);
                }
                let components = self
                    .components
                    .iter()
                    .zip(&other.components)
                    .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x + y).collect())
                    .collect();
                Ok(Self { grid: self.grid.clone(), components })
            }

            pub fn sub(&self, other: &Self) -> Result<Self> {
                self.add(&other.scale(-1.0))
            }

            pub fn max_abs(&self) -> f64 {
                self.components
                    .iter()
                    .flat_map(|c| c.iter())
                    .fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    };
}

impl_multi_component!(VectorField, |d: usize| d);
impl_multi_component!(OneForm, |d: usize| d);
impl_multi_component!(TensorField, |d: usize| d * d);

impl TensorField {
    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.components[i * self.grid.dim() + j]
    }
}

/// Shared-grid guard for binary operations.
pub fn require_same_grid(a: &Grid, b: &Grid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

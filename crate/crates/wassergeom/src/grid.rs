//! Discretized base manifolds: node coordinates, metric data, quadrature
//! weights and Christoffel symbols on uniform periodic grids.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::{ManifoldKind, ManifoldSpec};
use crate::spectral::{DiffScheme, SpectralEngine};

/// A discretized manifold. Immutable after construction; all per-node data
/// is stored node-major so operators can stream over it.
pub struct Grid {
    spec: ManifoldSpec,
    shape: Vec<usize>,
    steps: Vec<f64>,
    /// Node coordinates, `dim` entries per node.
    coords: Vec<f64>,
    /// Metric components g_ij, `dim*dim` entries per node.
    metric: Vec<f64>,
    /// Inverse metric g^ij, `dim*dim` entries per node.
    metric_inv: Vec<f64>,
    /// sqrt(det g) per node.
    sqrt_det: Vec<f64>,
    /// Quadrature weight sqrt(det g) * cell volume per node.
    weights: Vec<f64>,
    /// Christoffel symbols, `dim^3` entries per node, Gamma^k_ij at
    /// `(k*dim + i)*dim + j`. Identically zero on flat manifolds.
    christoffel: Vec<f64>,
    /// Gaussian curvature per node (zero on flat manifolds and on the
    /// circle, where no 2-plane exists).
    gauss: Vec<f64>,
    scheme: DiffScheme,
    engine: SpectralEngine,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("spec", &self.spec)
            .field("shape", &self.shape)
            .field("scheme", &self.scheme)
            .finish()
    }
}

/// Build a grid with the default spectral differentiation scheme.
pub fn build_grid(spec: &ManifoldSpec, resolution: &[usize]) -> Result<Arc<Grid>> {
    build_grid_with_scheme(spec, resolution, DiffScheme::Spectral)
}

pub fn build_grid_with_scheme(
    spec: &ManifoldSpec,
    resolution: &[usize],
    scheme: DiffScheme,
) -> Result<Arc<Grid>> {
    spec.validate()?;
    let dim = spec.dim();
    if resolution.len() != dim {
        return Err(Error::InvalidSpec(format!(
            "expected {dim} resolution entries, got {}",
            resolution.len()
        )));
    }
    if resolution.iter().any(|&n| n < 8) {
        return Err(Error::InvalidSpec("resolution must be at least 8 per axis".into()));
    }

    let shape: Vec<usize> = resolution.to_vec();
    let steps: Vec<f64> =
        spec.periods.iter().zip(&shape).map(|(&p, &n)| p / n as f64).collect();
    let n_nodes: usize = shape.iter().product();
    let cell: f64 = steps.iter().product();

    let mut coords = vec![0.0; n_nodes * dim];
    let mut metric = vec![0.0; n_nodes * dim * dim];
    let mut metric_inv = vec![0.0; n_nodes * dim * dim];
    let mut sqrt_det = vec![0.0; n_nodes];
    let mut weights = vec![0.0; n_nodes];
    let mut christoffel = vec![0.0; n_nodes * dim * dim * dim];
    let mut gauss = vec![0.0; n_nodes];

    for node in 0..n_nodes {
        let (ix, iy) = if dim == 2 { (node / shape[1], node % shape[1]) } else { (node, 0) };
        let x = ix as f64 * steps[0];
        let y = if dim == 2 { iy as f64 * steps[1] } else { 0.0 };
        coords[node * dim] = x;
        if dim == 2 {
            coords[node * dim + 1] = y;
        }

        let conformal = 2.0 * spec.u(x, y);
        if !conformal.is_finite() {
            return Err(Error::InvalidSpec("conformal factor is not finite".into()));
        }
        let lambda = conformal.exp();
        for i in 0..dim {
            metric[(node * dim + i) * dim + i] = lambda;
            metric_inv[(node * dim + i) * dim + i] = 1.0 / lambda;
        }
        sqrt_det[node] = lambda.powf(dim as f64 / 2.0);
        weights[node] = sqrt_det[node] * cell;

        if spec.kind == ManifoldKind::ConformalTorus2d {
            // g = exp(2u) * g_flat:
            //   Gamma^1 = [[u_x, u_y], [u_y, -u_x]],
            //   Gamma^2 = [[-u_y, u_x], [u_x, u_y]].
            let du = spec.du(x, y);
            let base = node * dim * dim * dim;
            let idx = |k: usize, i: usize, j: usize| base + (k * dim + i) * dim + j;
            christoffel[idx(0, 0, 0)] = du[0];
            christoffel[idx(0, 0, 1)] = du[1];
            christoffel[idx(0, 1, 0)] = du[1];
            christoffel[idx(0, 1, 1)] = -du[0];
            christoffel[idx(1, 0, 0)] = -du[1];
            christoffel[idx(1, 0, 1)] = du[0];
            christoffel[idx(1, 1, 0)] = du[0];
            christoffel[idx(1, 1, 1)] = du[1];
            // K = -exp(-2u) * Lap_flat u
            gauss[node] = -(-conformal).exp() * spec.laplacian_u(x, y);
        }
    }

    let engine = SpectralEngine::new(&shape, &spec.periods);
    Ok(Arc::new(Grid {
        spec: spec.clone(),
        shape,
        steps,
        coords,
        metric,
        metric_inv,
        sqrt_det,
        weights,
        christoffel,
        gauss,
        scheme,
        engine,
    }))
}

impl Grid {
    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn n_nodes(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn scheme(&self) -> DiffScheme {
        self.scheme
    }

    pub fn engine(&self) -> &SpectralEngine {
        &self.engine
    }

    pub fn is_flat(&self) -> bool {
        self.spec.is_flat()
    }

    /// Coordinates of a node; y is 0 on the circle.
    pub fn coord(&self, node: usize) -> [f64; 2] {
        let dim = self.dim();
        let x = self.coords[node * dim];
        let y = if dim == 2 { self.coords[node * dim + 1] } else { 0.0 };
        [x, y]
    }

    pub fn weight(&self, node: usize) -> f64 {
        self.weights[node]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sqrt_det(&self, node: usize) -> f64 {
        self.sqrt_det[node]
    }

    pub fn metric(&self, node: usize, i: usize, j: usize) -> f64 {
        let d = self.dim();
        self.metric[(node * d + i) * d + j]
    }

    pub fn metric_inv(&self, node: usize, i: usize, j: usize) -> f64 {
        let d = self.dim();
        self.metric_inv[(node * d + i) * d + j]
    }

    pub fn christoffel(&self, node: usize, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim();
        self.christoffel[node * d * d * d + (k * d + i) * d + j]
    }

    pub fn gauss_curvature_at(&self, node: usize) -> f64 {
        self.gauss[node]
    }

    /// Total Riemannian volume; the quadrature weights sum to this exactly.
    pub fn total_volume(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Exact periodic geodesic distance between two nodes; flat bases only.
    pub fn flat_distance(&self, a: usize, b: usize) -> Result<f64> {
        if !self.is_flat() {
            return Err(Error::Unsupported(
                "geodesic distance is only available on flat bases".into(),
            ));
        }
        let pa = self.coord(a);
        let pb = self.coord(b);
        let mut d2 = 0.0;
        for axis in 0..self.dim() {
            let period = self.spec.periods[axis];
            let mut delta = (pa[axis] - pb[axis]).abs() % period;
            if delta > period / 2.0 {
                delta = period - delta;
            }
            d2 += delta * delta;
        }
        Ok(d2.sqrt())
    }

    /// Structural equality check used by every binary operation.
    pub fn same_as(&self, other: &Grid) -> bool {
        std::ptr::eq(self, other) || (self.spec == other.spec && self.shape == other.shape)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Harmonic;
    use std::f64::consts::TAU;

    #[test]
    fn circle_grid_has_uniform_weights_and_flat_metric() {
        let grid = build_grid(&ManifoldSpec::circle(TAU), &[64]).unwrap();
        for node in 0..64 {
            assert!((grid.weight(node) - TAU / 64.0).abs() < 1e-15);
            assert_eq!(grid.metric(node, 0, 0), 1.0);
            assert_eq!(grid.christoffel(node, 0, 0, 0), 0.0);
        }
        assert!((grid.total_volume() - TAU).abs() < 1e-12);
    }

    #[test]
    fn flat_torus_volume() {
        let grid = build_grid(&ManifoldSpec::flat_torus(TAU, TAU), &[32, 32]).unwrap();
        let w = TAU / 32.0;
        assert!((grid.weight(17) - w * w).abs() < 1e-15);
        assert!((grid.total_volume() - TAU * TAU).abs() < 1e-10);
    }

    #[test]
    fn conformal_torus_christoffels_match_analytic_factor() {
        let spec = ManifoldSpec::conformal_torus(
            TAU,
            TAU,
            vec![Harmonic { amplitude: 0.3, kx: 1, ky: 0, phase: 0.0 }],
        );
        let grid = build_grid(&spec, &[16, 16]).unwrap();
        for node in [0, 5, 77, 130, 255] {
            let [x, _] = grid.coord(node);
            // u = 0.3 cos x: Gamma^1_11 = u_x = -0.3 sin x
            assert!((grid.christoffel(node, 0, 0, 0) + 0.3 * x.sin()).abs() < 1e-14);
            // K = -exp(-2u) * u_xx = 0.3 cos x * exp(-0.6 cos x)
            let expect = 0.3 * x.cos() * (-0.6 * x.cos()).exp();
            assert!((grid.gauss_curvature_at(node) - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_small_resolution() {
        assert!(build_grid(&ManifoldSpec::circle(TAU), &[4]).is_err());
    }

    #[test]
    fn flat_distance_wraps() {
        let grid = build_grid(&ManifoldSpec::circle(TAU), &[8]).unwrap();
        // nodes 0 and 7 are one spacing apart across the seam
        let d = grid.flat_distance(0, 7).unwrap();
        assert!((d - TAU / 8.0).abs() < 1e-14);
    }
}

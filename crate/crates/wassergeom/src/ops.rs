//! Covariant differential operators on grid fields.
//!
//! The discrete divergence is the exact negative adjoint of the discrete
//! gradient under the quadrature inner product: both are built from the same
//! antisymmetric spectral derivative and share the metric volume factors.

use crate::error::Result;
use crate::field::{require_same_grid, OneForm, ScalarField, TensorField, VectorField};
use crate::grid::Grid;

/// Quadrature integral of a scalar field over the manifold.
pub fn integrate(field: &ScalarField) -> f64 {
    integrate_values(field.grid(), field.values())
}

pub fn integrate_values(grid: &Grid, values: &[f64]) -> f64 {
    values.iter().zip(grid.weights()).map(|(&v, &w)| v * w).sum()
}

/// Exterior derivative: covariant components are plain coordinate partials.
pub fn differential(field: &ScalarField) -> OneForm {
    let grid = field.grid();
    let components = (0..grid.dim())
        .map(|axis| grid.engine().partial(field.values(), axis, grid.scheme()))
        .collect();
    OneForm::new(grid.clone(), components).expect("partials preserve shape")
}

/// Contravariant gradient: metric-raised partials, grad^i = g^ij d_j f.
pub fn gradient(field: &ScalarField) -> VectorField {
    raise(&differential(field))
}

/// Raise a 1-form index with the inverse metric.
pub fn raise(form: &OneForm) -> VectorField {
    let grid = form.grid();
    let d = grid.dim();
    let n = grid.n_nodes();
    let mut components = vec![vec![0.0; n]; d];
    for node in 0..n {
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += grid.metric_inv(node, i, j) * form.component(j)[node];
            }
            components[i][node] = acc;
        }
    }
    VectorField::new(grid.clone(), components).expect("raising preserves shape")
}

/// Lower a vector index with the metric.
pub fn lower(vector: &VectorField) -> OneForm {
    let grid = vector.grid();
    let d = grid.dim();
    let n = grid.n_nodes();
    let mut components = vec![vec![0.0; n]; d];
    for node in 0..n {
        for i in 0..d {
            let mut acc = 0.0;
            for j in 0..d {
                acc += grid.metric(node, i, j) * vector.component(j)[node];
            }
            components[i][node] = acc;
        }
    }
    OneForm::new(grid.clone(), components).expect("lowering preserves shape")
}

/// Riemannian divergence (1/sqrt g) d_i (sqrt g X^i).
pub fn divergence(vector: &VectorField) -> ScalarField {
    let grid = vector.grid();
    let n = grid.n_nodes();
    let mut out = vec![0.0; n];
    for axis in 0..grid.dim() {
        let weighted: Vec<f64> = (0..n)
            .map(|node| grid.sqrt_det(node) * vector.component(axis)[node])
            .collect();
        let d = grid.engine().partial(&weighted, axis, grid.scheme());
        for node in 0..n {
            out[node] += d[node];
        }
    }
    for node in 0..n {
        out[node] /= grid.sqrt_det(node);
    }
    ScalarField::new(grid.clone(), out).expect("divergence preserves shape")
}

/// Covariant Hessian H_ij = d_i d_j f - Gamma^k_ij d_k f.
pub fn covariant_hessian(field: &ScalarField) -> TensorField {
    let grid = field.grid();
    let d = grid.dim();
    let n = grid.n_nodes();
    let partials: Vec<Vec<f64>> =
        (0..d).map(|axis| grid.engine().partial(field.values(), axis, grid.scheme())).collect();
    let mut components = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let mut entry = grid.engine().second_partial(field.values(), i, j, grid.scheme());
            if !grid.is_flat() {
                for node in 0..n {
                    for k in 0..d {
                        entry[node] -= grid.christoffel(node, k, i, j) * partials[k][node];
                    }
                }
            }
            components.push(entry);
        }
    }
    TensorField::new(grid.clone(), components).expect("hessian preserves shape")
}

/// Gaussian curvature of the base as a scalar field; identically zero on
/// flat bases and on the circle.
pub fn gauss_curvature(grid: &std::sync::Arc<Grid>) -> ScalarField {
    let values = (0..grid.n_nodes()).map(|node| grid.gauss_curvature_at(node)).collect();
    ScalarField::new(grid.clone(), values).expect("curvature preserves shape")
}

/// Laplace-Beltrami operator div(grad f).
pub fn laplace_beltrami(field: &ScalarField) -> ScalarField {
    divergence(&gradient(field))
}

/// Pointwise metric inner product of two vector fields, g_ij X^i Y^j.
pub fn vector_inner(a: &VectorField, b: &VectorField) -> Result<ScalarField> {
    require_same_grid(a.grid(), b.grid())?;
    let grid = a.grid();
    let d = grid.dim();
    let n = grid.n_nodes();
    let mut out = vec![0.0; n];
    for node in 0..n {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += grid.metric(node, i, j) * a.component(i)[node] * b.component(j)[node];
            }
        }
        out[node] = acc;
    }
    ScalarField::new(grid.clone(), out)
}

/// Pointwise inner product of two 1-forms, g^ij a_i b_j.
pub fn form_inner(a: &OneForm, b: &OneForm) -> Result<ScalarField> {
    require_same_grid(a.grid(), b.grid())?;
    let grid = a.grid();
    let d = grid.dim();
    let n = grid.n_nodes();
    let mut out = vec![0.0; n];
    for node in 0..n {
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += grid.metric_inv(node, i, j) * a.component(i)[node] * b.component(j)[node];
            }
        }
        out[node] = acc;
    }
    ScalarField::new(grid.clone(), out)
}

/// Contract a covariant rank-2 tensor with a vector in its second slot:
/// beta_i = H_ij X^j.
pub fn tensor_vector(h: &TensorField, x: &VectorField) -> Result<OneForm> {
    require_same_grid(h.grid(), x.grid())?;
    let grid = h.grid();
    let d = grid.dim();
    let n = grid.n_nodes();
    let mut components = vec![vec![0.0; n]; d];
    for i in 0..d {
        for j in 0..d {
            let entry = h.entry(i, j);
            let xj = x.component(j);
            for node in 0..n {
                components[i][node] += entry[node] * xj[node];
            }
        }
    }
    OneForm::new(grid.clone(), components)
}

/// Fully contract a covariant rank-2 tensor with two vectors: H(X, Y).
pub fn tensor_bilinear(h: &TensorField, x: &VectorField, y: &VectorField) -> Result<ScalarField> {
    require_same_grid(h.grid(), x.grid())?;
    require_same_grid(h.grid(), y.grid())?;
    let grid = h.grid();
    let d = grid.dim();
    let n = grid.n_nodes();
    let mut out = vec![0.0; n];
    for i in 0..d {
        for j in 0..d {
            let entry = h.entry(i, j);
            let xi = x.component(i);
            let yj = y.component(j);
            for node in 0..n {
                out[node] += entry[node] * xi[node] * yj[node];
            }
        }
    }
    ScalarField::new(grid.clone(), out)
}

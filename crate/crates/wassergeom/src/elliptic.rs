//! Density-weighted elliptic solvers.
//!
//! The Green's operator inverts `phi -> -(1/rho) div(rho grad phi)` on
//! weighted-mean-zero data, and the projection sends a 1-form to the exact
//! form closest to it in the density-weighted L2 norm. Both reduce to one
//! preconditioned conjugate-gradient solve of the quadrature-symmetrized
//! operator; the kernel (constants) is handled by deflating the right-hand
//! side and fixing the gauge afterwards.

use crate::density::{coordinate_functional, density_variation, Density, Potential};
use crate::error::{Error, Result};
use crate::field::{require_same_grid, OneForm, ScalarField};
use crate::ops::{divergence, integrate, raise};

/// Conjugate-gradient controls. The defaults are deliberately tight: the
/// curvature pipeline asserts node-level identities at 1e-9 and the extra
/// iterations are cheap at these grid sizes.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Relative Euclidean residual target for the symmetrized system.
    pub rel_tol: f64,
    /// Iteration cap as a multiple of the node count.
    pub max_iter_factor: usize,
    /// Acceptance threshold for the final PDE residual in the
    /// density-weighted norm.
    pub residual_tol: f64,
    /// Solvability threshold on the weighted mean of the data.
    pub solvability_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-12, max_iter_factor: 10, residual_tol: 1e-9, solvability_tol: 1e-8 }
    }
}

/// Apply `phi -> -div(rho grad phi)`.
fn weighted_laplacian(rho: &Density, phi: &ScalarField) -> Result<ScalarField> {
    density_variation(rho.field(), phi)
}

/// Solve `-(1/rho) div(rho grad phi) = f` for the gauged potential.
///
/// Requires `int f rho dvol = 0` up to the solvability tolerance. The
/// returned potential satisfies the equation with a density-weighted
/// residual below `residual_tol` and carries the `int phi rho = 0` gauge.
pub fn solve_green(rho: &Density, f: &ScalarField, opts: &SolverOptions) -> Result<Potential> {
    require_same_grid(rho.grid(), f.grid())?;
    let grid = rho.grid().clone();
    let n = grid.n_nodes();

    let weighted_mean = coordinate_functional(rho, f)?;
    let scale = 1.0 + rho.weighted_norm(f)?;
    if weighted_mean.abs() > opts.solvability_tol * scale {
        return Err(Error::NotSolvable(weighted_mean));
    }

    // b = rho * f, deflated to exact quadrature-mean zero.
    let mut b = f.mul(rho.field())?;
    let defect = integrate(&b) / grid.total_volume();
    b = b.shift(-defect);

    // Symmetrized right-hand side W b.
    let bt: Vec<f64> = b.values().iter().zip(grid.weights()).map(|(&v, &w)| v * w).collect();
    let b_norm = l2(&bt);
    if b_norm == 0.0 {
        return Potential::new(rho, ScalarField::zeros(grid));
    }

    let apply = |x: &[f64]| -> Result<Vec<f64>> {
        let xs = ScalarField::new(grid.clone(), x.to_vec())?;
        let ax = weighted_laplacian(rho, &xs)?;
        Ok(ax.values().iter().zip(grid.weights()).map(|(&v, &w)| v * w).collect())
    };
    let precondition = |r: &[f64]| -> Vec<f64> { grid.engine().inverse_flat_laplacian(r) };

    let mut x = vec![0.0; n];
    let mut r = bt.clone();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let max_iters = opts.max_iter_factor * n;
    let mut converged = false;
    for _ in 0..max_iters {
        let q = apply(&p)?;
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            break;
        }
        let alpha = rz / pq;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        if l2(&r) <= opts.rel_tol * b_norm {
            converged = true;
            break;
        }
        z = precondition(&r);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let phi = ScalarField::new(grid.clone(), x)?;
    // True PDE residual in the density-weighted norm.
    let lap = weighted_laplacian(rho, &phi)?;
    let resid = ScalarField::new(
        grid.clone(),
        lap.values()
            .iter()
            .zip(rho.values())
            .zip(b.values())
            .map(|((&a, &rv), &bv)| a / rv - bv / rv)
            .collect(),
    )?;
    let pde_residual = rho.weighted_norm(&resid)?;
    if pde_residual > opts.residual_tol * scale {
        return Err(Error::NoConvergence {
            residual: pde_residual,
            iterations: if converged { 0 } else { max_iters },
        });
    }
    Potential::new(rho, phi)
}

/// Density-weighted codifferential of a 1-form:
/// `-(1/rho) div(rho alpha^sharp)`, the exact adjoint of the differential
/// under the quadrature rho-weighted inner product.
pub fn weighted_codifferential(rho: &Density, alpha: &OneForm) -> Result<ScalarField> {
    require_same_grid(rho.grid(), alpha.grid())?;
    let grid = rho.grid();
    let sharp = raise(alpha);
    let flux = crate::field::VectorField::new(
        grid.clone(),
        (0..grid.dim())
            .map(|axis| {
                sharp.component(axis).iter().zip(rho.values()).map(|(&v, &r)| v * r).collect()
            })
            .collect(),
    )?;
    let div = divergence(&flux);
    ScalarField::new(
        grid.clone(),
        div.values().iter().zip(rho.values()).map(|(&d, &r)| -d / r).collect(),
    )
}

/// Orthogonal projection of a 1-form onto exact forms in the rho-weighted
/// L2 geometry, returned through its potential: `d phi` is the projection.
pub fn project_exact(rho: &Density, alpha: &OneForm, opts: &SolverOptions) -> Result<Potential> {
    let rhs = weighted_codifferential(rho, alpha)?;
    solve_green(rho, &rhs, opts)
}

/// Rho-weighted L2 inner product of two 1-forms.
pub fn form_weighted_inner(rho: &Density, a: &OneForm, b: &OneForm) -> Result<f64> {
    require_same_grid(rho.grid(), a.grid())?;
    let pointwise = crate::ops::form_inner(a, b)?;
    Ok(integrate(&pointwise.mul(rho.field())?))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::grid::build_grid;
    use crate::manifold::{Harmonic, ManifoldSpec};
    use crate::ops::differential;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn circle(n: usize) -> Arc<crate::grid::Grid> {
        build_grid(&ManifoldSpec::circle(TAU), &[n]).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_potential() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.4 * x.cos()).unwrap();
        let phi = solve_green(&rho, &ScalarField::zeros(grid), &SolverOptions::default()).unwrap();
        assert!(phi.field().max_abs() < 1e-14);
    }

    #[test]
    fn uniform_density_sine_solves_exactly() {
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let f = ScalarField::from_fn(grid.clone(), |x, _| x.sin());
        let phi = solve_green(&rho, &f, &SolverOptions::default()).unwrap();
        for node in 0..64 {
            let [x, _] = grid.coord(node);
            assert!((phi.values()[node] - x.sin()).abs() < 1e-10);
        }
    }

    #[test]
    fn non_solvable_rhs_is_rejected() {
        let grid = circle(32);
        let rho = Density::uniform(grid.clone());
        let f = ScalarField::constant(grid, 1.0);
        assert!(matches!(
            solve_green(&rho, &f, &SolverOptions::default()),
            Err(Error::NotSolvable(_))
        ));
    }

    #[test]
    fn green_round_trip_on_conformal_torus() {
        let spec = ManifoldSpec::conformal_torus(
            TAU,
            TAU,
            vec![Harmonic { amplitude: 0.3, kx: 1, ky: 0, phase: 0.0 }],
        );
        let grid = build_grid(&spec, &[24, 24]).unwrap();
        let rho =
            Density::from_fn(grid.clone(), |x, y| 1.0 + 0.3 * x.cos() * (2.0 * y).sin()).unwrap();
        let psi = ScalarField::from_fn(grid.clone(), |x, y| (x + y).sin() + 0.5 * (2.0 * x).cos());
        let lap = density_variation(rho.field(), &psi).unwrap();
        let f = ScalarField::new(
            grid.clone(),
            lap.values().iter().zip(rho.values()).map(|(&l, &r)| l / r).collect(),
        )
        .unwrap();
        let back = solve_green(&rho, &f, &SolverOptions::default()).unwrap();
        // compare modulo constants
        let gauged = Potential::new(&rho, psi).unwrap();
        assert!(back.field().sub(gauged.field()).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn projection_fixes_exact_forms() {
        let grid = circle(48);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.5 * (2.0 * x).cos()).unwrap();
        let psi = ScalarField::from_fn(grid.clone(), |x, _| x.sin() + 0.2 * (3.0 * x).cos());
        let alpha = differential(&psi);
        let phi = project_exact(&rho, &alpha, &SolverOptions::default()).unwrap();
        let gauged = Potential::new(&rho, psi).unwrap();
        assert!(phi.field().sub(gauged.field()).unwrap().max_abs() < 1e-9);
    }

    #[test]
    fn harmonic_form_projects_to_zero_under_uniform_density() {
        let grid = circle(48);
        let rho = Density::uniform(grid.clone());
        let alpha = OneForm::new(grid.clone(), vec![vec![1.0; 48]]).unwrap();
        let phi = project_exact(&rho, &alpha, &SolverOptions::default()).unwrap();
        assert!(phi.field().max_abs() < 1e-12);
    }

    #[test]
    fn projection_residual_is_orthogonal_to_exact_forms() {
        let grid = circle(64);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.4 * x.sin()).unwrap();
        let alpha = OneForm::new(
            grid.clone(),
            vec![(0..64).map(|i| (2.0 * grid.coord(i)[0]).cos() + 0.7).collect()],
        )
        .unwrap();
        let phi = project_exact(&rho, &alpha, &SolverOptions::default()).unwrap();
        let residual = alpha.sub(&differential(phi.field())).unwrap();
        for k in 1..5 {
            let psi = ScalarField::from_fn(grid.clone(), |x, _| (k as f64 * x).sin());
            let dpsi = differential(&psi);
            let ip = form_weighted_inner(&rho, &residual, &dpsi).unwrap();
            assert!(ip.abs() < 1e-9, "residual not orthogonal: {ip}");
        }
    }

    #[test]
    fn projection_is_idempotent() {
        let grid = circle(48);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.1 + 0.4 * (2.0 * x).sin()).unwrap();
        let alpha = OneForm::new(
            grid.clone(),
            vec![(0..48).map(|i| grid.coord(i)[0].cos().powi(2)).collect()],
        )
        .unwrap();
        let once = project_exact(&rho, &alpha, &SolverOptions::default()).unwrap();
        let twice =
            project_exact(&rho, &differential(once.field()), &SolverOptions::default()).unwrap();
        assert!(once.field().sub(twice.field()).unwrap().max_abs() < 1e-9);
    }
}

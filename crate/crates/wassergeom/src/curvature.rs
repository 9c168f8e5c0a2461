//! Curvature of the density manifold.
//!
//! The non-exact remainder of `(Hess phi')(grad phi, .)` carries all the
//! curvature the base does not: its weighted pairings assemble the full
//! quadriform, and sectional curvature of an orthonormalized plane is the
//! base-curvature integral plus three times the squared remainder norm.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::connection::hessian_contraction;
use crate::density::{otto_inner, Density, Potential};
use crate::elliptic::{form_weighted_inner, project_exact, SolverOptions};
use crate::error::{Error, Result};
use crate::field::{OneForm, ScalarField};
use crate::grid::Grid;
use crate::ops::{differential, gradient, integrate, vector_inner};
use crate::sample::{default_mode_cap, random_density, random_potential};

/// The non-exact part of `(Hess phi')(grad phi, .)` at an anchor density.
pub struct TTensor {
    form: OneForm,
    anchor: Density,
}

impl TTensor {
    pub fn form(&self) -> &OneForm {
        &self.form
    }

    pub fn anchor(&self) -> &Density {
        &self.anchor
    }

    /// Weighted pairing with another remainder at the same anchor.
    pub fn pair(&self, other: &TTensor) -> Result<f64> {
        form_weighted_inner(&self.anchor, &self.form, &other.form)
    }

    pub fn norm_sq(&self) -> Result<f64> {
        self.pair(self)
    }
}

/// Compute the T-tensor `(I - projection)((Hess phi')(grad phi, .))`.
pub fn t_tensor(
    rho: &Density,
    phi: &Potential,
    phi_prime: &Potential,
    opts: &SolverOptions,
) -> Result<TTensor> {
    let alpha = hessian_contraction(phi.field(), phi_prime.field())?;
    let exact_part = project_exact(rho, &alpha, opts)?;
    let form = alpha.sub(&differential(exact_part.field()))?;
    Ok(TTensor { form, anchor: rho.clone() })
}

/// Pointwise base-curvature pairing
/// `K * (<Y,Z><X,W> - <X,Z><Y,W>)` for gradients of the four potentials;
/// identically zero in one dimension, where gradients are collinear.
fn base_curvature_integrand(
    grid: &Grid,
    phi1: &ScalarField,
    phi2: &ScalarField,
    phi3: &ScalarField,
    phi4: &ScalarField,
) -> Result<ScalarField> {
    let g1 = gradient(phi1);
    let g2 = gradient(phi2);
    let g3 = gradient(phi3);
    let g4 = gradient(phi4);
    let yz = vector_inner(&g2, &g3)?;
    let xw = vector_inner(&g1, &g4)?;
    let xz = vector_inner(&g1, &g3)?;
    let yw = vector_inner(&g2, &g4)?;
    let mut values = Vec::with_capacity(grid.n_nodes());
    for node in 0..grid.n_nodes() {
        let k = grid.gauss_curvature_at(node);
        values.push(
            k * (yz.values()[node] * xw.values()[node] - xz.values()[node] * yw.values()[node]),
        );
    }
    ScalarField::new(phi1.grid().clone(), values)
}

/// Full curvature quadriform `<R(V1, V2) V3, V4>` at the density:
/// the base-curvature integral corrected by the three T-tensor pairings.
pub fn curvature_quadform(
    rho: &Density,
    phi1: &Potential,
    phi2: &Potential,
    phi3: &Potential,
    phi4: &Potential,
    opts: &SolverOptions,
) -> Result<f64> {
    let grid = rho.grid();
    let base = if grid.dim() == 2 && !grid.is_flat() {
        let integrand =
            base_curvature_integrand(grid, phi1.field(), phi2.field(), phi3.field(), phi4.field())?;
        integrate(&integrand.mul(rho.field())?)
    } else {
        0.0
    };
    let t12 = t_tensor(rho, phi1, phi2, opts)?;
    let t34 = t_tensor(rho, phi3, phi4, opts)?;
    let t23 = t_tensor(rho, phi2, phi3, opts)?;
    let t14 = t_tensor(rho, phi1, phi4, opts)?;
    let t13 = t_tensor(rho, phi1, phi3, opts)?;
    let t24 = t_tensor(rho, phi2, phi4, opts)?;
    Ok(base - 2.0 * t12.pair(&t34)? + t23.pair(&t14)? - t13.pair(&t24)?)
}

/// Sectional curvature value split into its reportable parts.
#[derive(Debug, Clone, Copy)]
pub struct SectionalBreakdown {
    /// Integral of the base curvature against the pointwise Gram mass.
    pub base_term: f64,
    /// Gram mass integral of the orthonormalized pair (no curvature weight).
    pub gram_mass: f64,
    /// Three times the squared T-tensor norm.
    pub t_term: f64,
}

impl SectionalBreakdown {
    pub fn value(&self) -> f64 {
        self.base_term + self.t_term
    }
}

/// Orthonormalize the pair in the Otto metric at `rho`; rejects planes whose
/// Otto Gram determinant is below 1e-10.
fn orthonormalize(
    rho: &Density,
    phi1: &Potential,
    phi2: &Potential,
) -> Result<(Potential, Potential)> {
    let g11 = otto_inner(rho, phi1, phi1)?;
    let g12 = otto_inner(rho, phi1, phi2)?;
    let g22 = otto_inner(rho, phi2, phi2)?;
    let det = g11 * g22 - g12 * g12;
    if det < 1e-10 {
        return Err(Error::DegeneratePlane(det));
    }
    let e1 = Potential::new(rho, phi1.field().scale(1.0 / g11.sqrt()))?;
    let c = otto_inner(rho, phi2, &e1)?;
    let raw2 = phi2.field().sub(&e1.field().scale(c))?;
    let n2 = otto_inner(rho, &Potential::new(rho, raw2.clone())?, &Potential::new(rho, raw2.clone())?)?;
    let e2 = Potential::new(rho, raw2.scale(1.0 / n2.sqrt()))?;
    Ok((e1, e2))
}

pub fn sectional_breakdown(
    rho: &Density,
    phi1: &Potential,
    phi2: &Potential,
    opts: &SolverOptions,
) -> Result<SectionalBreakdown> {
    let (e1, e2) = orthonormalize(rho, phi1, phi2)?;
    let grid = rho.grid();
    let g1 = gradient(e1.field());
    let g2 = gradient(e2.field());
    let n1 = vector_inner(&g1, &g1)?;
    let n2 = vector_inner(&g2, &g2)?;
    let cross = vector_inner(&g1, &g2)?;
    let mut gram = Vec::with_capacity(grid.n_nodes());
    let mut weighted = Vec::with_capacity(grid.n_nodes());
    for node in 0..grid.n_nodes() {
        let mass =
            n1.values()[node] * n2.values()[node] - cross.values()[node] * cross.values()[node];
        gram.push(mass);
        weighted.push(grid.gauss_curvature_at(node) * mass);
    }
    let gram_mass =
        integrate(&ScalarField::new(grid.clone(), gram)?.mul(rho.field())?);
    let base_term =
        integrate(&ScalarField::new(grid.clone(), weighted)?.mul(rho.field())?);
    let t = t_tensor(rho, &e1, &e2, opts)?;
    let t_term = 3.0 * t.norm_sq()?;
    Ok(SectionalBreakdown { base_term, gram_mass, t_term })
}

/// Sectional curvature of the plane spanned by the two tangents.
pub fn sectional_curvature(
    rho: &Density,
    phi1: &Potential,
    phi2: &Potential,
    opts: &SolverOptions,
) -> Result<f64> {
    Ok(sectional_breakdown(rho, phi1, phi2, opts)?.value())
}

/// One sampled plane of the curvature scan.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ScanRow {
    pub index: usize,
    /// Minimum of the base Gaussian curvature over the grid.
    pub min_base_curvature: f64,
    pub gram_mass: f64,
    pub t_term: f64,
    pub sectional: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    pub min_base_curvature: f64,
    pub min_sectional: f64,
    /// Whether some sampled plane has sectional curvature below the base
    /// minimum, witnessing that lower curvature bounds do not transfer.
    pub violation_found: bool,
}

/// Sample random planes at random densities and record their curvature
/// against the base minimum. Deterministic for a fixed seed.
pub fn curvature_scan(
    grid: &std::sync::Arc<Grid>,
    samples: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<ScanReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let min_base = (0..grid.n_nodes())
        .map(|n| grid.gauss_curvature_at(n))
        .fold(f64::INFINITY, f64::min);
    let cap = default_mode_cap(grid);
    let mut rows = Vec::with_capacity(samples);
    let mut min_sectional = f64::INFINITY;
    let mut index = 0;
    while rows.len() < samples {
        let rho = random_density(grid, &mut rng, cap, 0.3)?;
        let phi1 = random_potential(&rho, &mut rng, cap, 1.0)?;
        let phi2 = random_potential(&rho, &mut rng, cap, 1.0)?;
        let breakdown = match sectional_breakdown(&rho, &phi1, &phi2, opts) {
            Ok(b) => b,
            Err(Error::DegeneratePlane(_)) => continue,
            Err(e) => return Err(e),
        };
        let sectional = breakdown.value();
        min_sectional = min_sectional.min(sectional);
        rows.push(ScanRow {
            index,
            min_base_curvature: min_base,
            gram_mass: breakdown.gram_mass,
            t_term: breakdown.t_term,
            sectional,
        });
        index += 1;
    }
    let min_sectional = if rows.is_empty() { 0.0 } else { min_sectional };
    Ok(ScanReport {
        rows,
        min_base_curvature: min_base,
        min_sectional,
        violation_found: min_sectional < min_base - 1e-12,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::manifold::ManifoldSpec;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn uniform_circle(n: usize) -> (Arc<Grid>, Density) {
        let grid = build_grid(&ManifoldSpec::circle(TAU), &[n]).unwrap();
        let rho = Density::uniform(grid.clone());
        (grid, rho)
    }

    #[test]
    fn t_tensor_vanishes_on_the_diagonal() {
        let (_, rho) = uniform_circle(48);
        let phi = Potential::from_fn(&rho, |x, _| (2.0 * x).sin() + 0.4 * x.cos()).unwrap();
        let t = t_tensor(&rho, &phi, &phi, &SolverOptions::default()).unwrap();
        assert!(t.form().max_abs() < 1e-10);
    }

    #[test]
    fn t_tensor_hand_value_on_circle() {
        // phi = sqrt2 sin x, phi' = sqrt2 cos x at the uniform density:
        // the remainder is the constant form with coefficient -1.
        let (grid, rho) = uniform_circle(64);
        let s2 = 2.0_f64.sqrt();
        let phi = Potential::from_fn(&rho, move |x, _| s2 * x.sin()).unwrap();
        let phi_p = Potential::from_fn(&rho, move |x, _| s2 * x.cos()).unwrap();
        let t = t_tensor(&rho, &phi, &phi_p, &SolverOptions::default()).unwrap();
        for node in 0..grid.n_nodes() {
            assert!((t.form().component(0)[node] + 1.0).abs() < 1e-10);
        }
        assert!((t.norm_sq().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn antisymmetry_of_t() {
        let (_, rho) = uniform_circle(48);
        let phi = Potential::from_fn(&rho, |x, _| x.sin() + 0.3 * (3.0 * x).cos()).unwrap();
        let psi = Potential::from_fn(&rho, |x, _| (2.0 * x).cos()).unwrap();
        let opts = SolverOptions::default();
        let a = t_tensor(&rho, &phi, &psi, &opts).unwrap();
        let b = t_tensor(&rho, &psi, &phi, &opts).unwrap();
        let sum = a.form().add(b.form()).unwrap();
        assert!(sum.max_abs() < 1e-10, "antisymmetry defect {}", sum.max_abs());
    }

    #[test]
    fn quadform_closed_value_on_circle() {
        let (_, rho) = uniform_circle(64);
        let s2 = 2.0_f64.sqrt();
        let phi1 = Potential::from_fn(&rho, move |x, _| s2 * x.sin()).unwrap();
        let phi2 = Potential::from_fn(&rho, move |x, _| s2 * x.cos()).unwrap();
        let opts = SolverOptions::default();
        let v = curvature_quadform(&rho, &phi1, &phi2, &phi2, &phi1, &opts).unwrap();
        assert!((v - 3.0).abs() < 1e-9, "{v}");
        let diag = curvature_quadform(&rho, &phi1, &phi1, &phi2, &phi1, &opts).unwrap();
        assert!(diag.abs() < 1e-10);
    }

    #[test]
    fn sectional_matches_quadform_and_closed_value() {
        let (_, rho) = uniform_circle(64);
        let s2 = 2.0_f64.sqrt();
        let phi1 = Potential::from_fn(&rho, move |x, _| s2 * x.sin()).unwrap();
        let phi2 = Potential::from_fn(&rho, move |x, _| s2 * x.cos()).unwrap();
        let opts = SolverOptions::default();
        let k = sectional_curvature(&rho, &phi1, &phi2, &opts).unwrap();
        assert!((k - 3.0).abs() < 1e-9, "{k}");
        let q = curvature_quadform(&rho, &phi1, &phi2, &phi2, &phi1, &opts).unwrap();
        assert!((k - q).abs() < 1e-9);
    }

    #[test]
    fn degenerate_plane_is_rejected() {
        let (_, rho) = uniform_circle(32);
        let phi = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        let same = Potential::from_fn(&rho, |x, _| 2.0 * x.sin()).unwrap();
        assert!(matches!(
            sectional_curvature(&rho, &phi, &same, &SolverOptions::default()),
            Err(Error::DegeneratePlane(_))
        ));
    }

    #[test]
    fn scan_on_flat_torus_is_nonnegative() {
        let grid = build_grid(&ManifoldSpec::flat_torus(TAU, TAU), &[16, 16]).unwrap();
        let report = curvature_scan(&grid, 8, 7, &SolverOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 8);
        assert_eq!(report.min_base_curvature, 0.0);
        assert!(!report.violation_found);
        for row in &report.rows {
            assert!(row.sectional >= -1e-9);
        }
    }

    #[test]
    fn empty_scan_produces_empty_report() {
        let grid = build_grid(&ManifoldSpec::circle(TAU), &[16]).unwrap();
        let report = curvature_scan(&grid, 0, 1, &SolverOptions::default()).unwrap();
        assert!(report.rows.is_empty());
        assert!(!report.violation_found);
    }
}

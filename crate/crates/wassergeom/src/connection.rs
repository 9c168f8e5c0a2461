//! Levi-Civita connection of the density manifold: commutators of tangent
//! fields, covariant derivatives, connection coefficients and parallel
//! transport along density curves.
//!
//! Every formula funnels through the same 1-form contraction
//! `(Hess phi_b)(grad phi_a, .)`: its weighted codifferential feeds the
//! Green solve, and its pointwise pairing with another gradient gives the
//! connection coefficients.

use crate::curve::DensityCurve;
use crate::density::{otto_norm, Density, Potential};
use crate::elliptic::{project_exact, SolverOptions};
use crate::error::{Error, Result};
use crate::field::{require_same_grid, OneForm, ScalarField};
use crate::ops::{
    covariant_hessian, divergence, gradient, integrate, raise, tensor_bilinear, tensor_vector,
};

/// The 1-form `(Hess phi_b)(grad phi_a, .)` shared by the whole module.
pub fn hessian_contraction(phi_a: &ScalarField, phi_b: &ScalarField) -> Result<OneForm> {
    require_same_grid(phi_a.grid(), phi_b.grid())?;
    let hessian = covariant_hessian(phi_b);
    let grad = gradient(phi_a);
    tensor_vector(&hessian, &grad)
}

/// Covariant derivative of the tangent of `phi2` along the tangent of
/// `phi1`, returned as a gauged potential.
pub fn covariant_derivative(
    rho: &Density,
    phi1: &Potential,
    phi2: &Potential,
    opts: &SolverOptions,
) -> Result<Potential> {
    let beta = hessian_contraction(phi1.field(), phi2.field())?;
    project_exact(rho, &beta, opts)
}

/// Commutator of the two tangent fields as a potential.
pub fn commutator(
    rho: &Density,
    phi1: &Potential,
    phi2: &Potential,
    opts: &SolverOptions,
) -> Result<Potential> {
    let b12 = hessian_contraction(phi1.field(), phi2.field())?;
    let b21 = hessian_contraction(phi2.field(), phi1.field())?;
    project_exact(rho, &b12.sub(&b21)?, opts)
}

/// Density variation of the commutator evaluated directly from the bracket
/// formula, with no elliptic solve:
/// `-div(rho ((Hess phi2)(grad phi1) - (Hess phi1)(grad phi2))^sharp)`.
pub fn commutator_variation(
    rho: &Density,
    phi1: &Potential,
    phi2: &Potential,
) -> Result<ScalarField> {
    let b12 = hessian_contraction(phi1.field(), phi2.field())?;
    let b21 = hessian_contraction(phi2.field(), phi1.field())?;
    let sharp = raise(&b12.sub(&b21)?);
    let grid = rho.grid();
    let flux = crate::field::VectorField::new(
        grid.clone(),
        (0..grid.dim())
            .map(|axis| {
                sharp.component(axis).iter().zip(rho.values()).map(|(&v, &r)| v * r).collect()
            })
            .collect(),
    )?;
    Ok(divergence(&flux).scale(-1.0))
}

/// Connection coefficient `int (Hess phi2)(grad phi1, grad phi3) rho dvol`.
pub fn connection_coefficient(
    rho: &Density,
    phi1: &Potential,
    phi2: &Potential,
    phi3: &Potential,
) -> Result<f64> {
    require_same_grid(rho.grid(), phi1.grid())?;
    require_same_grid(rho.grid(), phi2.grid())?;
    require_same_grid(rho.grid(), phi3.grid())?;
    let hessian = covariant_hessian(phi2.field());
    let pointwise =
        tensor_bilinear(&hessian, &gradient(phi1.field()), &gradient(phi3.field()))?;
    Ok(integrate(&pointwise.mul(rho.field())?))
}

#[derive(Debug, Clone, Copy)]
pub struct TransportOptions {
    /// Largest tolerated drift of the transported Otto norm.
    pub norm_tolerance: f64,
    pub solver: SolverOptions,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self { norm_tolerance: 1e-6, solver: SolverOptions::default() }
    }
}

/// A parallel field along a curve: one gauged potential per time sample,
/// plus the witnessed conservation of its Otto norm.
pub struct TransportState {
    etas: Vec<Potential>,
    initial_norm: f64,
    norm_drift: f64,
}

impl TransportState {
    pub fn eta(&self, j: usize) -> &Potential {
        &self.etas[j]
    }

    pub fn etas(&self) -> &[Potential] {
        &self.etas
    }

    pub fn final_eta(&self) -> &Potential {
        self.etas.last().unwrap()
    }

    pub fn initial_norm(&self) -> f64 {
        self.initial_norm
    }

    /// Largest deviation of the transported norm from its initial value.
    pub fn norm_drift(&self) -> f64 {
        self.norm_drift
    }
}

/// Parallel transport of `eta0` along the curve, integrating
/// `d eta/dt = -covariant_derivative(phi(t), eta)` with the classical
/// 4th-order scheme; curve fields are interpolated linearly between samples.
///
/// The transported Otto norm is monitored at every sample and drift beyond
/// the tolerance is an error rather than a silent pass.
pub fn parallel_transport(
    curve: &DensityCurve,
    eta0: &Potential,
    opts: &TransportOptions,
) -> Result<TransportState> {
    require_same_grid(curve.grid(), eta0.grid())?;

    let rhs = |t: f64, eta: &ScalarField| -> Result<ScalarField> {
        let rho_t = curve.density_at(t)?;
        let phi_t = Potential::new(&rho_t, curve.potential_field_at(t)?)?;
        let eta_t = Potential::new(&rho_t, eta.clone())?;
        Ok(covariant_derivative(&rho_t, &phi_t, &eta_t, &opts.solver)?.field().scale(-1.0))
    };

    let mut eta = eta0.field().clone();
    let mut etas = Vec::with_capacity(curve.len());
    etas.push(eta0.re_gauge(curve.density(0))?);
    let initial_norm = otto_norm(curve.density(0), &etas[0])?;
    let mut norm_drift = 0.0_f64;

    for j in 0..curve.len() - 1 {
        let t = curve.time(j);
        let dt = curve.time(j + 1) - t;
        let k1 = rhs(t, &eta)?;
        let k2 = rhs(t + dt / 2.0, &eta.add(&k1.scale(dt / 2.0))?)?;
        let k3 = rhs(t + dt / 2.0, &eta.add(&k2.scale(dt / 2.0))?)?;
        let k4 = rhs(t + dt, &eta.add(&k3.scale(dt))?)?;
        let increment = k1
            .add(&k2.scale(2.0))?
            .add(&k3.scale(2.0))?
            .add(&k4)?
            .scale(dt / 6.0);
        eta = eta.add(&increment)?;
        let rho_next = curve.density(j + 1);
        let gauged = Potential::new(rho_next, eta.clone())?;
        let norm = otto_norm(rho_next, &gauged)?;
        norm_drift = norm_drift.max((norm - initial_norm).abs());
        etas.push(gauged);
    }

    if norm_drift > opts.norm_tolerance {
        return Err(Error::NormDrift { drift: norm_drift, tolerance: opts.norm_tolerance });
    }
    Ok(TransportState { etas, initial_norm, norm_drift })
}

/// Otto angle between two tangent vectors at a density, in radians.
pub fn tangent_angle(rho: &Density, a: &Potential, b: &Potential) -> Result<f64> {
    let na = otto_norm(rho, a)?;
    let nb = otto_norm(rho, b)?;
    if na == 0.0 || nb == 0.0 {
        return Err(Error::InvalidInput("angle undefined for zero tangent".into()));
    }
    let cos = crate::density::otto_inner(rho, a, b)? / (na * nb);
    Ok(cos.clamp(-1.0, 1.0).acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::manifold::ManifoldSpec;
    use std::f64::consts::TAU;
    use std::sync::Arc;

    fn circle(n: usize) -> Arc<crate::grid::Grid> {
        build_grid(&ManifoldSpec::circle(TAU), &[n]).unwrap()
    }

    #[test]
    fn commutator_is_antisymmetric_diagonal() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.3 * x.cos()).unwrap();
        let phi = Potential::from_fn(&rho, |x, _| (2.0 * x).sin()).unwrap();
        let c = commutator(&rho, &phi, &phi, &SolverOptions::default()).unwrap();
        assert!(c.field().max_abs() < 1e-12);
    }

    #[test]
    fn commutator_of_first_harmonics_vanishes_for_uniform_density() {
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let s = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        let c = Potential::from_fn(&rho, |x, _| x.cos()).unwrap();
        let out = commutator(&rho, &s, &c, &SolverOptions::default()).unwrap();
        assert!(out.field().max_abs() < 1e-11, "max {}", out.field().max_abs());
    }

    #[test]
    fn covariant_derivative_of_constant_is_zero() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.2 * x.sin()).unwrap();
        let phi1 = Potential::from_fn(&rho, |x, _| x.cos()).unwrap();
        let konst = Potential::from_fn(&rho, |_, _| 7.0).unwrap();
        let d = covariant_derivative(&rho, &phi1, &konst, &SolverOptions::default()).unwrap();
        assert!(d.field().max_abs() < 1e-12);
    }

    #[test]
    fn covariant_derivative_uniform_circle_hand_value() {
        // phi1 = sin x, phi2 = cos x at the uniform density solves to
        // -sin(2x)/4.
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let phi1 = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        let phi2 = Potential::from_fn(&rho, |x, _| x.cos()).unwrap();
        let d = covariant_derivative(&rho, &phi1, &phi2, &SolverOptions::default()).unwrap();
        for node in 0..64 {
            let [x, _] = grid.coord(node);
            assert!((d.values()[node] + (2.0 * x).sin() / 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn torsion_free_identity() {
        let grid = circle(48);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.35 * (2.0 * x).cos()).unwrap();
        let phi1 = Potential::from_fn(&rho, |x, _| x.sin() + 0.3 * (3.0 * x).cos()).unwrap();
        let phi2 = Potential::from_fn(&rho, |x, _| (2.0 * x).sin()).unwrap();
        let opts = SolverOptions::default();
        let d12 = covariant_derivative(&rho, &phi1, &phi2, &opts).unwrap();
        let d21 = covariant_derivative(&rho, &phi2, &phi1, &opts).unwrap();
        let bracket = commutator(&rho, &phi1, &phi2, &opts).unwrap();
        let torsion = d12.field().sub(d21.field()).unwrap().sub(bracket.field()).unwrap();
        assert!(torsion.max_abs() < 1e-9, "torsion {}", torsion.max_abs());
    }

    #[test]
    fn connection_coefficient_hand_value() {
        // phi1 = phi3 = sin x, phi2 = cos 2x at the uniform density:
        // int cos^2 x * (-4 cos 2x) / (2 pi) = -1.
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let s = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        let c2 = Potential::from_fn(&rho, |x, _| (2.0 * x).cos()).unwrap();
        let v = connection_coefficient(&rho, &s, &c2, &s).unwrap();
        assert!((v + 1.0).abs() < 1e-12, "{v}");
        let konst = Potential::from_fn(&rho, |_, _| 3.0).unwrap();
        assert!(connection_coefficient(&rho, &s, &konst, &s).unwrap().abs() < 1e-13);
    }

    #[test]
    fn coefficient_matches_covariant_derivative_pairing() {
        let grid = circle(48);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.25 * x.sin()).unwrap();
        let phi1 = Potential::from_fn(&rho, |x, _| (2.0 * x).cos()).unwrap();
        let phi2 = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        let phi3 = Potential::from_fn(&rho, |x, _| (3.0 * x).sin()).unwrap();
        let coeff = connection_coefficient(&rho, &phi1, &phi2, &phi3).unwrap();
        let d = covariant_derivative(&rho, &phi1, &phi2, &SolverOptions::default()).unwrap();
        let paired = crate::density::otto_inner(&rho, &d, &phi3).unwrap();
        assert!((coeff - paired).abs() < 1e-9, "{coeff} vs {paired}");
    }

    #[test]
    fn transport_along_constant_curve_is_identity() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.3 * x.cos()).unwrap();
        let zero = Potential::zero(grid.clone());
        let times: Vec<f64> = (0..9).map(|j| j as f64 / 8.0).collect();
        let curve = DensityCurve::new(
            times,
            vec![rho.clone(); 9],
            vec![zero; 9],
            1e-12,
        )
        .unwrap();
        let eta0 = Potential::from_fn(&rho, |x, _| (2.0 * x).sin()).unwrap();
        let state = parallel_transport(&curve, &eta0, &TransportOptions::default()).unwrap();
        let diff = state.final_eta().field().sub(eta0.field()).unwrap().max_abs();
        assert!(diff < 1e-12);
        assert!(state.norm_drift() < 1e-12);
    }

    #[test]
    fn transport_of_constant_tangent_stays_zero() {
        let grid = circle(32);
        let rho0 = Density::uniform(grid.clone());
        let g = grid.clone();
        let curve = DensityCurve::from_density_path(
            (0..17).map(|j| j as f64 / 16.0).collect(),
            |t| {
                Density::from_fn(g.clone(), move |x, _| {
                    1.0 + 0.2 * (std::f64::consts::PI * t).sin() * x.cos()
                })
            },
            |t| {
                Ok(ScalarField::from_fn(g.clone(), move |x, _| {
                    0.2 * std::f64::consts::PI
                        * (std::f64::consts::PI * t).cos()
                        * x.cos()
                        / TAU
                }))
            },
            1e-2,
            &SolverOptions::default(),
        )
        .unwrap();
        let eta0 = Potential::from_fn(&rho0, |_, _| 4.0).unwrap();
        let state = parallel_transport(&curve, &eta0, &TransportOptions::default()).unwrap();
        assert!(state.final_eta().field().max_abs() < 1e-10);
    }
}

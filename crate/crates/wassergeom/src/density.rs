//! Points and tangent vectors of the density manifold.
//!
//! A [`Density`] is a strictly positive scalar field with unit weighted
//! integral. A [`Potential`] represents the tangent vector moving a density
//! by `-div(rho grad phi)`; two potentials differing by a constant are the
//! same tangent vector, and the stored representative is gauged so that its
//! density-weighted integral vanishes against the anchor density given at
//! construction.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{require_same_grid, ScalarField};
use crate::grid::Grid;
use crate::ops::{divergence, gradient, integrate, vector_inner};

/// Densities below this floor at any node are rejected rather than clamped.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// A strictly positive probability density on a grid.
#[derive(Clone)]
pub struct Density {
    field: ScalarField,
}

impl Density {
    /// Normalize to unit mass and validate positivity.
    pub fn new(field: ScalarField) -> Result<Self> {
        let min = field.min();
        if min <= POSITIVITY_FLOOR {
            return Err(Error::NonPositiveDensity { min });
        }
        let mass = integrate(&field);
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::NonPositiveDensity { min: mass });
        }
        Ok(Self { field: field.scale(1.0 / mass) })
    }

    pub fn uniform(grid: Arc<Grid>) -> Self {
        let volume = grid.total_volume();
        Self { field: ScalarField::constant(grid, 1.0 / volume) }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(ScalarField::from_fn(grid, f))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.field.grid()
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn min(&self) -> f64 {
        self.field.min()
    }

    /// Weighted L2 norm sqrt(int f^2 rho dvol) with this density as weight.
    pub fn weighted_norm(&self, f: &ScalarField) -> Result<f64> {
        require_same_grid(self.grid(), f.grid())?;
        let sq = f.mul(f)?.mul(&self.field)?;
        Ok(integrate(&sq).max(0.0).sqrt())
    }
}

/// A velocity potential in the density-weighted zero-mean gauge.
#[derive(Clone)]
pub struct Potential {
    field: ScalarField,
}

impl Potential {
    /// Gauge the representative: subtract `int phi rho dvol` so the weighted
    /// mean against `anchor` vanishes.
    pub fn new(anchor: &Density, field: ScalarField) -> Result<Self> {
        require_same_grid(anchor.grid(), field.grid())?;
        let mean = coordinate_functional(anchor, &field)?;
        Ok(Self { field: field.shift(-mean) })
    }

    pub fn zero(grid: Arc<Grid>) -> Self {
        Self { field: ScalarField::zeros(grid) }
    }

    pub fn from_fn(anchor: &Density, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::new(anchor, ScalarField::from_fn(anchor.grid().clone(), f))
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.field.grid()
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    /// Re-anchor against a different density.
    pub fn re_gauge(&self, anchor: &Density) -> Result<Self> {
        Self::new(anchor, self.field.clone())
    }

    /// Gauge-insensitive comparison: equal up to an additive constant.
    pub fn same_tangent(&self, other: &Self, tol: f64) -> Result<bool> {
        require_same_grid(self.grid(), other.grid())?;
        let diff = self.field.sub(&other.field)?;
        let mean = integrate(&diff) / self.grid().total_volume();
        Ok(diff.shift(-mean).max_abs() <= tol)
    }
}

/// Coordinate functional F_phi(rho) = int phi rho dvol.
pub fn coordinate_functional(rho: &Density, phi: &ScalarField) -> Result<f64> {
    require_same_grid(rho.grid(), phi.grid())?;
    Ok(integrate(&phi.mul(rho.field())?))
}

/// First variation of a scalar weight along a potential flow:
/// `-div(sigma grad phi)`. With `sigma = rho` this is the density motion of
/// the tangent vector attached to `phi`.
pub fn density_variation(sigma: &ScalarField, phi: &ScalarField) -> Result<ScalarField> {
    require_same_grid(sigma.grid(), phi.grid())?;
    let flux = gradient(phi);
    let weighted = (0..sigma.grid().dim())
        .map(|axis| {
            flux.component(axis).iter().zip(sigma.values()).map(|(&g, &s)| g * s).collect()
        })
        .collect();
    let flux = crate::field::VectorField::new(sigma.grid().clone(), weighted)?;
    Ok(divergence(&flux).scale(-1.0))
}

/// Density motion of the tangent vector of `phi` at `rho`.
pub fn apply_tangent(rho: &Density, phi: &Potential) -> Result<ScalarField> {
    density_variation(rho.field(), phi.field())
}

/// Kinetic-energy inner product int <grad phi1, grad phi2> rho dvol.
///
/// Debug builds cross-check the equivalent adjoint form
/// `-int phi1 div(rho grad phi2) dvol`, which must agree to quadrature
/// round-off because the discrete divergence is the exact negative adjoint
/// of the discrete gradient.
pub fn otto_inner(rho: &Density, phi1: &Potential, phi2: &Potential) -> Result<f64> {
    require_same_grid(rho.grid(), phi1.grid())?;
    require_same_grid(rho.grid(), phi2.grid())?;
    let g1 = gradient(phi1.field());
    let g2 = gradient(phi2.field());
    let integrand = vector_inner(&g1, &g2)?.mul(rho.field())?;
    let value = integrate(&integrand);
    #[cfg(debug_assertions)]
    {
        let alt = integrate(&phi1.field().mul(&apply_tangent(rho, phi2)?)?);
        debug_assert!(
            (value - alt).abs() <= 1e-9 * (1.0 + value.abs()),
            "adjoint cross-check failed: {value} vs {alt}"
        );
    }
    Ok(value)
}

/// Otto norm of a potential at a density.
pub fn otto_norm(rho: &Density, phi: &Potential) -> Result<f64> {
    Ok(otto_inner(rho, phi, phi)?.max(0.0).sqrt())
}

/// Central-difference directional derivative of the coordinate functional
/// `F_phi` along the tangent of `psi`, paired with the metric value it must
/// reproduce. Returns `(derivative, otto_inner(rho, phi, psi))`.
pub fn metric_gradient_check(
    rho: &Density,
    phi: &ScalarField,
    psi: &Potential,
    eps: f64,
) -> Result<(f64, f64)> {
    require_same_grid(rho.grid(), phi.grid())?;
    let motion = apply_tangent(rho, psi)?;
    let plus = Density::new(rho.field().add(&motion.scale(eps))?)?;
    let minus = Density::new(rho.field().sub(&motion.scale(eps))?)?;
    let derivative =
        (coordinate_functional(&plus, phi)? - coordinate_functional(&minus, phi)?) / (2.0 * eps);
    let phi_pot = Potential::new(rho, phi.clone())?;
    let inner = otto_inner(rho, &phi_pot, psi)?;
    Ok((derivative, inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::manifold::ManifoldSpec;
    use std::f64::consts::TAU;

    fn circle(n: usize) -> Arc<Grid> {
        build_grid(&ManifoldSpec::circle(TAU), &[n]).unwrap()
    }

    #[test]
    fn density_normalizes_and_rejects_nonpositive() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 2.0 + x.cos()).unwrap();
        assert!((integrate(rho.field()) - 1.0).abs() < 1e-14);
        let bad = ScalarField::from_fn(grid, |x, _| x.cos());
        assert!(matches!(Density::new(bad), Err(Error::NonPositiveDensity { .. })));
    }

    #[test]
    fn potential_gauge_is_enforced() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.5 * x.cos()).unwrap();
        let phi = Potential::from_fn(&rho, |x, _| x.sin() + 4.0).unwrap();
        assert!(coordinate_functional(&rho, phi.field()).unwrap().abs() < 1e-12);
        // adding a constant yields the same tangent vector
        let shifted = Potential::new(&rho, phi.field().shift(11.0)).unwrap();
        assert!(phi.same_tangent(&shifted, 1e-12).unwrap());
    }

    #[test]
    fn coordinate_functional_examples() {
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let one = ScalarField::constant(grid.clone(), 1.0);
        assert!((coordinate_functional(&rho, &one).unwrap() - 1.0).abs() < 1e-14);
        let s = ScalarField::from_fn(grid.clone(), |x, _| x.sin());
        assert!(coordinate_functional(&rho, &s).unwrap().abs() < 1e-14);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.5 * x.cos()).unwrap();
        let c = ScalarField::from_fn(grid, |x, _| x.cos());
        assert!((coordinate_functional(&rho, &c).unwrap() - 0.25).abs() < 1e-13);
    }

    #[test]
    fn apply_tangent_uniform_density() {
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let phi = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        let motion = apply_tangent(&rho, &phi).unwrap();
        for node in 0..64 {
            let [x, _] = grid.coord(node);
            assert!((motion.values()[node] - x.sin() / TAU).abs() < 1e-12);
        }
        assert!(integrate(&motion).abs() < 1e-13, "tangent motions are mass neutral");
    }

    #[test]
    fn apply_tangent_of_constant_potential_is_zero() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.3 * (2.0 * x).sin()).unwrap();
        let phi = Potential::from_fn(&rho, |_, _| 5.0).unwrap();
        assert!(apply_tangent(&rho, &phi).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn otto_inner_examples() {
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let s = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        let c = Potential::from_fn(&rho, |x, _| x.cos()).unwrap();
        let konst = Potential::from_fn(&rho, |_, _| 2.0).unwrap();
        assert!((otto_inner(&rho, &s, &s).unwrap() - 0.5).abs() < 1e-13);
        assert!(otto_inner(&rho, &s, &konst).unwrap().abs() < 1e-14);
        assert!(otto_inner(&rho, &s, &c).unwrap().abs() < 1e-14);
    }

    #[test]
    fn otto_inner_positive_definite_modulo_constants() {
        let grid = circle(48);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.2 + 0.4 * x.sin()).unwrap();
        let phi = Potential::from_fn(&rho, |x, _| (3.0 * x).cos() + 0.2 * x.sin()).unwrap();
        assert!(otto_inner(&rho, &phi, &phi).unwrap() > 1e-3);
        let konst = Potential::from_fn(&rho, |_, _| -3.0).unwrap();
        assert!(otto_inner(&rho, &konst, &konst).unwrap().abs() < 1e-12);
    }

    #[test]
    fn metric_gradient_check_trivial_and_matched() {
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let konst = Potential::from_fn(&rho, |_, _| 1.0).unwrap();
        let phi = ScalarField::from_fn(grid.clone(), |x, _| x.sin());
        let (d, g) = metric_gradient_check(&rho, &phi, &konst, 1e-5).unwrap();
        assert!(d.abs() < 1e-12 && g.abs() < 1e-12);
        let psi = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        let (d, g) = metric_gradient_check(&rho, &phi, &psi, 1e-5).unwrap();
        assert!((d - 0.5).abs() < 1e-9);
        assert!((d - g).abs() < 1e-10);
    }

    #[test]
    fn metric_gradient_check_rejects_large_eps() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.9 * x.cos()).unwrap();
        let psi = Potential::from_fn(&rho, |x, _| 20.0 * x.sin()).unwrap();
        let phi = ScalarField::from_fn(grid, |x, _| x.cos());
        assert!(matches!(
            metric_gradient_check(&rho, &phi, &psi, 10.0),
            Err(Error::NonPositiveDensity { .. })
        ));
    }
}

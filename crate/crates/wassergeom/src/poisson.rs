//! Poisson geometry lifted to the density manifold.
//!
//! A bivector field on a 2-d base induces a bracket on coordinate
//! functionals by integrating the base bracket against the density. On the
//! flat torus with the standard symplectic structure the induced Hamiltonian
//! motion advects densities by a divergence-free field, so mass is conserved
//! by construction of the discrete bracket.
//!
//! The base bracket deliberately uses plain coordinate partials: no metric
//! enters this module, and on the flat torus the symplectic area form agrees
//! with the quadrature weights.

use std::sync::Arc;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::field::{require_same_grid, ScalarField};
use crate::grid::Grid;
use crate::ops::integrate;

/// A skew bivector field on a flat 2-torus grid.
pub struct PoissonStructure {
    grid: Arc<Grid>,
    /// Node-major components p^ij, 4 entries per node.
    components: Vec<f64>,
    /// Set when the structure is the constant standard symplectic one,
    /// which is what flows and the leaf form require.
    constant_symplectic: bool,
}

impl PoissonStructure {
    /// The constant structure with matrix [[0, 1], [-1, 0]].
    pub fn standard_symplectic(grid: Arc<Grid>) -> Result<Self> {
        Self::require_flat_2d(&grid)?;
        let n = grid.n_nodes();
        let mut components = vec![0.0; 4 * n];
        for node in 0..n {
            components[4 * node + 1] = 1.0;
            components[4 * node + 2] = -1.0;
        }
        Ok(Self { grid, components, constant_symplectic: true })
    }

    /// A general bivector field. Antisymmetry is checked nodewise and the
    /// Jacobi identity is verified on a basis of low-order Fourier triples.
    pub fn from_components(grid: Arc<Grid>, components: Vec<f64>) -> Result<Self> {
        Self::require_flat_2d(&grid)?;
        let n = grid.n_nodes();
        if components.len() != 4 * n {
            return Err(Error::ShapeMismatch { got: components.len(), expected: 4 * n });
        }
        if components.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        for node in 0..n {
            let diag_ok = components[4 * node] == 0.0 && components[4 * node + 3] == 0.0;
            let skew = (components[4 * node + 1] + components[4 * node + 2]).abs();
            if !diag_ok || skew > 1e-14 {
                return Err(Error::InvalidInput(format!(
                    "bivector not antisymmetric at node {node}"
                )));
            }
        }
        let structure = Self { grid, components, constant_symplectic: false };
        structure.verify_jacobi_basis(1e-9)?;
        Ok(structure)
    }

    fn require_flat_2d(grid: &Grid) -> Result<()> {
        if grid.dim() != 2 || !grid.is_flat() {
            return Err(Error::Unsupported(
                "Poisson structures are realized on the flat 2-torus".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn is_constant_symplectic(&self) -> bool {
        self.constant_symplectic
    }

    fn require_symplectic(&self) -> Result<()> {
        if self.constant_symplectic {
            Ok(())
        } else {
            Err(Error::Unsupported(
                "flows and the leaf form are exposed for the constant symplectic structure".into(),
            ))
        }
    }

    /// Jacobi identity on products of low harmonics, checked pointwise.
    fn verify_jacobi_basis(&self, tol: f64) -> Result<()> {
        let basis: Vec<ScalarField> = vec![
            ScalarField::from_fn(self.grid.clone(), |x, _| x.sin()),
            ScalarField::from_fn(self.grid.clone(), |x, _| x.cos()),
            ScalarField::from_fn(self.grid.clone(), |_, y| y.sin()),
            ScalarField::from_fn(self.grid.clone(), |_, y| y.cos()),
            ScalarField::from_fn(self.grid.clone(), |x, y| (x + y).sin()),
        ];
        for f1 in &basis {
            for f2 in &basis {
                for f3 in &basis {
                    let defect = self.jacobi_defect_field(f1, f2, f3)?.max_abs();
                    if defect > tol {
                        return Err(Error::InvalidInput(format!(
                            "bivector violates the Jacobi identity: defect {defect:.3e}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Base bracket p(df, dg) with flat coordinate partials.
    pub fn base_bracket(&self, f: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
        require_same_grid(&self.grid, f.grid())?;
        require_same_grid(&self.grid, g.grid())?;
        let engine = self.grid.engine();
        let scheme = self.grid.scheme();
        let fx = engine.partial(f.values(), 0, scheme);
        let fy = engine.partial(f.values(), 1, scheme);
        let gx = engine.partial(g.values(), 0, scheme);
        let gy = engine.partial(g.values(), 1, scheme);
        let n = self.grid.n_nodes();
        let mut out = Vec::with_capacity(n);
        for node in 0..n {
            let p01 = self.components[4 * node + 1];
            out.push(p01 * (fx[node] * gy[node] - fy[node] * gx[node]));
        }
        ScalarField::new(self.grid.clone(), out)
    }

    /// Pointwise Jacobi defect {{f1,f2},f3} + {{f2,f3},f1} + {{f3,f1},f2}.
    pub fn jacobi_defect_field(
        &self,
        f1: &ScalarField,
        f2: &ScalarField,
        f3: &ScalarField,
    ) -> Result<ScalarField> {
        let a = self.base_bracket(&self.base_bracket(f1, f2)?, f3)?;
        let b = self.base_bracket(&self.base_bracket(f2, f3)?, f1)?;
        let c = self.base_bracket(&self.base_bracket(f3, f1)?, f2)?;
        a.add(&b)?.add(&c)
    }

    /// Lifted bracket of coordinate functionals at a density:
    /// `int {f, g} d mu`.
    pub fn lifted_bracket(&self, mu: &Density, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        require_same_grid(&self.grid, mu.grid())?;
        let bracket = self.base_bracket(f, g)?;
        Ok(integrate(&bracket.mul(mu.field())?))
    }

    /// Cyclic sum of nested lifted brackets at `mu`; vanishes identically
    /// for a Poisson structure.
    pub fn jacobiator(
        &self,
        mu: &Density,
        f1: &ScalarField,
        f2: &ScalarField,
        f3: &ScalarField,
    ) -> Result<f64> {
        let defect = self.jacobi_defect_field(f1, f2, f3)?;
        Ok(integrate(&defect.mul(mu.field())?))
    }

    /// Symplectic-leaf pairing of the infinitesimal Hamiltonian motions of
    /// `f` and `g` at `mu`; numerically identical to the lifted bracket.
    pub fn leaf_form(&self, mu: &Density, f: &ScalarField, g: &ScalarField) -> Result<f64> {
        self.require_symplectic()?;
        self.lifted_bracket(mu, f, g)
    }

    /// Advect a density along the Hamiltonian motion of `phi`:
    /// `d rho/dt = -{phi, rho}`.
    pub fn hamiltonian_flow(
        &self,
        mu0: &Density,
        phi: &ScalarField,
        t_final: f64,
        steps: usize,
        opts: &FlowOptions,
    ) -> Result<Vec<Density>> {
        self.require_symplectic()?;
        require_same_grid(&self.grid, mu0.grid())?;
        require_same_grid(&self.grid, phi.grid())?;
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidInput("t_final must be positive".into()));
        }
        if steps == 0 {
            return Err(Error::InvalidInput("need at least one step".into()));
        }

        // Hamiltonian speed for the CFL heuristic: |grad phi| in flat metric.
        let engine = self.grid.engine();
        let scheme = self.grid.scheme();
        let px = engine.partial(phi.values(), 0, scheme);
        let py = engine.partial(phi.values(), 1, scheme);
        let vmax = px
            .iter()
            .zip(&py)
            .map(|(&a, &b)| (a * a + b * b).sqrt())
            .fold(0.0_f64, f64::max);
        let h_min = self.grid.steps().iter().cloned().fold(f64::INFINITY, f64::min);
        let cfl_steps = if vmax > 0.0 {
            (t_final * vmax / (opts.cfl_limit * h_min)).ceil() as usize
        } else {
            0
        };
        let steps = steps.max(cfl_steps);
        let dt = t_final / steps as f64;

        let rhs = |rho: &ScalarField| -> Result<ScalarField> {
            Ok(self.base_bracket(phi, rho)?.scale(-1.0))
        };

        let mut rho = mu0.field().clone();
        let mut out = Vec::with_capacity(steps + 1);
        out.push(mu0.clone());
        for step in 1..=steps {
            let k1 = rhs(&rho)?;
            let k2 = rhs(&rho.add(&k1.scale(dt / 2.0))?)?;
            let k3 = rhs(&rho.add(&k2.scale(dt / 2.0))?)?;
            let k4 = rhs(&rho.add(&k3.scale(dt))?)?;
            rho = rho.add(
                &k1.add(&k2.scale(2.0))?.add(&k3.scale(2.0))?.add(&k4)?.scale(dt / 6.0),
            )?;
            if opts.filter {
                rho = ScalarField::new(
                    self.grid.clone(),
                    engine.filter(rho.values(), opts.filter_cutoff, opts.filter_alpha, opts.filter_order),
                )?;
            }
            let min = rho.min();
            if !min.is_finite() {
                return Err(Error::Instability(format!("flow diverged at step {step}")));
            }
            if min <= crate::density::POSITIVITY_FLOOR {
                return Err(Error::PositivityLoss { step, min });
            }
            out.push(Density::new(rho.clone())?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlowOptions {
    pub filter: bool,
    pub filter_cutoff: f64,
    pub filter_alpha: f64,
    pub filter_order: i32,
    pub cfl_limit: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            filter: true,
            filter_cutoff: 2.0 / 3.0,
            filter_alpha: 36.0,
            filter_order: 4,
            cfl_limit: 0.5,
        }
    }
}

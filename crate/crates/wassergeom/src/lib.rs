//! Numerical Riemannian and Poisson geometry of the manifold of smooth,
//! strictly positive probability densities over compact periodic bases.
//!
//! The crate discretizes the circle, the flat 2-torus and conformally flat
//! 2-tori on uniform grids with spectral differentiation, and on top of that
//! realizes the geometry of the density manifold: the kinetic-energy metric
//! on velocity potentials, its Levi-Civita connection, parallel transport,
//! geodesics, the full curvature tensor with its non-exact-form correction,
//! exact discrete quadratic-cost transport distances, and the lifted Poisson
//! bracket with Hamiltonian density flows.

pub mod connection;
pub mod curvature;
pub mod curve;
pub mod density;
pub mod elliptic;
pub mod error;
pub mod experiments;
pub mod field;
pub mod geodesic;
pub mod grid;
pub mod io;
pub mod manifold;
pub mod ops;
pub mod poisson;
pub mod sample;
pub mod spectral;
pub mod wasserstein;

pub use error::{Error, Result};
pub use field::{OneForm, ScalarField, TensorField, VectorField};
pub use grid::{build_grid, build_grid_with_scheme, Grid};
pub use manifold::{Harmonic, ManifoldKind, ManifoldSpec};
pub use spectral::DiffScheme;

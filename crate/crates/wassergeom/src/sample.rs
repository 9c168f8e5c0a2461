//! Seeded band-limited random fields.
//!
//! Potentials and densities drawn here keep their Fourier content well below
//! the grid Nyquist limit with algebraically decaying amplitudes, so products
//! of a few sampled fields stay resolved and tolerance budgets hold.

use std::sync::Arc;

use rand::Rng;

use crate::density::{Density, Potential};
use crate::error::Result;
use crate::field::ScalarField;
use crate::grid::Grid;

/// Zero-mean trigonometric field with modes up to `max_mode` per axis and
/// coefficient decay `(1 + |m|^2)^{-3/2}`.
pub fn band_limited_field(
    grid: &Arc<Grid>,
    rng: &mut impl Rng,
    max_mode: usize,
    amplitude: f64,
) -> ScalarField {
    let dim = grid.dim();
    let periods = grid.spec().periods.clone();
    let mut terms: Vec<(f64, f64, f64, f64)> = Vec::new(); // (kx, ky, amp, phase)
    let max_mode = max_mode.max(1) as i64;
    let modes: Vec<(i64, i64)> = if dim == 1 {
        (1..=max_mode).map(|m| (m, 0)).collect()
    } else {
        let mut v = Vec::new();
        for m0 in 0..=max_mode {
            for m1 in -max_mode..=max_mode {
                if m0 == 0 && m1 <= 0 {
                    continue;
                }
                v.push((m0, m1));
            }
        }
        v
    };
    for (m0, m1) in modes {
        let coeff: f64 = rng.gen_range(-1.0..1.0);
        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let decay = (1.0 + (m0 * m0 + m1 * m1) as f64).powf(-1.5);
        let kx = std::f64::consts::TAU * m0 as f64 / periods[0];
        let ky = if dim == 2 { std::f64::consts::TAU * m1 as f64 / periods[1] } else { 0.0 };
        terms.push((kx, ky, amplitude * coeff * decay, phase));
    }
    ScalarField::from_fn(grid.clone(), move |x, y| {
        terms.iter().map(|&(kx, ky, a, p)| a * (kx * x + ky * y + p).cos()).sum()
    })
}

/// Strictly positive random density `exp(psi)/Z` with band-limited log.
pub fn random_density(
    grid: &Arc<Grid>,
    rng: &mut impl Rng,
    max_mode: usize,
    amplitude: f64,
) -> Result<Density> {
    let log = band_limited_field(grid, rng, max_mode, amplitude);
    Density::new(log.map(f64::exp))
}

/// Gauged band-limited random potential.
pub fn random_potential(
    rho: &Density,
    rng: &mut impl Rng,
    max_mode: usize,
    amplitude: f64,
) -> Result<Potential> {
    let field = band_limited_field(rho.grid(), rng, max_mode, amplitude);
    Potential::new(rho, field)
}

/// Default mode cap for a grid: a quarter of the smallest axis, at most 6.
pub fn default_mode_cap(grid: &Grid) -> usize {
    let n_min = grid.shape().iter().copied().min().unwrap_or(8);
    (n_min / 4).clamp(1, 6)
}

//! Initial-value geodesics of the density manifold and their inf-convolution
//! oracle.
//!
//! A geodesic advances the pair (rho, phi) by the coupled system
//!
//! ```text
//!   d rho / dt = -div(rho grad phi)
//!   d phi / dt = -|grad phi|^2 / 2
//! ```
//!
//! with classical 4th-order time stepping, spectral space derivatives and a
//! smooth exponential filter on the top third of Fourier modes. The raw phi
//! evolution is kept internally; stored samples are gauged per step with the
//! removed constant recorded, so oracle comparisons can reconstruct the raw
//! field.

use crate::curve::DensityCurve;
use crate::density::{density_variation, Density, Potential};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::ops::{covariant_hessian, gradient, integrate, vector_inner};

#[derive(Debug, Clone, Copy)]
pub struct GeodesicOptions {
    /// Apply the spectral filter after each step.
    pub filter: bool,
    /// Filter starts at this fraction of the Nyquist wavenumber.
    pub filter_cutoff: f64,
    pub filter_alpha: f64,
    pub filter_order: i32,
    /// Refuse horizons beyond this fraction of the classical shock time.
    pub shock_guard: f64,
    /// Advective CFL bound used to pick the step count.
    pub cfl_limit: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            filter: true,
            filter_cutoff: 2.0 / 3.0,
            filter_alpha: 36.0,
            filter_order: 4,
            shock_guard: 0.8,
            cfl_limit: 0.5,
        }
    }
}

/// Classical shock horizon `1 / max(lambda_max(-Hess phi0), 0)`, with the
/// Hessian taken as an endomorphism via the metric. Infinite when the
/// Hessian is positive semidefinite everywhere.
pub fn shock_horizon(phi0: &ScalarField) -> f64 {
    let grid = phi0.grid();
    let d = grid.dim();
    let hessian = covariant_hessian(phi0);
    let mut worst = 0.0_f64;
    for node in 0..grid.n_nodes() {
        // mixed Hessian -g^{ik} H_kj
        let mut m = [[0.0_f64; 2]; 2];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += grid.metric_inv(node, i, k) * hessian.entry(k, j)[node];
                }
                m[i][j] = -acc;
            }
        }
        let lambda_max = if d == 1 {
            m[0][0]
        } else {
            // symmetric up to round-off; use the exact 2x2 eigenvalue formula
            let tr = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            tr / 2.0 + disc
        };
        worst = worst.max(lambda_max);
    }
    if worst <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / worst
    }
}

/// Metric magnitude of the gradient, maximized over nodes.
fn max_speed(phi: &ScalarField) -> Result<f64> {
    let g = gradient(phi);
    let sq = vector_inner(&g, &g)?;
    Ok(sq.values().iter().fold(0.0_f64, |m, &v| m.max(v)).sqrt())
}

/// Advance a geodesic from `(rho0, phi0)` to `t_final`, sampling every step.
///
/// The step count is raised above the request if the advective CFL number
/// would exceed the configured limit. Loss of density positivity and norm
/// blow-up abort with an error.
pub fn geodesic_flow(
    rho0: &Density,
    phi0: &Potential,
    t_final: f64,
    steps: usize,
    opts: &GeodesicOptions,
) -> Result<DensityCurve> {
    crate::field::require_same_grid(rho0.grid(), phi0.grid())?;
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::InvalidInput("t_final must be positive".into()));
    }
    if steps < 16 {
        return Err(Error::InvalidInput("need at least 16 steps".into()));
    }
    let grid = rho0.grid().clone();

    let horizon = shock_horizon(phi0.field());
    let limit = opts.shock_guard * horizon;
    if t_final > limit {
        return Err(Error::ShockHorizon { requested: t_final, limit });
    }

    let h_min = grid.steps().iter().cloned().fold(f64::INFINITY, f64::min);
    let v0 = max_speed(phi0.field())?;
    let cfl_steps = if v0 > 0.0 {
        (t_final * v0 / (opts.cfl_limit * h_min)).ceil() as usize
    } else {
        0
    };
    let steps = steps.max(cfl_steps);
    let dt = t_final / steps as f64;

    let derivative = |rho: &ScalarField, phi: &ScalarField| -> Result<(ScalarField, ScalarField)> {
        let drho = density_variation(rho, phi)?;
        let grad = gradient(phi);
        let dphi = vector_inner(&grad, &grad)?.scale(-0.5);
        Ok((drho, dphi))
    };

    let mut rho = rho0.field().clone();
    let mut phi = phi0.field().clone();

    let mut times = Vec::with_capacity(steps + 1);
    let mut densities = Vec::with_capacity(steps + 1);
    let mut potentials = Vec::with_capacity(steps + 1);
    let mut offsets = Vec::with_capacity(steps + 1);

    let record = |rho: &ScalarField,
                  phi: &ScalarField,
                  densities: &mut Vec<Density>,
                  potentials: &mut Vec<Potential>,
                  offsets: &mut Vec<f64>|
     -> Result<()> {
        let density = Density::new(rho.clone())?;
        let offset = integrate(&phi.mul(density.field())?);
        let potential = Potential::new(&density, phi.clone())?;
        densities.push(density);
        potentials.push(potential);
        offsets.push(offset);
        Ok(())
    };

    times.push(0.0);
    record(&rho, &phi, &mut densities, &mut potentials, &mut offsets)?;

    let speed_cap = 50.0 * (v0 + 1.0);
    for step in 1..=steps {
        let (kr1, kp1) = derivative(&rho, &phi)?;
        let (kr2, kp2) =
            derivative(&rho.add(&kr1.scale(dt / 2.0))?, &phi.add(&kp1.scale(dt / 2.0))?)?;
        let (kr3, kp3) =
            derivative(&rho.add(&kr2.scale(dt / 2.0))?, &phi.add(&kp2.scale(dt / 2.0))?)?;
        let (kr4, kp4) = derivative(&rho.add(&kr3.scale(dt))?, &phi.add(&kp3.scale(dt))?)?;
        rho = rho.add(
            &kr1.add(&kr2.scale(2.0))?.add(&kr3.scale(2.0))?.add(&kr4)?.scale(dt / 6.0),
        )?;
        phi = phi.add(
            &kp1.add(&kp2.scale(2.0))?.add(&kp3.scale(2.0))?.add(&kp4)?.scale(dt / 6.0),
        )?;

        if opts.filter {
            let engine = grid.engine();
            rho = ScalarField::new(
                grid.clone(),
                engine.filter(rho.values(), opts.filter_cutoff, opts.filter_alpha, opts.filter_order),
            )?;
            phi = ScalarField::new(
                grid.clone(),
                engine.filter(phi.values(), opts.filter_cutoff, opts.filter_alpha, opts.filter_order),
            )?;
        }

        let min = rho.min();
        if !min.is_finite() || min <= crate::density::POSITIVITY_FLOOR {
            return Err(Error::PositivityLoss { step, min });
        }
        let v = max_speed(&phi)?;
        if !v.is_finite() || v > speed_cap {
            return Err(Error::Instability(format!("speed blow-up at step {step}: {v:.3e}")));
        }
        if dt * v / h_min > opts.cfl_limit * 1.5 {
            return Err(Error::Instability(format!(
                "CFL exceeded at step {step}: {:.3}",
                dt * v / h_min
            )));
        }

        times.push(dt * step as f64);
        record(&rho, &phi, &mut densities, &mut potentials, &mut offsets)?;
    }

    // Midpoint sampling leaves an O(dt^2) continuity defect in the stored
    // samples even for an exact integration.
    let tolerance = (1e-9 + 5.0 * dt * dt * (1.0 + v0).powi(3)).max(1e-9);
    DensityCurve::with_offsets(times, densities, potentials, offsets, tolerance)
}

#[derive(Debug, Clone, Copy)]
pub struct HopfLaxOptions {
    /// Trigonometric upsampling factor for the candidate set; `None` picks
    /// 16 in one dimension and 4 on tori.
    pub upsample: Option<usize>,
    /// Quadratic refinement of the discrete minimum (1-d only).
    pub refine: bool,
}

impl Default for HopfLaxOptions {
    fn default() -> Self {
        Self { upsample: None, refine: true }
    }
}

/// Inf-convolution solution of the Hamilton-Jacobi evolution at time `t`:
/// the infimum of `phi0(m') + d(m, m')^2 / (2t)` over candidate points,
/// using the exact wrap-around distance of the flat base.
///
/// Candidates are the nodes of a trigonometrically upsampled grid, searched
/// with an exact pruning bound; in one dimension the discrete minimum is
/// polished by a three-point parabola fit.
pub fn hopf_lax(phi0: &ScalarField, t: f64, opts: &HopfLaxOptions) -> Result<ScalarField> {
    let grid = phi0.grid();
    if !grid.is_flat() {
        return Err(Error::Unsupported(
            "inf-convolution needs geodesic distances; conformal bases are not supported".into(),
        ));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput("time must be positive".into()));
    }
    let dim = grid.dim();
    let factor = opts.upsample.unwrap_or(if dim == 1 { 16 } else { 4 }).max(1);

    if dim == 1 {
        hopf_lax_1d(phi0, t, factor, opts.refine)
    } else {
        hopf_lax_2d(phi0, t, factor)
    }
}

fn hopf_lax_1d(phi0: &ScalarField, t: f64, factor: usize, refine: bool) -> Result<ScalarField> {
    let grid = phi0.grid();
    let n = grid.n_nodes();
    let period = grid.spec().periods[0];
    let fine = grid.engine().upsample(phi0.values(), [factor, 1]);
    let nf = fine.len();
    let hf = period / nf as f64;
    let phi_min = fine.iter().cloned().fold(f64::INFINITY, f64::min);
    let half = nf / 2;

    let mut out = vec![0.0; n];
    for i in 0..n {
        let center = i * factor;
        let mut best = fine[center];
        let mut best_j = center;
        for d in 1..=half {
            let dist = d as f64 * hf;
            let quad = dist * dist / (2.0 * t);
            if quad + phi_min >= best {
                break;
            }
            for j in [(center + d) % nf, (center + nf - d) % nf] {
                let v = fine[j] + quad;
                if v < best {
                    best = v;
                    best_j = j;
                }
            }
        }
        if refine {
            best = refine_parabola(&fine, best_j, center, nf, hf, period, t).unwrap_or(best);
        }
        out[i] = best;
    }
    ScalarField::new(grid.clone(), out)
}

/// Three-point parabola through the discrete minimizer and its neighbors;
/// returns the vertex value when the local second difference is convex and
/// the minimizer is away from the wrap antipode.
fn refine_parabola(
    fine: &[f64],
    best_j: usize,
    center: usize,
    nf: usize,
    hf: f64,
    period: f64,
    t: f64,
) -> Option<f64> {
    let wrap_dist = |a: usize, b: usize| -> f64 {
        let d = (a as isize - b as isize).unsigned_abs() % nf;
        let d = d.min(nf - d);
        d as f64 * hf
    };
    if wrap_dist(best_j, center) > 0.4 * period {
        return None;
    }
    let value = |j: usize| -> f64 {
        let d = wrap_dist(j, center);
        fine[j] + d * d / (2.0 * t)
    };
    let (fm, f0, fp) =
        (value((best_j + nf - 1) % nf), value(best_j), value((best_j + 1) % nf));
    let second = fp - 2.0 * f0 + fm;
    if second <= 1e-300 {
        return None;
    }
    let correction = (fp - fm) * (fp - fm) / (8.0 * second);
    Some(f0 - correction)
}

fn hopf_lax_2d(phi0: &ScalarField, t: f64, factor: usize) -> Result<ScalarField> {
    let grid = phi0.grid();
    let shape = grid.shape();
    let (n0, n1) = (shape[0], shape[1]);
    let periods = &grid.spec().periods;
    let fine = grid.engine().upsample(phi0.values(), [factor, factor]);
    let (m0, m1) = (n0 * factor, n1 * factor);
    let (h0, h1) = (periods[0] / m0 as f64, periods[1] / m1 as f64);
    let phi_min = fine.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut out = vec![0.0; n0 * n1];
    for i0 in 0..n0 {
        for i1 in 0..n1 {
            let (c0, c1) = (i0 * factor, i1 * factor);
            let mut best = fine[c0 * m1 + c1];
            for d0 in 0..=(m0 / 2) {
                let dist0 = d0 as f64 * h0;
                let quad0 = dist0 * dist0 / (2.0 * t);
                if quad0 + phi_min >= best {
                    break;
                }
                let rows: &[usize] = if d0 == 0 || d0 == m0 / 2 {
                    &[(c0 + d0) % m0]
                } else {
                    &[(c0 + d0) % m0, (c0 + m0 - d0) % m0]
                };
                for &r in rows {
                    let base = r * m1;
                    for d1 in 0..=(m1 / 2) {
                        let dist1 = d1 as f64 * h1;
                        let quad = quad0 + dist1 * dist1 / (2.0 * t);
                        if quad + phi_min >= best {
                            break;
                        }
                        let cols: &[usize] = if d1 == 0 || d1 == m1 / 2 {
                            &[(c1 + d1) % m1]
                        } else {
                            &[(c1 + d1) % m1, (c1 + m1 - d1) % m1]
                        };
                        for &c in cols {
                            let v = fine[base + c] + quad;
                            if v < best {
                                best = v;
                            }
                        }
                    }
                }
            }
            out[i0 * n1 + i1] = best;
        }
    }
    ScalarField::new(grid.clone(), out)
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
    fn shock_horizon_of_sine() {
        let grid = circle(64);
        let phi = ScalarField::from_fn(grid, |x, _| 0.05 * x.sin());
        let h = shock_horizon(&phi);
        assert!((h - 20.0).abs() < 1e-6, "{h}");
    }

    #[test]
    fn shock_horizon_infinite_for_constant() {
        let grid = circle(16);
        assert!(shock_horizon(&ScalarField::constant(grid, 1.0)).is_infinite());
    }

    #[test]
    fn zero_potential_gives_constant_curve() {
        let grid = circle(32);
        let rho = Density::from_fn(grid.clone(), |x, _| 1.0 + 0.4 * x.cos()).unwrap();
        let phi = Potential::zero(grid);
        let curve = geodesic_flow(&rho, &phi, 1.0, 16, &GeodesicOptions::default()).unwrap();
        let last = curve.density(curve.len() - 1);
        let drift: f64 = last
            .values()
            .iter()
            .zip(rho.values())
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-14);
    }

    #[test]
    fn refuses_horizons_past_shock_guard() {
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let phi = Potential::from_fn(&rho, |x, _| x.sin()).unwrap();
        // shock time is 1.0 here
        assert!(matches!(
            geodesic_flow(&rho, &phi, 0.9, 64, &GeodesicOptions::default()),
            Err(Error::ShockHorizon { .. })
        ));
    }

    #[test]
    fn geodesic_energy_is_conserved() {
        let grid = circle(64);
        let rho = Density::uniform(grid.clone());
        let phi = Potential::from_fn(&rho, |x, _| 0.05 * x.sin()).unwrap();
        let curve = geodesic_flow(&rho, &phi, 0.5, 64, &GeodesicOptions::default()).unwrap();
        let e0 = crate::density::otto_inner(curve.density(0), curve.potential(0), curve.potential(0))
            .unwrap();
        let mut worst = 0.0_f64;
        for j in 0..curve.len() {
            let e = crate::density::otto_inner(
                curve.density(j),
                curve.potential(j),
                curve.potential(j),
            )
            .unwrap();
            worst = worst.max((e - e0).abs());
        }
        assert!(worst < 1e-10, "energy drift {worst}");
    }

    #[test]
    fn hopf_lax_of_constant_is_constant() {
        let grid = circle(32);
        let phi = ScalarField::constant(grid, 1.25);
        let out = hopf_lax(&phi, 0.7, &HopfLaxOptions::default()).unwrap();
        for &v in out.values() {
            assert!((v - 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn hopf_lax_of_zero_is_zero() {
        let grid = build_grid(&ManifoldSpec::flat_torus(TAU, TAU), &[16, 16]).unwrap();
        let out = hopf_lax(&ScalarField::zeros(grid), 0.3, &HopfLaxOptions::default()).unwrap();
        assert!(out.max_abs() < 1e-12);
    }

    #[test]
    fn hopf_lax_rejects_conformal_base_and_bad_time() {
        let spec = ManifoldSpec::conformal_torus(
            TAU,
            TAU,
            vec![crate::manifold::Harmonic { amplitude: 0.3, kx: 1, ky: 0, phase: 0.0 }],
        );
        let grid = build_grid(&spec, &[16, 16]).unwrap();
        let phi = ScalarField::zeros(grid);
        assert!(matches!(
            hopf_lax(&phi, 0.5, &HopfLaxOptions::default()),
            Err(Error::Unsupported(_))
        ));
        let grid = circle(16);
        let phi = ScalarField::zeros(grid);
        assert!(hopf_lax(&phi, 0.0, &HopfLaxOptions::default()).is_err());
    }

    #[test]
    fn hopf_lax_agrees_with_finer_candidate_grid() {
        let coarse_grid = circle(128);
        let phi_c = ScalarField::from_fn(coarse_grid.clone(), |x, _| 0.05 * x.sin());
        let out_c = hopf_lax(&phi_c, 0.5, &HopfLaxOptions::default()).unwrap();

        let fine_grid = circle(1280);
        let phi_f = ScalarField::from_fn(fine_grid.clone(), |x, _| 0.05 * x.sin());
        let out_f = hopf_lax(&phi_f, 0.5, &HopfLaxOptions::default()).unwrap();

        let mut worst = 0.0_f64;
        for i in 0..128 {
            worst = worst.max((out_c.values()[i] - out_f.values()[10 * i]).abs());
        }
        assert!(worst < 1e-6, "refinement disagreement {worst}");
    }
}

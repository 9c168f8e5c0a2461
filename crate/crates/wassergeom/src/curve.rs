//! Time-sampled curves of densities paired with their velocity potentials.
//!
//! A curve stores samples `(t_j, rho_j, phi_j)` whose pairs must satisfy the
//! continuity equation `d rho/dt = -div(rho grad phi)` up to a stated
//! tolerance, checked with midpoint differencing at construction. Between
//! samples both fields are interpolated linearly in time.

use std::sync::Arc;

use crate::density::{density_variation, Density, Potential};
use crate::elliptic::{solve_green, SolverOptions};
use crate::error::{Error, Result};
use crate::field::{require_same_grid, ScalarField};
use crate::grid::Grid;

pub struct DensityCurve {
    times: Vec<f64>,
    densities: Vec<Density>,
    potentials: Vec<Potential>,
    /// Additive constants restoring the raw (ungauged) potential evolution,
    /// one per sample; zero unless the producer tracks them.
    gauge_offsets: Vec<f64>,
    continuity_residual: f64,
    tolerance: f64,
}

impl DensityCurve {
    pub fn new(
        times: Vec<f64>,
        densities: Vec<Density>,
        potentials: Vec<Potential>,
        tolerance: f64,
    ) -> Result<Self> {
        Self::with_offsets(times, densities, potentials, vec![], tolerance)
    }

    pub fn with_offsets(
        times: Vec<f64>,
        densities: Vec<Density>,
        potentials: Vec<Potential>,
        mut gauge_offsets: Vec<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        if times.len() < 2 || times.len() != densities.len() || times.len() != potentials.len() {
            return Err(Error::InvalidInput("curve needs matching time/sample counts".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("curve times must be strictly increasing".into()));
        }
        if gauge_offsets.is_empty() {
            gauge_offsets = vec![0.0; times.len()];
        }
        if gauge_offsets.len() != times.len() {
            return Err(Error::InvalidInput("gauge offset count mismatch".into()));
        }
        let grid = densities[0].grid().clone();
        for (d, p) in densities.iter().zip(&potentials) {
            require_same_grid(&grid, d.grid())?;
            require_same_grid(&grid, p.grid())?;
        }

        let continuity_residual =
            continuity_residual(&grid, &times, &densities, &potentials)?;
        if continuity_residual > tolerance {
            return Err(Error::ContinuityResidual { residual: continuity_residual, tolerance });
        }
        Ok(Self { times, densities, potentials, gauge_offsets, continuity_residual, tolerance })
    }

    /// Build a curve from an analytic density path: the potential at each
    /// sample is recovered from the continuity equation by a Green solve of
    /// `(1/rho) d rho/dt`.
    pub fn from_density_path(
        times: Vec<f64>,
        rho_at: impl Fn(f64) -> Result<Density>,
        drho_at: impl Fn(f64) -> Result<ScalarField>,
        tolerance: f64,
        opts: &SolverOptions,
    ) -> Result<Self> {
        let mut densities = Vec::with_capacity(times.len());
        let mut potentials = Vec::with_capacity(times.len());
        for &t in &times {
            let rho = rho_at(t)?;
            let drho = drho_at(t)?;
            let f = ScalarField::new(
                rho.grid().clone(),
                drho.values().iter().zip(rho.values()).map(|(&d, &r)| d / r).collect(),
            )?;
            let phi = solve_green(&rho, &f, opts)?;
            densities.push(rho);
            potentials.push(phi);
        }
        Self::new(times, densities, potentials, tolerance)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.densities[0].grid()
    }

    /// Number of time samples (always at least two).
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, j: usize) -> f64 {
        self.times[j]
    }

    pub fn density(&self, j: usize) -> &Density {
        &self.densities[j]
    }

    pub fn potential(&self, j: usize) -> &Potential {
        &self.potentials[j]
    }

    pub fn gauge_offset(&self, j: usize) -> f64 {
        self.gauge_offsets[j]
    }

    pub fn continuity_residual(&self) -> f64 {
        self.continuity_residual
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let t = t.clamp(self.start_time(), self.end_time());
        let hi = match self.times.iter().position(|&tj| tj >= t) {
            Some(0) => 1,
            Some(j) => j,
            None => self.times.len() - 1,
        };
        let lo = hi - 1;
        let theta = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        (lo, hi, theta)
    }

    /// Density at an arbitrary time, interpolated linearly and renormalized.
    pub fn density_at(&self, t: f64) -> Result<Density> {
        let (lo, hi, theta) = self.bracket(t);
        let values: Vec<f64> = self.densities[lo]
            .values()
            .iter()
            .zip(self.densities[hi].values())
            .map(|(&a, &b)| (1.0 - theta) * a + theta * b)
            .collect();
        Density::new(ScalarField::new(self.grid().clone(), values)?)
    }

    /// Potential field at an arbitrary time (linear interpolation of the
    /// gauged representatives; constants are immaterial to the dynamics).
    pub fn potential_field_at(&self, t: f64) -> Result<ScalarField> {
        let (lo, hi, theta) = self.bracket(t);
        let values: Vec<f64> = self.potentials[lo]
            .values()
            .iter()
            .zip(self.potentials[hi].values())
            .map(|(&a, &b)| (1.0 - theta) * a + theta * b)
            .collect();
        ScalarField::new(self.grid().clone(), values)
    }

    /// Smooth reparametrization: `map` sends the new parameter s in
    /// [s0, s1] to curve time monotonically, and the potentials pick up the
    /// dt/ds factor so the continuity equation holds in the new parameter.
    pub fn reparametrize(
        &self,
        map: impl Fn(f64) -> f64,
        new_samples: usize,
        s_range: (f64, f64),
        tolerance: f64,
    ) -> Result<Self> {
        if new_samples < 2 {
            return Err(Error::InvalidInput("need at least two samples".into()));
        }
        let (s0, s1) = s_range;
        let ds = (s1 - s0) / (new_samples - 1) as f64;
        let mut times = Vec::with_capacity(new_samples);
        let mut densities = Vec::with_capacity(new_samples);
        let mut potentials = Vec::with_capacity(new_samples);
        let h = 1e-6 * (s1 - s0);
        for k in 0..new_samples {
            let s = s0 + k as f64 * ds;
            let t = map(s);
            let speed = (map((s + h).min(s1)) - map((s - h).max(s0)))
                / ((s + h).min(s1) - (s - h).max(s0));
            let rho = self.density_at(t)?;
            let phi = self.potential_field_at(t)?.scale(speed);
            potentials.push(Potential::new(&rho, phi)?);
            densities.push(rho);
            times.push(s);
        }
        Self::new(times, densities, potentials, tolerance)
    }
}

fn continuity_residual(
    grid: &Arc<Grid>,
    times: &[f64],
    densities: &[Density],
    potentials: &[Potential],
) -> Result<f64> {
    let mut worst = 0.0_f64;
    for j in 0..times.len() - 1 {
        let dt = times[j + 1] - times[j];
        let rho_mid = ScalarField::new(
            grid.clone(),
            densities[j]
                .values()
                .iter()
                .zip(densities[j + 1].values())
                .map(|(&a, &b)| 0.5 * (a + b))
                .collect(),
        )?;
        let phi_mid = ScalarField::new(
            grid.clone(),
            potentials[j]
                .values()
                .iter()
                .zip(potentials[j + 1].values())
                .map(|(&a, &b)| 0.5 * (a + b))
                .collect(),
        )?;
        let motion = density_variation(&rho_mid, &phi_mid)?;
        let defect: Vec<f64> = densities[j]
            .values()
            .iter()
            .zip(densities[j + 1].values())
            .zip(motion.values())
            .map(|((&a, &b), &m)| (b - a) / dt - m)
            .collect();
        let norm = defect
            .iter()
            .zip(grid.weights())
            .map(|(&d, &w)| d * d * w)
            .sum::<f64>()
            .sqrt();
        worst = worst.max(norm);
    }
    Ok(worst)
}

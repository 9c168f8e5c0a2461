//! Compact base manifolds: the circle, the flat 2-torus and conformally
//! flat 2-tori `g = exp(2u) g_flat` with a trigonometric conformal factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Supported base manifolds. All are periodic, so every field lives on a
/// uniform tensor-product grid and spectral differentiation applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldKind {
    Circle,
    FlatTorus2d,
    ConformalTorus2d,
}

/// One trigonometric term of the conformal factor:
/// `amplitude * cos(2*pi*(kx*x/Lx + ky*y/Ly) + phase)`.
///
/// Sums of such terms are smooth and periodic by construction, and carry
/// analytic first derivatives and Laplacians, which the grid builder uses
/// for Christoffel symbols and Gaussian curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonic {
    pub amplitude: f64,
    pub kx: i32,
    pub ky: i32,
    #[serde(default)]
    pub phase: f64,
}

/// Description of a base manifold, sufficient to rebuild a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    /// Period length per axis (one entry for the circle, two for tori).
    pub periods: Vec<f64>,
    /// Conformal factor terms; empty unless `kind` is `ConformalTorus2d`.
    #[serde(default)]
    pub conformal: Vec<Harmonic>,
}

impl ManifoldSpec {
    pub fn circle(period: f64) -> Self {
        Self { kind: ManifoldKind::Circle, periods: vec![period], conformal: Vec::new() }
    }

    pub fn flat_torus(lx: f64, ly: f64) -> Self {
        Self { kind: ManifoldKind::FlatTorus2d, periods: vec![lx, ly], conformal: Vec::new() }
    }

    pub fn conformal_torus(lx: f64, ly: f64, conformal: Vec<Harmonic>) -> Self {
        Self { kind: ManifoldKind::ConformalTorus2d, periods: vec![lx, ly], conformal }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle => 1,
            ManifoldKind::FlatTorus2d | ManifoldKind::ConformalTorus2d => 2,
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self.kind, ManifoldKind::ConformalTorus2d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.periods.len() != self.dim() {
            return Err(Error::InvalidSpec(format!(
                "expected {} period lengths, got {}",
                self.dim(),
                self.periods.len()
            )));
        }
        if self.periods.iter().any(|&p| !p.is_finite() || p <= 0.0) {
            return Err(Error::InvalidSpec("period lengths must be positive".into()));
        }
        match self.kind {
            ManifoldKind::ConformalTorus2d => {
                if self.conformal.iter().any(|h| !h.amplitude.is_finite() || !h.phase.is_finite()) {
                    return Err(Error::InvalidSpec("conformal factor must be finite".into()));
                }
            }
            _ if !self.conformal.is_empty() => {
                return Err(Error::InvalidSpec(
                    "conformal terms are only valid on the conformal torus".into(),
                ));
            }
            _ => {}
        }
        Ok(())
    }

    fn angles(&self, x: f64, y: f64, h: &Harmonic) -> f64 {
        let two_pi = std::f64::consts::TAU;
        let mut a = two_pi * f64::from(h.kx) * x / self.periods[0] + h.phase;
        if self.dim() == 2 {
            a += two_pi * f64::from(h.ky) * y / self.periods[1];
        }
        a
    }

    /// Conformal factor u at a point (zero on flat manifolds).
    pub fn u(&self, x: f64, y: f64) -> f64 {
        self.conformal.iter().map(|h| h.amplitude * self.angles(x, y, h).cos()).sum()
    }

    /// Analytic gradient of u in flat coordinates.
    pub fn du(&self, x: f64, y: f64) -> [f64; 2] {
        let two_pi = std::f64::consts::TAU;
        let mut g = [0.0, 0.0];
        for h in &self.conformal {
            let s = -h.amplitude * self.angles(x, y, h).sin();
            g[0] += s * two_pi * f64::from(h.kx) / self.periods[0];
            if self.dim() == 2 {
                g[1] += s * two_pi * f64::from(h.ky) / self.periods[1];
            }
        }
        g
    }

    /// Analytic flat Laplacian of u.
    pub fn laplacian_u(&self, x: f64, y: f64) -> f64 {
        let two_pi = std::f64::consts::TAU;
        let mut l = 0.0;
        for h in &self.conformal {
            let kx = two_pi * f64::from(h.kx) / self.periods[0];
            let ky = if self.dim() == 2 { two_pi * f64::from(h.ky) / self.periods[1] } else { 0.0 };
            l -= h.amplitude * (kx * kx + ky * ky) * self.angles(x, y, h).cos();
        }
        l
    }
}

//! Fourier machinery for uniform periodic grids: spectral differentiation,
//! high-mode filtering, the flat inverse Laplacian, band-limited upsampling
//! and trigonometric point evaluation.
//!
//! Layout convention: fields are stored node-major with the last axis
//! contiguous (`index = i0 * n1 + i1` in 2-d, plain `i0` in 1-d).

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Spatial differentiation scheme. Spectral is the default; the 4th-order
/// centered stencil exists as a cross-check fallback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffScheme {
    Spectral,
    CenteredFd4,
}

struct AxisPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Signed wavenumbers 2*pi*m/L in FFT order.
    wavenumbers: Vec<f64>,
}

impl AxisPlan {
    fn new(planner: &mut FftPlanner<f64>, n: usize, period: f64) -> Self {
        let dk = std::f64::consts::TAU / period;
        let half = n / 2;
        let wavenumbers = (0..n)
            .map(|m| {
                let signed = if m <= half { m as i64 } else { m as i64 - n as i64 };
                signed as f64 * dk
            })
            .collect();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers,
        }
    }

    fn is_nyquist(&self, m: usize) -> bool {
        self.n % 2 == 0 && m == self.n / 2
    }
}

/// FFT plans and wavenumber tables for one grid shape.
pub struct SpectralEngine {
    shape: [usize; 2],
    dim: usize,
    steps: [f64; 2],
    axes: Vec<AxisPlan>,
}

impl SpectralEngine {
    pub fn new(shape: &[usize], periods: &[f64]) -> Self {
        let dim = shape.len();
        assert!(dim == 1 || dim == 2);
        let mut planner = FftPlanner::new();
        let axes: Vec<AxisPlan> =
            shape.iter().zip(periods).map(|(&n, &p)| AxisPlan::new(&mut planner, n, p)).collect();
        let full_shape = [shape[0], if dim == 2 { shape[1] } else { 1 }];
        let steps = [
            periods[0] / shape[0] as f64,
            if dim == 2 { periods[1] / shape[1] as f64 } else { 1.0 },
        ];
        Self { shape: full_shape, dim, steps, axes }
    }

    pub fn n_nodes(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Forward transform of a real field into its full complex spectrum,
    /// in FFT index order and unnormalized.
    pub fn to_spectrum(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform_in_place(&mut data, true);
        data
    }

    /// Inverse of [`to_spectrum`](Self::to_spectrum), dropping imaginary parts.
    pub fn from_spectrum(&self, mut spectrum: Vec<Complex<f64>>) -> Vec<f64> {
        self.transform_in_place(&mut spectrum, false);
        let scale = 1.0 / self.n_nodes() as f64;
        spectrum.iter().map(|c| c.re * scale).collect()
    }

    fn transform_in_place(&self, data: &mut [Complex<f64>], forward: bool) {
        let [n0, n1] = self.shape;
        // axis 1: contiguous lines
        if self.dim == 2 {
            let plan = if forward { &self.axes[1].forward } else { &self.axes[1].inverse };
            for line in data.chunks_exact_mut(n1) {
                plan.process(line);
            }
        }
        // axis 0: strided, gathered through a scratch buffer
        let plan = if forward { &self.axes[0].forward } else { &self.axes[0].inverse };
        let mut scratch = vec![Complex::new(0.0, 0.0); n0];
        for i1 in 0..n1 {
            for i0 in 0..n0 {
                scratch[i0] = data[i0 * n1 + i1];
            }
            plan.process(&mut scratch);
            for i0 in 0..n0 {
                data[i0 * n1 + i1] = scratch[i0];
            }
        }
    }

    /// Apply a spectral multiplier `sym(k0, k1, nyq0, nyq1)`.
    pub fn apply<F>(&self, values: &[f64], sym: F) -> Vec<f64>
    where
        F: Fn(f64, f64, bool, bool) -> Complex<f64>,
    {
        let [n0, n1] = self.shape;
        let mut spectrum = self.to_spectrum(values);
        for m0 in 0..n0 {
            let k0 = self.axes[0].wavenumbers[m0];
            let ny0 = self.axes[0].is_nyquist(m0);
            for m1 in 0..n1 {
                let (k1, ny1) = if self.dim == 2 {
                    (self.axes[1].wavenumbers[m1], self.axes[1].is_nyquist(m1))
                } else {
                    (0.0, false)
                };
                spectrum[m0 * n1 + m1] *= sym(k0, k1, ny0, ny1);
            }
        }
        self.from_spectrum(spectrum)
    }

    /// Coordinate partial along `axis`; the unpaired Nyquist mode is dropped,
    /// matching the derivative of the symmetric trigonometric interpolant.
    pub fn partial(&self, values: &[f64], axis: usize, scheme: DiffScheme) -> Vec<f64> {
        match scheme {
            DiffScheme::Spectral => self.apply(values, |k0, k1, ny0, ny1| {
                let (k, ny) = if axis == 0 { (k0, ny0) } else { (k1, ny1) };
                if ny {
                    Complex::new(0.0, 0.0)
                } else {
                    Complex::new(0.0, k)
                }
            }),
            DiffScheme::CenteredFd4 => self.partial_fd4(values, axis),
        }
    }

    /// Pure second coordinate partial d^2/dx_i dx_j.
    pub fn second_partial(
        &self,
        values: &[f64],
        i: usize,
        j: usize,
        scheme: DiffScheme,
    ) -> Vec<f64> {
        match scheme {
            DiffScheme::Spectral => {
                if i == j {
                    self.apply(values, |k0, k1, _, _| {
                        let k = if i == 0 { k0 } else { k1 };
                        Complex::new(-k * k, 0.0)
                    })
                } else {
                    self.apply(values, |k0, k1, ny0, ny1| {
                        if ny0 || ny1 {
                            Complex::new(0.0, 0.0)
                        } else {
                            Complex::new(-k0 * k1, 0.0)
                        }
                    })
                }
            }
            DiffScheme::CenteredFd4 => {
                if i == j {
                    self.second_partial_fd4(values, i)
                } else {
                    let first = self.partial_fd4(values, i);
                    self.partial_fd4(&first, j)
                }
            }
        }
    }

    fn line_indices(&self, axis: usize) -> (usize, usize, usize) {
        // (lines, line length, stride)
        let [n0, n1] = self.shape;
        if axis == 0 {
            (n1, n0, n1)
        } else {
            (n0, n1, 1)
        }
    }

    fn partial_fd4(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let (lines, len, stride) = self.line_indices(axis);
        let h = self.steps[axis];
        let mut out = vec![0.0; values.len()];
        for line in 0..lines {
            let base = if axis == 0 { line } else { line * self.shape[1] };
            for p in 0..len {
                let at = |q: isize| {
                    let q = q.rem_euclid(len as isize) as usize;
                    values[base + q * stride]
                };
                let p = p as isize;
                out[base + p as usize * stride] =
                    (8.0 * (at(p + 1) - at(p - 1)) - (at(p + 2) - at(p - 2))) / (12.0 * h);
            }
        }
        out
    }

    fn second_partial_fd4(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let (lines, len, stride) = self.line_indices(axis);
        let h = self.steps[axis];
        let mut out = vec![0.0; values.len()];
        for line in 0..lines {
            let base = if axis == 0 { line } else { line * self.shape[1] };
            for p in 0..len {
                let at = |q: isize| {
                    let q = q.rem_euclid(len as isize) as usize;
                    values[base + q * stride]
                };
                let p = p as isize;
                out[base + p as usize * stride] = (-at(p + 2) + 16.0 * at(p + 1) - 30.0 * at(p)
                    + 16.0 * at(p - 1)
                    - at(p - 2))
                    / (12.0 * h * h);
            }
        }
        out
    }

    /// Smooth exponential low-pass. Modes below `cutoff * k_max` per axis are
    /// untouched; above, the amplitude is damped by
    /// `exp(-alpha * ((|k| - kc) / (k_max - kc))^order)`.
    pub fn filter(&self, values: &[f64], cutoff: f64, alpha: f64, order: i32) -> Vec<f64> {
        let kmax0 = self.axes[0].wavenumbers.iter().cloned().fold(0.0, f64::max);
        let kmax1 = if self.dim == 2 {
            self.axes[1].wavenumbers.iter().cloned().fold(0.0, f64::max)
        } else {
            1.0
        };
        let damp = |k: f64, kmax: f64| -> f64 {
            let kc = cutoff * kmax;
            let a = k.abs();
            if a <= kc || kmax <= kc {
                1.0
            } else {
                (-alpha * ((a - kc) / (kmax - kc)).powi(order)).exp()
            }
        };
        self.apply(values, |k0, k1, _, _| {
            Complex::new(damp(k0, kmax0) * (if self.dim == 2 { damp(k1, kmax1) } else { 1.0 }), 0.0)
        })
    }

    /// Inverse of the flat-metric Laplacian on mean-zero data; the zero mode
    /// of the output is zero. Used as the elliptic preconditioner.
    pub fn inverse_flat_laplacian(&self, values: &[f64]) -> Vec<f64> {
        self.apply(values, |k0, k1, _, _| {
            let k2 = k0 * k0 + k1 * k1;
            if k2 == 0.0 {
                Complex::new(0.0, 0.0)
            } else {
                Complex::new(-1.0 / k2, 0.0)
            }
        })
    }

    /// Exact trigonometric upsampling by integer factors per axis.
    pub fn upsample(&self, values: &[f64], factor: [usize; 2]) -> Vec<f64> {
        let [n0, n1] = self.shape;
        let m0 = n0 * factor[0].max(1);
        let m1 = n1 * if self.dim == 2 { factor[1].max(1) } else { 1 };
        let spectrum = self.to_spectrum(values);
        let mut padded = vec![Complex::new(0.0, 0.0); m0 * m1];
        for s0 in 0..n0 {
            // Split an even-n Nyquist coefficient across +/- frequencies so the
            // upsampled interpolant is the symmetric (real cosine) one.
            let targets0 = pad_targets(s0, n0, m0);
            for s1 in 0..n1 {
                let targets1 = if self.dim == 2 { pad_targets(s1, n1, m1) } else { vec![(0, 1.0)] };
                let c = spectrum[s0 * n1 + s1];
                for &(t0, w0) in &targets0 {
                    for &(t1, w1) in &targets1 {
                        padded[t0 * m1 + t1] += c * w0 * w1;
                    }
                }
            }
        }
        let mut planner = FftPlanner::new();
        let mut data = padded;
        if self.dim == 2 {
            let plan = planner.plan_fft_inverse(m1);
            for line in data.chunks_exact_mut(m1) {
                plan.process(line);
            }
        }
        let plan = planner.plan_fft_inverse(m0);
        let mut scratch = vec![Complex::new(0.0, 0.0); m0];
        for i1 in 0..m1 {
            for i0 in 0..m0 {
                scratch[i0] = data[i0 * m1 + i1];
            }
            plan.process(&mut scratch);
            for i0 in 0..m0 {
                data[i0 * m1 + i1] = scratch[i0];
            }
        }
        let scale = 1.0 / (n0 * n1) as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Spectrum prepared for pointwise evaluation (normalized coefficients).
    pub fn interpolant(&self, values: &[f64]) -> TrigInterpolant {
        let scale = 1.0 / self.n_nodes() as f64;
        let coeffs = self.to_spectrum(values).iter().map(|c| c * scale).collect();
        TrigInterpolant {
            coeffs,
            shape: self.shape,
            dim: self.dim,
            k0: self.axes[0].wavenumbers.clone(),
            k1: if self.dim == 2 { self.axes[1].wavenumbers.clone() } else { vec![0.0] },
        }
    }
}

/// Padding targets for one source index when zero-extending a spectrum from
/// n to m entries; an even-n Nyquist entry splits into two half-weight modes.
fn pad_targets(s: usize, n: usize, m: usize) -> Vec<(usize, f64)> {
    let half = n / 2;
    if n % 2 == 0 && s == half {
        vec![(half, 0.5), (m - half, 0.5)]
    } else if s <= half {
        vec![(s, 1.0)]
    } else {
        vec![(m - (n - s), 1.0)]
    }
}

/// Normalized Fourier coefficients of a real field, evaluable anywhere.
pub struct TrigInterpolant {
    coeffs: Vec<Complex<f64>>,
    shape: [usize; 2],
    dim: usize,
    k0: Vec<f64>,
    k1: Vec<f64>,
}

impl TrigInterpolant {
    /// Evaluate at a physical point. The unpaired Nyquist mode contributes
    /// its cosine part, matching the symmetric interpolant.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let [n0, n1] = self.shape;
        let phase0: Vec<Complex<f64>> =
            self.k0.iter().map(|&k| Complex::from_polar(1.0, k * x)).collect();
        if self.dim == 1 {
            let mut acc = Complex::new(0.0, 0.0);
            for m in 0..n0 {
                acc += self.coeffs[m] * phase0[m];
            }
            return acc.re;
        }
        let phase1: Vec<Complex<f64>> =
            self.k1.iter().map(|&k| Complex::from_polar(1.0, k * y)).collect();
        let mut acc = Complex::new(0.0, 0.0);
        for m0 in 0..n0 {
            let mut row = Complex::new(0.0, 0.0);
            let base = m0 * n1;
            for m1 in 0..n1 {
                row += self.coeffs[base + m1] * phase1[m1];
            }
            acc += row * phase0[m0];
        }
        acc.re
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine_1d(n: usize) -> SpectralEngine {
        SpectralEngine::new(&[n], &[std::f64::consts::TAU])
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let n = 64;
        let e = engine_1d(n);
        let h = std::f64::consts::TAU / n as f64;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        let d = e.partial(&f, 0, DiffScheme::Spectral);
        for i in 0..n {
            assert!((d[i] - (i as f64 * h).cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn fd4_derivative_converges() {
        let exact = |x: f64| x.cos() * x.sin().exp();
        let err = |n: usize| -> f64 {
            let e = engine_1d(n);
            let h = std::f64::consts::TAU / n as f64;
            let f: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin().exp()).collect();
            let d = e.partial(&f, 0, DiffScheme::CenteredFd4);
            (0..n).map(|i| (d[i] - exact(i as f64 * h)).abs()).fold(0.0, f64::max)
        };
        let (e32, e64) = (err(32), err(64));
        assert!(e64 < e32 / 12.0, "fd4 should be ~4th order: {e32} vs {e64}");
    }

    #[test]
    fn second_partial_matches_composed_first() {
        let n = 32;
        let e = SpectralEngine::new(&[n, n], &[std::f64::consts::TAU, std::f64::consts::TAU]);
        let h = std::f64::consts::TAU / n as f64;
        let mut f = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                f[i * n + j] = (i as f64 * h).sin() * (2.0 * j as f64 * h).cos();
            }
        }
        let direct = e.second_partial(&f, 0, 1, DiffScheme::Spectral);
        let composed = e.partial(&e.partial(&f, 0, DiffScheme::Spectral), 1, DiffScheme::Spectral);
        for (a, b) in direct.iter().zip(&composed) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn upsample_reproduces_band_limited_field() {
        let n = 16;
        let e = engine_1d(n);
        let h = std::f64::consts::TAU / n as f64;
        let f: Vec<f64> = (0..n).map(|i| (3.0 * (i as f64 * h)).sin() + 0.5).collect();
        let up = e.upsample(&f, [4, 1]);
        let hf = std::f64::consts::TAU / (4 * n) as f64;
        for (i, v) in up.iter().enumerate() {
            let x = i as f64 * hf;
            assert!((v - ((3.0 * x).sin() + 0.5)).abs() < 1e-11);
        }
    }

    #[test]
    fn interpolant_matches_nodes_and_offsets() {
        let n = 32;
        let e = engine_1d(n);
        let h = std::f64::consts::TAU / n as f64;
        let f: Vec<f64> = (0..n).map(|i| (2.0 * i as f64 * h).cos() - 0.3).collect();
        let interp = e.interpolant(&f);
        assert!((interp.eval(5.0 * h, 0.0) - f[5]).abs() < 1e-12);
        let x = 1.2345;
        assert!((interp.eval(x, 0.0) - ((2.0 * x).cos() - 0.3)).abs() < 1e-12);
    }

    #[test]
    fn filter_preserves_low_modes() {
        let n = 48;
        let e = engine_1d(n);
        let h = std::f64::consts::TAU / n as f64;
        let f: Vec<f64> = (0..n).map(|i| (3.0 * i as f64 * h).sin()).collect();
        let filtered = e.filter(&f, 2.0 / 3.0, 36.0, 4);
        for (a, b) in f.iter().zip(&filtered) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_laplacian_solves_poisson() {
        let n = 32;
        let e = engine_1d(n);
        let h = std::f64::consts::TAU / n as f64;
        // -u'' = 4 sin 2x  =>  u = sin 2x
        let rhs: Vec<f64> = (0..n).map(|i| 4.0 * (2.0 * i as f64 * h).sin()).collect();
        let u = e.inverse_flat_laplacian(&rhs.iter().map(|v| -v).collect::<Vec<_>>());
        for i in 0..n {
            assert!((u[i] - (2.0 * i as f64 * h).sin()).abs() < 1e-12);
        }
    }
}

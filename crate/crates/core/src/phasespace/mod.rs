//! Phase-space grids, the FFT Wigner transform and its ε-scaled Gaussian
//! smoothing.
//!
//! Both axes use the endpoint-excluded convention of [`WavefunctionGrid`]:
//! node `i` sits at `x_min + i·Δx` with `Δx = (x_max − x_min)/n_x`, and
//! likewise in k. The x-axis is periodic (it inherits the periodic spatial
//! domain). The k-axis is periodic only when the grid carries the FFT's full
//! natural wavenumber period `ε/Δx`; a cropped k-axis is treated as zero
//! outside its extent.
//!
//! [`WavefunctionGrid`]: crate::signals::WavefunctionGrid

mod smoothing;
mod wigner;

use std::f64::consts::PI;

pub use smoothing::{smooth, smooth_owned, smoothed_density_1d, AxisKernel};
pub use wigner::{swt, wigner_transform, SwtTimings};

use crate::error::{Error, Result};

/// Default kernel truncation radius in standard deviations.
///
/// Seven standard deviations leave a Gaussian tail of ≈2.6e-12 of the mass,
/// small enough that the Husimi-scale positivity of the smoothed transform
/// survives truncation at the 1e-10 level.
pub const DEFAULT_TRUNCATION_RADIUS: f64 = 7.0;

/// Rectangular (x, k) grid geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseGeometry {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub k_min: f64,
    pub k_max: f64,
    pub n_k: usize,
}

impl PhaseGeometry {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, k_min: f64, k_max: f64, n_k: usize) -> Result<Self> {
        let ok = |a: f64, b: f64, n: usize| a.is_finite() && b.is_finite() && b > a && n > 0;
        if !ok(x_min, x_max, n_x) || !ok(k_min, k_max, n_k) {
            return Err(Error::InvalidGrid(format!(
                "degenerate geometry x:[{x_min}, {x_max}) x {n_x}, k:[{k_min}, {k_max}) x {n_k}"
            )));
        }
        Ok(Self { x_min, x_max, n_x, k_min, k_max, n_k })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_x as f64
    }

    pub fn dk(&self) -> f64 {
        (self.k_max - self.k_min) / self.n_k as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn k(&self, j: usize) -> f64 {
        self.k_min + j as f64 * self.dk()
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_k
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Real samples of a (smoothed) Wigner transform, row-major with x as the
/// slow index: `values[i·n_k + j] = W(x_i, k_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    pub geometry: PhaseGeometry,
    pub values: Vec<f64>,
    pub epsilon: f64,
    /// 0 on both axes encodes an unsmoothed WT.
    pub sigma_x: f64,
    pub sigma_k: f64,
    pub time_stamp: f64,
}

impl PhaseSpaceGrid {
    pub fn zeros(geometry: PhaseGeometry, epsilon: f64) -> Self {
        Self { geometry, values: vec![0.0; geometry.len()], epsilon, sigma_x: 0.0, sigma_k: 0.0, time_stamp: 0.0 }
    }

    pub fn n_x(&self) -> usize {
        self.geometry.n_x
    }

    pub fn n_k(&self) -> usize {
        self.geometry.n_k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.geometry.n_k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n_k = self.geometry.n_k;
        &self.values[i * n_k..(i + 1) * n_k]
    }

    pub fn is_smoothed(&self) -> bool {
        self.sigma_x > 0.0 || self.sigma_k > 0.0
    }

    /// True when the k-axis spans exactly the natural FFT period ε/Δx.
    pub fn k_is_periodic(&self) -> bool {
        let period = self.epsilon / self.geometry.dx();
        let extent = self.geometry.k_max - self.geometry.k_min;
        (extent - period).abs() <= 1e-9 * period
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Quadrature weights along k: plain sum on a periodic axis, trapezoid
    /// (half end weights) otherwise.
    pub fn k_weights(&self) -> Vec<f64> {
        let n_k = self.geometry.n_k;
        let dk = self.geometry.dk();
        let mut w = vec![dk; n_k];
        if !self.k_is_periodic() && n_k > 1 {
            w[0] *= 0.5;
            w[n_k - 1] *= 0.5;
        }
        w
    }

    /// ∫W dk for every x-row.
    pub fn marginal_x(&self) -> Vec<f64> {
        let w = self.k_weights();
        (0..self.geometry.n_x).map(|i| self.row(i).iter().zip(&w).map(|(v, w)| v * w).sum()).collect()
    }

    /// ∫W dx for every k-column (periodic x-axis: plain sum).
    pub fn marginal_k(&self) -> Vec<f64> {
        let n_k = self.geometry.n_k;
        let dx = self.geometry.dx();
        let mut out = vec![0.0; n_k];
        for row in self.values.chunks_exact(n_k) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out.iter_mut().for_each(|v| *v *= dx);
        out
    }

    /// ∬W dx dk.
    pub fn mass(&self) -> f64 {
        self.marginal_x().iter().sum::<f64>() * self.geometry.dx()
    }
}

/// Parameters of the ε-scaled tensor Gaussian
/// `(2/(ε σx σk))·exp(−2π(x−x′)²/(ε σx²) − 2π(k−k′)²/(ε σk²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingKernelSpec {
    pub sigma_x: f64,
    pub sigma_k: f64,
    /// Truncation radius in standard deviations.
    pub truncation_radius: f64,
}

impl Default for SmoothingKernelSpec {
    fn default() -> Self {
        Self { sigma_x: 1.0, sigma_k: 1.0, truncation_radius: DEFAULT_TRUNCATION_RADIUS }
    }
}

impl SmoothingKernelSpec {
    pub fn new(sigma_x: f64, sigma_k: f64) -> Result<Self> {
        let spec = Self { sigma_x, sigma_k, truncation_radius: DEFAULT_TRUNCATION_RADIUS };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x > 0.0 && self.sigma_k > 0.0 && self.sigma_x.is_finite() && self.sigma_k.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "smoothing widths must be positive, got sigma_x = {}, sigma_k = {}",
                self.sigma_x, self.sigma_k
            )));
        }
        if !(self.truncation_radius > 0.0 && self.truncation_radius.is_finite()) {
            return Err(Error::InvalidArgument("truncation radius must be positive".into()));
        }
        Ok(())
    }

    /// Standard deviation of the x-factor, √(ε σx²/(4π)).
    pub fn std_x(&self, epsilon: f64) -> f64 {
        gaussian_std(epsilon, self.sigma_x)
    }

    /// Standard deviation of the k-factor, √(ε σk²/(4π)).
    pub fn std_k(&self, epsilon: f64) -> f64 {
        gaussian_std(epsilon, self.sigma_k)
    }

    /// Kernel sample counts (L_x, L_k) on a grid with spacings (Δx, Δk).
    pub fn sample_counts(&self, epsilon: f64, dx: f64, dk: f64) -> (usize, usize) {
        let lx = AxisKernel::new(self.std_x(epsilon), dx, self.truncation_radius).len();
        let lk = AxisKernel::new(self.std_k(epsilon), dk, self.truncation_radius).len();
        (lx, lk)
    }
}

/// Standard deviation of the ε-scaled Gaussian factor with width σ.
pub fn gaussian_std(epsilon: f64, sigma: f64) -> f64 {
    (epsilon * sigma * sigma / (4.0 * PI)).sqrt()
}

#[cfg(test)]
mod tests;

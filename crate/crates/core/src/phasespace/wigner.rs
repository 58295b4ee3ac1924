//! FFT evaluation of the scaled Wigner transform
//!
//! ```text
//! W(x, k) = (2/ε) ∫ exp(−4πi k s/ε) f(x+s) f̄(x−s) ds
//! ```
//!
//! on the lags `s_m = m·Δx/2`, `m ∈ [−M/2, M/2)`, so that `x ± s` lands on
//! grid points (even m) or half-grid points (odd m). With `k_p = p·ε/(MΔx)`
//! the lag sum is a length-M DFT:
//!
//! ```text
//! W(x_j, k_p) = (Δx/ε) ∑_m R_j(m) exp(−2πi p m/M),   R_j(m) = f(x_j+s_m) f̄(x_j−s_m)
//! ```
//!
//! `R_j` is Hermitian in m, so the DFT is real up to rounding; the
//! unmatched lag `−M/2` is replaced by its real part to keep that symmetry.
//! Summing over p gives `∑_p W Δk = |f_j|²` exactly: the x-marginal identity
//! holds to rounding on the full natural k-axis.
//!
//! Positivity of the smoothed transform at σx·σk ≥ 1 is only approximate on
//! this lattice: odd lags pair half-grid points whose product is attached to
//! a grid midpoint, which is not a sum of squares. The defect is an aliasing
//! term; it is at rounding level when f is resolved (Nyquist wavenumber above
//! its spectral support), decays at the periodic seam, and the lag span
//! M·Δx/4 covers the smoothing window, and grows quickly otherwise.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{smooth_owned, PhaseGeometry, PhaseSpaceGrid, SmoothingKernelSpec};
use crate::error::{Error, Result};
use crate::signals::WavefunctionGrid;

/// Below this length, half-grid values are linear interpolants; at and above
/// it they are band-limited (FFT) interpolants.
const SPECTRAL_HALF_GRID_MIN: usize = 256;

/// Relative bound on the discarded imaginary part.
const IMAGINARY_RESIDUE_TOL: f64 = 1e-10;

/// Wall-clock split of [`swt`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SwtTimings {
    pub wt: f64,
    pub smooth: f64,
}

/// f at the half-grid points x_j + Δx/2.
fn half_grid(values: &[Complex64]) -> Vec<Complex64> {
    let n = values.len();
    if n < SPECTRAL_HALF_GRID_MIN {
        return (0..n).map(|j| 0.5 * (values[j] + values[(j + 1) % n])).collect();
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut buf = values.to_vec();
    fwd.process(&mut buf);
    for (m, c) in buf.iter_mut().enumerate() {
        let freq = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
        if m == n / 2 {
            // The Nyquist mode cos(πj) vanishes at half-integers.
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= Complex64::from_polar(1.0 / n as f64, std::f64::consts::PI * freq / n as f64);
        }
    }
    inv.process(&mut buf);
    buf
}

/// Scaled Wigner transform of `f` with FFT length `n_k` (a power of two, at
/// most 2·n_x), cropped to the symmetric band `[−K, K)` with `K ≥ k_max`
/// the nearest natural-grid wavenumber at or above `k_max`.
pub fn wigner_transform(f: &WavefunctionGrid, n_k: usize, k_max: f64) -> Result<PhaseSpaceGrid> {
    let n_x = f.n_x();
    if !n_k.is_power_of_two() || n_k < 2 {
        return Err(Error::InvalidGrid(format!("n_k = {n_k} must be a power of two >= 2")));
    }
    if n_k > 2 * n_x {
        return Err(Error::InvalidGrid(format!(
            "n_k = {n_k} lags would wrap the periodic domain more than once (n_x = {n_x})"
        )));
    }
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("k_max must be positive, got {k_max}")));
    }
    let dx = f.dx();
    let eps = f.epsilon;
    let dk = eps / (n_k as f64 * dx);
    let half = n_k / 2;
    let natural = half as f64 * dk;
    let p_max = (k_max / dk - 1e-9).ceil().max(1.0) as usize;
    if p_max > half {
        return Err(Error::InsufficientNk { k_max, natural });
    }
    let n_out = 2 * p_max;
    let geometry = PhaseGeometry::new(f.x_min, f.x_max, n_x, -(p_max as f64) * dk, p_max as f64 * dk, n_out)?;

    let g = &f.values;
    let h = half_grid(g);
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n_k);
    let scale = dx / eps;
    let mut values = vec![0.0; n_x * n_out];
    let residue = values
        .par_chunks_mut(n_out)
        .enumerate()
        .map_init(
            || (vec![Complex64::new(0.0, 0.0); n_k], vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()]),
            |(buf, scratch), (j, out)| {
                let wrap = |i: isize| i.rem_euclid(n_x as isize) as usize;
                let ji = j as isize;
                for (slot, m) in buf.iter_mut().zip(0..n_k) {
                    // slot index m ↔ lag m for m < M/2, lag m − M otherwise
                    let lag = if m < half { m as isize } else { m as isize - n_k as isize };
                    let q = lag.div_euclid(2);
                    *slot = if lag % 2 == 0 {
                        g[wrap(ji + q)] * g[wrap(ji - q)].conj()
                    } else {
                        h[wrap(ji + q)] * h[wrap(ji - q - 1)].conj()
                    };
                }
                buf[half] = Complex64::new(buf[half].re, 0.0);
                fft.process_with_scratch(buf, scratch);
                let mut residue = 0.0f64;
                for (idx, o) in out.iter_mut().enumerate() {
                    let p = idx as isize - p_max as isize;
                    let c = buf[p.rem_euclid(n_k as isize) as usize];
                    *o = scale * c.re;
                    residue = residue.max((scale * c.im).abs());
                }
                residue
            },
        )
        .reduce(|| 0.0, f64::max);

    let grid = PhaseSpaceGrid { geometry, values, epsilon: eps, sigma_x: 0.0, sigma_k: 0.0, time_stamp: 0.0 };
    let max = grid.max_abs();
    if residue > IMAGINARY_RESIDUE_TOL * max {
        return Err(Error::ImaginaryResidue { residue, max });
    }
    Ok(grid)
}

/// Fused `smooth(wigner_transform(f))` with stage timings. Bit-identical to
/// the unfused composition.
pub fn swt(
    f: &WavefunctionGrid,
    kern: &SmoothingKernelSpec,
    n_k: usize,
    k_max: f64,
) -> Result<(PhaseSpaceGrid, SwtTimings)> {
    kern.validate()?;
    let t0 = Instant::now();
    let w = wigner_transform(f, n_k, k_max)?;
    let t1 = Instant::now();
    let s = smooth_owned(w, kern)?;
    let t2 = Instant::now();
    Ok((s, SwtTimings { wt: (t1 - t0).as_secs_f64(), smooth: (t2 - t1).as_secs_f64() }))
}

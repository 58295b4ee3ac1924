//! Separable Gaussian smoothing of phase-space grids.
//!
//! The tensor kernel factorizes into an x-pass and a k-pass. Each pass runs
//! over contiguous rows: the k-pass directly on the row-major grid, the
//! x-pass on a transposed copy. Short kernels are applied by direct
//! truncated summation; long ones (the x-kernel spans O(ε^{-1/2}) samples
//! once Δx resolves the oscillations) by FFT convolution with the same
//! truncated, renormalized weights, two real rows packed per complex
//! transform. Both paths are deterministic, so fused and unfused SWT
//! evaluations agree bit for bit.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use super::{PhaseSpaceGrid, SmoothingKernelSpec};
use crate::error::{Error, Result};

/// Kernels with at most this many taps are applied by direct summation.
const DIRECT_MAX_TAPS: usize = 33;

/// Sampled, truncated, normalized 1-D Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisKernel {
    /// Weights for offsets −half..=half.
    pub weights: Vec<f64>,
    pub half: usize,
}

impl AxisKernel {
    /// Gaussian with standard deviation `std` sampled at spacing `spacing`,
    /// truncated at `radius` standard deviations and renormalized.
    pub fn new(std: f64, spacing: f64, radius: f64) -> Self {
        let half = (radius * std / spacing).floor() as usize;
        let var = std * std;
        let mut weights: Vec<f64> = (-(half as isize)..=half as isize)
            .map(|a| {
                let d = a as f64 * spacing;
                (-d * d / (2.0 * var)).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { weights, half }
    }

    /// Number of taps, 2·half + 1.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn check_fits(&self, axis: &'static str, len: usize) -> Result<()> {
        if self.len() > len {
            return Err(Error::KernelTooWide { axis, half_width: self.half, len });
        }
        Ok(())
    }
}

/// Convolution plan for rows of a fixed length.
enum RowConvolver {
    Direct { kernel: AxisKernel, periodic: bool },
    Spectral { fft: Arc<dyn Fft<f64>>, ifft: Arc<dyn Fft<f64>>, symbol: Vec<f64>, n_fft: usize },
}

impl RowConvolver {
    fn new(kernel: &AxisKernel, row_len: usize, periodic: bool) -> Self {
        if kernel.len() <= DIRECT_MAX_TAPS {
            return RowConvolver::Direct { kernel: kernel.clone(), periodic };
        }
        // Linear convolution needs room for the kernel's reach past the end.
        let n_fft = if periodic { row_len } else { (row_len + kernel.half).next_power_of_two() };
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n_fft);
        let ifft = planner.plan_fft_inverse(n_fft);
        let mut taps = vec![Complex64::new(0.0, 0.0); n_fft];
        for (idx, w) in kernel.weights.iter().enumerate() {
            let offset = idx as isize - kernel.half as isize;
            taps[offset.rem_euclid(n_fft as isize) as usize] += Complex64::new(*w, 0.0);
        }
        fft.process(&mut taps);
        // Symmetric real kernel: the symbol is real; dropping the rounding-level
        // imaginary part keeps the two packed rows from leaking into each other.
        let scale = 1.0 / n_fft as f64;
        let symbol = taps.iter().map(|c| c.re * scale).collect();
        RowConvolver::Spectral { fft, ifft, symbol, n_fft }
    }

    /// Rows handled per call.
    fn rows_per_call(&self) -> usize {
        match self {
            RowConvolver::Direct { .. } => 1,
            RowConvolver::Spectral { .. } => 2,
        }
    }

    /// Convolve the (one or two) rows packed in `rows` in place.
    fn apply(&self, rows: &mut [f64], row_len: usize, scratch: &mut Scratch) {
        match self {
            RowConvolver::Direct { kernel, periodic } => {
                let out = &mut scratch.real;
                out.clear();
                out.resize(row_len, 0.0);
                direct_convolve(rows, out, kernel, *periodic);
                rows.copy_from_slice(out);
            }
            RowConvolver::Spectral { fft, ifft, symbol, n_fft } => {
                let buf = &mut scratch.complex;
                buf.clear();
                buf.resize(*n_fft, Complex64::new(0.0, 0.0));
                let (a, b) = rows.split_at_mut(row_len);
                for (i, slot) in buf.iter_mut().take(row_len).enumerate() {
                    *slot = Complex64::new(a[i], b.get(i).copied().unwrap_or(0.0));
                }
                let need = fft.get_inplace_scratch_len().max(ifft.get_inplace_scratch_len());
                scratch.fft.resize(need, Complex64::new(0.0, 0.0));
                fft.process_with_scratch(buf, &mut scratch.fft);
                for (c, s) in buf.iter_mut().zip(symbol) {
                    *c *= *s;
                }
                ifft.process_with_scratch(buf, &mut scratch.fft);
                for i in 0..row_len {
                    a[i] = buf[i].re;
                }
                for (i, v) in b.iter_mut().enumerate() {
                    *v = buf[i].im;
                }
            }
        }
    }
}

#[derive(Default)]
struct Scratch {
    real: Vec<f64>,
    complex: Vec<Complex64>,
    fft: Vec<Complex64>,
}

/// out[i] = ∑_a w_a·row[i + a], offsets a ∈ [−half, half]; summation runs
/// over a in increasing order for every i.
fn direct_convolve(row: &[f64], out: &mut [f64], kernel: &AxisKernel, periodic: bool) {
    let n = row.len() as isize;
    for (idx, &w) in kernel.weights.iter().enumerate() {
        let a = idx as isize - kernel.half as isize;
        // Indices i with 0 ≤ i + a < n.
        let lo = (-a).max(0);
        let hi = (n - a).min(n);
        if lo < hi {
            let src = &row[(lo + a) as usize..(hi + a) as usize];
            for (o, s) in out[lo as usize..hi as usize].iter_mut().zip(src) {
                *o += w * s;
            }
        }
        if periodic {
            // Wrapped parts: i + a < 0 → i + a + n; i + a ≥ n → i + a − n.
            if a < 0 {
                let cnt = (-a).min(n) as usize;
                let src = &row[(n + a) as usize..(n + a) as usize + cnt];
                for (o, s) in out[..cnt].iter_mut().zip(src) {
                    *o += w * s;
                }
            } else if a > 0 {
                let cnt = a.min(n) as usize;
                let start = (n - a) as usize;
                for (o, s) in out[start..start + cnt].iter_mut().zip(&row[..cnt]) {
                    *o += w * s;
                }
            }
        }
    }
}

/// Convolve every row of a row-major `n_rows × row_len` array in place.
fn convolve_rows(data: &mut [f64], row_len: usize, kernel: &AxisKernel, periodic: bool) {
    let conv = RowConvolver::new(kernel, row_len, periodic);
    let chunk = row_len * conv.rows_per_call();
    data.par_chunks_mut(chunk).for_each_init(Scratch::default, |scratch, rows| {
        conv.apply(rows, row_len, scratch);
    });
}

/// Blocked out-of-place transpose of a `rows × cols` row-major array.
fn transpose(src: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut dst = vec![0.0; src.len()];
    transpose::transpose(src, &mut dst, cols, rows);
    dst
}

/// Smooth an unsmoothed WT with the ε-scaled Gaussian.
pub fn smooth(w: &PhaseSpaceGrid, kern: &SmoothingKernelSpec) -> Result<PhaseSpaceGrid> {
    smooth_owned(w.clone(), kern)
}

/// [`smooth`] reusing the input's storage.
pub fn smooth_owned(mut w: PhaseSpaceGrid, kern: &SmoothingKernelSpec) -> Result<PhaseSpaceGrid> {
    kern.validate()?;
    if w.is_smoothed() {
        return Err(Error::InvalidArgument("smooth expects an unsmoothed WT (sigma_x = sigma_k = 0)".into()));
    }
    let g = w.geometry;
    let kx = AxisKernel::new(kern.std_x(w.epsilon), g.dx(), kern.truncation_radius);
    let kk = AxisKernel::new(kern.std_k(w.epsilon), g.dk(), kern.truncation_radius);
    kx.check_fits("x", g.n_x)?;
    kk.check_fits("k", g.n_k)?;

    let k_periodic = w.k_is_periodic();
    convolve_rows(&mut w.values, g.n_k, &kk, k_periodic);
    let mut t = transpose(&w.values, g.n_x, g.n_k);
    convolve_rows(&mut t, g.n_x, &kx, true);
    transpose::transpose(&t, &mut w.values, g.n_x, g.n_k);

    w.sigma_x = kern.sigma_x;
    w.sigma_k = kern.sigma_k;
    Ok(w)
}

/// Periodic smoothing of a 1-D profile with the same discrete kernel the
/// x-pass of [`smooth`] uses.
pub fn smoothed_density_1d(values: &[f64], spacing: f64, std: f64, radius: f64) -> Result<Vec<f64>> {
    let kernel = AxisKernel::new(std, spacing, radius);
    kernel.check_fits("x", values.len())?;
    let mut out = values.to_vec();
    convolve_rows(&mut out, values.len(), &kernel, true);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(row: &[f64], kernel: &AxisKernel, periodic: bool) -> Vec<f64> {
        let n = row.len() as isize;
        (0..n)
            .map(|i| {
                kernel
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(idx, w)| {
                        let j = i + idx as isize - kernel.half as isize;
                        let v = if periodic {
                            row[j.rem_euclid(n) as usize]
                        } else if (0..n).contains(&j) {
                            row[j as usize]
                        } else {
                            0.0
                        };
                        w * v
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = AxisKernel::new(0.3, 0.05, 7.0);
        assert_eq!(k.half, 42);
        assert!((k.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for a in 0..k.half {
            assert_eq!(k.weights[a], k.weights[k.len() - 1 - a]);
        }
    }

    #[test]
    fn direct_and_spectral_agree_with_naive() {
        let row: Vec<f64> = (0..200).map(|i| ((i * 37 % 101) as f64 / 50.0 - 1.0) * (i as f64 / 30.0).sin()).collect();
        for &(std, periodic) in &[(0.02, false), (0.02, true), (0.3, false), (0.3, true)] {
            let kernel = AxisKernel::new(std, 0.01, 7.0);
            let expect = naive(&row, &kernel, periodic);
            // Pad to a power of two for the periodic spectral path.
            let mut data = row.clone();
            if periodic && kernel.len() > DIRECT_MAX_TAPS {
                data.resize(256, 0.0);
                let expect = naive(&data, &kernel, true);
                let mut two = [data.clone(), data.iter().map(|v| -2.0 * v).collect()].concat();
                convolve_rows(&mut two, 256, &kernel, true);
                for i in 0..256 {
                    assert!((two[i] - expect[i]).abs() < 1e-13);
                    assert!((two[256 + i] + 2.0 * expect[i]).abs() < 1e-13);
                }
                continue;
            }
            convolve_rows(&mut data, row.len(), &kernel, periodic);
            for (a, b) in data.iter().zip(&expect) {
                assert!((a - b).abs() < 1e-13, "std {std} periodic {periodic}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn constant_is_preserved_on_periodic_axis() {
        let kernel = AxisKernel::new(0.5, 0.01, 7.0);
        let mut row = vec![3.25; 1024];
        convolve_rows(&mut row, 1024, &kernel, true);
        assert!(row.iter().all(|v| (v - 3.25).abs() < 1e-13));
    }
}

//! Slow-scale observables and the comparison metrics behind "valid
//! slow-scale representation".
//!
//! Phase-space observables integrate the (smoothed) Wigner density over k;
//! wavefunction observables start from |u|². The SWT's exact x-marginal is
//! the σx-smoothing of |u|² (the k-factor of the kernel integrates to one),
//! which is what [`smoothed_wavefunction_density`] computes, using the very
//! same discrete kernel as the x-pass of the smoothing stage.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phasespace::{gaussian_std, smoothed_density_1d, PhaseSpaceGrid, DEFAULT_TRUNCATION_RADIUS};
use crate::signals::{Potential, WavefunctionGrid};

/// What a [`DensityProfile`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    NormDensity,
    EnergyDensity,
}

impl fmt::Display for DensityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DensityKind::NormDensity => "norm_density",
            DensityKind::EnergyDensity => "energy_density",
        })
    }
}

impl FromStr for DensityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm_density" => Ok(DensityKind::NormDensity),
            "energy_density" => Ok(DensityKind::EnergyDensity),
            other => Err(Error::Format(format!("unknown density kind `{other}`"))),
        }
    }
}

/// A real profile over the periodic x-grid of a [`WavefunctionGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityProfile {
    pub x_min: f64,
    pub x_max: f64,
    pub values: Vec<f64>,
    pub kind: DensityKind,
    pub epsilon: f64,
    /// σx of the smoothing that produced the profile, `None` if unsmoothed.
    pub sigma_x: Option<f64>,
    pub t: f64,
}

impl DensityProfile {
    pub fn n_x(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.values.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    /// ∑ values·Δx.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn same_geometry(&self, other: &DensityProfile) -> bool {
        self.x_min == other.x_min && self.x_max == other.x_max && self.values.len() == other.values.len()
    }

    /// Periodic linear resampling onto `n` nodes of the same domain. When
    /// `n` divides the current length this is exact decimation.
    pub fn resample(&self, n: usize) -> Result<DensityProfile> {
        if n == 0 {
            return Err(Error::InvalidGrid("cannot resample onto zero nodes".into()));
        }
        let m = self.values.len();
        let values = if m.is_multiple_of(n) {
            self.values.iter().step_by(m / n).cloned().collect()
        } else {
            let ratio = m as f64 / n as f64;
            (0..n)
                .map(|i| {
                    let pos = i as f64 * ratio;
                    let j = pos.floor() as usize;
                    let frac = pos - j as f64;
                    (1.0 - frac) * self.values[j % m] + frac * self.values[(j + 1) % m]
                })
                .collect()
        };
        Ok(DensityProfile { values, ..self.clone() })
    }
}

/// Relative discrepancy of a profile against a reference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l1_rel: f64,
    pub l2_rel: f64,
    pub linf_rel: f64,
    pub mass_ratio: f64,
}

impl ErrorReport {
    pub const ZERO: ErrorReport = ErrorReport { l1_rel: 0.0, l2_rel: 0.0, linf_rel: 0.0, mass_ratio: 1.0 };
}

/// N(x) = ∫W dk (trapezoid on a cropped k-axis).
pub fn phase_space_norm_density(w: &PhaseSpaceGrid) -> DensityProfile {
    DensityProfile {
        x_min: w.geometry.x_min,
        x_max: w.geometry.x_max,
        values: w.marginal_x(),
        kind: DensityKind::NormDensity,
        epsilon: w.epsilon,
        sigma_x: w.is_smoothed().then_some(w.sigma_x),
        t: w.time_stamp,
    }
}

/// E(x) = ∫H(x,k)·W(x,k) dk with the Liouville Hamiltonian
/// H = πk² + V(x)/(2π).
pub fn phase_space_energy_density(w: &PhaseSpaceGrid, potential: &Potential) -> DensityProfile {
    let g = w.geometry;
    let weights = w.k_weights();
    let kinetic: Vec<f64> = (0..g.n_k).map(|j| PI * g.k(j).powi(2)).zip(&weights).map(|(h, w)| h * w).collect();
    let values = (0..g.n_x)
        .map(|i| {
            let v = potential.value(g.x(i)) / (2.0 * PI);
            w.row(i).iter().zip(&kinetic).zip(&weights).map(|((f, kin), wk)| f * (kin + v * wk)).sum()
        })
        .collect();
    DensityProfile {
        x_min: g.x_min,
        x_max: g.x_max,
        values,
        kind: DensityKind::EnergyDensity,
        epsilon: w.epsilon,
        sigma_x: w.is_smoothed().then_some(w.sigma_x),
        t: w.time_stamp,
    }
}

/// |u|² without smoothing.
pub fn wavefunction_density(u: &WavefunctionGrid, t: f64) -> DensityProfile {
    DensityProfile {
        x_min: u.x_min,
        x_max: u.x_max,
        values: u.values.iter().map(|v| v.norm_sqr()).collect(),
        kind: DensityKind::NormDensity,
        epsilon: u.epsilon,
        sigma_x: None,
        t,
    }
}

/// |u|² convolved (periodically) with the normalized Gaussian of variance
/// ε·σx²/(4π), truncated and renormalized exactly like the x-pass of the
/// phase-space smoothing.
pub fn smoothed_wavefunction_density(u: &WavefunctionGrid, sigma_x: f64, t: f64) -> Result<DensityProfile> {
    smoothed_wavefunction_density_with_std(u, gaussian_std(u.epsilon, sigma_x), t, Some(sigma_x))
}

/// [`smoothed_wavefunction_density`] for an explicit kernel standard
/// deviation (used for diagnostics with effective, time-dependent widths).
pub fn smoothed_wavefunction_density_with_std(
    u: &WavefunctionGrid,
    std: f64,
    t: f64,
    sigma_x: Option<f64>,
) -> Result<DensityProfile> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidArgument(format!("smoothing width must be positive, got {std}")));
    }
    let raw: Vec<f64> = u.values.iter().map(|v| v.norm_sqr()).collect();
    let values = smoothed_density_1d(&raw, u.dx(), std, DEFAULT_TRUNCATION_RADIUS)?;
    Ok(DensityProfile {
        x_min: u.x_min,
        x_max: u.x_max,
        values,
        kind: DensityKind::NormDensity,
        epsilon: u.epsilon,
        sigma_x,
        t,
    })
}

/// Compare `a` against the reference `b`: ‖a−b‖/‖b‖ in L¹, L², L∞, and the
/// mass ratio ∑a/∑b. A zero reference is only comparable with a zero
/// profile.
pub fn compare(a: &DensityProfile, b: &DensityProfile) -> Result<ErrorReport> {
    if !a.same_geometry(b) {
        return Err(Error::GeometryMismatch(format!(
            "[{}, {}) x {} vs [{}, {}) x {}",
            a.x_min,
            a.x_max,
            a.n_x(),
            b.x_min,
            b.x_max,
            b.n_x()
        )));
    }
    if a.kind != b.kind {
        return Err(Error::GeometryMismatch(format!("cannot compare {} with {}", a.kind, b.kind)));
    }
    let (mut d1, mut d2, mut dinf, mut r1, mut r2, mut rinf) = (0.0, 0.0, 0.0f64, 0.0, 0.0, 0.0f64);
    for (x, y) in a.values.iter().zip(&b.values) {
        let d = (x - y).abs();
        d1 += d;
        d2 += d * d;
        dinf = dinf.max(d);
        r1 += y.abs();
        r2 += y * y;
        rinf = rinf.max(y.abs());
    }
    let (sa, sb) = (a.values.iter().sum::<f64>(), b.values.iter().sum::<f64>());
    if r1 == 0.0 {
        if d1 == 0.0 {
            return Ok(ErrorReport::ZERO);
        }
        return Err(Error::InvalidArgument("reference profile is identically zero".into()));
    }
    let report = ErrorReport {
        l1_rel: d1 / r1,
        l2_rel: (d2 / r2).sqrt(),
        linf_rel: dinf / rinf,
        mass_ratio: if sb != 0.0 { sa / sb } else { f64::NAN },
    };
    if !report.mass_ratio.is_finite() {
        return Err(Error::InvalidArgument("reference profile has zero total mass".into()));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;
    use crate::phasespace::{swt, wigner_transform, PhaseGeometry, SmoothingKernelSpec};
    use crate::signals::{builtin_problem, sample_problem};

    fn profile(values: Vec<f64>) -> DensityProfile {
        DensityProfile {
            x_min: 0.0,
            x_max: 1.0,
            values,
            kind: DensityKind::NormDensity,
            epsilon: 1.0,
            sigma_x: None,
            t: 0.0,
        }
    }

    fn unit_gaussian(n: usize) -> WavefunctionGrid {
        let dx = 8.0 / n as f64;
        let values = (0..n)
            .map(|j| {
                let x = -4.0 + j as f64 * dx;
                Complex64::new(2f64.powf(0.25) * (-PI * x * x).exp(), 0.0)
            })
            .collect();
        WavefunctionGrid::new(-4.0, 4.0, values, 1.0).unwrap()
    }

    #[test]
    fn compare_hand_examples() {
        let b = profile(vec![1.0, 2.0, 3.0]);
        assert_eq!(compare(&b, &b).unwrap(), ErrorReport::ZERO);
        let a = profile(b.values.iter().map(|v| 2.0 * v).collect());
        let r = compare(&a, &b).unwrap();
        assert!((r.l1_rel - 1.0).abs() < 1e-15 && (r.linf_rel - 1.0).abs() < 1e-15);
        assert!((r.mass_ratio - 2.0).abs() < 1e-15);
        let r = compare(&profile(vec![1.0, 0.0]), &profile(vec![1.0, 1.0])).unwrap();
        assert!((r.l1_rel - 0.5).abs() < 1e-15);
        assert!((r.l2_rel - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((r.linf_rel - 1.0).abs() < 1e-15);
        assert!(matches!(compare(&profile(vec![1.0]), &b), Err(Error::GeometryMismatch(_))));
        assert_eq!(compare(&profile(vec![0.0; 2]), &profile(vec![0.0; 2])).unwrap(), ErrorReport::ZERO);
    }

    #[test]
    fn energy_density_of_zero_and_separable_grids() {
        let geometry = PhaseGeometry::new(-2.0, 2.0, 32, -3.0, 3.0, 64).unwrap();
        let w = PhaseSpaceGrid::zeros(geometry, 0.5);
        assert!(phase_space_energy_density(&w, &Potential::Zero).values.iter().all(|&v| v == 0.0));

        let mut w = w;
        let (g, h) = (|x: f64| 1.0 + x * x, |k: f64| (-k * k).exp());
        for i in 0..32 {
            for j in 0..64 {
                w.values[i * 64 + j] = g(geometry.x(i)) * h(geometry.k(j));
            }
        }
        let weights = w.k_weights();
        let moment: f64 = (0..64).map(|j| PI * geometry.k(j).powi(2) * h(geometry.k(j)) * weights[j]).sum();
        let e = phase_space_energy_density(&w, &Potential::Zero);
        for i in 0..32 {
            assert!((e.values[i] - g(geometry.x(i)) * moment).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_energy_density_matches_moment_integral() {
        // SWT = e^{−π(x²+k²)}; E(0) = π∫k² e^{−πk²} dk = 1/2.
        let f = unit_gaussian(512);
        let (s, _) = swt(&f, &SmoothingKernelSpec::new(1.0, 1.0).unwrap(), 512, f.nyquist_k()).unwrap();
        let e = phase_space_energy_density(&s, &Potential::Zero);
        let i0 = 256;
        assert_eq!(e.x(i0), 0.0);
        assert!((e.values[i0] - 0.5).abs() < 1e-9, "E(0) = {}", e.values[i0]);
    }

    #[test]
    fn smoothed_density_closed_form_and_zero() {
        let f = unit_gaussian(512);
        let d = smoothed_wavefunction_density(&f, 1.0, 0.0).unwrap();
        for i in 0..512 {
            assert!((d.values[i] - (-PI * d.x(i).powi(2)).exp()).abs() < 1e-9);
        }
        let z = WavefunctionGrid::new(0.0, 1.0, vec![Complex64::new(0.0, 0.0); 64], 0.01).unwrap();
        assert!(smoothed_wavefunction_density(&z, 1.0, 0.0).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn swt_marginal_equals_smoothed_density() {
        let spec = builtin_problem("problem4", 1.0 / 16.0).unwrap();
        let u = sample_problem(&spec, 1024).unwrap();
        for (sx, sk) in [(1.0, 1.0), (0.7, 2.0), (1.5, 0.8)] {
            let (s, _) = swt(&u, &SmoothingKernelSpec::new(sx, sk).unwrap(), 1024, u.nyquist_k()).unwrap();
            let n = phase_space_norm_density(&s);
            let d = smoothed_wavefunction_density(&u, sx, 0.0).unwrap();
            let scale = d.max();
            for (a, b) in n.values.iter().zip(&d.values) {
                assert!((a - b).abs() <= 1e-6 * scale);
            }
            assert!((n.integral() - u.norm_squared()).abs() <= 1e-6 * u.norm_squared());
        }
        let w = wigner_transform(&u, 1024, u.nyquist_k()).unwrap();
        assert_eq!(phase_space_norm_density(&w).sigma_x, None);
    }

    #[test]
    fn resample_decimates_exactly() {
        let p = profile((0..8).map(|i| i as f64).collect());
        assert_eq!(p.resample(4).unwrap().values, vec![0.0, 2.0, 4.0, 6.0]);
        let q = profile(vec![0.0, 1.0, 2.0, 3.0]).resample(3).unwrap();
        assert_eq!(q.values.len(), 3);
        assert!((q.values[1] - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn kind_round_trips_through_text() {
        for k in [DensityKind::NormDensity, DensityKind::EnergyDensity] {
            assert_eq!(k.to_string().parse::<DensityKind>().unwrap(), k);
        }
    }
}

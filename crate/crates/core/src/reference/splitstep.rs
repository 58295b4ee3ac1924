//! Strang time-splitting spectral solver.
//!
//! One step of size Δt: multiply by e^{−iVΔt/(2ε)}, transform, multiply
//! mode ξ_m = m/L by e^{−iε(2πξ_m)²Δt/2}, transform back, multiply by
//! e^{−iVΔt/(2ε)}. Consecutive potential half-steps are fused. With V = 0
//! the scheme is exact for every Δt.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{initial_data, march, output_times, ReferenceMethod, ReferenceRun, Stepper};
use crate::error::Result;
use crate::signals::{Potential, ProblemSpec};

pub struct SplitStep {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    /// V(x_j).
    potential: Vec<f64>,
    /// ε(2πξ_m)²/2, multiplied by Δt for the kinetic phase.
    dispersion: Vec<f64>,
    epsilon: f64,
    has_potential: bool,
}

impl SplitStep {
    pub fn new(potential: &Potential, x_min: f64, x_max: f64, n_x: usize, epsilon: f64) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n_x);
        let inv = planner.plan_fft_inverse(n_x);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        let length = x_max - x_min;
        let dx = length / n_x as f64;
        let dispersion = (0..n_x)
            .map(|m| {
                let signed = if m < n_x / 2 { m as f64 } else { m as f64 - n_x as f64 };
                let xi = 2.0 * PI * signed / length;
                0.5 * epsilon * xi * xi
            })
            .collect();
        Self {
            fwd,
            inv,
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
            potential: (0..n_x).map(|j| potential.value(x_min + j as f64 * dx)).collect(),
            dispersion,
            epsilon,
            has_potential: !potential.is_zero(),
        }
    }

    fn potential_phase(&self, u: &mut [Complex64], dt: f64) {
        if self.has_potential {
            for (v, pot) in u.iter_mut().zip(&self.potential) {
                *v *= Complex64::from_polar(1.0, -pot * dt / self.epsilon);
            }
        }
    }

    fn kinetic(&mut self, u: &mut [Complex64], phases: &[Complex64]) {
        self.fwd.process_with_scratch(u, &mut self.scratch);
        for (v, p) in u.iter_mut().zip(phases) {
            *v *= p;
        }
        self.inv.process_with_scratch(u, &mut self.scratch);
    }
}

impl Stepper for SplitStep {
    fn advance(&mut self, u: &mut [Complex64], dt: f64, steps: usize) -> Result<()> {
        if steps == 0 {
            return Ok(());
        }
        let n = u.len() as f64;
        let phases: Vec<Complex64> = self.dispersion.iter().map(|d| Complex64::from_polar(1.0 / n, -d * dt)).collect();
        self.potential_phase(u, 0.5 * dt);
        for step in 0..steps {
            self.kinetic(u, &phases);
            self.potential_phase(u, if step + 1 == steps { 0.5 * dt } else { dt });
        }
        Ok(())
    }
}

/// Strang split-step solution with `n_t` steps over the output span.
pub fn splitstep_solve(spec: &ProblemSpec, n_x: usize, n_t: usize, times: &[f64]) -> Result<ReferenceRun> {
    let times = output_times(spec, times)?;
    let u0 = initial_data(spec, n_x)?;
    let mut stepper = SplitStep::new(&spec.potential, spec.x_min, spec.x_max, n_x, spec.epsilon);
    march(ReferenceMethod::Splitstep, &mut stepper, u0, n_t, &times)
}

//! Physical-space reference solutions of
//!
//! ```text
//! iε ∂ₜu = −(ε²/2) ∂ₓ²u + V(x) u,   x periodic on [x_min, x_max)
//! ```
//!
//! by Strang time-splitting with FFTs ([`splitstep_solve`]), by the
//! Crank–Nicolson finite-difference scheme ([`crank_nicolson_solve`]), and in
//! closed form for free complex Gaussians ([`exact_free_gaussian`]).

mod crank_nicolson;
mod exact;
mod splitstep;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signals::{sample_problem, ProblemSpec, WavefunctionGrid};

pub use crank_nicolson::{crank_nicolson_solve, CrankNicolson};
pub use exact::{exact_free_gaussian, exact_free_gaussian_solution, free_gaussian_term};
pub use splitstep::{splitstep_solve, SplitStep};

/// Boundary decay required of initial data: |u| at both ends below this
/// fraction of max|u|.
pub const BOUNDARY_DECAY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMethod {
    Splitstep,
    CrankNicolson,
    ExactFreeGaussian,
}

impl fmt::Display for ReferenceMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReferenceMethod::Splitstep => "splitstep",
            ReferenceMethod::CrankNicolson => "crank_nicolson",
            ReferenceMethod::ExactFreeGaussian => "exact_free_gaussian",
        })
    }
}

impl FromStr for ReferenceMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "splitstep" => Ok(ReferenceMethod::Splitstep),
            "cn" | "crank_nicolson" => Ok(ReferenceMethod::CrankNicolson),
            "exact" | "exact_free_gaussian" => Ok(ReferenceMethod::ExactFreeGaussian),
            other => Err(Error::InvalidArgument(format!("unknown reference method `{other}` (splitstep, cn, exact)"))),
        }
    }
}

/// Snapshots of one reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRun {
    pub method: ReferenceMethod,
    /// (t, u(t)) at the requested output times, ascending.
    pub snapshots: Vec<(f64, WavefunctionGrid)>,
    pub wall_time: f64,
    /// Spatial degrees of freedom, n_x.
    pub dof: usize,
    /// Time steps taken (0 for the closed form).
    pub n_t: usize,
}

impl ReferenceRun {
    /// The snapshot at the latest time.
    pub fn last(&self) -> Option<&(f64, WavefunctionGrid)> {
        self.snapshots.last()
    }

    /// The snapshot at time `t` exactly.
    pub fn at(&self, t: f64) -> Option<&WavefunctionGrid> {
        self.snapshots.iter().find(|(s, _)| *s == t).map(|(_, u)| u)
    }
}

/// Grid sizes used for reference runs of a spec.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceMesh {
    pub n_x: usize,
    pub n_t_splitstep: usize,
    pub n_t_crank_nicolson: usize,
}

/// Observable-safe meshing:
///
/// * `n_x = max(1024, next_pow2(16·k_max·L/ε))` — sixteen points per
///   shortest wavelength;
/// * split-step `n_t = max(16, ceil(16·t_max/ε))` — the splitting error
///   enters only through the potential, so Δt ∝ ε suffices;
/// * Crank–Nicolson `n_t = max(16, ceil(t_max·k_max²/ε²))` — the scheme's
///   phase error for a mode of frequency θ = 2π²k²/ε accumulates as
///   t·θ³Δt²/12, so Δt ∝ ε² is needed for it to shrink with ε.
pub fn reference_mesh(spec: &ProblemSpec) -> ReferenceMesh {
    let eps = spec.epsilon;
    let n_x = ((16.0 * spec.k_max * spec.length() / eps).ceil() as usize).next_power_of_two().max(1024);
    let n_t_splitstep = ((16.0 * spec.t_max / eps).ceil() as usize).max(16);
    let n_t_crank_nicolson = ((spec.t_max * spec.k_max * spec.k_max / (eps * eps)).ceil() as usize).max(16);
    ReferenceMesh { n_x, n_t_splitstep, n_t_crank_nicolson }
}

/// Run `method` on the spec's initial data up to the output `times`
/// (defaults to `[t_max]` when empty). `n_t` counts steps over the whole
/// span and is ignored by the closed form.
pub fn solve(
    method: ReferenceMethod,
    spec: &ProblemSpec,
    n_x: usize,
    n_t: usize,
    times: &[f64],
) -> Result<ReferenceRun> {
    match method {
        ReferenceMethod::Splitstep => splitstep_solve(spec, n_x, n_t, times),
        ReferenceMethod::CrankNicolson => crank_nicolson_solve(spec, n_x, n_t, times),
        ReferenceMethod::ExactFreeGaussian => exact_free_gaussian(spec, n_x, times),
    }
}

/// Sorted, validated output times.
pub(crate) fn output_times(spec: &ProblemSpec, times: &[f64]) -> Result<Vec<f64>> {
    let mut t: Vec<f64> = if times.is_empty() { vec![spec.t_max] } else { times.to_vec() };
    if let Some(bad) = t.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::InvalidArgument(format!("output time {bad} must be finite and non-negative")));
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

/// Sample the initial data and check the periodic-boundary precondition.
pub(crate) fn initial_data(spec: &ProblemSpec, n_x: usize) -> Result<WavefunctionGrid> {
    let u = sample_problem(spec, n_x)?;
    let ratio = u.boundary_ratio();
    if ratio >= BOUNDARY_DECAY {
        return Err(Error::BoundaryDecay { value: ratio });
    }
    Ok(u)
}

/// A fixed-step time stepper for the periodic Schrödinger problem.
pub trait Stepper {
    /// Advance `u` by `steps` steps of size `dt`.
    fn advance(&mut self, u: &mut [num_complex::Complex64], dt: f64, steps: usize) -> Result<()>;
}

/// March `u0` through the output times with steps no longer than
/// `span/n_t`, each segment between outputs using a uniform step.
pub(crate) fn march(
    method: ReferenceMethod,
    stepper: &mut impl Stepper,
    u0: WavefunctionGrid,
    n_t: usize,
    times: &[f64],
) -> Result<ReferenceRun> {
    let start = Instant::now();
    if n_t == 0 {
        return Err(Error::InvalidArgument("n_t must be at least 1".into()));
    }
    let span = times.last().copied().unwrap_or(0.0);
    let dt_max = if span > 0.0 { span / n_t as f64 } else { 1.0 };
    let mut u = u0.clone();
    let (mut t, mut taken) = (0.0, 0usize);
    let mut snapshots = Vec::with_capacity(times.len());
    for &target in times {
        let seg = target - t;
        if seg > 0.0 {
            let steps = ((seg / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
            stepper.advance(&mut u.values, seg / steps as f64, steps)?;
            taken += steps;
            t = target;
        }
        if let Some(index) = u.values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite { t, index });
        }
        snapshots.push((target, u.clone()));
    }
    Ok(ReferenceRun { method, snapshots, wall_time: start.elapsed().as_secs_f64(), dof: u0.n_x(), n_t: taken })
}

#[cfg(test)]
mod tests;

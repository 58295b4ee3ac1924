//! Leading-order Liouville transport of the smoothed Wigner density.
//!
//! The density is constant along the characteristics of
//!
//! ```text
//! dx/dt = 2πk,   dk/dt = −V′(x)/(2π),   H(x, k) = πk² + V(x)/(2π)
//! ```
//!
//! so the solver seeds one particle per significant grid node, carries the
//! node value unchanged while integrating the characteristics with classic
//! RK4, and reconstructs a grid by Shepard interpolation
//! ([`reconstruct`]). [`backtrace_evaluate`] integrates the same field
//! backwards from every target node and samples the initial grid at the foot
//! point; it is the internal oracle for the forward particle method.

mod reconstruct;

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::phasespace::{PhaseGeometry, PhaseSpaceGrid};
use crate::signals::Potential;

pub use reconstruct::{reconstruct, Reconstruction, SUPPORT_RADIUS};

/// Default seeding threshold η, relative to max|W₀|.
pub const DEFAULT_ETA: f64 = 1e-3;

/// Phase-space distance a particle may travel in one default RK4 step.
pub const STEP_CFL: f64 = 0.05;

/// Phase-space particles carrying frozen density values.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    /// (x, k) per particle.
    pub positions: Vec<[f64; 2]>,
    /// W̃₀ at the seeding node; never modified after seeding.
    pub weights: Vec<f64>,
    pub seed_dx: f64,
    pub seed_dk: f64,
    pub t: f64,
    pub epsilon: f64,
    pub sigma_x: f64,
    pub sigma_k: f64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Hamilton's equations of the Liouville model for a potential.
#[derive(Debug, Clone, Copy)]
pub struct HamiltonianField<'a> {
    pub potential: &'a Potential,
}

impl<'a> HamiltonianField<'a> {
    pub fn new(potential: &'a Potential) -> Self {
        Self { potential }
    }

    /// (dx/dt, dk/dt) = (∂H/∂k, −∂H/∂x).
    #[inline]
    pub fn velocity(&self, x: f64, k: f64) -> [f64; 2] {
        [self.dh_dk(k), -self.dh_dx(x)]
    }

    /// H(x, k) = πk² + V(x)/(2π).
    pub fn energy(&self, x: f64, k: f64) -> f64 {
        PI * k * k + self.potential.value(x) / (2.0 * PI)
    }

    #[inline]
    pub fn dh_dk(&self, k: f64) -> f64 {
        2.0 * PI * k
    }

    #[inline]
    pub fn dh_dx(&self, x: f64) -> f64 {
        self.potential.derivative(x) / (2.0 * PI)
    }

    /// One classic RK4 step of size `h` (negative `h` integrates backwards).
    #[inline]
    pub fn rk4_step(&self, [x, k]: [f64; 2], h: f64) -> [f64; 2] {
        let k1 = self.velocity(x, k);
        let k2 = self.velocity(x + 0.5 * h * k1[0], k + 0.5 * h * k1[1]);
        let k3 = self.velocity(x + 0.5 * h * k2[0], k + 0.5 * h * k2[1]);
        let k4 = self.velocity(x + h * k3[0], k + h * k3[1]);
        [
            x + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            k + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ]
    }

    /// Integrate over `duration` (any sign) with steps of magnitude `h`, the
    /// last one shortened to land exactly on the end time.
    pub fn flow(&self, mut p: [f64; 2], duration: f64, h: f64) -> [f64; 2] {
        for step in step_sizes(duration.abs(), h) {
            p = self.rk4_step(p, step.copysign(duration));
        }
        p
    }
}

/// Largest |H(p(s)) − H(p(0))| over the RK4 steps of a trajectory of length
/// `t`. Taking the maximum over the path (rather than the end value) avoids
/// the accidental cancellations of the oscillating energy error of periodic
/// orbits, which makes step-halving ratios reliable.
pub fn max_energy_drift(field: &HamiltonianField<'_>, p0: [f64; 2], t: f64, h: f64) -> f64 {
    let h0 = field.energy(p0[0], p0[1]);
    let mut p = p0;
    let mut worst = 0.0f64;
    for step in step_sizes(t, h) {
        p = field.rk4_step(p, step);
        worst = worst.max((field.energy(p[0], p[1]) - h0).abs());
    }
    worst
}

/// Step sizes covering `span` with full steps `h` and a shortened remainder.
fn step_sizes(span: f64, h: f64) -> impl Iterator<Item = f64> {
    let full = if span > 0.0 { (span / h * (1.0 - 1e-12)).floor() as usize } else { 0 };
    let rest = span - full as f64 * h;
    (0..full).map(move |_| h).chain((rest > 0.0).then_some(rest))
}

/// Default fixed RK4 step: `t_max / ceil(t_max·max(1, 2π·k_max, max|V′|/(2π)) / CFL)`,
/// i.e. a particle moves at most ≈[`STEP_CFL`] in either phase-space
/// direction per step.
pub fn default_step(t_max: f64, k_max: f64, max_abs_dv: f64) -> f64 {
    let speed = 1f64.max(2.0 * PI * k_max).max(max_abs_dv / (2.0 * PI));
    if t_max <= 0.0 {
        return STEP_CFL / speed;
    }
    t_max / (t_max * speed / STEP_CFL).ceil()
}

/// One particle per node with |W₀| ≥ η·max|W₀|, in row-major node order.
pub fn seed_particles(w0: &PhaseSpaceGrid, eta: f64) -> Result<ParticleEnsemble> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold eta must lie in (0, 1), got {eta}")));
    }
    if let Some(i) = w0.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("seed grid has a non-finite value at index {i}")));
    }
    let max = w0.max_abs();
    if max == 0.0 {
        return Err(Error::EmptyEnsemble { eta, max });
    }
    let cut = eta * max;
    let nodes: Vec<usize> = (0..w0.values.len()).filter(|&i| w0.values[i].abs() >= cut).collect();
    Ok(ensemble_from_nodes(w0, &nodes))
}

/// The `count` nodes of largest |W₀| (ties broken by node order), in
/// row-major node order. Used for equal-budget comparisons between seeds
/// from different grids.
pub fn seed_particles_budget(w0: &PhaseSpaceGrid, count: usize) -> Result<ParticleEnsemble> {
    let max = w0.max_abs();
    if count == 0 || max == 0.0 {
        return Err(Error::EmptyEnsemble { eta: 0.0, max });
    }
    let mut order: Vec<usize> = (0..w0.values.len()).collect();
    let count = count.min(order.len());
    order.select_nth_unstable_by(count - 1, |&a, &b| w0.values[b].abs().total_cmp(&w0.values[a].abs()).then(a.cmp(&b)));
    let mut nodes = order[..count].to_vec();
    nodes.sort_unstable();
    Ok(ensemble_from_nodes(w0, &nodes))
}

fn ensemble_from_nodes(w0: &PhaseSpaceGrid, nodes: &[usize]) -> ParticleEnsemble {
    let g = w0.geometry;
    ParticleEnsemble {
        positions: nodes.iter().map(|&n| [g.x(n / g.n_k), g.k(n % g.n_k)]).collect(),
        weights: nodes.iter().map(|&n| w0.values[n]).collect(),
        seed_dx: g.dx(),
        seed_dk: g.dk(),
        t: w0.time_stamp,
        epsilon: w0.epsilon,
        sigma_x: w0.sigma_x,
        sigma_k: w0.sigma_k,
    }
}

/// Advance every particle to `t_target` with fixed-step RK4.
pub fn advance(ens: &ParticleEnsemble, potential: &Potential, t_target: f64, h: f64) -> Result<ParticleEnsemble> {
    let mut out = ens.clone();
    advance_in_place(&mut out, potential, t_target, h)?;
    Ok(out)
}

/// [`advance`] without copying the ensemble.
pub fn advance_in_place(ens: &mut ParticleEnsemble, potential: &Potential, t_target: f64, h: f64) -> Result<()> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    if !(t_target >= ens.t && t_target.is_finite()) {
        return Err(Error::InvalidArgument(format!("cannot advance backwards from t = {} to {t_target}", ens.t)));
    }
    let field = HamiltonianField::new(potential);
    let duration = t_target - ens.t;
    ens.positions.par_iter_mut().for_each(|p| *p = field.flow(*p, duration, h));
    if let Some(index) = ens.positions.iter().position(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(Error::NonFinite { t: t_target, index });
    }
    ens.t = t_target;
    Ok(())
}

/// Bilinear interpolation of `w` at (x, k); zero outside the node hull.
pub fn bilinear(w: &PhaseSpaceGrid, x: f64, k: f64) -> f64 {
    let g = &w.geometry;
    let u = (x - g.x_min) / g.dx();
    let v = (k - g.k_min) / g.dk();
    if !(u >= 0.0 && v >= 0.0 && u <= (g.n_x - 1) as f64 && v <= (g.n_k - 1) as f64) {
        return 0.0;
    }
    let (i, j) = ((u.floor() as usize).min(g.n_x.saturating_sub(2)), (v.floor() as usize).min(g.n_k.saturating_sub(2)));
    let (a, b) = (u - i as f64, v - j as f64);
    let at = |ii: usize, jj: usize| if ii < g.n_x && jj < g.n_k { w.get(ii, jj) } else { 0.0 };
    (1.0 - a) * ((1.0 - b) * at(i, j) + b * at(i, j + 1)) + a * ((1.0 - b) * at(i + 1, j) + b * at(i + 1, j + 1))
}

/// Evaluate the Liouville solution at time `t` on `target` by integrating
/// each node backwards and sampling `w0` bilinearly at the foot point.
pub fn backtrace_evaluate(
    w0: &PhaseSpaceGrid,
    potential: &Potential,
    t: f64,
    target: &PhaseGeometry,
    h: f64,
) -> Result<PhaseSpaceGrid> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let field = HamiltonianField::new(potential);
    let mut out = PhaseSpaceGrid {
        geometry: *target,
        values: vec![0.0; target.len()],
        epsilon: w0.epsilon,
        sigma_x: w0.sigma_x,
        sigma_k: w0.sigma_k,
        time_stamp: w0.time_stamp + t,
    };
    let bad = out
        .values
        .par_chunks_mut(target.n_k)
        .enumerate()
        .map(|(i, row)| {
            let mut bad = None;
            for (j, v) in row.iter_mut().enumerate() {
                let [x, k] = field.flow([target.x(i), target.k(j)], -t, h);
                if !(x.is_finite() && k.is_finite()) {
                    bad = bad.or(Some(i * target.n_k + j));
                }
                *v = bilinear(w0, x, k);
            }
            bad
        })
        .reduce(|| None, |a, b| a.or(b));
    if let Some(index) = bad {
        return Err(Error::NonFinite { t: -t, index });
    }
    Ok(out)
}

/// Largest deviation from each node's value over its (2r+1)² neighbourhood
/// (clamped at the grid edges): a per-node scale for first-order
/// interpolation error.
pub fn local_oscillation(w: &PhaseSpaceGrid, r: usize) -> Vec<f64> {
    let g = &w.geometry;
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(g.n_k).enumerate().for_each(|(i, row)| {
        for (j, o) in row.iter_mut().enumerate() {
            let c = w.get(i, j);
            let mut m = 0.0f64;
            for ii in i.saturating_sub(r)..=(i + r).min(g.n_x - 1) {
                for jj in j.saturating_sub(r)..=(j + r).min(g.n_k - 1) {
                    m = m.max((w.get(ii, jj) - c).abs());
                }
            }
            *o = m;
        }
    });
    out
}

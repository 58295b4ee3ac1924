//! Crank–Nicolson finite differences with a periodic tridiagonal solve.
//!
//! With H = −(ε²/2)D₂ + V and the periodic three-point Laplacian D₂, one
//! step solves
//!
//! ```text
//! (I + iΔt/(2ε) H) u^{n+1} = (I − iΔt/(2ε) H) u^n
//! ```
//!
//! The left matrix is tridiagonal plus two corner entries; it is written as
//! a tridiagonal matrix T plus a rank-one correction and solved with the
//! Sherman–Morrison formula, reusing one LU factorization of T for all
//! steps of equal size.

use num_complex::Complex64;

use super::{initial_data, march, output_times, ReferenceMethod, ReferenceRun, Stepper};
use crate::error::{Error, Result};
use crate::signals::{Potential, ProblemSpec};

/// Pivots below this magnitude are a breakdown.
const PIVOT_FLOOR: f64 = 1e-300;

/// Entries of the correction vector below this magnitude are set to zero.
const SUBNORMAL_GUARD: f64 = 1e-250;

/// LU factorization (Thomas) of a constant-off-diagonal tridiagonal matrix
/// with Sherman–Morrison data for the periodic corners.
struct CyclicFactor {
    dt: f64,
    /// Off-diagonal entry (also the corner entries).
    off: Complex64,
    /// Inverse pivots; the elimination multipliers are `off · inv_pivot`.
    inv_pivot: Vec<Complex64>,
    /// T⁻¹·u for the correction vector u = (γ, 0, …, 0, off).
    z: Vec<Complex64>,
    /// v = (1, 0, …, 0, off/γ); cached v·z denominator 1 + v·z.
    v_last: Complex64,
    denom: Complex64,
}

impl CyclicFactor {
    fn new(diag: &[Complex64], off: Complex64, dt: f64) -> Result<Self> {
        let n = diag.len();
        let gamma = -diag[0];
        let mut d = diag.to_vec();
        d[0] -= gamma;
        d[n - 1] -= off * off / gamma;
        let mut inv_pivot = vec![Complex64::new(0.0, 0.0); n];
        let mut upper = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let pivot = d[i] - off * upper;
            if pivot.norm() < PIVOT_FLOOR {
                return Err(Error::SolveBreakdown { pivot: pivot.norm(), row: i });
            }
            inv_pivot[i] = 1.0 / pivot;
            upper = off * inv_pivot[i];
        }
        let mut f = Self { dt, off, inv_pivot, z: Vec::new(), v_last: off / gamma, denom: Complex64::new(0.0, 0.0) };
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        u[0] = gamma;
        u[n - 1] = off;
        f.forward(&mut u);
        f.backward(&mut u);
        f.denom = 1.0 + u[0] + f.v_last * u[n - 1];
        if f.denom.norm() < PIVOT_FLOOR {
            return Err(Error::SolveBreakdown { pivot: f.denom.norm(), row: n });
        }
        // z decays geometrically away from both corners; its middle would
        // otherwise fill with subnormal numbers, which are far slower to
        // multiply and contribute nothing.
        for v in &mut u {
            if v.norm() < SUBNORMAL_GUARD {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        f.z = u;
        Ok(f)
    }

    /// Forward elimination of T (in place).
    fn forward(&self, r: &mut [Complex64]) {
        r[0] *= self.inv_pivot[0];
        for i in 1..r.len() {
            r[i] = (r[i] - self.off * r[i - 1]) * self.inv_pivot[i];
        }
    }

    /// Back substitution of T (in place).
    fn backward(&self, r: &mut [Complex64]) {
        for i in (0..r.len() - 1).rev() {
            r[i] -= self.off * self.inv_pivot[i] * r[i + 1];
        }
    }

    /// Sherman–Morrison coefficient f with A⁻¹r = T⁻¹r − f·z, given y = T⁻¹r.
    fn correction(&self, y: &[Complex64]) -> Complex64 {
        (y[0] + self.v_last * y[y.len() - 1]) / self.denom
    }
}

pub struct CrankNicolson {
    /// V(x_j)/ε.
    potential: Vec<f64>,
    /// ε/(2Δx²): the off-diagonal coupling of H/ε is −coupling.
    coupling: f64,
    factor: Option<CyclicFactor>,
}

impl CrankNicolson {
    pub fn new(potential: &Potential, x_min: f64, x_max: f64, n_x: usize, epsilon: f64) -> Result<Self> {
        if n_x < 3 {
            return Err(Error::InvalidGrid(format!("Crank-Nicolson needs at least 3 points, got {n_x}")));
        }
        let dx = (x_max - x_min) / n_x as f64;
        Ok(Self {
            potential: (0..n_x).map(|j| potential.value(x_min + j as f64 * dx) / epsilon).collect(),
            coupling: epsilon / (2.0 * dx * dx),
            factor: None,
        })
    }

    fn take_factor(&mut self, dt: f64) -> Result<CyclicFactor> {
        if self.factor.as_ref().is_none_or(|f| f.dt != dt) {
            // A = I + (iΔt/2)·(H/ε): diagonal 1 + (iΔt/2)(2c + V/ε), off −(iΔt/2)c.
            let half = Complex64::new(0.0, 0.5 * dt);
            let diag: Vec<Complex64> = self.potential.iter().map(|v| 1.0 + half * (2.0 * self.coupling + v)).collect();
            self.factor = Some(CyclicFactor::new(&diag, -half * self.coupling, dt)?);
        }
        Ok(self.factor.take().expect("factor was just built"))
    }
}

impl Stepper for CrankNicolson {
    /// Each step is two sweeps over memory. The state is kept as y with
    /// u = y − f·z, so the Sherman–Morrison correction of one step is
    /// applied on the fly while the next step assembles its right-hand side
    /// (b_j u_j + a(u_{j−1} + u_{j+1}), fused with forward elimination);
    /// the second sweep is the back substitution.
    fn advance(&mut self, u: &mut [Complex64], dt: f64, steps: usize) -> Result<()> {
        let n = u.len();
        if steps == 0 {
            return Ok(());
        }
        let half = Complex64::new(0.0, 0.5 * dt);
        let a = half * self.coupling;
        let b0 = 1.0 - half * (2.0 * self.coupling);
        let factor = self.take_factor(dt)?;
        let (z, inv_pivot, off) = (&factor.z, &factor.inv_pivot, factor.off);
        let y = u;
        let mut f = Complex64::new(0.0, 0.0);
        for _ in 0..steps {
            let first = y[0] - f * z[0];
            let mut prev = y[n - 1] - f * z[n - 1];
            let mut cur = first;
            let mut w_prev = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let next = if j + 1 < n { y[j + 1] - f * z[j + 1] } else { first };
                let rhs = (b0 - half * self.potential[j]) * cur + a * (prev + next);
                let w = (rhs - off * w_prev) * inv_pivot[j];
                y[j] = w;
                w_prev = w;
                prev = cur;
                cur = next;
            }
            factor.backward(y);
            f = factor.correction(y);
        }
        for (v, zj) in y.iter_mut().zip(z) {
            *v -= f * zj;
        }
        self.factor = Some(factor);
        Ok(())
    }
}

/// Crank–Nicolson solution with `n_t` steps over the output span.
pub fn crank_nicolson_solve(spec: &ProblemSpec, n_x: usize, n_t: usize, times: &[f64]) -> Result<ReferenceRun> {
    let times = output_times(spec, times)?;
    let u0 = initial_data(spec, n_x)?;
    let mut stepper = CrankNicolson::new(&spec.potential, spec.x_min, spec.x_max, n_x, spec.epsilon)?;
    march(ReferenceMethod::CrankNicolson, &mut stepper, u0, n_t, &times)
}

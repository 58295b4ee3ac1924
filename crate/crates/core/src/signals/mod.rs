//! Initial wavefunctions: WKB chirps, complex Gaussian sums, the built-in
//! test problems, and the text config format that describes them.

pub mod config;
pub mod expr;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
pub use expr::{parse_expression, FunctionExpr};

/// Amplitude below which (relative to the recipe's peak amplitude) a region
/// does not count towards the effective wavenumber `k_eff`.
pub const AMPLITUDE_FLOOR: f64 = 1e-2;

/// Number of sample points used to scan a recipe for `k_eff`.
pub const K_EFF_SAMPLES: usize = 10_000;

/// Margin applied to `k_eff` to obtain the default phase-space extent.
pub const K_MAX_MARGIN: f64 = 1.2;

/// Default minimal number of samples per shortest local wavelength.
pub const DEFAULT_POINTS_PER_WAVELENGTH: f64 = 2.0;

/// Complex samples of u^ε on a uniform periodic grid.
///
/// Sample `j` sits at `x_min + j·Δx` with `Δx = (x_max − x_min)/n_x`; the
/// point `x_max` is identified with `x_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavefunctionGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub values: Vec<Complex64>,
    pub epsilon: f64,
}

impl WavefunctionGrid {
    /// Structural constructor: power-of-two length, finite ordered domain,
    /// positive ε.
    pub fn new(x_min: f64, x_max: f64, values: Vec<Complex64>, epsilon: f64) -> Result<Self> {
        check_domain(x_min, x_max)?;
        if !values.len().is_power_of_two() {
            return Err(Error::InvalidGrid(format!("n_x = {} is not a power of two", values.len())));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        Ok(Self { x_min, x_max, values, epsilon })
    }

    pub fn n_x(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.values.len() as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        self.x_min + j as f64 * self.dx()
    }

    /// Largest resolvable wavenumber, ε/(2Δx).
    pub fn nyquist_k(&self) -> f64 {
        self.epsilon / (2.0 * self.dx())
    }

    /// ∑|u_j|²·Δx.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dx()
    }

    /// Check `Δx ≤ ε/(points_per_wavelength·k_eff)`.
    pub fn check_adequacy(&self, k_eff: f64, points_per_wavelength: f64) -> Result<()> {
        if k_eff <= 0.0 {
            return Ok(());
        }
        let limit = self.epsilon / (points_per_wavelength * k_eff);
        let dx = self.dx();
        if dx > limit * (1.0 + 1e-12) {
            return Err(Error::UnderResolved { dx, limit, k_eff, epsilon: self.epsilon });
        }
        Ok(())
    }

    /// `max(|u_0|, |u_{n−1}|) / max|u|`, 0 for the zero grid.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let n = self.values.len();
        self.values[0].norm().max(self.values[n - 1].norm()) / peak
    }

    /// True if `other` has the same domain, length and ε.
    pub fn same_geometry(&self, other: &WavefunctionGrid) -> bool {
        self.x_min == other.x_min
            && self.x_max == other.x_max
            && self.values.len() == other.values.len()
            && self.epsilon == other.epsilon
    }
}

pub(crate) fn check_domain(x_min: f64, x_max: f64) -> Result<()> {
    if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
        return Err(Error::InvalidGrid(format!("domain [{x_min}, {x_max}] is empty or non-finite")));
    }
    Ok(())
}

/// One complex Gaussian term `exp(−(alpha/ε + delta)·x² + beta·x + gamma)`.
///
/// `alpha` carries the parts of the quadratic coefficient that scale with
/// 1/ε (chirps, and ε-scaled widths as in Problem 3); `delta` carries the
/// ε-independent part (the fixed widths of Problem 4). Keeping them apart
/// makes sampling exact at every ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianTerm {
    pub alpha: Complex64,
    pub delta: Complex64,
    pub beta: Complex64,
    pub gamma: Complex64,
}

impl GaussianTerm {
    pub fn new(alpha: Complex64, delta: Complex64, beta: Complex64, gamma: Complex64) -> Self {
        Self { alpha, delta, beta, gamma }
    }

    /// Total quadratic coefficient `a = alpha/ε + delta`.
    pub fn a(&self, epsilon: f64) -> Complex64 {
        self.alpha / epsilon + self.delta
    }

    pub fn exponent(&self, x: f64, epsilon: f64) -> Complex64 {
        -self.a(epsilon) * x * x + self.beta * x + self.gamma
    }

    pub fn value(&self, x: f64, epsilon: f64) -> Complex64 {
        self.exponent(x, epsilon).exp()
    }

    /// Local wavenumber (ε/2π)·Im ∂ₓ(exponent).
    pub fn local_wavenumber(&self, x: f64, epsilon: f64) -> f64 {
        let slope = -2.0 * self.a(epsilon) * x + self.beta;
        epsilon * slope.im / (2.0 * PI)
    }
}

/// Initial-condition recipe.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// u = A(x)·exp((2πi/ε)·S(x)).
    Wkb { amplitude: FunctionExpr, phase: FunctionExpr },
    /// u = ∑ terms.
    GaussianSum(Vec<GaussianTerm>),
}

/// External potential V(x) with its derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    /// V(x) = a·x
    Linear(f64),
    /// V(x) = c·x²/2
    Quadratic(f64),
    /// Arbitrary expression; the derivative is formed symbolically once.
    Expr {
        expr: FunctionExpr,
        derivative: FunctionExpr,
    },
}

impl Potential {
    /// Build from an expression, recognising the literal zero.
    pub fn from_expr(expr: FunctionExpr) -> Potential {
        if expr.is_zero() {
            return Potential::Zero;
        }
        let derivative = expr.derivative();
        Potential::Expr { expr, derivative }
    }

    /// V(x). Evaluation errors of an `Expr` potential surface as NaN, which the
    /// integrators report as non-finite trajectories.
    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Linear(a) => a * x,
            Potential::Quadratic(c) => 0.5 * c * x * x,
            Potential::Expr { expr, .. } => expr.eval(x).unwrap_or(f64::NAN),
        }
    }

    /// V′(x), NaN on evaluation errors.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Linear(a) => *a,
            Potential::Quadratic(c) => c * x,
            Potential::Expr { derivative, .. } => derivative.eval(x).unwrap_or(f64::NAN),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    /// max |V′| over `samples` uniform points of [x_min, x_max].
    pub fn max_abs_derivative(&self, x_min: f64, x_max: f64, samples: usize) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Linear(a) => a.abs(),
            Potential::Quadratic(c) => (c * x_min).abs().max((c * x_max).abs()),
            Potential::Expr { .. } => (0..=samples)
                .map(|i| x_min + (x_max - x_min) * i as f64 / samples as f64)
                .map(|x| self.derivative(x).abs())
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max),
        }
    }

    /// Text form, parseable by [`parse_expression`].
    pub fn describe(&self) -> String {
        match self {
            Potential::Zero => "0".into(),
            Potential::Linear(a) => format!("{a}*x"),
            Potential::Quadratic(c) => format!("{c}*x^2/2"),
            Potential::Expr { expr, .. } => expr.to_string(),
        }
    }
}

/// A complete test problem: initial data, potential, ε, final time, domain
/// and phase-space wavenumber extent.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub name: String,
    pub initial_condition: InitialCondition,
    pub potential: Potential,
    pub epsilon: f64,
    pub t_max: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub k_max: f64,
    /// Sampling-adequacy requirement used by [`sample_problem`].
    pub points_per_wavelength: f64,
}

impl ProblemSpec {
    /// Assemble a spec and fill `k_max` with [`ProblemSpec::default_k_max`].
    pub fn new(
        name: impl Into<String>,
        initial_condition: InitialCondition,
        potential: Potential,
        epsilon: f64,
        t_max: f64,
        (x_min, x_max): (f64, f64),
    ) -> Result<Self> {
        check_domain(x_min, x_max)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(t_max >= 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_max must be non-negative, got {t_max}")));
        }
        let mut spec = Self {
            name: name.into(),
            initial_condition,
            potential,
            epsilon,
            t_max,
            x_min,
            x_max,
            k_max: 0.0,
            points_per_wavelength: DEFAULT_POINTS_PER_WAVELENGTH,
        };
        spec.k_max = spec.default_k_max()?;
        Ok(spec)
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    /// Largest |local wavenumber| over the part of the domain where the
    /// amplitude exceeds [`AMPLITUDE_FLOOR`] × its peak, scanned on
    /// [`K_EFF_SAMPLES`] points.
    pub fn k_eff(&self) -> Result<f64> {
        let n = K_EFF_SAMPLES;
        let xs: Vec<f64> = (0..n).map(|i| self.x_min + self.length() * i as f64 / (n - 1) as f64).collect();
        match &self.initial_condition {
            InitialCondition::Wkb { amplitude, phase } => {
                let dphase = phase.derivative();
                let amps = xs.iter().map(|&x| amplitude.eval(x).map(f64::abs)).collect::<Result<Vec<_>>>()?;
                let peak = amps.iter().cloned().fold(0.0, f64::max);
                if peak == 0.0 {
                    return Ok(0.0);
                }
                let mut k = 0.0f64;
                for (&x, &a) in xs.iter().zip(&amps) {
                    if a >= AMPLITUDE_FLOOR * peak {
                        k = k.max(dphase.eval(x)?.abs());
                    }
                }
                Ok(k)
            }
            InitialCondition::GaussianSum(terms) => {
                let eps = self.epsilon;
                let peak = terms
                    .iter()
                    .flat_map(|t| xs.iter().map(move |&x| t.exponent(x, eps).re))
                    .fold(f64::NEG_INFINITY, f64::max);
                if !peak.is_finite() {
                    return Ok(0.0);
                }
                let floor = peak + AMPLITUDE_FLOOR.ln();
                let mut k = 0.0f64;
                for t in terms {
                    for &x in &xs {
                        if t.exponent(x, eps).re >= floor {
                            k = k.max(t.local_wavenumber(x, eps).abs());
                        }
                    }
                }
                Ok(k)
            }
        }
    }

    /// `K_MAX_MARGIN·k_eff` plus the wavenumber drift `t_max·max|V′|/(2π)`
    /// the potential can impart before `t_max`, floored so that smooth
    /// non-oscillatory data still get a few smoothing widths of k-extent.
    pub fn default_k_max(&self) -> Result<f64> {
        let drift = self.t_max * self.potential.max_abs_derivative(self.x_min, self.x_max, 1000) / (2.0 * PI);
        let floor = 8.0 * (self.epsilon / (4.0 * PI)).sqrt();
        Ok((K_MAX_MARGIN * self.k_eff()? + drift).max(floor))
    }

    /// Evaluate u₀ at `x`.
    pub fn initial_value(&self, x: f64) -> Result<Complex64> {
        match &self.initial_condition {
            InitialCondition::Wkb { amplitude, phase } => {
                let a = amplitude.eval(x)?;
                if a == 0.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                let theta = 2.0 * PI * phase.eval(x)? / self.epsilon;
                Ok(Complex64::from_polar(a, theta))
            }
            InitialCondition::GaussianSum(terms) => Ok(terms.iter().map(|t| t.value(x, self.epsilon)).sum()),
        }
    }
}

/// Sample the recipe on `n_x` points of the spec's domain.
pub fn sample_problem(spec: &ProblemSpec, n_x: usize) -> Result<WavefunctionGrid> {
    if !n_x.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("n_x = {n_x} is not a power of two")));
    }
    let dx = spec.length() / n_x as f64;
    let values = (0..n_x).map(|j| spec.initial_value(spec.x_min + j as f64 * dx)).collect::<Result<Vec<_>>>()?;
    let grid = WavefunctionGrid::new(spec.x_min, spec.x_max, values, spec.epsilon)?;
    grid.check_adequacy(spec.k_eff()?, spec.points_per_wavelength)?;
    Ok(grid)
}

/// Identifiers of the built-in problems.
pub const BUILTIN_IDS: [&str; 5] = ["problem1", "problem2", "problem3", "problem4", "tanh_chirp"];

const P1_AMPLITUDE: &str = "0.25*(tanh(6.87*(x+2.42))+1)*(tanh(6.87*(2.42-x))+1)";
const P1_PHASE: &str = "-x^4/4 - x^2 + 2*x";
const P2_PHASE: &str = "-x^4/4 + 2*x";
const CHIRP_AMPLITUDE: &str = "exp(-25*(x-0.5)^2)";
const CHIRP_PHASE: &str = "-(1/5)*log(exp(10*(x-0.5)) + exp(-10*(x-0.5)))";

/// Default final time of a built-in problem.
///
/// Problems 1 and 2 carry local wavenumbers up to ≈28, so their phase-space
/// support sweeps ≈2π·28·t in x; 0.02 keeps it well inside [−6, 6] and is
/// past the first caustic of Problem 1 (t ≈ 0.014).
pub fn default_t_max(id: &str) -> f64 {
    match id {
        "problem1" | "problem2" => 0.02,
        _ => 0.1,
    }
}

/// Human-readable formulas for `problems` listings.
pub fn builtin_description(id: &str) -> Option<&'static str> {
    Some(match id {
        "problem1" => "WKB: A(x)=1/4(tanh(6.87(x+2.42))+1)(tanh(6.87(2.42-x))+1), S(x)=-x^4/4-x^2+2x, V=0",
        "problem2" => "WKB: A as Problem 1, S(x)=-x^4/4+2x, V(x)=x",
        "problem3" => {
            "Gaussian sum: e^{-(1+7i)x^2/(10eps)} + e^{-(0.2+3i)x^2/(10eps)} + e^{-(0.9-8i)x^2/(10eps)}, V(x)=x"
        }
        "problem4" => {
            "Gaussian sum: e^{-(1+3i/eps)x^2-2x-4} + e^{-(1+2i/eps)x^2-x-1} + e^{-(1+i/eps)x^2-(2/3)x-4/9}, V=0"
        }
        "tanh_chirp" => {
            "WKB: A(x)=e^{-25(x-0.5)^2}, S(x)=-(1/5)log(e^{10(x-0.5)}+e^{-10(x-0.5)}), V=0, eps=1/100 in the figures"
        }
        _ => return None,
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The paper's test problems, transcribed literally.
pub fn builtin_problem(id: &str, epsilon: f64) -> Result<ProblemSpec> {
    let wkb = |a: &str, s: &str| -> Result<InitialCondition> {
        Ok(InitialCondition::Wkb { amplitude: parse_expression(a)?, phase: parse_expression(s)? })
    };
    let zero = c(0.0, 0.0);
    let (ic, potential, domain) = match id {
        "problem1" => (wkb(P1_AMPLITUDE, P1_PHASE)?, Potential::Zero, (-6.0, 6.0)),
        "problem2" => (wkb(P1_AMPLITUDE, P2_PHASE)?, Potential::Linear(1.0), (-6.0, 6.0)),
        "problem3" => (
            InitialCondition::GaussianSum(vec![
                GaussianTerm::new(c(0.1, 0.7), zero, zero, zero),
                GaussianTerm::new(c(0.02, 0.3), zero, zero, zero),
                GaussianTerm::new(c(0.09, -0.8), zero, zero, zero),
            ]),
            Potential::Linear(1.0),
            (-6.0, 6.0),
        ),
        "problem4" => (
            InitialCondition::GaussianSum(vec![
                GaussianTerm::new(c(0.0, 3.0), c(1.0, 0.0), c(-2.0, 0.0), c(-4.0, 0.0)),
                GaussianTerm::new(c(0.0, 2.0), c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0)),
                GaussianTerm::new(c(0.0, 1.0), c(1.0, 0.0), c(-2.0 / 3.0, 0.0), c(-4.0 / 9.0, 0.0)),
            ]),
            Potential::Zero,
            (-6.0, 6.0),
        ),
        "tanh_chirp" => (wkb(CHIRP_AMPLITUDE, CHIRP_PHASE)?, Potential::Zero, (0.0, 1.0)),
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    ProblemSpec::new(id, ic, potential, epsilon, default_t_max(id), domain)
}

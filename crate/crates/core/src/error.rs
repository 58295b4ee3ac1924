//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: usage-type
//! problems (bad config, unknown identifiers, malformed files) exit with 1,
//! numeric failures (under-resolution, empty ensembles, non-finite state,
//! solver breakdown) exit with 2.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Expression text could not be parsed.
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    /// Expression referenced a name outside the expression language.
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    /// Expression evaluation left its domain (division by zero, log of a
    /// non-positive number, ...).
    #[error("evaluation error at x = {x}: {message}")]
    Eval { x: f64, message: String },

    /// Grid spacing too coarse for the recipe's local wavenumber.
    #[error(
        "under-resolved grid: dx = {dx:.3e} exceeds the adequacy limit {limit:.3e} \
         (k_eff = {k_eff:.4}, epsilon = {epsilon})"
    )]
    UnderResolved { dx: f64, limit: f64, k_eff: f64, epsilon: f64 },

    /// Structurally invalid grid or geometry request.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// The FFT pipeline produced a non-negligible imaginary part.
    #[error("imaginary residue {residue:.3e} exceeds 1e-10 x max|W| = {max:.3e} (aliasing or under-resolution)")]
    ImaginaryResidue { residue: f64, max: f64 },

    /// Requested wavenumber extent exceeds the FFT's natural k-range.
    #[error("n_k insufficient: k_max = {k_max} exceeds the natural k-range +/-{natural} of this grid")]
    InsufficientNk { k_max: f64, natural: f64 },

    /// Smoothing kernel support does not fit the grid.
    #[error("kernel wider than grid extent along {axis}: half-width {half_width} samples, axis length {len}")]
    KernelTooWide { axis: &'static str, half_width: usize, len: usize },

    /// Seeding found nothing above threshold.
    #[error("empty ensemble: no grid node reaches threshold {eta} x max|W| (max|W| = {max:e})")]
    EmptyEnsemble { eta: f64, max: f64 },

    /// A trajectory left the finite numbers.
    #[error("non-finite phase-space position at t = {t} (particle {index})")]
    NonFinite { t: f64, index: usize },

    /// Initial data does not decay at the periodic boundary.
    #[error("boundary-decay precondition violated: |u| = {value:.3e} at the domain boundary (need < 1e-10 x max|u|)")]
    BoundaryDecay { value: f64 },

    /// Tridiagonal solve hit a (near-)zero pivot.
    #[error("linear solve breakdown: pivot {pivot:.3e} at row {row}")]
    SolveBreakdown { pivot: f64, row: usize },

    /// Closed-form Gaussian propagation requested for a non-Gaussian recipe.
    #[error("exact free evolution needs a Gaussian-sum recipe with zero potential: {0}")]
    NotGaussian(String),

    /// Two profiles/grids that must share geometry do not.
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    /// Slope fitting received a value that has no logarithm.
    #[error("non-positive value {value} at epsilon = {epsilon}")]
    NonPositive { epsilon: f64, value: f64 },

    /// Config file problem.
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    /// Unknown built-in problem id.
    #[error("unknown problem `{0}` (expected one of problem1, problem2, problem3, problem4, tanh_chirp)")]
    UnknownProblem(String),

    /// Caller supplied an argument outside an operation's precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Malformed binary or CSV file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A pipeline stage failed; wraps the stage's error.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerics (exit code 2) as opposed to usage
    /// errors (exit code 1).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Eval { .. }
            | Error::UnderResolved { .. }
            | Error::ImaginaryResidue { .. }
            | Error::InsufficientNk { .. }
            | Error::KernelTooWide { .. }
            | Error::EmptyEnsemble { .. }
            | Error::NonFinite { .. }
            | Error::BoundaryDecay { .. }
            | Error::SolveBreakdown { .. }
            | Error::NonPositive { .. } => true,
            Error::Stage { source, .. } => source.is_numeric(),
            _ => false,
        }
    }

    /// Attach a pipeline stage name.
    pub fn in_stage(self, stage: &'static str) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }
}

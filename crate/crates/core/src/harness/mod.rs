//! End-to-end pipeline, ε-sweeps with slope fitting, and the command line.
//!
//! [`run_pipeline`] executes sample → WT → smooth → seed → advance →
//! reconstruct → observables → compare-against-reference and wall-clocks
//! every stage. Timed stages run inside a dedicated rayon pool, single
//! threaded unless the caller asks otherwise, so that stage timings measure
//! algorithmic cost rather than core count.

mod bench;
pub mod cli;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{advance_in_place, default_step, reconstruct, seed_particles, DEFAULT_ETA};
use crate::error::{Error, Result};
use crate::io;
use crate::observables::{
    compare, phase_space_norm_density, smoothed_wavefunction_density, DensityProfile, ErrorReport,
};
use crate::phasespace::{gaussian_std, swt, PhaseSpaceGrid, SmoothingKernelSpec};
use crate::reference::{reference_mesh, solve, ReferenceMethod};
use crate::signals::{sample_problem, InitialCondition, ProblemSpec};

pub use bench::{fit_slope, sweep, BenchRow, BenchTable, SlopeFit, SweepOptions, BENCH_COLUMNS};

/// Grid sizes chosen for one pipeline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridChoice {
    pub n_x: usize,
    /// FFT length of the Wigner transform (number of lags).
    pub n_k: usize,
    /// Half-width of the cropped wavenumber band.
    pub k_window: f64,
}

/// ε-scaled meshing for the SWT pipeline.
///
/// * the wavenumber band is `k_max` plus `k_pad` standard deviations of the
///   k-kernel (and at least wide enough to hold the whole kernel);
/// * `n_x` puts the grid Nyquist wavenumber ε/(2Δx) at least
///   `nyquist_margin` × the band edge and resolves the x-kernel with
///   `points_per_std` samples per standard deviation;
/// * `n_k` resolves the k-kernel likewise, covers every lag the truncated
///   k-kernel can see (`4·s_win/Δx` lags, s_win = R·√(ε/4π)/σk), and is at
///   least `n_x/4`.
///
/// Every term is ∝ 1/ε (or 1/√ε), so both sizes grow like 1/ε after
/// power-of-two rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPolicy {
    pub points_per_std: f64,
    pub nyquist_margin: f64,
    pub k_pad: f64,
    pub min_n_x: usize,
}

impl Default for GridPolicy {
    fn default() -> Self {
        Self { points_per_std: 3.0, nyquist_margin: 1.1, k_pad: 6.0, min_n_x: 256 }
    }
}

impl GridPolicy {
    pub fn choose(&self, spec: &ProblemSpec, kern: &SmoothingKernelSpec) -> GridChoice {
        let eps = spec.epsilon;
        let length = spec.length();
        let (std_x, std_k) = (kern.std_x(eps), kern.std_k(eps));
        let k_window = (spec.k_max + self.k_pad * std_k).max((kern.truncation_radius + 0.5) * std_k);
        let nyquist_points = 2.0 * self.nyquist_margin * length * k_window / eps;
        let kernel_points = self.points_per_std * length / std_x;
        let n_x = pow2(nyquist_points.max(kernel_points)).max(self.min_n_x);
        let dx = length / n_x as f64;
        let s_win = kern.truncation_radius * (eps / (4.0 * PI)).sqrt() / kern.sigma_k;
        let k_resolution = self.points_per_std * eps / (dx * std_k);
        let lag_span = 4.0 * s_win / dx;
        let n_k = pow2(k_resolution.max(lag_span).max((n_x / 4) as f64)).min(2 * n_x);
        GridChoice { n_x, n_k, k_window }
    }
}

fn pow2(x: f64) -> usize {
    (x.ceil().max(1.0) as usize).next_power_of_two()
}

/// Which physical-space solution the pipeline compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReferenceChoice {
    /// Closed form for free Gaussian sums, split-step otherwise.
    #[default]
    Auto,
    Method(ReferenceMethod),
    /// No comparison (timing-only runs).
    Skip,
}

impl ReferenceChoice {
    /// The method `Auto` resolves to for `spec`.
    pub fn resolve(self, spec: &ProblemSpec) -> Option<ReferenceMethod> {
        match self {
            ReferenceChoice::Auto => Some(
                if matches!(spec.initial_condition, InitialCondition::GaussianSum(_)) && spec.potential.is_zero() {
                    ReferenceMethod::ExactFreeGaussian
                } else {
                    ReferenceMethod::Splitstep
                },
            ),
            ReferenceChoice::Method(m) => Some(m),
            ReferenceChoice::Skip => None,
        }
    }
}

/// Pipeline parameters; `None` sizes come from [`GridPolicy`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub n_x: Option<usize>,
    pub n_k: Option<usize>,
    pub sigma_x: f64,
    pub sigma_k: f64,
    pub eta: f64,
    /// RK4 step; `None` uses [`default_step`].
    pub h: Option<f64>,
    /// Output times; empty means `[t_max]`.
    pub output_times: Vec<f64>,
    pub reference: ReferenceChoice,
    /// Worker threads for the timed stages (1 = benchmark-fair).
    pub threads: usize,
    /// Directory for grids, densities and the report; nothing is written
    /// when `None`. File output is not timed.
    pub out_dir: Option<PathBuf>,
    pub policy: GridPolicy,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            n_x: None,
            n_k: None,
            sigma_x: 1.0,
            sigma_k: 1.0,
            eta: DEFAULT_ETA,
            h: None,
            output_times: Vec::new(),
            reference: ReferenceChoice::Auto,
            threads: 1,
            out_dir: None,
            policy: GridPolicy::default(),
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub sample: f64,
    pub wt: f64,
    pub smooth: f64,
    pub seed: f64,
    pub advance: f64,
    pub reconstruct: f64,
    pub observables: f64,
}

impl StageTimings {
    /// Everything the SWT method pays for, the transform of the initial
    /// condition included.
    pub fn total_swt(&self) -> f64 {
        self.sample + self.wt + self.smooth + self.seed + self.advance + self.reconstruct + self.observables
    }
}

/// The reference run behind a report's errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub method: ReferenceMethod,
    pub n_x: usize,
    pub n_t: usize,
    pub wall_time: f64,
}

/// Comparison at one output time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotReport {
    pub t: f64,
    pub error: Option<ErrorReport>,
    pub coverage_gap: f64,
    /// ∫N dx of the SWT marginal.
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub epsilon: f64,
    pub t_max: f64,
    pub sigma_x: f64,
    pub sigma_k: f64,
    pub eta: f64,
    pub h: f64,
    pub n_x: usize,
    pub n_k: usize,
    /// Columns of the cropped phase-space grid.
    pub n_k_window: usize,
    pub k_window: f64,
    pub threads: usize,
    pub timings: StageTimings,
    pub t_total_swt: f64,
    /// Reference wall time per method name.
    pub reference_timings: BTreeMap<String, f64>,
    pub reference: Option<ReferenceSummary>,
    /// D: particles seeded.
    pub particle_count: usize,
    pub snapshots: Vec<SnapshotReport>,
    /// Error at the last output time.
    pub error: Option<ErrorReport>,
    pub coverage_gap: f64,
}

/// Densities produced by a run, kept for callers that post-process them.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    /// (SWT marginal, reference density) per output time.
    pub densities: Vec<(DensityProfile, Option<DensityProfile>)>,
    pub initial_swt: PhaseSpaceGrid,
}

/// Run the pipeline and return its report.
pub fn run_pipeline(spec: &ProblemSpec, params: &RunParams) -> Result<RunReport> {
    run_pipeline_full(spec, params).map(|out| out.report)
}

/// [`run_pipeline`] also returning the densities and the initial SWT.
pub fn run_pipeline_full(spec: &ProblemSpec, params: &RunParams) -> Result<RunOutput> {
    let pool = thread_pool(params.threads)?;
    let output = pool.install(|| execute(spec, params))?;
    if let Some(dir) = &params.out_dir {
        persist(dir, &output).map_err(|e| e.in_stage("persist"))?;
    }
    Ok(output)
}

pub(crate) fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    if threads == 0 {
        return Err(Error::InvalidArgument("thread count must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed().as_secs_f64();
    out
}

fn execute(spec: &ProblemSpec, params: &RunParams) -> Result<RunOutput> {
    let kern = SmoothingKernelSpec::new(params.sigma_x, params.sigma_k)?;
    let mut grid = params.policy.choose(spec, &kern);
    grid.n_x = params.n_x.unwrap_or(grid.n_x);
    grid.n_k = params.n_k.unwrap_or(grid.n_k);
    let times = output_times(spec, &params.output_times)?;
    let t_end = times.last().copied().unwrap_or(0.0);
    let h = match params.h {
        Some(h) => h,
        None => default_step(t_end, grid.k_window, spec.potential.max_abs_derivative(spec.x_min, spec.x_max, 4096)),
    };
    let mut timings = StageTimings::default();

    let u0 = timed(&mut timings.sample, || sample_problem(spec, grid.n_x)).map_err(|e| e.in_stage("sample"))?;
    let (w0, swt_timings) = swt(&u0, &kern, grid.n_k, grid.k_window).map_err(|e| e.in_stage("transform"))?;
    timings.wt = swt_timings.wt;
    timings.smooth = swt_timings.smooth;
    let mut ensemble = timed(&mut timings.seed, || seed_particles(&w0, params.eta)).map_err(|e| e.in_stage("seed"))?;
    let particle_count = ensemble.len();

    let mut densities = Vec::with_capacity(times.len());
    let mut gaps = Vec::with_capacity(times.len());
    for &t in &times {
        let (density, gap) = if t == 0.0 {
            // No dynamics: the transported density is the SWT itself.
            let d = timed(&mut timings.observables, || Ok(phase_space_norm_density(&w0)))?;
            (d, 0.0)
        } else {
            timed(&mut timings.advance, || advance_in_place(&mut ensemble, &spec.potential, t, h))
                .map_err(|e| e.in_stage("advance"))?;
            let rec = timed(&mut timings.reconstruct, || reconstruct(&ensemble, &w0.geometry))
                .map_err(|e| e.in_stage("reconstruct"))?;
            let d = timed(&mut timings.observables, || Ok(phase_space_norm_density(&rec.grid)))?;
            (d, rec.coverage_gap)
        };
        densities.push(density);
        gaps.push(gap);
    }

    let mut reference_timings = BTreeMap::new();
    let (reference, ref_densities) = match params.reference.resolve(spec) {
        None => (None, vec![None; times.len()]),
        Some(method) => {
            let (summary, profiles) = reference_densities(spec, method, &times, params.sigma_x, grid.n_x)
                .map_err(|e| e.in_stage("reference"))?;
            reference_timings.insert(method.to_string(), summary.wall_time);
            (Some(summary), profiles.into_iter().map(Some).collect())
        }
    };

    let mut snapshots = Vec::with_capacity(times.len());
    for ((density, reference), (&t, &gap)) in densities.iter().zip(&ref_densities).zip(times.iter().zip(&gaps)) {
        let error = reference.as_ref().map(|r| compare(density, r)).transpose().map_err(|e| e.in_stage("compare"))?;
        snapshots.push(SnapshotReport { t, error, coverage_gap: gap, mass: density.integral() });
    }
    let last = snapshots.last().cloned();
    let report = RunReport {
        problem: spec.name.clone(),
        epsilon: spec.epsilon,
        t_max: t_end,
        sigma_x: params.sigma_x,
        sigma_k: params.sigma_k,
        eta: params.eta,
        h,
        n_x: grid.n_x,
        n_k: grid.n_k,
        n_k_window: w0.n_k(),
        k_window: grid.k_window,
        threads: params.threads,
        timings,
        t_total_swt: timings.total_swt(),
        reference_timings,
        reference,
        particle_count,
        error: last.as_ref().and_then(|s| s.error),
        coverage_gap: last.map_or(0.0, |s| s.coverage_gap),
        snapshots,
    };
    Ok(RunOutput { report, densities: densities.into_iter().zip(ref_densities).collect(), initial_swt: w0 })
}

fn output_times(spec: &ProblemSpec, times: &[f64]) -> Result<Vec<f64>> {
    let mut t: Vec<f64> = if times.is_empty() { vec![spec.t_max] } else { times.to_vec() };
    if let Some(bad) = t.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::InvalidArgument(format!("output time {bad} must be finite and non-negative")));
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    Ok(t)
}

/// σx-smoothed reference densities at `times`, on an `n_x` grid.
pub fn reference_densities(
    spec: &ProblemSpec,
    method: ReferenceMethod,
    times: &[f64],
    sigma_x: f64,
    n_x: usize,
) -> Result<(ReferenceSummary, Vec<DensityProfile>)> {
    let mesh = reference_mesh(spec);
    // The reference mesh is a power of two at least as fine as the pipeline
    // grid in the usual case, so resampling is exact decimation.
    let ref_n_x = mesh.n_x.max(n_x);
    let n_t = match method {
        ReferenceMethod::Splitstep => mesh.n_t_splitstep,
        ReferenceMethod::CrankNicolson => mesh.n_t_crank_nicolson,
        ReferenceMethod::ExactFreeGaussian => 0,
    };
    let run = solve(method, spec, ref_n_x, n_t.max(1), times)?;
    let profiles = run
        .snapshots
        .iter()
        .map(|(t, u)| smoothed_wavefunction_density(u, sigma_x, *t)?.resample(n_x))
        .collect::<Result<Vec<_>>>()?;
    Ok((ReferenceSummary { method, n_x: ref_n_x, n_t: run.n_t, wall_time: run.wall_time }, profiles))
}

/// Width of the Gaussian that Liouville transport over time `t` under
/// V = 0 effectively applies to |u|² when the initial density was smoothed
/// with (σx, σk): the k-spread of the kernel shears into x at speed 2π, so
/// var_x(t) = ε σx²/(4π) + (2πt)²·ε σk²/(4π).
pub fn free_transport_effective_std(epsilon: f64, sigma_x: f64, sigma_k: f64, t: f64) -> f64 {
    let sx = gaussian_std(epsilon, sigma_x);
    let sk = gaussian_std(epsilon, sigma_k);
    (sx * sx + (2.0 * PI * t * sk).powi(2)).sqrt()
}

fn persist(dir: &std::path::Path, out: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::save_grid(&out.initial_swt, &dir.join("swt0.swtg"))?;
    for (i, (density, reference)) in out.densities.iter().enumerate() {
        io::save_profile(density, &dir.join(format!("density_swt_{i}.csv")))?;
        if let Some(r) = reference {
            io::save_profile(r, &dir.join(format!("density_ref_{i}.csv")))?;
        }
    }
    let json = serde_json::to_string_pretty(&out.report)
        .map_err(|e| Error::Format(format!("cannot serialize report: {e}")))?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    Ok(())
}

//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage errors (bad flags, configs, files), 2
//! numeric failures (under-resolution, empty ensembles, non-finite state,
//! solver breakdown).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::bench::reject_threads;
use super::{run_pipeline_full, sweep, GridPolicy, ReferenceChoice, RunParams, SweepOptions};
use crate::dynamics::DEFAULT_ETA;
use crate::error::{Error, Result};
use crate::io;
use crate::observables::{compare, smoothed_wavefunction_density, wavefunction_density};
use crate::phasespace::{smooth_owned, wigner_transform, SmoothingKernelSpec};
use crate::reference::{reference_mesh, solve, ReferenceMethod};
use crate::signals::config::ProblemConfig;
use crate::signals::{builtin_description, parse_expression, sample_problem, ProblemSpec, BUILTIN_IDS};

#[derive(Debug, Parser)]
#[command(name = "swt", version, about = "Semiclassical Schrödinger dynamics with the Smoothed Wigner Transform")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Problem file (built-in id or custom recipe plus run parameters).
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seeding threshold η relative to max|W₀|.
    #[arg(long, global = true, value_name = "ETA")]
    pub seed_eta: Option<f64>,
    /// Position width of the smoothing kernel, in units of √(ε/4π) (default 1).
    #[arg(long, global = true, value_name = "SIGMA")]
    pub sigma_x: Option<f64>,
    /// Wavenumber width of the smoothing kernel, in units of √(ε/4π) (default 1).
    #[arg(long, global = true, value_name = "SIGMA")]
    pub sigma_k: Option<f64>,
    /// Worker threads for the numerics (not accepted by `bench`).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    /// Comma-separated ε values; fractions such as 1/64 are accepted.
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    pub epsilons: Vec<String>,
    /// Run the ε points of a sweep concurrently (timings marked
    /// non-comparable).
    #[arg(long, global = true)]
    pub parallel_sweep: bool,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Built-in problem id (see `problems`); alternative to --config.
    #[arg(long)]
    pub problem: Option<String>,
    /// ε for this run (fractions accepted).
    #[arg(long)]
    pub epsilon: Option<String>,
    /// Final time override.
    #[arg(long)]
    pub t_max: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RefArg {
    Splitstep,
    Cn,
    Exact,
}

impl From<RefArg> for ReferenceMethod {
    fn from(r: RefArg) -> Self {
        match r {
            RefArg::Splitstep => ReferenceMethod::Splitstep,
            RefArg::Cn => ReferenceMethod::CrankNicolson,
            RefArg::Exact => ReferenceMethod::ExactFreeGaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareRef {
    Auto,
    Splitstep,
    Cn,
    Exact,
    None,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a signal and write its WT or SWT (SWTG binary, optional CSV).
    Transform {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Write the unsmoothed Wigner transform.
        #[arg(long)]
        unsmoothed: bool,
        #[arg(long)]
        n_x: Option<usize>,
        #[arg(long)]
        n_k: Option<usize>,
        /// Also write `x,k,value` CSV.
        #[arg(long)]
        csv: bool,
    },
    /// Full pipeline: transform, seed, transport, reconstruct, compare.
    Propagate {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Comma-separated output times (default: t_max).
        #[arg(long, value_delimiter = ',')]
        times: Vec<String>,
        #[arg(long, value_enum, default_value_t = CompareRef::Auto)]
        reference: CompareRef,
        #[arg(long)]
        n_x: Option<usize>,
        #[arg(long)]
        n_k: Option<usize>,
        /// RK4 step.
        #[arg(long)]
        h: Option<f64>,
    },
    /// Physical-space reference solution.
    Reference {
        #[arg(value_enum)]
        method: RefArg,
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_delimiter = ',')]
        times: Vec<String>,
        #[arg(long)]
        n_x: Option<usize>,
        #[arg(long)]
        n_t: Option<usize>,
    },
    /// Compare two density CSVs (the second is the reference).
    Compare { a: PathBuf, b: PathBuf },
    /// ε-sweep with timing table and fitted slopes.
    Bench {
        #[arg(long)]
        problem: Option<String>,
        /// Solver timed for the t_reference column.
        #[arg(long, value_enum, default_value_t = RefArg::Cn)]
        timing_reference: RefArg,
    },
    /// List the built-in problems.
    Problems,
}

/// Parse `argv` and run; returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                2
            } else {
                1
            }
        }
    }
}

fn parse_number(text: &str) -> Result<f64> {
    let e = parse_expression(text.trim())?;
    if !e.is_constant() {
        return Err(Error::InvalidArgument(format!("`{text}` is not a constant")));
    }
    e.eval(0.0)
}

fn parse_list(items: &[String]) -> Result<Vec<f64>> {
    items.iter().map(|s| parse_number(s)).collect()
}

fn load_config(global: &GlobalArgs, problem: Option<&str>) -> Result<ProblemConfig> {
    match (problem, &global.config) {
        (Some(id), None) => ProblemConfig::builtin(id),
        (None, Some(path)) => ProblemConfig::from_file(path),
        (Some(_), Some(_)) => Err(Error::InvalidArgument("give either --problem or --config, not both".into())),
        (None, None) => Err(Error::InvalidArgument("no problem given (use --problem ID or --config FILE)".into())),
    }
}

/// Resolve the spec from flags and config. ε comes from --epsilon, a single
/// --epsilons value, or the config file, in that order.
fn load_spec(global: &GlobalArgs, args: &ProblemArgs) -> Result<(ProblemConfig, ProblemSpec)> {
    let mut config = load_config(global, args.problem.as_deref())?;
    let epsilon = match (&args.epsilon, global.epsilons.as_slice()) {
        (Some(e), _) => Some(parse_number(e)?),
        (None, [single]) => Some(parse_number(single)?),
        (None, []) => None,
        (None, _) => return Err(Error::InvalidArgument("this command takes one epsilon; use --epsilon".into())),
    };
    if let Some(t) = &args.t_max {
        config.t_max = Some(parse_number(t)?);
    }
    let spec = config.spec(epsilon)?;
    Ok((config, spec))
}

fn kernel(global: &GlobalArgs, config: &ProblemConfig) -> Result<SmoothingKernelSpec> {
    SmoothingKernelSpec::new(
        global.sigma_x.or(config.sigma_x).unwrap_or(1.0),
        global.sigma_k.or(config.sigma_k).unwrap_or(1.0),
    )
}

fn out_dir(global: &GlobalArgs) -> Result<PathBuf> {
    let dir = global.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run_params(global: &GlobalArgs, config: &ProblemConfig) -> Result<RunParams> {
    let kern = kernel(global, config)?;
    Ok(RunParams {
        n_x: config.n_x,
        n_k: config.n_k,
        sigma_x: kern.sigma_x,
        sigma_k: kern.sigma_k,
        eta: global.seed_eta.or(config.eta).unwrap_or(DEFAULT_ETA),
        h: config.h,
        output_times: Vec::new(),
        reference: ReferenceChoice::Auto,
        threads: global.threads.unwrap_or(1),
        out_dir: None,
        policy: GridPolicy::default(),
    })
}

fn execute(cli: &Cli, out: &mut impl Write) -> Result<()> {
    let g = &cli.global;
    if !matches!(cli.command, Command::Bench { .. }) && g.parallel_sweep {
        return Err(Error::InvalidArgument("--parallel-sweep only applies to bench".into()));
    }
    match &cli.command {
        Command::Problems => {
            for id in BUILTIN_IDS {
                writeln!(out, "{id:<11} {}", builtin_description(id).unwrap_or(""))?;
            }
            Ok(())
        }
        Command::Compare { a, b } => {
            let pa = io::load_profile(a)?;
            let pb = io::load_profile(b)?;
            let r = compare(&pa, &pb)?;
            writeln!(
                out,
                "l1_rel={} l2_rel={} linf_rel={} mass_ratio={}",
                r.l1_rel, r.l2_rel, r.linf_rel, r.mass_ratio
            )?;
            Ok(())
        }
        Command::Transform { problem, unsmoothed, n_x, n_k, csv } => {
            let (config, spec) = load_spec(g, problem)?;
            let mut params = run_params(g, &config)?;
            params.n_x = n_x.or(params.n_x);
            params.n_k = n_k.or(params.n_k);
            let kern = kernel(g, &config)?;
            let mut grid = params.policy.choose(&spec, &kern);
            grid.n_x = params.n_x.unwrap_or(grid.n_x);
            grid.n_k = params.n_k.unwrap_or(grid.n_k);
            let dir = out_dir(g)?;
            let pool = super::thread_pool(params.threads)?;
            let w = pool.install(|| -> Result<_> {
                let u = sample_problem(&spec, grid.n_x).map_err(|e| e.in_stage("sample"))?;
                let w = wigner_transform(&u, grid.n_k, grid.k_window).map_err(|e| e.in_stage("transform"))?;
                if *unsmoothed {
                    Ok(w)
                } else {
                    smooth_owned(w, &kern).map_err(|e| e.in_stage("smooth"))
                }
            })?;
            let stem = if *unsmoothed { "wt" } else { "swt" };
            let path = dir.join(format!("{stem}.swtg"));
            io::save_grid(&w, &path)?;
            if *csv {
                let file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
                io::write_grid_csv(&w, std::io::BufWriter::new(file))?;
            }
            writeln!(
                out,
                "{} epsilon={} n_x={} n_k={} min={:e} max={:e} -> {}",
                spec.name,
                spec.epsilon,
                w.n_x(),
                w.n_k(),
                w.min(),
                w.max(),
                path.display()
            )?;
            Ok(())
        }
        Command::Propagate { problem, times, reference, n_x, n_k, h } => {
            let (config, spec) = load_spec(g, problem)?;
            let mut params = run_params(g, &config)?;
            params.n_x = n_x.or(params.n_x);
            params.n_k = n_k.or(params.n_k);
            params.h = h.or(params.h);
            params.output_times = parse_list(times)?;
            params.reference = match reference {
                CompareRef::Auto => ReferenceChoice::Auto,
                CompareRef::None => ReferenceChoice::Skip,
                CompareRef::Splitstep => ReferenceChoice::Method(ReferenceMethod::Splitstep),
                CompareRef::Cn => ReferenceChoice::Method(ReferenceMethod::CrankNicolson),
                CompareRef::Exact => ReferenceChoice::Method(ReferenceMethod::ExactFreeGaussian),
            };
            let dir = out_dir(g)?;
            params.out_dir = Some(dir.clone());
            let result = run_pipeline_full(&spec, &params);
            let output = match result {
                Ok(o) => o,
                Err(e) => {
                    write_failure(&dir, &e)?;
                    return Err(e);
                }
            };
            let r = &output.report;
            writeln!(
                out,
                "{} epsilon={} t={} n_x={} n_k={} particles={} t_total_swt={:.3}s",
                r.problem, r.epsilon, r.t_max, r.n_x, r.n_k, r.particle_count, r.t_total_swt
            )?;
            for s in &r.snapshots {
                match &s.error {
                    Some(e) => writeln!(
                        out,
                        "  t={} l1_rel={:.4e} l2_rel={:.4e} linf_rel={:.4e} mass_ratio={:.6} coverage_gap={:.3e}",
                        s.t, e.l1_rel, e.l2_rel, e.linf_rel, e.mass_ratio, s.coverage_gap
                    )?,
                    None => writeln!(out, "  t={} mass={:.6} coverage_gap={:.3e}", s.t, s.mass, s.coverage_gap)?,
                }
            }
            writeln!(out, "report -> {}", dir.join("report.json").display())?;
            Ok(())
        }
        Command::Reference { method, problem, times, n_x, n_t } => {
            let (config, spec) = load_spec(g, problem)?;
            let method = ReferenceMethod::from(*method);
            let mesh = reference_mesh(&spec);
            let n_x = n_x.or(config.n_x).unwrap_or(mesh.n_x);
            let n_t = n_t.unwrap_or(match method {
                ReferenceMethod::Splitstep => mesh.n_t_splitstep,
                ReferenceMethod::CrankNicolson => mesh.n_t_crank_nicolson,
                ReferenceMethod::ExactFreeGaussian => 1,
            });
            let times = parse_list(times)?;
            let kern = kernel(g, &config)?;
            let dir = out_dir(g)?;
            let pool = super::thread_pool(g.threads.unwrap_or(1))?;
            let run = pool.install(|| solve(method, &spec, n_x, n_t, &times)).map_err(|e| e.in_stage("reference"))?;
            for (i, (t, u)) in run.snapshots.iter().enumerate() {
                io::save_snapshot(u, *t, &dir.join(format!("{method}_{i}.swtc")))?;
                io::save_profile(&wavefunction_density(u, *t), &dir.join(format!("{method}_density_{i}.csv")))?;
                io::save_profile(
                    &smoothed_wavefunction_density(u, kern.sigma_x, *t)?,
                    &dir.join(format!("{method}_smoothed_density_{i}.csv")),
                )?;
            }
            writeln!(
                out,
                "{} {method} epsilon={} n_x={} n_t={} wall_time={:.3}s snapshots={} -> {}",
                spec.name,
                spec.epsilon,
                run.dof,
                run.n_t,
                run.wall_time,
                run.snapshots.len(),
                dir.display()
            )?;
            Ok(())
        }
        Command::Bench { problem, timing_reference } => {
            reject_threads(g.threads)?;
            let config = load_config(g, problem.as_deref())?;
            let mut options = SweepOptions::default();
            if !g.epsilons.is_empty() {
                options.epsilons = parse_list(&g.epsilons)?;
            }
            options.params = run_params(g, &config)?;
            options.timing_reference = Some((*timing_reference).into());
            options.parallel = g.parallel_sweep;
            let dir = out_dir(g)?;
            let path = dir.join("bench.csv");
            options.csv_path = Some(path.clone());
            let table = sweep(&config, &options)?;
            out.write_all(table.to_csv_string()?.as_bytes())?;
            writeln!(out, "csv -> {}", path.display())?;
            Ok(())
        }
    }
}

fn write_failure(dir: &Path, e: &Error) -> Result<()> {
    let stage = match e {
        Error::Stage { stage, .. } => *stage,
        _ => "setup",
    };
    let json = serde_json::json!({ "status": "failed", "stage": stage, "message": e.to_string() });
    std::fs::write(dir.join("report.json"), format!("{json:#}\n"))?;
    Ok(())
}

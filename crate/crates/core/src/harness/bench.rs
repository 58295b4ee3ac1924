//! ε-sweeps, log–log slope fits and the benchmark CSV.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{run_pipeline, thread_pool, ReferenceChoice, RunParams, RunReport};
use crate::error::{Error, Result};
use crate::reference::{reference_mesh, solve, ReferenceMethod};
use crate::signals::config::ProblemConfig;

/// Column order of the benchmark CSV.
pub const BENCH_COLUMNS: [&str; 15] = [
    "epsilon",
    "inv_epsilon",
    "t_sample",
    "t_wt",
    "t_smooth",
    "t_seed",
    "t_advance",
    "t_reconstruct",
    "t_total_swt",
    "t_reference",
    "particles",
    "n_x",
    "n_k",
    "l1_rel",
    "coverage_gap",
];

/// Least-squares line through (log(1/ε), log value).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Half-width of the 95% confidence interval of the slope (Student t
    /// with n − 2 degrees of freedom).
    pub ci_half_width: f64,
    pub points: usize,
}

/// OLS fit of log(value) against log(1/ε).
pub fn fit_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.len() < 3 {
        return Err(Error::InvalidArgument(format!("slope fit needs at least 3 points, got {}", pairs.len())));
    }
    for &(epsilon, value) in pairs {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonPositive { epsilon, value });
        }
    }
    let n = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|(_, v)| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs at least two distinct epsilons".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidArgument(format!("Student t with {dof} degrees of freedom: {e}")))?
        .inverse_cdf(0.975);
    Ok(SlopeFit { slope, intercept, ci_half_width: t * se, points: pairs.len() })
}

/// One CSV row of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub epsilon: f64,
    pub inv_epsilon: f64,
    pub t_sample: f64,
    pub t_wt: f64,
    pub t_smooth: f64,
    pub t_seed: f64,
    pub t_advance: f64,
    pub t_reconstruct: f64,
    pub t_total_swt: f64,
    pub t_reference: f64,
    pub particles: u64,
    pub n_x: u64,
    pub n_k: u64,
    /// NaN when the run had no reference.
    pub l1_rel: f64,
    pub coverage_gap: f64,
}

impl BenchRow {
    pub fn from_report(report: &RunReport, t_reference: f64) -> Self {
        let t = &report.timings;
        Self {
            epsilon: report.epsilon,
            inv_epsilon: 1.0 / report.epsilon,
            t_sample: t.sample,
            t_wt: t.wt,
            t_smooth: t.smooth,
            t_seed: t.seed,
            t_advance: t.advance,
            t_reconstruct: t.reconstruct,
            t_total_swt: report.t_total_swt,
            t_reference,
            particles: report.particle_count as u64,
            n_x: report.n_x as u64,
            n_k: report.n_k as u64,
            l1_rel: report.error.map_or(f64::NAN, |e| e.l1_rel),
            coverage_gap: report.coverage_gap,
        }
    }
}

/// A sweep's rows and fitted slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub rows: Vec<BenchRow>,
    pub slope_t_swt: SlopeFit,
    /// `None` when the sweep timed no reference.
    pub slope_t_reference: Option<SlopeFit>,
    pub slope_d: SlopeFit,
    /// False for parallel sweeps, whose timings contend for cores.
    pub timings_comparable: bool,
    pub reference_method: Option<ReferenceMethod>,
}

impl BenchTable {
    pub fn from_rows(
        rows: Vec<BenchRow>,
        reference_method: Option<ReferenceMethod>,
        timings_comparable: bool,
    ) -> Result<Self> {
        let distinct = {
            let mut e: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
            e.sort_by(f64::total_cmp);
            e.dedup();
            e.len()
        };
        if distinct < 4 {
            return Err(Error::InvalidArgument(format!("a sweep needs at least 4 distinct epsilons, got {distinct}")));
        }
        let fit = |f: fn(&BenchRow) -> f64| fit_slope(&rows.iter().map(|r| (r.epsilon, f(r))).collect::<Vec<_>>());
        Ok(Self {
            slope_t_swt: fit(|r| r.t_total_swt)?,
            slope_t_reference: reference_method.map(|_| fit(|r| r.t_reference)).transpose()?,
            slope_d: fit(|r| r.particles as f64)?,
            rows,
            timings_comparable,
            reference_method,
        })
    }

    /// CSV with one row per ε followed by `#` lines carrying the fits.
    /// Numbers use the shortest representation that parses back exactly.
    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        let mut out = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_fit(&mut out, "slope_t_swt", Some(&self.slope_t_swt))?;
        write_fit(&mut out, "slope_t_reference", self.slope_t_reference.as_ref())?;
        write_fit(&mut out, "slope_d", Some(&self.slope_d))?;
        writeln!(out, "# timings_comparable={}", self.timings_comparable)?;
        writeln!(
            out,
            "# reference_method={}",
            self.reference_method.map_or_else(|| "none".to_string(), |m| m.to_string())
        )?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }

    /// Parse [`BenchTable::write_csv`] output back, fits included.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(BENCH_COLUMNS) {
            return Err(Error::Format(format!(
                "expected columns {}, found {}",
                BENCH_COLUMNS.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<BenchRow>, _>>()?;
        let mut fits = std::collections::BTreeMap::new();
        let (mut comparable, mut method) = (None, None);
        for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
            let mut items = line.split_whitespace();
            let Some((key, value)) = items.next().and_then(|i| i.split_once('=')) else { continue };
            match key {
                "timings_comparable" => {
                    comparable = Some(value.parse::<bool>().map_err(|_| Error::Format(format!("bad flag `{value}`")))?)
                }
                "reference_method" => method = (value != "none").then(|| value.parse()).transpose()?,
                _ if value == "none" => {}
                _ => {
                    let mut fields = std::collections::BTreeMap::new();
                    fields.insert("slope", value);
                    for item in items {
                        if let Some((k, v)) = item.split_once('=') {
                            fields.insert(k, v);
                        }
                    }
                    let num = |k: &str| -> Result<f64> {
                        fields
                            .get(k)
                            .ok_or_else(|| Error::Format(format!("fit `{key}` lacks `{k}`")))?
                            .parse()
                            .map_err(|_| Error::Format(format!("fit `{key}`: bad `{k}`")))
                    };
                    let fit = SlopeFit {
                        slope: num("slope")?,
                        ci_half_width: num("ci_half_width")?,
                        intercept: num("intercept")?,
                        points: num("points")? as usize,
                    };
                    fits.insert(key.to_string(), fit);
                }
            }
        }
        let take = |k: &str| fits.get(k).copied().ok_or_else(|| Error::Format(format!("CSV lacks the `{k}` line")));
        Ok(Self {
            slope_t_swt: take("slope_t_swt")?,
            slope_t_reference: fits.get("slope_t_reference").copied(),
            slope_d: take("slope_d")?,
            rows,
            timings_comparable: comparable.ok_or_else(|| Error::Format("CSV lacks `timings_comparable`".into()))?,
            reference_method: method,
        })
    }
}

fn write_fit(out: &mut impl Write, name: &str, fit: Option<&SlopeFit>) -> Result<()> {
    match fit {
        Some(f) => writeln!(
            out,
            "# {name}={} ci_half_width={} intercept={} points={}",
            f.slope, f.ci_half_width, f.intercept, f.points
        )?,
        None => writeln!(out, "# {name}=none")?,
    }
    Ok(())
}

/// How to run a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub epsilons: Vec<f64>,
    /// Per-run parameters; grid sizes and the step are re-derived per ε,
    /// so fixed `n_x`, `n_k` and `h` are ignored.
    pub params: RunParams,
    /// Reference solver whose wall time fills `t_reference`.
    pub timing_reference: Option<ReferenceMethod>,
    /// Run the ε points concurrently (timings flagged non-comparable).
    pub parallel: bool,
    /// Rows are appended here as they complete, so a failed sweep leaves
    /// the finished rows behind.
    pub csv_path: Option<PathBuf>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            epsilons: (3..=7).map(|p| 0.5f64.powi(p)).collect(),
            params: RunParams::default(),
            timing_reference: Some(ReferenceMethod::CrankNicolson),
            parallel: false,
            csv_path: None,
        }
    }
}

/// Run the pipeline for every ε of the family and fit the scaling slopes.
pub fn sweep(config: &ProblemConfig, options: &SweepOptions) -> Result<BenchTable> {
    let mut eps = options.epsilons.clone();
    if let Some(bad) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument(format!("sweep epsilon {bad} must be positive")));
    }
    eps.sort_by(|a, b| b.total_cmp(a));
    eps.dedup();
    if eps.len() < 4 {
        return Err(Error::InvalidArgument(format!("a sweep needs at least 4 distinct epsilons, got {}", eps.len())));
    }
    let params = RunParams { n_x: None, n_k: None, h: None, threads: 1, out_dir: None, ..options.params.clone() };
    let mut csv = match &options.csv_path {
        Some(path) => {
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(BENCH_COLUMNS)?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let run_one = |epsilon: f64| -> Result<BenchRow> {
        let spec = config.spec(Some(epsilon))?;
        let report = run_pipeline(&spec, &params)?;
        let t_reference = match options.timing_reference {
            None => f64::NAN,
            Some(method) => match report.reference.as_ref().filter(|r| r.method == method) {
                Some(r) => r.wall_time,
                None => {
                    let mesh = reference_mesh(&spec);
                    let n_t = match method {
                        ReferenceMethod::Splitstep => mesh.n_t_splitstep,
                        ReferenceMethod::CrankNicolson => mesh.n_t_crank_nicolson,
                        ReferenceMethod::ExactFreeGaussian => 1,
                    };
                    let pool = thread_pool(1)?;
                    pool.install(|| solve(method, &spec, mesh.n_x, n_t, &[]))
                        .map_err(|e| e.in_stage("reference"))?
                        .wall_time
                }
            },
        };
        Ok(BenchRow::from_report(&report, t_reference))
    };
    let rows: Vec<BenchRow> = if options.parallel {
        let results: Vec<Result<BenchRow>> = eps.par_iter().map(|&e| run_one(e)).collect();
        let mut rows = Vec::with_capacity(results.len());
        for r in results {
            let row = r?;
            if let Some(w) = csv.as_mut() {
                w.serialize(row)?;
                w.flush()?;
            }
            rows.push(row);
        }
        rows
    } else {
        let mut rows = Vec::with_capacity(eps.len());
        for &e in &eps {
            let row = run_one(e)?;
            if let Some(w) = csv.as_mut() {
                w.serialize(row)?;
                w.flush()?;
            }
            rows.push(row);
        }
        rows
    };
    let table = BenchTable::from_rows(rows, options.timing_reference, !options.parallel)?;
    if let Some(path) = &options.csv_path {
        drop(csv);
        table.write_csv(std::fs::File::create(path)?)?;
    }
    Ok(table)
}

/// Ensure the params sent to timed runs are benchmark-fair.
pub(crate) fn reject_threads(threads: Option<usize>) -> Result<()> {
    match threads {
        Some(n) => Err(Error::InvalidArgument(format!(
            "--threads {n} is not allowed for bench: timed stages always run single-threaded \
             (use --parallel-sweep to run epsilon points concurrently)"
        ))),
        None => Ok(()),
    }
}

#[allow(dead_code)]
fn _assert_choice_is_copy(c: ReferenceChoice) -> ReferenceChoice {
    c
}

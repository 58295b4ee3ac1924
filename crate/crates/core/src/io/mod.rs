//! File formats.
//!
//! * `SWTG` — little-endian binary phase-space grid: magic, u32 version,
//!   u32 n_x, u32 n_k, eight f64 header fields (x_min, x_max, k_min, k_max,
//!   epsilon, sigma_x, sigma_k, time_stamp), then n_x·n_k f64 values
//!   row-major with x as the slow index.
//! * `SWTC` — the complex-payload variant for wavefunction snapshots: magic,
//!   u32 version, u32 n_x, f64 x_min, x_max, epsilon, t, then n_x (re, im)
//!   pairs.
//! * CSV exports with an optional `# key=value ...` header line: grids
//!   (`x,k,value`), snapshots (`x,re,im`), density profiles (`x,value`) and
//!   particle ensembles (`x,k,weight`).
//!
//! Floats are written in Rust's shortest round-trip decimal form, so every
//! CSV reproduces its values bit for bit when parsed back.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;

use crate::dynamics::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::observables::{DensityKind, DensityProfile};
use crate::phasespace::{PhaseGeometry, PhaseSpaceGrid};
use crate::signals::WavefunctionGrid;

pub const GRID_MAGIC: &[u8; 4] = b"SWTG";
pub const SNAPSHOT_MAGIC: &[u8; 4] = b"SWTC";
pub const FORMAT_VERSION: u32 = 1;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

fn read_magic(r: &mut impl Read, magic: &[u8; 4]) -> Result<()> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    Ok(())
}

// ---------------------------------------------------------------- SWTG

pub fn write_grid_binary(w: &PhaseSpaceGrid, out: &mut impl Write) -> Result<()> {
    let g = &w.geometry;
    out.write_all(GRID_MAGIC)?;
    out.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    out.write_u32::<LittleEndian>(to_u32(g.n_x)?)?;
    out.write_u32::<LittleEndian>(to_u32(g.n_k)?)?;
    for v in [g.x_min, g.x_max, g.k_min, g.k_max, w.epsilon, w.sigma_x, w.sigma_k, w.time_stamp] {
        out.write_f64::<LittleEndian>(v)?;
    }
    for &v in &w.values {
        out.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub fn read_grid_binary(r: &mut impl Read) -> Result<PhaseSpaceGrid> {
    read_magic(r, GRID_MAGIC)?;
    let n_x = r.read_u32::<LittleEndian>()? as usize;
    let n_k = r.read_u32::<LittleEndian>()? as usize;
    let mut h = [0.0; 8];
    for v in h.iter_mut() {
        *v = r.read_f64::<LittleEndian>()?;
    }
    let [x_min, x_max, k_min, k_max, epsilon, sigma_x, sigma_k, time_stamp] = h;
    let geometry = PhaseGeometry::new(x_min, x_max, n_x, k_min, k_max, n_k)?;
    let mut values = vec![0.0; geometry.len()];
    r.read_f64_into::<LittleEndian>(&mut values)
        .map_err(|e| Error::Format(format!("truncated SWTG payload ({} values expected): {e}", values.len())))?;
    Ok(PhaseSpaceGrid { geometry, values, epsilon, sigma_x, sigma_k, time_stamp })
}

pub fn save_grid(w: &PhaseSpaceGrid, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_grid_binary(w, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_grid(path: &Path) -> Result<PhaseSpaceGrid> {
    read_grid_binary(&mut open(path)?)
}

/// `x,k,value` rows in storage order.
pub fn write_grid_csv(w: &PhaseSpaceGrid, out: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["x", "k", "value"])?;
    let g = w.geometry;
    for i in 0..g.n_x {
        for j in 0..g.n_k {
            csv.serialize((g.x(i), g.k(j), w.get(i, j)))?;
        }
    }
    csv.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- SWTC

pub fn write_snapshot_binary(u: &WavefunctionGrid, t: f64, out: &mut impl Write) -> Result<()> {
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_u32::<LittleEndian>(FORMAT_VERSION)?;
    out.write_u32::<LittleEndian>(to_u32(u.n_x())?)?;
    for v in [u.x_min, u.x_max, u.epsilon, t] {
        out.write_f64::<LittleEndian>(v)?;
    }
    for v in &u.values {
        out.write_f64::<LittleEndian>(v.re)?;
        out.write_f64::<LittleEndian>(v.im)?;
    }
    Ok(())
}

pub fn read_snapshot_binary(r: &mut impl Read) -> Result<(WavefunctionGrid, f64)> {
    read_magic(r, SNAPSHOT_MAGIC)?;
    let n_x = r.read_u32::<LittleEndian>()? as usize;
    let mut h = [0.0; 4];
    for v in h.iter_mut() {
        *v = r.read_f64::<LittleEndian>()?;
    }
    let [x_min, x_max, epsilon, t] = h;
    let mut raw = vec![0.0; 2 * n_x];
    r.read_f64_into::<LittleEndian>(&mut raw)
        .map_err(|e| Error::Format(format!("truncated SWTC payload ({n_x} samples expected): {e}")))?;
    let values = raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    Ok((WavefunctionGrid::new(x_min, x_max, values, epsilon)?, t))
}

pub fn save_snapshot(u: &WavefunctionGrid, t: f64, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_snapshot_binary(u, t, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<(WavefunctionGrid, f64)> {
    read_snapshot_binary(&mut open(path)?)
}

/// `# t=.. epsilon=.. x_min=.. x_max=..` then `x,re,im`.
pub fn write_snapshot_csv(u: &WavefunctionGrid, t: f64, mut out: impl Write) -> Result<()> {
    writeln!(out, "# t={t} epsilon={} x_min={} x_max={}", u.epsilon, u.x_min, u.x_max)?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["x", "re", "im"])?;
    for (j, v) in u.values.iter().enumerate() {
        csv.serialize((u.x(j), v.re, v.im))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_snapshot_csv(text: &str) -> Result<(WavefunctionGrid, f64)> {
    let header = parse_header(text)?;
    let rows = read_rows::<3>(text, ["x", "re", "im"])?;
    let values = rows.iter().map(|r| Complex64::new(r[1], r[2])).collect();
    let u = WavefunctionGrid::new(header.num("x_min")?, header.num("x_max")?, values, header.num("epsilon")?)?;
    Ok((u, header.num("t")?))
}

// ---------------------------------------------------------------- profiles

/// `# kind=.. t=.. epsilon=.. sigma_x=.. x_min=.. x_max=..` then `x,value`.
/// An unsmoothed profile has `sigma_x=none`.
pub fn write_profile_csv(p: &DensityProfile, mut out: impl Write) -> Result<()> {
    let sigma = p.sigma_x.map_or_else(|| "none".to_string(), |s| s.to_string());
    writeln!(
        out,
        "# kind={} t={} epsilon={} sigma_x={sigma} x_min={} x_max={}",
        p.kind, p.t, p.epsilon, p.x_min, p.x_max
    )?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["x", "value"])?;
    for (i, v) in p.values.iter().enumerate() {
        csv.serialize((p.x(i), v))?;
    }
    csv.flush()?;
    Ok(())
}

/// Parse a profile CSV. Files without `x_min`/`x_max` in the header take the
/// domain from the x column (uniform, endpoint-excluded).
pub fn read_profile_csv(text: &str) -> Result<DensityProfile> {
    let header = parse_header(text)?;
    let rows = read_rows::<2>(text, ["x", "value"])?;
    if rows.is_empty() {
        return Err(Error::Format("profile has no rows".into()));
    }
    let n = rows.len();
    let (x_min, x_max) = match (header.num("x_min"), header.num("x_max")) {
        (Ok(a), Ok(b)) => (a, b),
        _ if n >= 2 => {
            let dx = rows[1][0] - rows[0][0];
            (rows[0][0], rows[0][0] + n as f64 * dx)
        }
        _ => return Err(Error::Format("cannot infer the domain of a one-row profile".into())),
    };
    let sigma_x = match header.get("sigma_x") {
        None | Some("none") => None,
        Some(s) => Some(parse_f64(s)?),
    };
    Ok(DensityProfile {
        x_min,
        x_max,
        values: rows.iter().map(|r| r[1]).collect(),
        kind: header.get("kind").map_or(Ok(DensityKind::NormDensity), str::parse)?,
        epsilon: header.num("epsilon").unwrap_or(f64::NAN),
        sigma_x,
        t: header.num("t").unwrap_or(0.0),
    })
}

pub fn save_profile(p: &DensityProfile, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_profile_csv(p, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn load_profile(path: &Path) -> Result<DensityProfile> {
    read_profile_csv(&std::fs::read_to_string(path)?)
}

// ---------------------------------------------------------------- ensembles

/// `# t=.. epsilon=.. sigma_x=.. sigma_k=.. seed_dx=.. seed_dk=..` then
/// `x,k,weight`.
pub fn write_ensemble_csv(e: &ParticleEnsemble, mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "# t={} epsilon={} sigma_x={} sigma_k={} seed_dx={} seed_dk={}",
        e.t, e.epsilon, e.sigma_x, e.sigma_k, e.seed_dx, e.seed_dk
    )?;
    let mut csv = csv::Writer::from_writer(out);
    csv.write_record(["x", "k", "weight"])?;
    for (p, w) in e.positions.iter().zip(&e.weights) {
        csv.serialize((p[0], p[1], w))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn read_ensemble_csv(text: &str) -> Result<ParticleEnsemble> {
    let h = parse_header(text)?;
    let rows = read_rows::<3>(text, ["x", "k", "weight"])?;
    Ok(ParticleEnsemble {
        positions: rows.iter().map(|r| [r[0], r[1]]).collect(),
        weights: rows.iter().map(|r| r[2]).collect(),
        seed_dx: h.num("seed_dx")?,
        seed_dk: h.num("seed_dk")?,
        t: h.num("t")?,
        epsilon: h.num("epsilon")?,
        sigma_x: h.num("sigma_x")?,
        sigma_k: h.num("sigma_k")?,
    })
}

pub fn save_ensemble(e: &ParticleEnsemble, path: &Path) -> Result<()> {
    let mut out = create(path)?;
    write_ensemble_csv(e, &mut out)?;
    out.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- helpers

/// `key=value` pairs of the leading `#` line.
#[derive(Debug, Default)]
pub struct Header(BTreeMap<String, String>);

impl Header {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn num(&self, key: &str) -> Result<f64> {
        parse_f64(self.get(key).ok_or_else(|| Error::Format(format!("header lacks `{key}`")))?)
    }
}

pub fn parse_header(text: &str) -> Result<Header> {
    let mut map = BTreeMap::new();
    if let Some(line) = text.lines().next().and_then(|l| l.strip_prefix('#')) {
        for item in line.split_whitespace() {
            let (k, v) =
                item.split_once('=').ok_or_else(|| Error::Format(format!("header item `{item}` is not key=value")))?;
            map.insert(k.to_string(), v.to_string());
        }
    }
    Ok(Header(map))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Format(format!("`{s}` is not a number")))
}

/// Numeric rows of a CSV with the given column names, skipping `#` lines.
pub fn read_rows<const N: usize>(text: &str, columns: [&str; N]) -> Result<Vec<[f64; N]>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    if headers.len() != N || headers.iter().zip(columns).any(|(a, b)| a != b) {
        return Err(Error::Format(format!(
            "expected columns {}, found {}",
            columns.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        let mut row = [0.0; N];
        for (slot, field) in row.iter_mut().zip(record.iter()) {
            *slot = parse_f64(field).map_err(|e| Error::Format(format!("row {}: {e}", line + 1)))?;
        }
        if record.len() != N {
            return Err(Error::Format(format!("row {} has {} fields", line + 1, record.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

fn to_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Format(format!("dimension {n} exceeds the u32 header field")))
}

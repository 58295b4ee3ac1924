//! Shepard reconstruction of a grid from scattered particles.
//!
//! Coordinates are normalized by the seeding spacings (Δx, Δk), so the
//! support radius is isotropic: [`SUPPORT_RADIUS`] seed cells. Particles are
//! binned into square buckets of that size (counting sort into a CSR layout,
//! stable in particle order); each target node then scans the 3×3 bucket
//! block around it in a fixed order, so the gather — and hence the result —
//! does not depend on the thread schedule.

use rayon::prelude::*;

use super::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::phasespace::{PhaseGeometry, PhaseSpaceGrid};

/// Support radius in seed-normalized units.
pub const SUPPORT_RADIUS: f64 = 2.0;

/// Longest uncovered run, in nodes, still counted as a hole: twice the
/// support diameter on the seed grid.
pub const MAX_HOLE: usize = 8;

/// A reconstructed grid with its coverage statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub grid: PhaseSpaceGrid,
    /// Target nodes with no particle within the support radius.
    pub uncovered: usize,
    /// Uncovered nodes inside a short uncovered run (at most [`MAX_HOLE`]
    /// nodes) bounded by covered nodes along x or along k: holes torn into
    /// the transported support, as opposed to the empty phase space around
    /// it or between separate branches.
    pub holes: usize,
    /// `holes / (covered + holes)`; 1 when nothing is covered.
    pub coverage_gap: f64,
}

struct Buckets {
    nx: usize,
    ny: usize,
    /// CSR offsets, length nx·ny + 1.
    start: Vec<u32>,
    /// Particle indices grouped by bucket, ascending within a bucket.
    items: Vec<u32>,
}

impl Buckets {
    fn build(cells: &[Option<usize>], nx: usize, ny: usize) -> Self {
        let mut start = vec![0u32; nx * ny + 1];
        for c in cells.iter().flatten() {
            start[c + 1] += 1;
        }
        for b in 0..nx * ny {
            start[b + 1] += start[b];
        }
        let mut fill = start.clone();
        let mut items = vec![0u32; start[nx * ny] as usize];
        for (p, c) in cells.iter().enumerate() {
            if let Some(c) = c {
                items[fill[*c] as usize] = p as u32;
                fill[*c] += 1;
            }
        }
        Self { nx, ny, start, items }
    }

    fn bucket(&self, bx: usize, by: usize) -> &[u32] {
        let b = bx * self.ny + by;
        &self.items[self.start[b] as usize..self.start[b + 1] as usize]
    }
}

/// Shepard (inverse-distance-squared) average of the particle weights within
/// [`SUPPORT_RADIUS`] of each target node. A particle exactly on a node
/// dominates (the mean of all coincident particles is taken); nodes with no
/// particle in range are set to zero and counted in the coverage gap.
pub fn reconstruct(ens: &ParticleEnsemble, target: &PhaseGeometry) -> Result<Reconstruction> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble { eta: 0.0, max: 0.0 });
    }
    if u32::try_from(ens.len()).is_err() {
        return Err(Error::InvalidArgument(format!("{} particles exceed the u32 index space", ens.len())));
    }
    let r = SUPPORT_RADIUS;
    let (sx, sk) = (ens.seed_dx, ens.seed_dk);
    // Bucket lattice covering the target nodes plus one radius of margin.
    let u_lo = target.x_min / sx - r;
    let v_lo = target.k_min / sk - r;
    let u_hi = target.x(target.n_x - 1) / sx + r;
    let v_hi = target.k(target.n_k - 1) / sk + r;
    let nx = ((u_hi - u_lo) / r).floor() as usize + 1;
    let ny = ((v_hi - v_lo) / r).floor() as usize + 1;
    let cells: Vec<Option<usize>> = ens
        .positions
        .iter()
        .map(|&[x, k]| {
            let (bu, bv) = ((x / sx - u_lo) / r, (k / sk - v_lo) / r);
            (bu >= 0.0 && bv >= 0.0 && bu < nx as f64 && bv < ny as f64).then(|| bu as usize * ny + bv as usize)
        })
        .collect();
    let buckets = Buckets::build(&cells, nx, ny);

    let mut grid = PhaseSpaceGrid {
        geometry: *target,
        values: vec![0.0; target.len()],
        epsilon: ens.epsilon,
        sigma_x: ens.sigma_x,
        sigma_k: ens.sigma_k,
        time_stamp: ens.t,
    };
    let r2 = r * r;
    let mut covered = vec![false; target.len()];
    let uncovered: usize = grid
        .values
        .par_chunks_mut(target.n_k)
        .zip(covered.par_chunks_mut(target.n_k))
        .enumerate()
        .map(|(i, (row, covered))| {
            let u = target.x(i) / sx;
            let bx = ((u - u_lo) / r) as usize;
            let mut gaps = 0;
            for (j, out) in row.iter_mut().enumerate() {
                let v = target.k(j) / sk;
                let by = ((v - v_lo) / r) as usize;
                let (mut num, mut den) = (0.0, 0.0);
                let (mut hit_sum, mut hits) = (0.0, 0usize);
                for cx in bx.saturating_sub(1)..=(bx + 1).min(buckets.nx - 1) {
                    for cy in by.saturating_sub(1)..=(by + 1).min(buckets.ny - 1) {
                        for &p in buckets.bucket(cx, cy) {
                            let [x, k] = ens.positions[p as usize];
                            let (du, dv) = (x / sx - u, k / sk - v);
                            let d2 = du * du + dv * dv;
                            if d2 >= r2 {
                                continue;
                            }
                            let w = ens.weights[p as usize];
                            if d2 == 0.0 {
                                hit_sum += w;
                                hits += 1;
                            } else {
                                num += w / d2;
                                den += 1.0 / d2;
                            }
                        }
                    }
                }
                *out = if hits > 0 || den > 0.0 {
                    covered[j] = true;
                    if hits > 0 {
                        hit_sum / hits as f64
                    } else {
                        num / den
                    }
                } else {
                    gaps += 1;
                    0.0
                };
            }
            gaps
        })
        .sum();
    let holes = count_holes(&covered, target.n_x, target.n_k);
    let covered_nodes = target.len() - uncovered;
    let coverage_gap = if covered_nodes == 0 { 1.0 } else { holes as f64 / (covered_nodes + holes) as f64 };
    Ok(Reconstruction { grid, uncovered, holes, coverage_gap })
}

/// Nodes in uncovered runs of at most [`MAX_HOLE`] nodes with covered
/// nodes at both ends, along either axis (a node is counted once).
fn count_holes(covered: &[bool], n_x: usize, n_k: usize) -> usize {
    let mut hole = vec![false; covered.len()];
    let mut mark_runs = |len: usize, index: &dyn Fn(usize) -> usize| {
        let mut last_covered: Option<usize> = None;
        for p in 0..len {
            if covered[index(p)] {
                if let Some(q) = last_covered {
                    if p - q - 1 <= MAX_HOLE {
                        for m in q + 1..p {
                            hole[index(m)] = true;
                        }
                    }
                }
                last_covered = Some(p);
            }
        }
    };
    for i in 0..n_x {
        mark_runs(n_k, &|j| i * n_k + j);
    }
    for j in 0..n_k {
        mark_runs(n_x, &|i| i * n_k + j);
    }
    hole.iter().filter(|&&h| h).count()
}

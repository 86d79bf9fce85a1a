//! Maximal mass in grid-aligned cubes.
//!
//! Cell masses `|u_j|² h^d` are quantized to integers
//! `q_j = round(2^62 · |u_j|² / Σ|u|²)` so every window sum is exact and
//! independent of summation order. Cubes are axis-aligned, have side
//! `m·h` with `m = floor(s/h)`, and wrap periodically. Against the supremum
//! over all real cubes of side `s`, the grid-aligned maximum loses at most the
//! mass in a one-cell shell around the optimal cube.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::spectral::{project_field, Field, FreqRegion, Grid};
use crate::{Error, Result};

/// Bits of the fixed-point cell-mass representation.
pub const QUANT_BITS: u32 = 62;

/// Environment variable capping the number of scan threads.
pub const THREADS_ENV: &str = "BLOWSCOPE_THREADS";

fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads: usize = std::env::var(THREADS_ENV).ok()?.trim().parse().ok()?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .ok()
    })
    .as_ref()
}

fn in_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    match pool() {
        Some(p) => p.install(f),
        None => f(),
    }
}

/// Quantized cell masses of one field.
#[derive(Debug, Clone)]
pub struct CellMasses {
    grid: Grid,
    total: f64,
    quantized: Vec<i128>,
}

impl CellMasses {
    pub fn new(u: &Field) -> Self {
        let grid = *u.grid();
        let total = u.mass();
        let cell = grid.cell_volume();
        let unit = (1u128 << QUANT_BITS) as f64;
        let quantized = if total > 0.0 {
            u.values()
                .iter()
                .map(|z| (z.norm_sqr() * cell / total * unit).round() as i128)
                .collect()
        } else {
            vec![0; grid.len()]
        };
        Self { grid, total, quantized }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn quantized(&self) -> &[i128] {
        &self.quantized
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    /// Converts a quantized sum back to mass units.
    pub fn to_mass(&self, q: i128) -> f64 {
        q as f64 / (1u128 << QUANT_BITS) as f64 * self.total
    }

    /// Sum over all cells, equal to the largest possible window sum.
    pub fn quantized_total(&self) -> i128 {
        self.quantized.iter().sum()
    }
}

/// Periodic sums of `m` consecutive entries: `out[j] = Σ_{i<m} v[(j+i) mod n]`.
fn cyclic_window(v: &[i128], m: usize, out: &mut [i128]) {
    let n = v.len();
    let mut acc: i128 = (0..m).map(|i| v[i % n]).sum();
    for j in 0..n {
        out[j] = acc;
        acc += v[(j + m) % n] - v[j];
    }
}

/// All window sums indexed by the flat index of the window corner.
pub fn window_sums(cells: &CellMasses, m: usize) -> Vec<i128> {
    let grid = cells.grid;
    let n = grid.n();
    let m = m.clamp(1, n);
    let q = &cells.quantized;
    if grid.dim() == 1 {
        let mut out = vec![0; n];
        cyclic_window(q, m, &mut out);
        return out;
    }
    in_pool(|| {
        let mut rows = vec![0i128; n * n];
        rows.par_chunks_mut(n)
            .zip(q.par_chunks(n))
            .for_each(|(out, row)| cyclic_window(row, m, out));
        let mut cols = vec![0i128; n * n];
        cols.par_chunks_mut(n).enumerate().for_each(|(j, out)| {
            let col: Vec<i128> = (0..n).map(|i| rows[i * n + j]).collect();
            cyclic_window(&col, m, out);
        });
        let mut out = vec![0i128; n * n];
        for j in 0..n {
            for i in 0..n {
                out[i * n + j] = cols[j * n + i];
            }
        }
        out
    })
}

/// Maximum window sum and its corner; ties go to the smallest flat index,
/// which is the lexicographically smallest corner.
pub fn scan_cells(cells: &CellMasses, m: usize) -> (i128, usize) {
    let sums = window_sums(cells, m);
    in_pool(|| {
        sums.par_iter()
            .enumerate()
            .map(|(i, &v)| (v, i))
            .reduce(
                || (i128::MIN, usize::MAX),
                |a, b| if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) { a } else { b },
            )
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    /// Requested scale.
    pub scale: f64,
    /// Side of the scanned cubes, `cells · h ≤ scale`.
    pub width: f64,
    pub cells: usize,
    pub max_mass: f64,
    /// Corner indices of the maximizing cube (second entry 0 in one dimension).
    pub corner: [usize; 2],
    pub corner_position: [f64; 2],
    pub projected: bool,
    pub region: Option<FreqRegion>,
}

/// Number of whole cells in a cube of side at most `s`.
pub fn cells_for_scale(grid: &Grid, s: f64) -> Result<usize> {
    let h = grid.spacing();
    if !(s.is_finite() && s >= h * (1.0 - 1e-12)) {
        return Err(Error::RefusedSubgrid { scale: s, spacing: h });
    }
    Ok((((s / h) * (1.0 + 1e-12)).floor() as usize).clamp(1, grid.n()))
}

fn prepare(u: &Field, region: Option<&FreqRegion>) -> Result<CellMasses> {
    Ok(match region {
        Some(r) => CellMasses::new(&project_field(u, r)?),
        None => CellMasses::new(u),
    })
}

fn result(cells: &CellMasses, scale: f64, m: usize, region: Option<&FreqRegion>) -> ScanResult {
    let grid = cells.grid;
    let (q, flat) = scan_cells(cells, m);
    let corner = grid.axes(flat);
    ScanResult {
        scale,
        width: m as f64 * grid.spacing(),
        cells: m,
        max_mass: cells.to_mass(q).min(cells.total),
        corner,
        corner_position: grid.position(flat),
        projected: region.is_some(),
        region: region.copied(),
    }
}

/// Largest mass of `u` (or of its projection onto `region`) in a grid-aligned
/// cube of side `floor(s/h)·h`.
pub fn concentration_scan(u: &Field, s: f64, region: Option<&FreqRegion>) -> Result<ScanResult> {
    let m = cells_for_scale(u.grid(), s)?;
    let cells = prepare(u, region)?;
    Ok(result(&cells, s, m, region))
}

/// Smallest grid-aligned cube capturing at least `level`, found by bisection on
/// the (monotone) maximal window sum. `None` when even the whole box falls short.
pub fn smallest_capturing_scale(
    u: &Field,
    level: f64,
    region: Option<&FreqRegion>,
) -> Result<Option<ScanResult>> {
    if !level.is_finite() {
        return Err(Error::InvalidParameter(format!("level {level} is not finite")));
    }
    let cells = prepare(u, region)?;
    let n = cells.grid.n();
    let captures = |m: usize| cells.to_mass(scan_cells(&cells, m).0) >= level;
    if !captures(n) {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if captures(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let h = cells.grid.spacing();
    Ok(Some(result(&cells, hi as f64 * h, hi, region)))
}

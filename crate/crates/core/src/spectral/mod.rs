//! Periodic grids, fields and their Fourier coefficients.
//!
//! A [`Grid`] discretizes the box `[-ℓ, ℓ)^d` with `n` vertex-centred points per
//! axis, `x_j = -ℓ + j h`, `h = 2ℓ/n`. Fields are stored lexicographically with
//! the last axis contiguous. A [`Spectrum`] holds approximations of the
//! continuous transform `f̂(ξ) = ∫ f(x) e^{-2πi x·ξ} dx` at `ξ_k = k/(2ℓ)`, stored
//! per axis in FFT order (`k = 0, 1, …, n/2-1, -n/2, …, -1`). With these
//! conventions
//!
//! ```text
//! û_k = h^d Σ_j u_j e^{-2πi x_j·ξ_k},     u_j = Δξ^d Σ_k û_k e^{2πi x_j·ξ_k},
//! ```
//!
//! where `Δξ = 1/(2ℓ)`, so Plancherel reads `Σ|û|² Δξ^d = Σ|u|² h^d`.

mod fft;
pub mod io;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::{Error, Result};

pub use fft::FftEngine;

/// Outer fraction of the box, per axis, that counts as the boundary shell.
pub const SHELL_WIDTH: f64 = 0.1;

/// Largest boundary-shell mass fraction for which a periodic approximation of
/// a whole-space solution is trusted.
pub const SHELL_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    half_width: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, half_width: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} is not 1 or 2")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n = {n} must be a power of two and at least 8"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half-width {half_width} must be finite and positive"
            )));
        }
        Ok(Self { dim, n, half_width })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Box side `2ℓ`.
    pub fn side(&self) -> f64 {
        2.0 * self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.side() / self.n as f64
    }

    /// `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.dim as i32)
    }

    pub fn freq_spacing(&self) -> f64 {
        1.0 / self.side()
    }

    /// `Δξ^d`.
    pub fn freq_cell_volume(&self) -> f64 {
        self.freq_spacing().powi(self.dim as i32)
    }

    /// Largest representable frequency magnitude per axis, `n/(4ℓ)`.
    pub fn nyquist(&self) -> f64 {
        (self.n / 2) as f64 * self.freq_spacing()
    }

    /// Total number of samples `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of the `j`-th sample along an axis.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Signed wavenumber of the `i`-th FFT-ordered coefficient along an axis.
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// FFT-order position of a signed wavenumber, if it is representable.
    pub fn wavenumber_index(&self, k: i64) -> Option<usize> {
        let half = (self.n / 2) as i64;
        if k < -half || k >= half {
            None
        } else if k >= 0 {
            Some(k as usize)
        } else {
            Some((k + self.n as i64) as usize)
        }
    }

    /// Per-axis indices of a flat index (unused axes are 0).
    pub fn axes(&self, flat: usize) -> [usize; 2] {
        if self.dim == 1 {
            [flat, 0]
        } else {
            [flat / self.n, flat % self.n]
        }
    }

    pub fn flat_index(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[0] * self.n + idx[1]
        }
    }

    /// Spatial position of a flat sample index (unused axes are 0).
    pub fn position(&self, flat: usize) -> [f64; 2] {
        let [i, j] = self.axes(flat);
        if self.dim == 1 {
            [self.coord(i), 0.0]
        } else {
            [self.coord(i), self.coord(j)]
        }
    }

    /// Signed wavevector of a flat coefficient index.
    pub fn wavevector(&self, flat: usize) -> [i64; 2] {
        let [i, j] = self.axes(flat);
        if self.dim == 1 {
            [self.wavenumber(i), 0]
        } else {
            [self.wavenumber(i), self.wavenumber(j)]
        }
    }

    /// Frequency `ξ_k = k/(2ℓ)` of a flat coefficient index.
    pub fn frequency(&self, flat: usize) -> [f64; 2] {
        let [a, b] = self.wavevector(flat);
        let dxi = self.freq_spacing();
        [a as f64 * dxi, b as f64 * dxi]
    }

    /// `|ξ|²` of a flat coefficient index.
    pub fn frequency_sq(&self, flat: usize) -> f64 {
        let [a, b] = self.frequency(flat);
        a * a + b * b
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }

    /// `(-1)^{Σ k_i}` for a flat coefficient index; the parity of `k` equals the
    /// parity of its FFT position because `n` is even.
    pub(crate) fn alternating_sign(&self, flat: usize) -> f64 {
        let [i, j] = self.axes(flat);
        if (i + j) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }
}

fn first_non_finite(values: &[Complex64]) -> Option<usize> {
    values.iter().position(|z| !(z.re.is_finite() && z.im.is_finite()))
}

/// Complex samples `u(x_j)` on a grid. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<Complex64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(index) = first_non_finite(&values) {
            return Err(Error::NonFinite { what: "field", index });
        }
        Ok(Self { grid, values })
    }

    /// Caller guarantees length and finiteness.
    pub(crate) fn from_raw(grid: Grid, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![Complex64::default(); grid.len()])
    }

    /// Samples `f` at every grid point. For `d = 1` the second coordinate is 0.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// `Σ|u|² h^d`.
    pub fn mass(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.mass().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `h^d Σ conj(u) v`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    /// Discrete L² distance `(Σ|u - v|² h^d)^{1/2}`.
    pub fn distance(&self, other: &Field) -> Result<f64> {
        self.grid.ensure_same(&other.grid)?;
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((s * self.grid.cell_volume()).sqrt())
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: Complex64) -> Result<Field> {
        Field::new(self.grid, self.values.iter().map(|z| z * c).collect())
    }
}

/// Fourier coefficients `û(ξ_k)` in FFT order. All values are finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for a grid of {} points",
                coeffs.len(),
                grid.len()
            )));
        }
        if let Some(index) = first_non_finite(&coeffs) {
            return Err(Error::NonFinite { what: "spectrum", index });
        }
        Ok(Self { grid, coeffs })
    }

    pub(crate) fn from_raw(grid: Grid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.len());
        Self { grid, coeffs }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::from_raw(grid, vec![Complex64::default(); grid.len()])
    }

    /// Evaluates `g(ξ_k)` at every grid frequency.
    pub fn from_fn(grid: Grid, g: impl Fn([f64; 2]) -> Complex64) -> Result<Self> {
        let coeffs = (0..grid.len()).map(|i| g(grid.frequency(i))).collect();
        Self::new(grid, coeffs)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at a signed wavevector, or `None` if it is not representable.
    pub fn get(&self, k: [i64; 2]) -> Option<Complex64> {
        let a = self.grid.wavenumber_index(k[0])?;
        let b = if self.grid.dim == 2 {
            self.grid.wavenumber_index(k[1])?
        } else if k[1] == 0 {
            0
        } else {
            return None;
        };
        Some(self.coeffs[self.grid.flat_index([a, b])])
    }

    /// `Σ|û|² Δξ^d`, equal to the mass of the inverse transform.
    pub fn mass(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.freq_cell_volume()
    }

    /// `Δξ^d Σ conj(û) v̂`.
    pub fn inner(&self, other: &Spectrum) -> Result<Complex64> {
        self.grid.ensure_same(&other.grid)?;
        let s: Complex64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.freq_cell_volume())
    }

    /// Multiplies coefficient `k` by `m(ξ_k)`.
    pub fn multiplied(&self, m: impl Fn([f64; 2]) -> Complex64) -> Result<Spectrum> {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * m(self.grid.frequency(i)))
            .collect();
        Spectrum::new(self.grid, coeffs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionKind {
    Cube,
    Ball,
}

/// Axis-aligned frequency cube (`extent` = side) or ball (`extent` = radius).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreqRegion {
    kind: RegionKind,
    center: [f64; 2],
    extent: f64,
}

impl FreqRegion {
    pub fn cube(center: [f64; 2], side: f64) -> Result<Self> {
        Self::new(RegionKind::Cube, center, side)
    }

    pub fn ball(center: [f64; 2], radius: f64) -> Result<Self> {
        Self::new(RegionKind::Ball, center, radius)
    }

    fn new(kind: RegionKind, center: [f64; 2], extent: f64) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "region extent {extent} must be finite and positive"
            )));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidParameter("region center must be finite".into()));
        }
        Ok(Self { kind, center, extent })
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Closed membership test: boundary frequencies belong to the region. A
    /// relative slack of `1e-12` absorbs rounding in `k/(2ℓ)`.
    pub fn contains(&self, xi: [f64; 2], dim: usize) -> bool {
        let d0 = xi[0] - self.center[0];
        let d1 = if dim == 2 { xi[1] - self.center[1] } else { 0.0 };
        let slack = 1e-12 * (1.0 + self.extent);
        match self.kind {
            RegionKind::Cube => d0.abs().max(d1.abs()) <= 0.5 * self.extent + slack,
            RegionKind::Ball => (d0 * d0 + d1 * d1).sqrt() <= self.extent + slack,
        }
    }
}

/// Coefficients of `f` under the `2π` convention.
pub fn forward_transform(f: &Field) -> Result<Spectrum> {
    if let Some(index) = first_non_finite(&f.values) {
        return Err(Error::NonFinite { what: "field", index });
    }
    let grid = f.grid;
    let mut data = f.values.clone();
    FftEngine::new(&grid).forward(&mut data);
    let h = grid.cell_volume();
    for (i, z) in data.iter_mut().enumerate() {
        *z *= h * grid.alternating_sign(i);
    }
    Spectrum::new(grid, data)
}

/// Exact inverse of [`forward_transform`] up to rounding.
pub fn inverse_transform(s: &Spectrum) -> Result<Field> {
    if let Some(index) = first_non_finite(&s.coeffs) {
        return Err(Error::NonFinite { what: "spectrum", index });
    }
    let grid = s.grid;
    let dxi = grid.freq_cell_volume();
    let mut data: Vec<Complex64> = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, z)| z * (dxi * grid.alternating_sign(i)))
        .collect();
    FftEngine::new(&grid).inverse(&mut data);
    Field::new(grid, data)
}

/// Sharp projection `P_E`: zeroes every coefficient outside `r`.
pub fn project(s: &Spectrum, r: &FreqRegion) -> Spectrum {
    let grid = s.grid;
    let coeffs = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if r.contains(grid.frequency(i), grid.dim) {
                c
            } else {
                Complex64::default()
            }
        })
        .collect();
    Spectrum::from_raw(grid, coeffs)
}

/// `P_E f` as a field.
pub fn project_field(f: &Field, r: &FreqRegion) -> Result<Field> {
    inverse_transform(&project(&forward_transform(f)?, r))
}

/// Largest retained `|k_i|` when dealiasing degree-`p` products: `⌊n/(p+1)⌋`,
/// i.e. `n ρ / 2` with `ρ = 2/(p+1)`.
pub fn dealias_cutoff(n: usize, p: usize) -> usize {
    n / (p + 1)
}

/// Keeps the modes with `max_i |k_i| ≤ dealias_cutoff(n, p)`.
pub fn dealias(s: &Spectrum, p: usize) -> Spectrum {
    let grid = s.grid;
    let cutoff = dealias_cutoff(grid.n, p) as i64;
    let coeffs = s
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let [a, b] = grid.wavevector(i);
            if a.abs().max(b.abs()) <= cutoff {
                c
            } else {
                Complex64::default()
            }
        })
        .collect();
    Spectrum::from_raw(grid, coeffs)
}

/// `(-4π²|ξ_k|²)` for every FFT-ordered coefficient.
pub(crate) fn laplacian_symbol(grid: &Grid) -> Vec<f64> {
    (0..grid.len())
        .map(|i| -4.0 * PI * PI * grid.frequency_sq(i))
        .collect()
}

/// Spectral Laplacian.
pub fn laplacian(f: &Field) -> Result<Field> {
    let grid = f.grid;
    let mut data = f.values.clone();
    let mut engine = FftEngine::new(&grid);
    engine.forward(&mut data);
    for (z, m) in data.iter_mut().zip(laplacian_symbol(&grid)) {
        *z *= m;
    }
    engine.inverse_normalized(&mut data);
    Field::new(grid, data)
}

/// Fraction of the mass of `f` lying in samples with some coordinate in the
/// outer [`SHELL_WIDTH`] of the box, `|x_i| ≥ (1 - SHELL_WIDTH) ℓ`.
pub fn boundary_shell_fraction(f: &Field) -> f64 {
    let grid = f.grid;
    let inner = (1.0 - SHELL_WIDTH) * grid.half_width;
    let in_shell: Vec<bool> = (0..grid.n).map(|j| grid.coord(j).abs() >= inner).collect();
    let mut shell = 0.0;
    let mut total = 0.0;
    for (i, z) in f.values.iter().enumerate() {
        let w = z.norm_sqr();
        total += w;
        let [a, b] = grid.axes(i);
        if in_shell[a] || (grid.dim == 2 && in_shell[b]) {
            shell += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        shell / total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pseudo_random(grid: Grid, seed: u64) -> Field {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let values = (0..grid.len()).map(|_| c(next(), next())).collect();
        Field::new(grid, values).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(1, 64, 1.0).is_ok());
        assert!(Grid::new(3, 64, 1.0).is_err());
        assert!(Grid::new(1, 48, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(1, 64, 0.0).is_err());
        assert!(Grid::new(2, 64, f64::NAN).is_err());
        let g = Grid::new(2, 16, 4.0).unwrap();
        assert_eq!(g.len(), 256);
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.coord(0), -4.0);
        assert_eq!(g.wavenumber(0), 0);
        assert_eq!(g.wavenumber(7), 7);
        assert_eq!(g.wavenumber(8), -8);
        assert_eq!(g.wavenumber(15), -1);
        assert_eq!(g.wavenumber_index(-1), Some(15));
        assert_eq!(g.wavenumber_index(8), None);
        assert!((g.spacing() * g.freq_spacing() * g.n() as f64 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_field_has_zero_spectrum() {
        let g = Grid::new(2, 16, 3.0).unwrap();
        let s = forward_transform(&Field::zeros(g)).unwrap();
        assert!(s.coeffs().iter().all(|z| *z == Complex64::default()));
        let f = inverse_transform(&Spectrum::zeros(g)).unwrap();
        assert!(f.values().iter().all(|z| *z == Complex64::default()));
    }

    #[test]
    fn plane_wave_is_a_single_coefficient() {
        for dim in [1, 2] {
            let g = Grid::new(dim, 32, 2.0).unwrap();
            let k = [3i64, if dim == 2 { -5 } else { 0 }];
            let xi = [k[0] as f64 * g.freq_spacing(), k[1] as f64 * g.freq_spacing()];
            let f = Field::from_fn(g, |x| {
                Complex64::from_polar(1.0, 2.0 * PI * (xi[0] * x[0] + xi[1] * x[1]))
            })
            .unwrap();
            let s = forward_transform(&f).unwrap();
            let peak = s.get(k).unwrap();
            assert!((peak - c(g.volume(), 0.0)).norm() < 1e-10 * g.volume());
            let others: f64 = s
                .coeffs()
                .iter()
                .enumerate()
                .filter(|(i, _)| g.wavevector(*i) != k)
                .map(|(_, z)| z.norm())
                .fold(0.0, f64::max);
            assert!(others < 1e-10, "leakage {others}");
        }
    }

    #[test]
    fn round_trip_and_plancherel() {
        for dim in [1, 2] {
            let g = Grid::new(dim, 64, 5.0).unwrap();
            let f = pseudo_random(g, 7);
            let s = forward_transform(&f).unwrap();
            assert!((s.mass() - f.mass()).abs() < 1e-12 * f.mass());
            let back = inverse_transform(&s).unwrap();
            assert!(back.distance(&f).unwrap() < 1e-12 * f.norm());
        }
    }

    #[test]
    fn zero_mode_delta_is_constant() {
        let g = Grid::new(1, 16, 2.5).unwrap();
        let mut coeffs = vec![Complex64::default(); g.len()];
        coeffs[0] = c(2.0, -1.0);
        let f = inverse_transform(&Spectrum::new(g, coeffs).unwrap()).unwrap();
        let expect = c(2.0, -1.0) * g.freq_cell_volume();
        assert!(f.values().iter().all(|z| (z - expect).norm() < 1e-15));
    }

    #[test]
    fn transform_approximates_the_continuous_gaussian_transform() {
        let g = Grid::new(1, 128, 8.0).unwrap();
        let f = Field::from_fn(g, |x| c((-PI * x[0] * x[0]).exp(), 0.0)).unwrap();
        let s = forward_transform(&f).unwrap();
        for (i, z) in s.coeffs().iter().enumerate() {
            let xi = g.frequency(i)[0];
            assert!((z - c((-PI * xi * xi).exp(), 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = Grid::new(1, 8, 1.0).unwrap();
        let mut v = vec![Complex64::default(); 8];
        v[3] = c(f64::NAN, 0.0);
        assert!(matches!(
            Field::new(g, v.clone()),
            Err(Error::NonFinite { index: 3, .. })
        ));
        assert!(Spectrum::new(g, v).is_err());
    }

    #[test]
    fn projection_examples() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let f = pseudo_random(g, 3);
        let s = forward_transform(&f).unwrap();
        let full = FreqRegion::ball([0.0, 0.0], g.nyquist()).unwrap();
        assert_eq!(project(&s, &full), s);

        let k1 = 5;
        let xi1 = k1 as f64 * g.freq_spacing();
        let wave = Field::from_fn(g, |x| Complex64::from_polar(1.0, 2.0 * PI * xi1 * x[0])).unwrap();
        let ws = forward_transform(&wave).unwrap();
        let tight = FreqRegion::cube([xi1, 0.0], 1e-6).unwrap();
        let kept = inverse_transform(&project(&ws, &tight)).unwrap();
        assert!(kept.distance(&wave).unwrap() < 1e-12);
        let far = FreqRegion::cube([-xi1, 0.0], g.freq_spacing()).unwrap();
        assert!(inverse_transform(&project(&ws, &far)).unwrap().mass() < 1e-24);
    }

    #[test]
    fn projection_boundaries_are_closed() {
        let g = Grid::new(2, 16, 4.0).unwrap();
        let dxi = g.freq_spacing();
        let cube = FreqRegion::cube([0.0, 0.0], 4.0 * dxi).unwrap();
        assert!(cube.contains([2.0 * dxi, -2.0 * dxi], 2));
        assert!(!cube.contains([3.0 * dxi, 0.0], 2));
        let ball = FreqRegion::ball([0.0, 0.0], 5.0 * dxi).unwrap();
        assert!(ball.contains([3.0 * dxi, 4.0 * dxi], 2));
        assert!(!ball.contains([4.0 * dxi, 4.0 * dxi], 2));
        assert!(FreqRegion::ball([0.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn dealias_arithmetic() {
        assert_eq!(dealias_cutoff(8, 3), 2);
        assert_eq!(dealias_cutoff(12, 5), 2);
        assert_eq!(dealias_cutoff(1024, 5), 170);
        let g = Grid::new(1, 8, 1.0).unwrap();
        let s = Spectrum::new(g, vec![c(1.0, 0.0); 8]).unwrap();
        let d = dealias(&s, 3);
        let kept: Vec<i64> = (0..8)
            .filter(|&i| d.coeffs()[i] != Complex64::default())
            .map(|i| g.wavenumber(i))
            .collect();
        assert_eq!(kept, vec![0, 1, 2, -2, -1]);
        assert_eq!(dealias(&d, 3), d);
    }

    #[test]
    fn spectral_laplacian_of_a_plane_wave() {
        let g = Grid::new(2, 16, 1.0).unwrap();
        let xi = [2.0 * g.freq_spacing(), -g.freq_spacing()];
        let f = Field::from_fn(g, |x| {
            Complex64::from_polar(1.0, 2.0 * PI * (xi[0] * x[0] + xi[1] * x[1]))
        })
        .unwrap();
        let lap = laplacian(&f).unwrap();
        let factor = -4.0 * PI * PI * (xi[0] * xi[0] + xi[1] * xi[1]);
        let expect = f.scaled(c(factor, 0.0)).unwrap();
        assert!(lap.distance(&expect).unwrap() < 1e-10);
    }

    #[test]
    fn shell_fraction() {
        let g = Grid::new(1, 20usize.next_power_of_two(), 1.0).unwrap();
        let mut v = vec![Complex64::default(); g.len()];
        v[0] = c(1.0, 0.0);
        v[g.n() / 2] = c(1.0, 0.0);
        let f = Field::new(g, v).unwrap();
        assert!((boundary_shell_fraction(&f) - 0.5).abs() < 1e-15);
        assert_eq!(boundary_shell_fraction(&Field::zeros(g)), 0.0);
    }
}

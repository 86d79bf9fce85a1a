//! The free Schrödinger flow `e^{itΔ}` and the symmetry group of the equation.
//!
//! With `f̂(ξ) = ∫ f e^{-2πi x·ξ}`, `Δ` is the multiplier `-4π²|ξ|²`, so
//! `e^{itΔ}` multiplies `f̂` by `e^{-4π² i t |ξ|²}`.
//!
//! # Symmetries
//!
//! If `u` solves `i u_t + Δu = σ|u|^{4/d} u`, so does each of
//!
//! * scaling: `λ^{d/2} u(λ²t, λx)`, observed at time `t/λ²`;
//! * translation: `u(t, x - a)`;
//! * Galilean boost: `e^{i(v·x/2 - |v|²t/4)} u(t, x - vt)`;
//! * phase: `e^{iθ} u`.
//!
//! The boost phase follows from substituting `w = e^{iφ} u(t, x - vt)` with
//! `φ = b·x + c t`. Then `i w_t = e^{iφ}(-c u + i u_t - i v·∇u)` and
//! `Δw = e^{iφ}(Δu + 2i b·∇u - |b|² u)`, so the gradient terms cancel iff
//! `b = v/2`, and the zeroth order terms cancel iff `c = -|b|² = -|v|²/4`.
//! The modulation `e^{i v·x/2}` shifts frequencies by `ξ₀ = v/(4π)`; on the
//! periodic box `ξ₀` must be a grid frequency.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::spectral::{forward_transform, inverse_transform, FftEngine, Field, Grid, Spectrum};
use crate::{Error, Result};

/// Relative mass allowed beyond the representable band (scaling up) or outside
/// the shrunken box (scaling down) before a rescaling is refused.
pub const RESAMPLING_TOLERANCE: f64 = 1e-10;

fn flow_multiplier(grid: &Grid, t: f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| Complex64::from_polar(1.0, -4.0 * PI * PI * t * grid.frequency_sq(i)))
        .collect()
}

/// `e^{itΔ} f`.
pub fn linear_flow(f: &Field, t: f64) -> Result<Field> {
    FreeFlow::new(f)?.at(t)
}

/// Repeated evaluation of `e^{itΔ} f` for one `f`, reusing its transform.
pub struct FreeFlow {
    grid: Grid,
    dft: Vec<Complex64>,
    engine: FftEngine,
}

impl FreeFlow {
    pub fn new(f: &Field) -> Result<Self> {
        Self::with_spectrum(&forward_transform(f)?)
    }

    pub fn with_spectrum(s: &Spectrum) -> Result<Self> {
        let grid = *s.grid();
        // Work with the raw DFT; the diagonal multiplier commutes with the
        // normalisation and the (-1)^k factor.
        let inv_h = 1.0 / grid.cell_volume();
        let dft = s
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| c * (inv_h * grid.alternating_sign(i)))
            .collect();
        Ok(Self {
            grid,
            dft,
            engine: FftEngine::new(&grid),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn at(&mut self, t: f64) -> Result<Field> {
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time {t} is not finite")));
        }
        let mut data: Vec<Complex64> = self
            .dft
            .iter()
            .zip(flow_multiplier(&self.grid, t))
            .map(|(a, m)| a * m)
            .collect();
        self.engine.inverse_normalized(&mut data);
        Field::new(self.grid, data)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryParams {
    pub scale: f64,
    pub translation: [f64; 2],
    pub boost: [f64; 2],
    pub phase: f64,
}

impl Default for SymmetryParams {
    fn default() -> Self {
        Self {
            scale: 1.0,
            translation: [0.0; 2],
            boost: [0.0; 2],
            phase: 0.0,
        }
    }
}

impl SymmetryParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale {} must be finite and positive",
                self.scale
            )));
        }
        let finite = self
            .translation
            .iter()
            .chain(&self.boost)
            .chain(std::iter::once(&self.phase))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("symmetry parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Applies scaling, translation, boost and phase, in that order, to the
/// snapshot `f = u(t, ·)`. Returns the transformed snapshot and its time
/// (`t/λ²`; the other symmetries keep `t`).
pub fn apply_symmetry(f: &Field, s: &SymmetryParams, t: f64) -> Result<(Field, f64)> {
    s.validate()?;
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("time {t} is not finite")));
    }
    let mut g = rescale(f, s.scale)?;
    let t_new = t / (s.scale * s.scale);
    if s.translation.iter().any(|&a| a != 0.0) {
        g = translate(&g, s.translation)?;
    }
    if s.boost.iter().any(|&v| v != 0.0) {
        g = boost(&g, s.boost, t_new)?;
    }
    if s.phase != 0.0 {
        g = g.scaled(Complex64::from_polar(1.0, s.phase))?;
    }
    Ok((g, t_new))
}

fn active(grid: &Grid, v: [f64; 2]) -> [f64; 2] {
    if grid.dim() == 1 {
        [v[0], 0.0]
    } else {
        v
    }
}

/// `f(x - a)`. Shifts by whole cells are exact cyclic rolls; other shifts use
/// the Fourier shift theorem.
pub fn translate(f: &Field, a: [f64; 2]) -> Result<Field> {
    let grid = *f.grid();
    let a = active(&grid, a);
    let h = grid.spacing();
    let cells = [(a[0] / h).round(), (a[1] / h).round()];
    let aligned = (0..2).all(|i| (a[i] / h - cells[i]).abs() <= 1e-9);
    if aligned {
        let n = grid.n() as i64;
        let m = [cells[0] as i64, cells[1] as i64];
        let src = f.values();
        let values = (0..grid.len())
            .map(|flat| {
                let [i, j] = grid.axes(flat);
                let si = (i as i64 - m[0]).rem_euclid(n) as usize;
                let sj = if grid.dim() == 2 {
                    (j as i64 - m[1]).rem_euclid(n) as usize
                } else {
                    0
                };
                src[grid.flat_index([si, sj])]
            })
            .collect();
        return Ok(Field::from_raw(grid, values));
    }
    let s = forward_transform(f)?
        .multiplied(|xi| Complex64::from_polar(1.0, -2.0 * PI * (a[0] * xi[0] + a[1] * xi[1])))?;
    inverse_transform(&s)
}

/// `e^{i(v·x/2 - |v|²t/4)} f(x - vt)`. The frequency shift `v/(4π)` must be a
/// grid frequency.
pub fn boost(f: &Field, v: [f64; 2], t: f64) -> Result<Field> {
    let grid = *f.grid();
    let v = active(&grid, v);
    let dxi = grid.freq_spacing();
    for &vi in &v {
        let k = vi / (4.0 * PI * dxi);
        if (k - k.round()).abs() > 1e-9 * (1.0 + k.abs()) {
            return Err(Error::InvalidParameter(format!(
                "boost {vi} shifts frequencies by {} which is not a multiple of {dxi}",
                vi / (4.0 * PI)
            )));
        }
    }
    let moved = translate(f, [v[0] * t, v[1] * t])?;
    let v_sq = v[0] * v[0] + v[1] * v[1];
    let values = moved
        .values()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let x = grid.position(i);
            z * Complex64::from_polar(1.0, 0.5 * (v[0] * x[0] + v[1] * x[1]) - 0.25 * v_sq * t)
        })
        .collect();
    Field::new(grid, values)
}

/// `λ^{d/2} f(λx)` by Fourier interpolation.
///
/// For `λ > 1` the coefficients `λ^{-d/2} f̂(ξ_k/λ)` are evaluated exactly from
/// the samples (`f` treated as supported in the box); this needs the spectrum
/// of `f` to vanish beyond `Nyquist/λ`. For `λ < 1` the trigonometric
/// interpolant of `f` is evaluated at `λx_j`; this needs `f` to vanish outside
/// `|x_i| < λℓ`.
pub fn rescale(f: &Field, lambda: f64) -> Result<Field> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "scale {lambda} must be finite and positive"
        )));
    }
    if lambda == 1.0 {
        return Ok(f.clone());
    }
    let grid = *f.grid();
    let n = grid.n();
    let amp = lambda.powf(grid.dim() as f64 / 2.0);
    if lambda > 1.0 {
        let s = forward_transform(f)?;
        let band = grid.nyquist() / lambda;
        let outside: f64 = s
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let xi = grid.frequency(*i);
                xi[0].abs() > band || xi[1].abs() > band
            })
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * grid.freq_cell_volume();
        if outside > RESAMPLING_TOLERANCE * s.mass() {
            return Err(Error::RefusedAliasing(format!(
                "scale {lambda} pushes {outside:e} of mass past the Nyquist frequency"
            )));
        }
        let h = grid.spacing();
        let matrix: Vec<Complex64> = (0..n)
            .flat_map(|k| {
                let xi = grid.wavenumber(k) as f64 * grid.freq_spacing() / lambda;
                (0..n).map(move |j| h * Complex64::from_polar(1.0, -2.0 * PI * grid.coord(j) * xi))
            })
            .collect();
        let mut coeffs = apply_separable(&grid, &matrix, f.values());
        for z in coeffs.iter_mut() {
            *z /= amp;
        }
        inverse_transform(&Spectrum::new(grid, coeffs)?)
    } else {
        let limit = lambda * grid.half_width();
        let outside: f64 = f
            .values()
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let x = grid.position(*i);
                x[0].abs() >= limit || x[1].abs() >= limit
            })
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * grid.cell_volume();
        if outside > RESAMPLING_TOLERANCE * f.mass() {
            return Err(Error::RefusedTruncation(format!(
                "scale {lambda} moves {outside:e} of mass out of the box"
            )));
        }
        let s = forward_transform(f)?;
        let dxi = grid.freq_spacing();
        let matrix: Vec<Complex64> = (0..n)
            .flat_map(|j| {
                let y = lambda * grid.coord(j);
                (0..n).map(move |k| {
                    let xi = grid.wavenumber(k) as f64 * dxi;
                    dxi * Complex64::from_polar(1.0, 2.0 * PI * y * xi)
                })
            })
            .collect();
        let mut values = apply_separable(&grid, &matrix, s.coeffs());
        for z in values.iter_mut() {
            *z *= amp;
        }
        Field::new(grid, values)
    }
}

/// Applies the `n × n` row-major matrix `m` along every axis of `data`.
fn apply_separable(grid: &Grid, m: &[Complex64], data: &[Complex64]) -> Vec<Complex64> {
    let n = grid.n();
    let apply_line = |line: &[Complex64], out: &mut [Complex64]| {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &m[r * n..(r + 1) * n];
            *o = row.iter().zip(line).map(|(a, b)| a * b).sum();
        }
    };
    let mut out = vec![Complex64::default(); data.len()];
    if grid.dim() == 1 {
        apply_line(data, &mut out);
        return out;
    }
    for (src, dst) in data.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
        apply_line(src, dst);
    }
    let mut column = vec![Complex64::default(); n];
    let mut result = vec![Complex64::default(); n];
    for j in 0..n {
        for i in 0..n {
            column[i] = out[i * n + j];
        }
        apply_line(&column, &mut result);
        for i in 0..n {
            out[i * n + j] = result[i];
        }
    }
    out
}

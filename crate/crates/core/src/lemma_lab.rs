//! Persistence of spatial concentration under the free flow for
//! band-limited data.
//!
//! A case is built directly in frequency: `f̂` is supported in the cube
//! `ξ₀ + [0, A]^d`, and its mass is measured on the grid-aligned window
//! `[0, 1/A)^d`. The dilation and the boost are applied analytically to the
//! spectrum, `f̂_{A,ξ₀}(ξ) = A^{−d/2} ĝ((ξ − ξ₀)/A)`, so neither introduces
//! interpolation error. For a boosted case the window moves with the
//! Galilean drift `4πtξ₀`; its mass is measured after an exact Fourier
//! translation back to the origin.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::fit::linear_fit;
use crate::diagnostics::{RateFit, Verdict};
use crate::propagator::{translate, FreeFlow};
use crate::spectral::{inverse_transform, project, Field, FreqRegion, Grid, Spectrum};
use crate::{Error, Result};

/// Cells per axis required across the window.
pub const MIN_WINDOW_CELLS: usize = 32;

/// Fewest time samples accepted by [`run_persistence`].
pub const MIN_SAMPLES: usize = 20;

/// Tolerance of the support check by projection idempotence.
pub const SUPPORT_TOLERANCE: f64 = 1e-12;

/// Unit-scale profile `g` whose spectrum is cut to `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    /// `ĝ = 1` on the cube.
    Indicator,
    /// `g(x) = e^{−π|x − center|²/width²} e^{2πi frequency·x}`.
    Bump {
        center: [f64; 2],
        width: f64,
        frequency: [f64; 2],
    },
}

impl Shape {
    fn spectrum(&self, xi: [f64; 2], dim: usize) -> Complex64 {
        match *self {
            Shape::Indicator => Complex64::new(1.0, 0.0),
            Shape::Bump {
                center,
                width,
                frequency,
            } => {
                let axes = if dim == 2 { 2 } else { 1 };
                let mut r2 = 0.0;
                let mut phase = 0.0;
                for a in 0..axes {
                    let d = xi[a] - frequency[a];
                    r2 += d * d;
                    phase -= 2.0 * PI * d * center[a];
                }
                let amp = width.powi(axes as i32) * (-PI * width * width * r2).exp();
                Complex64::from_polar(amp, phase)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Shape::Bump { center, width, frequency } = self {
            if !(width.is_finite() && *width > 0.0)
                || !center.iter().chain(frequency).all(|v| v.is_finite())
            {
                return Err(Error::InvalidParameter("bump needs finite parameters and width > 0".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseParams {
    pub shape: Shape,
    /// Frequency scale `A`, a power of two.
    #[serde(default = "unit")]
    pub scale: f64,
    /// Cube offset `ξ₀`; must be a grid frequency.
    #[serde(default)]
    pub boost: [f64; 2],
}

fn unit() -> f64 {
    1.0
}

impl CaseParams {
    pub fn unit(shape: Shape) -> Self {
        Self {
            shape,
            scale: 1.0,
            boost: [0.0; 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceCase {
    pub dim: usize,
    pub params: CaseParams,
    #[serde(skip)]
    pub spectrum: Spectrum,
    #[serde(skip)]
    pub field: Field,
    pub cube: FreqRegion,
    /// Window side `1/A` and the number of cells it spans per axis.
    pub window_side: f64,
    pub window_cells: usize,
    /// Mass in the window at `t = 0`.
    pub c1: f64,
    pub norm: f64,
    /// `(1/(4π²‖f‖₂)) √(c₁/8) / A²`.
    pub t_bound: f64,
}

/// `(1/(4π²‖f‖₂)) √(c₁/8)`.
pub fn unit_time_bound(c1: f64, norm: f64) -> f64 {
    (c1 / 8.0).sqrt() / (4.0 * PI * PI * norm)
}

fn is_power_of_two(a: f64) -> bool {
    a > 0.0 && a.log2().fract() == 0.0
}

/// Builds a case on `grid` and measures `c₁` and `‖f‖₂`.
pub fn make_case(params: &CaseParams, grid: &Grid) -> Result<PersistenceCase> {
    params.shape.validate()?;
    let a = params.scale;
    if !is_power_of_two(a) {
        return Err(Error::InvalidParameter(format!("frequency scale {a} is not a power of two")));
    }
    let dim = grid.dim();
    let h = grid.spacing();
    let dxi = grid.freq_spacing();
    let boost = params.boost;
    for (axis, &b) in boost.iter().enumerate().take(dim) {
        if ((b / dxi).round() * dxi - b).abs() > 1e-9 * dxi {
            return Err(Error::InvalidParameter(format!(
                "boost component {axis} = {b} is not a multiple of the frequency spacing {dxi}"
            )));
        }
    }
    let top = (0..dim).map(|i| boost[i] + a).fold(f64::NEG_INFINITY, f64::max);
    let bottom = (0..dim).map(|i| boost[i]).fold(f64::INFINITY, f64::min);
    if top >= grid.nyquist() || bottom <= -grid.nyquist() {
        return Err(Error::RefusedAliasing(format!(
            "frequency cube [{bottom}, {top}] does not fit below the Nyquist frequency {}",
            grid.nyquist()
        )));
    }
    let side = 1.0 / a;
    let cells = (side / h + 1e-9).floor() as usize;
    if cells < MIN_WINDOW_CELLS || ((cells as f64) * h - side).abs() > 1e-9 * h {
        return Err(Error::RefusedUnderresolved(format!(
            "window side {side} must span a whole number of at least {MIN_WINDOW_CELLS} cells of width {h}"
        )));
    }
    let mut center = [0.0; 2];
    for i in 0..dim {
        center[i] = boost[i] + 0.5 * a;
    }
    let cube = FreqRegion::cube(center, a)?;
    let amp = a.powf(-(dim as f64) / 2.0);
    let shape = &params.shape;
    let raw = Spectrum::from_fn(*grid, |xi| {
        if cube.contains(xi, dim) {
            let mut unit = [0.0; 2];
            for i in 0..dim {
                unit[i] = (xi[i] - boost[i]) / a;
            }
            shape.spectrum(unit, dim) * amp
        } else {
            Complex64::default()
        }
    })?;
    let spectrum = project(&raw, &cube);
    let defect = spectrum
        .coeffs()
        .iter()
        .zip(raw.coeffs())
        .map(|(p, q)| (p - q).norm())
        .fold(0.0, f64::max);
    if defect > SUPPORT_TOLERANCE {
        return Err(Error::Degenerate(format!("spectrum leaks outside the cube by {defect:e}")));
    }
    let field = inverse_transform(&spectrum)?;
    let c1 = window_mass(&field, [0.0; 2], cells)?;
    if !(c1 > 0.0) {
        return Err(Error::Degenerate("no mass in the window".into()));
    }
    let norm = field.norm();
    Ok(PersistenceCase {
        dim,
        params: params.clone(),
        spectrum,
        field,
        cube,
        window_side: side,
        window_cells: cells,
        c1,
        norm,
        t_bound: unit_time_bound(c1, norm) / (a * a),
    })
}

/// Mass of `u` on the cube `[corner, corner + cells·h)^d`.
pub fn window_mass(u: &Field, corner: [f64; 2], cells: usize) -> Result<f64> {
    let grid = *u.grid();
    let shifted;
    let v = if corner == [0.0; 2] {
        u
    } else {
        shifted = translate(u, [-corner[0], -corner[1]])?;
        &shifted
    };
    let n = grid.n();
    let origin = n / 2;
    let vals = v.values();
    let mut sum = 0.0;
    if grid.dim() == 1 {
        for j in origin..origin + cells {
            sum += vals[j % n].norm_sqr();
        }
    } else {
        for i in origin..origin + cells {
            for j in origin..origin + cells {
                sum += vals[(i % n) * n + j % n].norm_sqr();
            }
        }
    }
    Ok(sum * grid.cell_volume())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PersistenceRow {
    pub t: f64,
    pub captured_mass: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PersistenceTable {
    pub c1: f64,
    pub norm: f64,
    pub t_bound: f64,
    pub scale: f64,
    pub boost: [f64; 2],
    pub rows: Vec<PersistenceRow>,
    pub verdict: Verdict,
    pub min_captured: f64,
    /// First time beyond `t_bound` at which the window mass drops below
    /// `c₁/2`, when found.
    pub t_fail: Option<f64>,
    /// `max |Δ captured| / (Δt ‖f‖₂²)` over adjacent samples.
    pub continuity_constant: f64,
}

impl PersistenceTable {
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t,captured_mass,threshold")?;
        for r in &self.rows {
            writeln!(w, "{},{},{}", r.t, r.captured_mass, r.threshold)?;
        }
        Ok(())
    }
}

struct Tracker<'a> {
    case: &'a PersistenceCase,
    flow: FreeFlow,
}

impl Tracker<'_> {
    fn captured(&mut self, t: f64) -> Result<f64> {
        let u = self.flow.at(t)?;
        let b = self.case.params.boost;
        let corner = [4.0 * PI * t * b[0], 4.0 * PI * t * b[1]];
        window_mass(&u, corner, self.case.window_cells)
    }
}

/// Largest number of `t_bound/8` steps taken while searching for `t_fail`.
const FAIL_SEARCH_STEPS: usize = 4096;

/// Window mass of `e^{itΔ}f` at `samples` equispaced times in
/// `[−t_bound, t_bound]`, the verdict `captured ≥ c₁/2`, and the first
/// failure time beyond the bound.
pub fn run_persistence(case: &PersistenceCase, samples: usize) -> Result<PersistenceTable> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "{samples} samples requested, need at least {MIN_SAMPLES}"
        )));
    }
    let mut tr = Tracker {
        case,
        flow: FreeFlow::with_spectrum(&case.spectrum)?,
    };
    let threshold = 0.5 * case.c1;
    let tb = case.t_bound;
    let mut rows = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = -tb + 2.0 * tb * k as f64 / (samples - 1) as f64;
        rows.push(PersistenceRow {
            t,
            captured_mass: tr.captured(t)?,
            threshold,
        });
    }
    let min_captured = rows.iter().map(|r| r.captured_mass).fold(f64::INFINITY, f64::min);
    let mass = case.norm * case.norm;
    let continuity_constant = rows
        .windows(2)
        .map(|w| (w[1].captured_mass - w[0].captured_mass).abs() / ((w[1].t - w[0].t) * mass))
        .fold(0.0, f64::max);
    let t_fail = first_failure(&mut tr, threshold)?;
    Ok(PersistenceTable {
        c1: case.c1,
        norm: case.norm,
        t_bound: tb,
        scale: case.params.scale,
        boost: case.params.boost,
        rows,
        verdict: Verdict::from_bool(min_captured >= threshold),
        min_captured,
        t_fail,
        continuity_constant,
    })
}

fn first_failure(tr: &mut Tracker, threshold: f64) -> Result<Option<f64>> {
    let tb = tr.case.t_bound;
    let step = tb / 8.0;
    let mut lo = tb;
    for k in 1..=FAIL_SEARCH_STEPS {
        let hi = tb + k as f64 * step;
        if tr.captured(hi)? < threshold {
            let mut hi = hi;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if tr.captured(mid)? < threshold {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo <= 1e-13 * hi {
                    break;
                }
            }
            return Ok(Some(hi));
        }
        lo = hi;
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledReport {
    pub scales: Vec<f64>,
    pub tables: Vec<PersistenceTable>,
    pub verdict: Verdict,
    /// Fit of `t_fail` against `A`; the dilation law predicts `−2`.
    pub persistence_fit: Option<RateFit>,
    /// `t_fail · A²` for each scale.
    pub normalized_fail_times: Vec<Option<f64>>,
}

/// Runs the same unit profile at every frequency scale `A` and fits the
/// persistence time against `A`.
pub fn rescaled_persistence(
    base: &CaseParams,
    grid: &Grid,
    scales: &[f64],
    samples: usize,
) -> Result<RescaledReport> {
    let mut tables = Vec::with_capacity(scales.len());
    for &a in scales {
        let params = CaseParams {
            scale: a,
            ..base.clone()
        };
        let case = make_case(&params, grid)?;
        tables.push(run_persistence(&case, samples)?);
    }
    let points: Vec<(f64, f64)> = scales
        .iter()
        .zip(&tables)
        .filter_map(|(&a, t)| t.t_fail.map(|f| (a, f)))
        .collect();
    let persistence_fit = if points.len() >= 2 && points.len() == scales.len() {
        let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
        let line = linear_fit(&xs, &ys)?;
        Some(RateFit {
            exponent: line.slope,
            intercept: line.intercept,
            offset: None,
            window: [
                scales.iter().copied().fold(f64::INFINITY, f64::min),
                scales.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ],
            r_squared: line.r_squared,
            samples: points.len(),
        })
    } else {
        None
    };
    let verdict = Verdict::combine(&tables.iter().map(|t| t.verdict).collect::<Vec<_>>());
    Ok(RescaledReport {
        scales: scales.to_vec(),
        normalized_fail_times: scales
            .iter()
            .zip(&tables)
            .map(|(&a, t)| t.t_fail.map(|f| f * a * a))
            .collect(),
        tables,
        verdict,
        persistence_fit,
    })
}

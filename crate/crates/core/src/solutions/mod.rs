//! Exact solutions used as oracles.
//!
//! # Pseudoconformal blow-up
//!
//! For the focusing equation `i u_t + Δu = -|u|^{4/d} u`, the lens transform of
//! the soliton `e^{it}Q(x)` with blow-up time `T*` is
//!
//! ```text
//! u(t, x) = λ^{-d/2} Q(x/λ) exp(i/λ - i|x|²/(4λ)),    λ = T* - t.
//! ```
//!
//! Writing `u = λ^{-d/2} e^{iφ} Q(y)` with `y = x/λ`, `φ = 1/λ - |x|²/(4λ)`:
//! the time derivative contributes `(d/(2λ) + i φ_t)u + λ^{-d/2} e^{iφ} ∇Q·y/λ`
//! with `φ_t = 1/λ² - |x|²/(4λ²)`, and `Δu` contributes
//! `λ^{-d/2} e^{iφ}(ΔQ/λ² - i y·∇Q/λ - i d Q/(2λ) - |x|² Q /(4λ²))`. The
//! gradient and `d/(2λ)` terms cancel, the `|x|²` terms cancel, and what remains
//! is `λ^{-d/2-2} e^{iφ}(ΔQ - Q)`, which equals `-|u|^{4/d}u` by the ground
//! state equation. Mass is `‖Q‖₂²` for all `t`, `‖u‖_∞ = λ^{-d/2} Q(0)`.

mod ground_state;
mod petviashvili;

use std::f64::consts::PI;

use num_complex::Complex64;

pub use ground_state::{
    bessel_k, ground_state, GroundState, D1_RESIDUAL_TOLERANCE, D2_RESIDUAL_TOLERANCE,
    MATCH_GAP, MAX_BISECTIONS, RADIAL_STEP,
};
pub use petviashvili::{petviashvili, PetviashviliSolution};

use crate::diagnostics::{accumulate_f, spectral_tail_fraction, strichartz_density, Record, TimeSeries};
use crate::integrator::{RunResult, Snapshot, Termination};
use crate::spectral::{Field, Grid};
use crate::{Error, Result};

/// Largest ground-state value allowed at the box edge for a trusted soliton.
pub const EDGE_TOLERANCE: f64 = 1e-10;

/// Minimum number of samples across the core `[-λ, λ]` of a blow-up profile.
pub const CORE_POINTS: f64 = 16.0;

fn check_dim(gs: &GroundState, grid: &Grid) -> Result<()> {
    if gs.dim() != grid.dim() {
        return Err(Error::GridMismatch(format!(
            "{}-dimensional profile on a {}-dimensional grid",
            gs.dim(),
            grid.dim()
        )));
    }
    Ok(())
}

/// `e^{it}Q(x)`, the standing wave of the focusing equation.
pub fn soliton(gs: &GroundState, t: f64, grid: &Grid) -> Result<Field> {
    check_dim(gs, grid)?;
    let edge = gs.value(grid.half_width());
    if edge > EDGE_TOLERANCE {
        return Err(Error::TruncationSuspect(format!(
            "Q(ℓ) = {edge:e} exceeds {EDGE_TOLERANCE:e}; enlarge the box"
        )));
    }
    let phase = Complex64::from_polar(1.0, t);
    Field::from_fn(*grid, |x| phase * gs.value((x[0] * x[0] + x[1] * x[1]).sqrt()))
}

#[derive(Debug, Clone)]
pub struct PseudoconformalFamily {
    ground_state: GroundState,
    t_star: f64,
}

impl PseudoconformalFamily {
    pub fn new(ground_state: GroundState, t_star: f64) -> Result<Self> {
        if !(t_star.is_finite() && t_star > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "blow-up time {t_star} must be finite and positive"
            )));
        }
        Ok(Self { ground_state, t_star })
    }

    pub fn dim(&self) -> usize {
        self.ground_state.dim()
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn ground_state(&self) -> &GroundState {
        &self.ground_state
    }

    fn lambda(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && (0.0..self.t_star).contains(&t)) {
            return Err(Error::Domain(format!(
                "t = {t} outside [0, T*) with T* = {}",
                self.t_star
            )));
        }
        Ok(self.t_star - t)
    }

    /// Point value `u(t, x)`.
    pub fn value(&self, t: f64, x: [f64; 2]) -> Result<Complex64> {
        let lambda = self.lambda(t)?;
        Ok(self.eval(lambda, x))
    }

    fn eval(&self, lambda: f64, x: [f64; 2]) -> Complex64 {
        let d = self.dim() as f64;
        let r2 = x[0] * x[0] + x[1] * x[1];
        let amp = lambda.powf(-d / 2.0) * self.ground_state.value(r2.sqrt() / lambda);
        Complex64::from_polar(amp, 1.0 / lambda - r2 / (4.0 * lambda))
    }

    /// `‖u(t)‖_∞ = (T* - t)^{-d/2} Q(0)`.
    pub fn sup_norm(&self, t: f64) -> Result<f64> {
        Ok(self.lambda(t)?.powf(-(self.dim() as f64) / 2.0) * self.ground_state.peak())
    }

    /// `∫|u(t)|^{2(d+2)/d} dx = c_Q (T* - t)^{-2}` with `c_Q = ∫Q^{2(d+2)/d}`.
    pub fn strichartz_density(&self, t: f64) -> Result<f64> {
        let lambda = self.lambda(t)?;
        Ok(self.density_constant() / (lambda * lambda))
    }

    pub fn density_constant(&self) -> f64 {
        let d = self.dim() as f64;
        self.ground_state.integral(2.0 * (d + 2.0) / d)
    }

    /// `F(t) = ∫₀^t density = c_Q (1/(T* - t) - 1/T*)`.
    pub fn accumulated(&self, t: f64) -> Result<f64> {
        let lambda = self.lambda(t)?;
        Ok(self.density_constant() * (1.0 / lambda - 1.0 / self.t_star))
    }
}

/// Samples the pseudoconformal blow-up solution at time `t`.
pub fn pseudoconformal_blowup(fam: &PseudoconformalFamily, t: f64, grid: &Grid) -> Result<Field> {
    check_dim(&fam.ground_state, grid)?;
    let lambda = fam.lambda(t)?;
    let points = 2.0 * lambda / grid.spacing();
    if points < CORE_POINTS {
        return Err(Error::RefusedUnderresolved(format!(
            "core width 2(T* - t) = {} spans {points:.1} grid points, need {CORE_POINTS}",
            2.0 * lambda
        )));
    }
    Field::from_fn(*grid, |x| fam.eval(lambda, x))
}

/// `count` times in `[0, t_end]` with `T* - t` geometrically spaced, so the
/// records refine towards the blow-up time.
pub fn blowup_times(t_star: f64, t_end: f64, count: usize) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && t_end < t_star && count >= 2) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < t_end < T* and at least two times, got t_end = {t_end}, T* = {t_star}, {count}"
        )));
    }
    let ratio = ((t_star - t_end) / t_star).ln() / (count - 1) as f64;
    let mut times: Vec<f64> = (0..count)
        .map(|k| t_star - t_star * (ratio * k as f64).exp())
        .collect();
    times[0] = 0.0;
    times[count - 1] = t_end;
    Ok(times)
}

/// Samples the exact family at `times` (strictly increasing, starting the
/// accumulation of `F` at the first one) and measures every diagnostic on the
/// grid, as the integrator would. Every `snapshot_every`-th record and the
/// last one carry a snapshot.
pub fn sample_family(
    fam: &PseudoconformalFamily,
    grid: &Grid,
    times: &[f64],
    snapshot_every: usize,
) -> Result<RunResult> {
    if times.is_empty() || snapshot_every == 0 {
        return Err(Error::InvalidParameter("need times and a positive snapshot cadence".into()));
    }
    let p = 4 / fam.dim() + 1;
    let mut diagnostics = TimeSeries::new(grid.dim());
    let mut snapshots = Vec::new();
    for (k, &t) in times.iter().enumerate() {
        let field = pseudoconformal_blowup(fam, t, grid)?;
        let tail = spectral_tail_fraction(&field, p)?;
        diagnostics.push(Record::new(
            t,
            field.mass(),
            strichartz_density(&field),
            field.sup_norm(),
            tail,
        ))?;
        if k % snapshot_every == 0 || k + 1 == times.len() {
            snapshots.push(Snapshot { t, field });
        }
    }
    accumulate_f(&mut diagnostics);
    Ok(RunResult {
        snapshots,
        diagnostics,
        termination: Termination::TimeLimit,
        tstar: None,
        trusted_until: *times.last().unwrap(),
        steps: 0,
    })
}

/// `amplitude · e^{-π|x - center|²/width²}`, with distances taken to the
/// nearest periodic image of `center`.
pub fn gaussian(amplitude: f64, width: f64, center: [f64; 2], grid: &Grid) -> Result<Field> {
    if !(width.is_finite() && width > 0.0 && amplitude.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gaussian amplitude {amplitude} and width {width} must be finite with width > 0"
        )));
    }
    let side = grid.side();
    let image = |d: f64| d - side * (d / side).round();
    let dim = grid.dim();
    Field::from_fn(*grid, |x| {
        let d0 = image(x[0] - center[0]);
        let d1 = if dim == 2 { image(x[1] - center[1]) } else { 0.0 };
        Complex64::new(amplitude * (-PI * (d0 * d0 + d1 * d1) / (width * width)).exp(), 0.0)
    })
}

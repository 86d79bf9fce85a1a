//! Strang split-step Fourier solver for `i u_t + Δu = σ|u|^{p-1}u`.
//!
//! One step of size `dt` is
//!
//! 1. half a free step, `û ← e^{-4π² i (dt/2)|ξ|²} û`;
//! 2. the exact nonlinear flow `u ← u · e^{-iσ|u|^{p-1}dt}`, which keeps `|u|`
//!    pointwise (so focusing, `σ = -1`, rotates by `e^{+i|u|^{p-1}dt}`);
//! 3. dealiasing (`max_i |k_i| ≤ ⌊n/(p+1)⌋`) followed by the second free
//!    half step.
//!
//! Both substeps are unit-modulus multipliers, so mass is conserved up to
//! rounding and whatever dealiasing removes.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::functionals::{
    spectral_tail_fraction, strichartz_density, tail_start,
};
use crate::diagnostics::{accumulate_f, fit, Record, TimeSeries};
use crate::spectral::{
    boundary_shell_fraction, dealias_cutoff, laplacian, FftEngine, Field, Grid, SHELL_TOLERANCE,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    /// `σ = -1`.
    Focusing,
    /// `σ = +1`.
    Defocusing,
}

impl Sign {
    pub fn sigma(self) -> f64 {
        match self {
            Sign::Focusing => -1.0,
            Sign::Defocusing => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EquationSpec {
    dim: usize,
    sign: Sign,
}

impl EquationSpec {
    pub fn new(dim: usize, sign: Sign) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension {dim} is not 1 or 2")));
        }
        Ok(Self { dim, sign })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// `p = 4/d + 1`.
    pub fn power(&self) -> usize {
        4 / self.dim + 1
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "{}-dimensional equation on a {}-dimensional grid",
                self.dim,
                grid.dim()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepControl {
    pub dt_init: f64,
    pub dt_min: f64,
    /// `c_dt` in `dt = c_dt / ‖u‖_∞^{p-1}`.
    pub safety: f64,
    pub m_stop: f64,
    pub rho_tail: f64,
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt_min > 0.0
            && self.dt_min <= self.dt_init
            && self.dt_init.is_finite()
            && self.safety > 0.0
            && self.safety.is_finite()
            && self.m_stop > 0.0
            && self.rho_tail > 0.0
            && self.rho_tail < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "step control {self:?} violates 0 < dt_min ≤ dt_init, c_dt > 0, M_stop > 0, 0 < ρ_tail < 1"
            )))
        }
    }
}

/// Output schedule: a diagnostic record every `cadence` time units from
/// `t_start` to `t_end`, and a snapshot every `snapshot_every` records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub t_start: f64,
    pub t_end: f64,
    pub cadence: f64,
    pub snapshot_every: usize,
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_start.is_finite()
            && self.t_end.is_finite()
            && self.t_end > self.t_start
            && self.cadence > 0.0
            && self.snapshot_every > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "schedule {self:?} needs t_end > t_start, cadence > 0, snapshot_every ≥ 1"
            )))
        }
    }

    fn record_time(&self, k: usize) -> f64 {
        (self.t_start + k as f64 * self.cadence).min(self.t_end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlowupCause {
    SupNorm,
    SpectralTail,
    StepUnderflow,
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "reason", content = "cause")]
pub enum Termination {
    TimeLimit,
    BlowupDetected(BlowupCause),
    TruncationSuspect,
}

impl Termination {
    pub fn is_blowup(&self) -> bool {
        matches!(self, Termination::BlowupDetected(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TstarEstimate {
    pub value: f64,
    pub std_error: f64,
    /// `value ± 1.96 std_error`.
    pub interval: [f64; 2],
    pub samples: usize,
    pub r_squared: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub snapshots: Vec<Snapshot>,
    pub diagnostics: TimeSeries,
    pub termination: Termination,
    pub tstar: Option<TstarEstimate>,
    /// Diagnostics after this time are not trusted: the spectral tail or the
    /// boundary shell exceeded its limit, or the step size underflowed.
    pub trusted_until: f64,
    pub steps: usize,
}

/// Reusable buffers and multipliers for repeated steps on one grid.
pub struct Stepper {
    grid: Grid,
    eq: EquationSpec,
    engine: FftEngine,
    freq_sq: Vec<f64>,
    keep: Vec<bool>,
    in_tail: Vec<bool>,
    half: Vec<Complex64>,
    half_dt: f64,
    tail_fraction: f64,
}

impl Stepper {
    pub fn new(grid: Grid, eq: EquationSpec) -> Result<Self> {
        eq.check_grid(&grid)?;
        let cutoff = dealias_cutoff(grid.n(), eq.power()) as i64;
        let start = tail_start(grid.n(), eq.power()) as i64;
        let kmax: Vec<i64> = (0..grid.len())
            .map(|i| {
                let [a, b] = grid.wavevector(i);
                a.abs().max(b.abs())
            })
            .collect();
        Ok(Self {
            grid,
            eq,
            engine: FftEngine::new(&grid),
            freq_sq: (0..grid.len()).map(|i| grid.frequency_sq(i)).collect(),
            keep: kmax.iter().map(|&k| k <= cutoff).collect(),
            in_tail: kmax.iter().map(|&k| k > start).collect(),
            half: Vec::new(),
            half_dt: f64::NAN,
            tail_fraction: 0.0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Tail fraction of the state produced by the last step.
    pub fn tail_fraction(&self) -> f64 {
        self.tail_fraction
    }

    fn half_multiplier(&mut self, dt: f64) {
        let h = 0.5 * dt;
        if h != self.half_dt {
            self.half = self
                .freq_sq
                .iter()
                .map(|&k2| Complex64::from_polar(1.0, -4.0 * PI * PI * h * k2))
                .collect();
            self.half_dt = h;
        }
    }

    /// One Strang step in place. Negative `dt` steps backwards.
    pub fn advance(&mut self, u: &mut [Complex64], dt: f64) {
        let n_total = self.grid.len() as f64;
        self.half_multiplier(dt);
        self.engine.forward(u);
        for (z, m) in u.iter_mut().zip(&self.half) {
            *z *= m;
        }
        self.engine.inverse_normalized(u);

        let exponent = (self.eq.power() - 1) / 2;
        let rate = -self.eq.sign.sigma() * dt;
        for z in u.iter_mut() {
            let a = z.norm_sqr().powi(exponent as i32);
            *z *= Complex64::from_polar(1.0, rate * a);
        }

        self.engine.forward(u);
        let mut tail = 0.0;
        let mut total = 0.0;
        for (((z, m), &keep), &in_tail) in u
            .iter_mut()
            .zip(&self.half)
            .zip(&self.keep)
            .zip(&self.in_tail)
        {
            if keep {
                let w = z.norm_sqr();
                total += w;
                if in_tail {
                    tail += w;
                }
                *z *= m / n_total;
            } else {
                *z = Complex64::default();
            }
        }
        self.engine.inverse(u);
        self.tail_fraction = if total > 0.0 { tail / total } else { 0.0 };
    }
}

fn first_non_finite(u: &[Complex64]) -> bool {
    u.iter().any(|z| !(z.re.is_finite() && z.im.is_finite()))
}

/// One Strang step of size `dt > 0`.
pub fn step(u: &Field, dt: f64, eq: &EquationSpec) -> Result<Field> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size {dt} must be positive")));
    }
    let mut stepper = Stepper::new(*u.grid(), *eq)?;
    let mut values = u.values().to_vec();
    stepper.advance(&mut values, dt);
    if first_non_finite(&values) {
        return Err(Error::NumericalBlowup {
            t: dt,
            last_finite: Box::new(u.clone()),
        });
    }
    Field::new(*u.grid(), values)
}

fn sup(u: &[Complex64]) -> f64 {
    u.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max).sqrt()
}

fn make_record(field: &Field, t: f64, tail: f64) -> Record {
    Record::new(t, field.mass(), strichartz_density(field), field.sup_norm(), tail)
}

/// Integrates from `u0` at `schedule.t_start` with adaptive steps
/// `dt = min(dt_init, c_dt/‖u‖_∞^{p-1})`, clipped to land on record times.
///
/// Terminates at `t_end`, on blow-up (`‖u‖_∞ > M_stop`, spectral tail above
/// `ρ_tail`, a required step below `dt_min`, or a non-finite state), or when
/// the boundary shell exceeds [`SHELL_TOLERANCE`]. The final state is always
/// recorded and snapshotted. `F` is accumulated over the records.
pub fn run(u0: &Field, eq: &EquationSpec, ctl: &StepControl, schedule: &Schedule) -> Result<RunResult> {
    ctl.validate()?;
    schedule.validate()?;
    let grid = *u0.grid();
    eq.check_grid(&grid)?;
    let shell = boundary_shell_fraction(u0);
    if shell > SHELL_TOLERANCE {
        return Err(Error::TruncationSuspect(format!(
            "initial boundary-shell mass fraction {shell:e} exceeds {SHELL_TOLERANCE:e}"
        )));
    }
    let p = eq.power();
    let mut stepper = Stepper::new(grid, *eq)?;
    let mut u = u0.values().to_vec();
    let mut t = schedule.t_start;
    let mut diagnostics = TimeSeries::new(grid.dim());
    let mut snapshots = Vec::new();
    let tail0 = spectral_tail_fraction(u0, p)?;
    diagnostics.push(make_record(u0, t, tail0))?;
    snapshots.push(Snapshot { t, field: u0.clone() });
    let mut records = 1usize;
    let mut next = 1usize;
    let mut steps = 0usize;
    let mut trusted_until = t;
    let mut last_recorded = true;
    let mut tail = tail0;
    let termination = loop {
        if t >= schedule.t_end {
            break Termination::TimeLimit;
        }
        let s = sup(&u);
        let desired = if s > 0.0 { ctl.safety / s.powi(p as i32 - 1) } else { f64::INFINITY };
        if desired < ctl.dt_min {
            break Termination::BlowupDetected(BlowupCause::StepUnderflow);
        }
        let target = schedule.record_time(next);
        let dt_adapt = desired.min(ctl.dt_init);
        let (dt, hits) = if t + dt_adapt >= target * (1.0 - 1e-14) {
            (target - t, true)
        } else {
            (dt_adapt, false)
        };
        let previous = u.clone();
        stepper.advance(&mut u, dt);
        steps += 1;
        if first_non_finite(&u) {
            u = previous;
            break Termination::BlowupDetected(BlowupCause::NonFinite);
        }
        t = if hits { target } else { t + dt };
        tail = stepper.tail_fraction();
        last_recorded = false;
        let s = sup(&u);
        let stop = if s > ctl.m_stop {
            Some(Termination::BlowupDetected(BlowupCause::SupNorm))
        } else if tail > ctl.rho_tail {
            Some(Termination::BlowupDetected(BlowupCause::SpectralTail))
        } else {
            None
        };
        if hits {
            next += 1;
            let field = Field::from_raw(grid, u.clone());
            let shell = boundary_shell_fraction(&field);
            diagnostics.push(make_record(&field, t, tail))?;
            last_recorded = true;
            if records % schedule.snapshot_every == 0 || t >= schedule.t_end {
                snapshots.push(Snapshot { t, field: field.clone() });
            }
            records += 1;
            if shell > SHELL_TOLERANCE {
                break Termination::TruncationSuspect;
            }
            if tail <= ctl.rho_tail {
                trusted_until = t;
            }
        }
        if let Some(term) = stop {
            if term != Termination::BlowupDetected(BlowupCause::SpectralTail) {
                trusted_until = t;
            }
            break term;
        }
    };
    let field = Field::from_raw(grid, u);
    if !last_recorded {
        diagnostics.push(make_record(&field, t, tail))?;
    }
    if snapshots.last().map(|s| s.t) != Some(t) {
        snapshots.push(Snapshot { t, field });
    }
    accumulate_f(&mut diagnostics);
    let tstar = if termination.is_blowup() {
        estimate_tstar_from_series(&diagnostics, eq.dim())
            .ok()
            .filter(|e| e.value > t)
    } else {
        None
    };
    Ok(RunResult {
        snapshots,
        diagnostics,
        termination,
        tstar,
        trusted_until,
        steps,
    })
}

/// Fits `T*` on the later half (in time) of a run's records.
pub fn estimate_tstar_from_series(ts: &TimeSeries, d: usize) -> Result<TstarEstimate> {
    let recs = ts.records();
    let (t0, t1) = match (recs.first(), recs.last()) {
        (Some(a), Some(b)) => (a.t, b.t),
        _ => return Err(Error::NoBlowupTrend("no records".into())),
    };
    let mid = 0.5 * (t0 + t1);
    let samples: Vec<(f64, f64)> = recs
        .iter()
        .filter(|r| r.t >= mid)
        .map(|r| (r.t, r.sup_norm))
        .collect();
    estimate_tstar(&samples, d)
}

/// Least-squares fit of `‖u‖_∞^{-2/d}` against `t`; `T*` is the root of the
/// fitted line, with a delta-method standard error from the fit residuals.
pub fn estimate_tstar(samples: &[(f64, f64)], d: usize) -> Result<TstarEstimate> {
    if samples.len() < 8 {
        return Err(Error::NoBlowupTrend(format!(
            "{} samples, need at least 8",
            samples.len()
        )));
    }
    for w in samples.windows(2) {
        if !(w[1].1 > w[0].1) {
            return Err(Error::NoBlowupTrend(format!(
                "sup norm does not increase between t = {} and t = {}",
                w[0].0, w[1].0
            )));
        }
    }
    if samples.iter().any(|&(_, s)| !(s > 0.0 && s.is_finite())) {
        return Err(Error::NoBlowupTrend("non-positive sup norm".into()));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.powf(-2.0 / d as f64)).collect();
    let line = fit::linear_fit(&xs, &ys)?;
    if !(line.slope < 0.0) {
        return Err(Error::NoBlowupTrend(format!(
            "‖u‖^(-2/d) has slope {} ≥ 0",
            line.slope
        )));
    }
    let value = -line.intercept / line.slope;
    let (gi, gs) = (-1.0 / line.slope, line.intercept / (line.slope * line.slope));
    let var = gi * gi * line.var_intercept + gs * gs * line.var_slope + 2.0 * gi * gs * line.cov;
    let std_error = var.max(0.0).sqrt();
    Ok(TstarEstimate {
        value,
        std_error,
        interval: [value - 1.96 * std_error, value + 1.96 * std_error],
        samples: samples.len(),
        r_squared: line.r_squared,
    })
}

/// `‖i(u₁ - u₀)/dt + Δu_m - σ|u_m|^{p-1}u_m‖₂` at `u_m = (u₀ + u₁)/2`, the
/// centred-difference consistency of a pair of states with the equation.
pub fn pde_residual(before: &Field, after: &Field, dt: f64, eq: &EquationSpec) -> Result<f64> {
    before.grid().ensure_same(after.grid())?;
    eq.check_grid(before.grid())?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must be positive")));
    }
    let mid: Vec<Complex64> = before
        .values()
        .iter()
        .zip(after.values())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mid = Field::new(*before.grid(), mid)?;
    let lap = laplacian(&mid)?;
    let exponent = (eq.power() as i32 - 1) / 2;
    let sigma = eq.sign.sigma();
    let i = Complex64::new(0.0, 1.0);
    let values = before
        .values()
        .iter()
        .zip(after.values())
        .zip(mid.values().iter().zip(lap.values()))
        .map(|((a, b), (m, l))| i * (b - a) / dt + l - sigma * m.norm_sqr().powi(exponent) * m)
        .collect();
    Ok(Field::new(*before.grid(), values)?.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagator::linear_flow;
    use crate::solutions::{gaussian, ground_state, soliton};

    fn eq(d: usize, sign: Sign) -> EquationSpec {
        EquationSpec::new(d, sign).unwrap()
    }

    #[test]
    fn power_follows_dimension() {
        assert_eq!(eq(1, Sign::Focusing).power(), 5);
        assert_eq!(eq(2, Sign::Defocusing).power(), 3);
        assert!(EquationSpec::new(3, Sign::Focusing).is_err());
    }

    #[test]
    fn constant_data_is_a_phase_ode() {
        for (d, sign) in [(1, Sign::Focusing), (2, Sign::Defocusing)] {
            let g = Grid::new(d, 16, 2.0).unwrap();
            let c = Complex64::new(0.7, 0.4);
            let u = Field::new(g, vec![c; g.len()]).unwrap();
            let e = eq(d, sign);
            let dt = 0.01;
            let out = step(&u, dt, &e).unwrap();
            let rate = -sign.sigma() * c.norm().powi(e.power() as i32 - 1) * dt;
            let expect = c * Complex64::from_polar(1.0, rate);
            assert!(out.values().iter().all(|z| (z - expect).norm() < 1e-12));
        }
    }

    #[test]
    fn tiny_defocusing_data_moves_linearly() {
        let g = Grid::new(1, 256, 8.0).unwrap();
        let u = gaussian(1e-6, 2.0, [0.0; 2], &g).unwrap();
        let out = step(&u, 1e-3, &eq(1, Sign::Defocusing)).unwrap();
        let lin = linear_flow(&u, 1e-3).unwrap();
        assert!(out.distance(&lin).unwrap() <= 1e-12 * lin.norm());
    }

    #[test]
    fn forward_then_backward_returns() {
        let gs = ground_state(1).unwrap();
        let g = Grid::new(1, 2048, 24.0).unwrap();
        let u = soliton(&gs, 0.0, &g).unwrap();
        let mut st = Stepper::new(g, eq(1, Sign::Focusing)).unwrap();
        let mut v = u.values().to_vec();
        st.advance(&mut v, 1e-3);
        st.advance(&mut v, -1e-3);
        let back = Field::new(g, v).unwrap();
        assert!(back.distance(&u).unwrap() < 1e-11 * u.norm());
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::new(1, 64, 4.0).unwrap();
        let ctl = StepControl {
            dt_init: 0.01,
            dt_min: 1e-6,
            safety: 0.1,
            m_stop: 10.0,
            rho_tail: 0.01,
        };
        let sched = Schedule {
            t_start: 0.0,
            t_end: 0.1,
            cadence: 0.05,
            snapshot_every: 1,
        };
        let run = run(&Field::zeros(g), &eq(1, Sign::Focusing), &ctl, &sched).unwrap();
        assert_eq!(run.termination, Termination::TimeLimit);
        assert_eq!(run.diagnostics.times(), vec![0.0, 0.05, 0.1]);
        assert!(run.snapshots.iter().all(|s| s.field.sup_norm() == 0.0));
        assert!(run.tstar.is_none());
    }

    #[test]
    fn tstar_from_exact_power_law() {
        for d in [1, 2] {
            let samples: Vec<(f64, f64)> = (0..20)
                .map(|i| {
                    let t = 0.5 + 0.02 * i as f64;
                    (t, (1.0 - t).powf(-(d as f64) / 2.0))
                })
                .collect();
            let est = estimate_tstar(&samples, d).unwrap();
            assert!((est.value - 1.0).abs() < 1e-9);
            assert!(est.interval[0] <= est.value && est.value <= est.interval[1]);
        }
        let flat: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0)).collect();
        assert!(matches!(estimate_tstar(&flat, 1), Err(Error::NoBlowupTrend(_))));
        assert!(estimate_tstar(&flat[..4], 1).is_err());
    }

    #[test]
    fn residual_of_zero_and_tiny_linear_pairs() {
        let g = Grid::new(1, 128, 8.0).unwrap();
        let e = eq(1, Sign::Defocusing);
        assert_eq!(pde_residual(&Field::zeros(g), &Field::zeros(g), 1e-3, &e).unwrap(), 0.0);
        let dt = 1e-4;
        let u0 = gaussian(1e-8, 1.5, [0.0; 2], &g).unwrap();
        let u1 = linear_flow(&u0, dt).unwrap();
        assert!(pde_residual(&u0, &u1, dt, &e).unwrap() <= 1e-12);
    }

    #[test]
    fn soliton_pair_residual() {
        let gs = ground_state(1).unwrap();
        let g = Grid::new(1, 1024, 24.0).unwrap();
        let dt = 1e-4;
        let a = soliton(&gs, 0.3, &g).unwrap();
        let b = soliton(&gs, 0.3 + dt, &g).unwrap();
        let r = pde_residual(&a, &b, dt, &eq(1, Sign::Focusing)).unwrap();
        assert!(r <= 1e-5 * gs.mass().sqrt(), "residual {r:e}");
    }
}

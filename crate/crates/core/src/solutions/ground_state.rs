//! Positive radial solutions of `ΔQ - Q + Q^p = 0`.
//!
//! In one dimension (`p = 5`) the solution is `Q(x) = 3^{1/4} sech^{1/2}(2x)`.
//! In two dimensions (`p = 3`) it is computed by shooting on `Q(0)` for the
//! radial ODE `Q'' + Q'/r - Q + Q³ = 0`: initial values that are too large
//! make `Q` change sign, values that are too small make it turn back up. The
//! bisected trajectory is trusted until the two bracketing trajectories
//! separate by `MATCH_GAP`; beyond that radius the profile continues as
//! `A·K₀(r)`, the decaying solution of the linearised equation.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::spectral::{laplacian, Field, Grid};
use crate::{Error, Result};

/// Radial step of the shooting integrator and of the stored profile.
pub const RADIAL_STEP: f64 = 1e-3;

/// Largest number of bisections on `Q(0)`.
pub const MAX_BISECTIONS: usize = 200;

/// Separation of the bracketing trajectories at which the tail takes over.
pub const MATCH_GAP: f64 = 1e-10;

/// Radius beyond which the stored profile is taken to vanish.
pub const TABLE_RADIUS: f64 = 64.0;

pub const D1_RESIDUAL_TOLERANCE: f64 = 1e-10;
pub const D2_RESIDUAL_TOLERANCE: f64 = 1e-8;

const BRACKET: (f64, f64) = (1.25, 4.0);
const SHOOTING_RADIUS: f64 = 40.0;

#[derive(Debug)]
struct RadialTable {
    q: Vec<f64>,
    dq: Vec<f64>,
    d2q: Vec<f64>,
    match_radius: f64,
    tail_amplitude: f64,
    bisections: usize,
}

#[derive(Debug, Clone)]
pub struct GroundState {
    dim: usize,
    peak: f64,
    mass: f64,
    table: Option<Arc<RadialTable>>,
}

/// The ground state in dimension `d`, verified by its residual under spectral
/// differentiation. Results are cached per dimension.
pub fn ground_state(d: usize) -> Result<GroundState> {
    static CACHE: [OnceLock<GroundState>; 2] = [OnceLock::new(), OnceLock::new()];
    let slot = match d {
        1 | 2 => &CACHE[d - 1],
        _ => return Err(Error::InvalidParameter(format!("dimension {d} is not 1 or 2"))),
    };
    if let Some(gs) = slot.get() {
        return Ok(gs.clone());
    }
    let gs = if d == 1 {
        GroundState::closed_form_1d()
    } else {
        GroundState::shoot_2d()?
    };
    let (grid, tol) = gs.verification_grid();
    let residual = gs.residual(&grid)?;
    if residual > tol {
        return Err(Error::Residual(format!(
            "ground state residual {residual:e} exceeds {tol:e} on {grid:?}"
        )));
    }
    Ok(slot.get_or_init(|| gs).clone())
}

impl GroundState {
    fn closed_form_1d() -> Self {
        let mut gs = Self {
            dim: 1,
            peak: 3f64.powf(0.25),
            mass: 0.0,
            table: None,
        };
        gs.mass = gs.integral(2.0);
        gs
    }

    fn shoot_2d() -> Result<Self> {
        let (mut lo, mut hi) = BRACKET;
        if shoot(lo, false).0 != Outcome::Undershoot || shoot(hi, false).0 != Outcome::Overshoot {
            return Err(Error::ShootingFailed(format!(
                "initial bracket [{lo}, {hi}] does not straddle the ground state"
            )));
        }
        let mut bisections = 0;
        while hi - lo > 4.0 * f64::EPSILON * hi {
            if bisections == MAX_BISECTIONS {
                return Err(Error::ShootingFailed(format!(
                    "bracket [{lo}, {hi}] still open after {MAX_BISECTIONS} bisections"
                )));
            }
            let mid = 0.5 * (lo + hi);
            bisections += 1;
            match shoot(mid, false).0 {
                Outcome::Overshoot => hi = mid,
                Outcome::Undershoot => lo = mid,
                Outcome::Neither => {
                    lo = mid;
                    hi = mid;
                }
            }
        }
        let (_, low) = shoot(lo, true);
        let (_, high) = shoot(hi, true);
        let m = low
            .iter()
            .zip(&high)
            .position(|(a, b)| (a.0 - b.0).abs() > MATCH_GAP)
            .unwrap_or(low.len().min(high.len()))
            .saturating_sub(1);
        if m < 1000 {
            return Err(Error::ShootingFailed(format!(
                "trajectories separate already at r = {}",
                m as f64 * RADIAL_STEP
            )));
        }
        let peak = 0.5 * (lo + hi);
        let total = (TABLE_RADIUS / RADIAL_STEP).round() as usize + 1;
        let mut q = Vec::with_capacity(total);
        let mut dq = Vec::with_capacity(total);
        for i in 0..=m {
            q.push(0.5 * (low[i].0 + high[i].0));
            dq.push(0.5 * (low[i].1 + high[i].1));
        }
        let match_radius = m as f64 * RADIAL_STEP;
        let tail_amplitude = q[m] / bessel_k(0, match_radius);
        for i in m + 1..total {
            let r = i as f64 * RADIAL_STEP;
            q.push(tail_amplitude * bessel_k(0, r));
            dq.push(-tail_amplitude * bessel_k(1, r));
        }
        let d2q = (0..total)
            .map(|i| {
                if i == 0 {
                    0.5 * (peak - peak.powi(3))
                } else {
                    let r = i as f64 * RADIAL_STEP;
                    q[i] - q[i].powi(3) - dq[i] / r
                }
            })
            .collect();
        let mut gs = Self {
            dim: 2,
            peak,
            mass: 0.0,
            table: Some(Arc::new(RadialTable {
                q,
                dq,
                d2q,
                match_radius,
                tail_amplitude,
                bisections,
            })),
        };
        gs.mass = gs.integral(2.0);
        Ok(gs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nonlinearity power `p = 4/d + 1`.
    pub fn power(&self) -> usize {
        4 / self.dim + 1
    }

    pub fn is_closed_form(&self) -> bool {
        self.table.is_none()
    }

    /// `Q(0) = ‖Q‖_∞`.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// `‖Q‖₂²`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Radius where the numerical profile hands over to the Bessel tail.
    pub fn match_radius(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.match_radius)
    }

    pub fn tail_amplitude(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.tail_amplitude)
    }

    pub fn bisections(&self) -> Option<usize> {
        self.table.as_ref().map(|t| t.bisections)
    }

    /// `Q` at radius `r = |x|`.
    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        match &self.table {
            None => self.peak * (1.0 / (2.0 * r).cosh()).sqrt(),
            Some(t) => t.eval(r).0,
        }
    }

    /// Radial derivative `Q'(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        let r = r.abs();
        sign * match &self.table {
            None => -self.value(r) * (2.0 * r).tanh(),
            Some(t) => t.eval(r).1,
        }
    }

    /// `∫ Q(x)^k dx` over `ℝ^d`.
    pub fn integral(&self, k: f64) -> f64 {
        match &self.table {
            None => {
                let step = 1e-3;
                let m = (40.0 / step) as usize;
                let s: f64 = (1..=m).map(|i| self.value(i as f64 * step).powf(k)).sum();
                step * (2.0 * s + self.peak.powf(k))
            }
            Some(t) => {
                let f = |i: usize| t.q[i].max(0.0).powf(k) * (i as f64 * RADIAL_STEP);
                let m = (t.q.len() - 1) & !1;
                let mut s = f(0) + f(m);
                for i in 1..m {
                    s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i);
                }
                2.0 * PI * s * RADIAL_STEP / 3.0
            }
        }
    }

    /// Samples `Q(x)` on `grid`, centred at the origin.
    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        if grid.dim() != self.dim {
            return Err(Error::GridMismatch(format!(
                "{}-dimensional ground state on a {}-dimensional grid",
                self.dim,
                grid.dim()
            )));
        }
        Field::from_fn(*grid, |x| {
            Complex64::new(self.value((x[0] * x[0] + x[1] * x[1]).sqrt()), 0.0)
        })
    }

    /// `‖ΔQ - Q + Q^p‖₂ / ‖Q‖₂` with the Laplacian computed spectrally.
    pub fn residual(&self, grid: &Grid) -> Result<f64> {
        let q = self.sample(grid)?;
        let lap = laplacian(&q)?;
        let p = self.power() as i32;
        let values = lap
            .values()
            .iter()
            .zip(q.values())
            .map(|(l, v)| l - v + v.powi(p))
            .collect();
        Ok(Field::new(*grid, values)?.norm() / q.norm())
    }

    pub fn verification_grid(&self) -> (Grid, f64) {
        if self.dim == 1 {
            (Grid::new(1, 2048, 32.0).unwrap(), D1_RESIDUAL_TOLERANCE)
        } else {
            (Grid::new(2, 512, 24.0).unwrap(), D2_RESIDUAL_TOLERANCE)
        }
    }

    /// Writes `r,Q` at `count` equispaced radii in `[0, r_max]`.
    pub fn write_profile_csv<W: Write>(&self, w: &mut W, r_max: f64, count: usize) -> Result<()> {
        if count < 2 || !(r_max.is_finite() && r_max > 0.0) {
            return Err(Error::InvalidParameter(
                "profile export needs r_max > 0 and at least two samples".into(),
            ));
        }
        writeln!(w, "r,Q")?;
        for i in 0..count {
            let r = r_max * i as f64 / (count - 1) as f64;
            writeln!(w, "{r},{}", self.value(r))?;
        }
        Ok(())
    }
}

impl RadialTable {
    /// Quintic Hermite interpolation of `(Q, Q')` from values and the first
    /// two derivatives at the table nodes.
    fn eval(&self, r: f64) -> (f64, f64) {
        let pos = r / RADIAL_STEP;
        let i = pos.floor() as usize;
        if i + 1 >= self.q.len() {
            return (0.0, 0.0);
        }
        let s = pos - i as f64;
        let w = RADIAL_STEP;
        let (s2, s3) = (s * s, s * s * s);
        let (s4, s5) = (s3 * s, s3 * s2);
        let h = [
            1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5,
            s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5,
            0.5 * s2 - 1.5 * s3 + 1.5 * s4 - 0.5 * s5,
            0.5 * s3 - s4 + 0.5 * s5,
            -4.0 * s3 + 7.0 * s4 - 3.0 * s5,
            10.0 * s3 - 15.0 * s4 + 6.0 * s5,
        ];
        let dh = [
            -30.0 * s2 + 60.0 * s3 - 30.0 * s4,
            1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4,
            s - 4.5 * s2 + 6.0 * s3 - 2.5 * s4,
            1.5 * s2 - 4.0 * s3 + 2.5 * s4,
            -12.0 * s2 + 28.0 * s3 - 15.0 * s4,
            30.0 * s2 - 60.0 * s3 + 30.0 * s4,
        ];
        let c = [
            self.q[i],
            w * self.dq[i],
            w * w * self.d2q[i],
            w * w * self.d2q[i + 1],
            w * self.dq[i + 1],
            self.q[i + 1],
        ];
        let v: f64 = h.iter().zip(&c).map(|(a, b)| a * b).sum();
        let d: f64 = dh.iter().zip(&c).map(|(a, b)| a * b).sum::<f64>() / w;
        (v, d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Overshoot,
    Undershoot,
    Neither,
}

/// RK4 shooting from `Q(0) = q0`, started from the series
/// `Q ≈ q0 + c₂r² + c₄r⁴`. Returns the outcome and, if requested, `(Q, Q')`
/// at every `RADIAL_STEP` node up to the termination radius.
fn shoot(q0: f64, record: bool) -> (Outcome, Vec<(f64, f64)>) {
    let f = |q: f64| q - q * q * q;
    let c2 = f(q0) / 4.0;
    let c4 = (1.0 - 3.0 * q0 * q0) * c2 / 16.0;
    let h = RADIAL_STEP;
    let mut q = q0 + c2 * h * h + c4 * h.powi(4);
    let mut p = 2.0 * c2 * h + 4.0 * c4 * h.powi(3);
    let mut out = Vec::new();
    if record {
        out.push((q0, 0.0));
        out.push((q, p));
    }
    let rhs = |r: f64, q: f64, p: f64| (p, f(q) - p / r);
    let steps = (SHOOTING_RADIUS / h) as usize;
    for i in 1..steps {
        let r = i as f64 * h;
        let (k1q, k1p) = rhs(r, q, p);
        let (k2q, k2p) = rhs(r + 0.5 * h, q + 0.5 * h * k1q, p + 0.5 * h * k1p);
        let (k3q, k3p) = rhs(r + 0.5 * h, q + 0.5 * h * k2q, p + 0.5 * h * k2p);
        let (k4q, k4p) = rhs(r + h, q + h * k3q, p + h * k3p);
        q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
        p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        if record {
            out.push((q, p));
        }
        if q < 0.0 {
            return (Outcome::Overshoot, out);
        }
        if p > 0.0 {
            return (Outcome::Undershoot, out);
        }
    }
    (Outcome::Neither, out)
}

/// `K_ν(r) = ∫₀^∞ e^{-r cosh t} cosh(νt) dt` by the trapezoid rule, which
/// converges geometrically for this analytic, doubly exponentially decaying
/// integrand.
pub fn bessel_k(nu: u32, r: f64) -> f64 {
    let step: f64 = 0.1;
    let scale = (-r).exp();
    let mut s = 0.5 * scale;
    let mut t = step;
    loop {
        let term = (-r * t.cosh()).exp() * (nu as f64 * t).cosh();
        s += term;
        if r * (t.cosh() - 1.0) > 60.0 && term < 1e-30 * s {
            break;
        }
        t += step;
    }
    s * step
}

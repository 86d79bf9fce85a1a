//! Spectral renormalisation (Petviashvili iteration) for `(1 - Δ)Q = Q^p`.
//!
//! Each sweep sets `Q ← M^γ (1 - Δ)^{-1} Q^p` with the stabilising factor
//! `M = ⟨(1 - Δ)Q, Q⟩ / ⟨Q^p, Q⟩` and `γ = p/(p - 1)`; at the fixed point
//! `M = 1`. The solver is independent of the shooting method, sharing only the
//! grid conventions.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::spectral::{FftEngine, Field, Grid};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PetviashviliSolution {
    pub field: Field,
    pub iterations: usize,
    /// Final `|1 - M|`.
    pub stabiliser_defect: f64,
    /// Sup-norm change of the last sweep.
    pub last_update: f64,
}

/// Solves for the radial ground state on `grid` from a Gaussian initial guess.
pub fn petviashvili(grid: &Grid, p: usize, tol: f64, max_iter: usize) -> Result<PetviashviliSolution> {
    if p < 2 {
        return Err(Error::InvalidParameter(format!("power {p} must be at least 2")));
    }
    let gamma = p as f64 / (p as f64 - 1.0);
    let symbol: Vec<f64> = (0..grid.len())
        .map(|i| 1.0 + 4.0 * PI * PI * grid.frequency_sq(i))
        .collect();
    let mut engine = FftEngine::new(grid);
    let mut q: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.position(i);
            2.0 * (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp()
        })
        .collect();
    let mut buf = vec![Complex64::default(); grid.len()];
    let mut nonlinear = vec![Complex64::default(); grid.len()];
    for iter in 1..=max_iter {
        for (b, &v) in buf.iter_mut().zip(&q) {
            *b = Complex64::new(v, 0.0);
        }
        engine.forward(&mut buf);
        for (b, &v) in nonlinear.iter_mut().zip(&q) {
            *b = Complex64::new(v.powi(p as i32), 0.0);
        }
        engine.forward(&mut nonlinear);
        // Parseval on the raw DFT: both inner products carry the same factor.
        let lq_q: f64 = buf.iter().zip(&symbol).map(|(c, s)| s * c.norm_sqr()).sum();
        let nq_q: f64 = buf.iter().zip(&nonlinear).map(|(c, n)| (c.conj() * n).re).sum();
        if nq_q <= 0.0 {
            return Err(Error::Degenerate("iteration collapsed to zero".into()));
        }
        let m = lq_q / nq_q;
        let factor = m.powf(gamma);
        for (nl, s) in nonlinear.iter_mut().zip(&symbol) {
            *nl *= factor / s;
        }
        engine.inverse_normalized(&mut nonlinear);
        let mut change: f64 = 0.0;
        for (v, nl) in q.iter_mut().zip(&nonlinear) {
            change = change.max((nl.re - *v).abs());
            *v = nl.re;
        }
        if change < tol && (1.0 - m).abs() < tol {
            let field = Field::new(*grid, q.iter().map(|&v| Complex64::new(v, 0.0)).collect())?;
            return Ok(PetviashviliSolution {
                field,
                iterations: iter,
                stabiliser_defect: (1.0 - m).abs(),
                last_update: change,
            });
        }
    }
    Err(Error::Degenerate(format!(
        "Petviashvili iteration did not converge in {max_iter} sweeps"
    )))
}

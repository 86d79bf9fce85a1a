//! Pseudo-spectral simulation and blow-up diagnostics for the L²-critical
//! nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + Δu = ±|u|^{p-1} u,    p = 4/d + 1,    d ∈ {1, 2}
//! ```
//!
//! on a periodic box. Fourier conventions follow `f̂(ξ) = ∫ f(x) e^{-2πi x·ξ} dx`
//! throughout, so the free propagator is the multiplier `e^{-4π² i t |ξ|²}`.
//!
//! Module map:
//!
//! * [`spectral`]: grids, fields, transforms, sharp projections, dealiasing.
//! * [`propagator`]: exact linear flow and the symmetry group.
//! * [`integrator`]: Strang split-step solver, blow-up detection, `T*` estimation.
//! * [`solutions`]: ground states, solitons, pseudoconformal blow-up, Gaussians.
//! * [`diagnostics`]: mass / Strichartz functionals, concentration scans,
//!   η-partitions, rate functions, exponent fits and inequality checks.
//! * [`lemma_lab`]: numerical verification of band-limited persistence of
//!   concentration under the free flow.

pub mod diagnostics;
mod error;
pub mod integrator;
pub mod lemma_lab;
pub mod propagator;
pub mod solutions;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
